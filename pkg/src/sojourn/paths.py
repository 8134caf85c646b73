"""Exact-in-distribution Gaussian path samplers on finite grids.

Fractional Brownian motion is built from fractional Gaussian noise drawn by
circulant embedding (Davies-Harte).  Small grids, and kernels that are not
Toeplitz on the grid (time-changed processes), use a dense factorization of
the covariance matrix instead.  Every sampler returns a batch of paths, one
row per path.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import fft as sfft

from . import kernels
from .stats import RandomStream

SQRT2 = math.sqrt(2.0)
EIG_TOL = 1e-9
# Dense factorization is used at or below this many random grid values.
CHOLESKY_MAX_POINTS = 64
_MAX_EMBED_DOUBLINGS = 8


class DomainError(ValueError):
    """Parameter outside the domain where the model is defined."""


class SpectralFailureError(RuntimeError):
    """Covariance factorization found an eigenvalue below the clamping guard."""


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha <= 2.0:
        raise DomainError(f"alpha must lie in (0, 2], got {alpha}")
    return alpha


def _steps_in(span: float, step: float) -> int:
    # floor(span/step) tolerant to representation error, e.g. 10/0.01.
    q = span / step
    r = round(q)
    return int(r) if abs(q - r) <= 1e-9 * max(1.0, abs(q)) else int(math.floor(q))


@dataclass(frozen=True)
class Grid:
    """Lattice ``{k*step}`` intersected with ``[-S, S]`` or ``[0, S]``."""

    step: float
    half_span: float
    sided: str = "symmetric"

    def __post_init__(self):
        if not self.step > 0 or not self.half_span > 0:
            raise DomainError("grid step and span must be positive")
        if self.sided not in ("symmetric", "one_sided"):
            raise DomainError(f"sided must be 'symmetric' or 'one_sided', got {self.sided!r}")

    @property
    def n_steps(self) -> int:
        return _steps_in(self.half_span, self.step)

    @property
    def n_points(self) -> int:
        k = self.n_steps
        return 2 * k + 1 if self.sided == "symmetric" else k + 1

    @property
    def origin_index(self) -> int:
        return self.n_steps if self.sided == "symmetric" else 0

    @property
    def indices(self) -> np.ndarray:
        k = self.n_steps
        lo = -k if self.sided == "symmetric" else 0
        return np.arange(lo, k + 1)

    @property
    def points(self) -> np.ndarray:
        return self.indices * self.step

    def key(self) -> tuple:
        return (self.step, self.n_steps, self.sided)


@dataclass(frozen=True)
class RateFunction:
    """Strictly increasing time change ``c`` with derivative ``dc``."""

    label: str
    c: Callable[[np.ndarray], np.ndarray] = field(compare=False, repr=False)
    dc: Callable[[np.ndarray], np.ndarray] = field(compare=False, repr=False)

    @classmethod
    def identity(cls) -> "RateFunction":
        return cls.linear(1.0)

    @classmethod
    def linear(cls, rate: float) -> "RateFunction":
        rate = float(rate)
        if rate <= 0:
            raise DomainError("linear time change needs a positive rate")
        return cls(f"linear:{rate!r}", lambda t: rate * np.asarray(t, dtype=float),
                   lambda t: np.full(np.shape(t), rate))

    @classmethod
    def quadratic(cls, q: float) -> "RateFunction":
        """``c(t) = t + q t^2``; monotone only where ``1 + 2 q t > 0``."""
        q = float(q)
        return cls(f"quadratic:{q!r}", lambda t: np.asarray(t, dtype=float) + q * np.asarray(t, dtype=float) ** 2,
                   lambda t: 1.0 + 2.0 * q * np.asarray(t, dtype=float))

    @classmethod
    def parse(cls, text: str) -> "RateFunction":
        name, _, arg = text.partition(":")
        if name == "identity":
            return cls.identity()
        if name == "linear":
            return cls.linear(float(arg))
        if name == "quadratic":
            return cls.quadratic(float(arg))
        raise DomainError(f"unknown rate function {text!r} (use identity, linear:<a>, quadratic:<q>)")


MODEL_KINDS = ("fbm", "stationary_exp_alpha", "time_changed_stationary", "variance_modulated")


@dataclass(frozen=True)
class ProcessModel:
    kind: str
    alpha: float
    beta: float | None = None
    b: float | None = None
    rate: RateFunction | None = None

    def __post_init__(self):
        check_alpha(self.alpha)
        if self.kind not in MODEL_KINDS:
            raise DomainError(f"unknown model kind {self.kind!r}")
        if self.kind == "variance_modulated":
            if self.beta is None or self.b is None or self.beta <= 0 or self.b <= 0:
                raise DomainError("variance_modulated needs beta > 0 and b > 0")
        if self.kind == "time_changed_stationary" and self.rate is None:
            raise DomainError("time_changed_stationary needs a rate function")

    @classmethod
    def fbm(cls, alpha):
        return cls("fbm", alpha)

    @classmethod
    def stationary(cls, alpha):
        return cls("stationary_exp_alpha", alpha)

    @classmethod
    def variance_modulated(cls, alpha, beta, b):
        return cls("variance_modulated", alpha, beta=float(beta), b=float(b))

    @classmethod
    def time_changed(cls, alpha, rate: RateFunction):
        return cls("time_changed_stationary", alpha, rate=rate)

    def sigma(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "variance_modulated":
            return 1.0 / (1.0 + self.b * np.abs(t) ** self.beta)
        if self.kind == "fbm":
            return np.abs(t) ** (self.alpha / 2)
        return np.ones_like(t)

    def local_h(self, t) -> np.ndarray:
        """Local-stationarity function: ``1 - rho(t, t+s) ~ H(t) |s|^alpha``."""
        t = np.asarray(t, dtype=float)
        if self.kind == "time_changed_stationary":
            return self.rate.dc(t) ** self.alpha
        return np.ones_like(t)

    def correlation(self, s, t) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.kind == "time_changed_stationary":
            return np.exp(-np.abs(self.rate.c(s) - self.rate.c(t)) ** self.alpha)
        if self.kind == "fbm":
            cov = fbm_covariance(self.alpha, s, t)
            return cov / np.sqrt(np.abs(s) ** self.alpha * np.abs(t) ** self.alpha)
        return np.exp(-np.abs(s - t) ** self.alpha)

    def covariance(self, s, t) -> np.ndarray:
        if self.kind == "fbm":
            return fbm_covariance(self.alpha, s, t)
        return self.sigma(s) * self.sigma(t) * self.correlation(s, t)

    def describe(self) -> dict:
        d = {"kind": self.kind, "alpha": self.alpha}
        if self.beta is not None:
            d["beta"] = self.beta
        if self.b is not None:
            d["b"] = self.b
        if self.rate is not None:
            d["rate"] = self.rate.label
        return d


@dataclass
class PathSample:
    """A batch of paths on a common grid; ``values[i]`` is path ``i``."""

    grid: Grid
    values: np.ndarray
    model_id: dict

    def __post_init__(self):
        self.values = np.atleast_2d(self.values)
        if self.values.shape[1] != self.grid.n_points:
            raise ValueError("values must have one column per grid point")

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def at(self, t: float) -> np.ndarray:
        """Column of values at grid point ``t`` (must be a grid point)."""
        k = t / self.grid.step
        idx = int(round(k)) - int(self.grid.indices[0])
        if abs(k - round(k)) > 1e-9 or not 0 <= idx < self.grid.n_points:
            raise ValueError(f"{t} is not a grid point")
        return self.values[:, idx]


def fbm_covariance(alpha, s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return 0.5 * (np.abs(s) ** alpha + np.abs(t) ** alpha - np.abs(s - t) ** alpha)


def fgn_autocovariance(alpha: float, lags: np.ndarray) -> np.ndarray:
    k = np.abs(np.asarray(lags, dtype=float))
    return 0.5 * (np.abs(k + 1) ** alpha - 2 * k ** alpha + np.abs(k - 1) ** alpha)


def _guarded_sqrt(eig: np.ndarray, what: str) -> np.ndarray:
    top = float(np.max(eig))
    low = float(np.min(eig))
    if low < -EIG_TOL * top:
        raise SpectralFailureError(f"{what}: eigenvalue {low:.3e} below -{EIG_TOL:g} x max ({top:.3e})")
    return np.sqrt(np.clip(eig, 0.0, None))


@lru_cache(maxsize=64)
def _circulant_root(kind: str, alpha: float, m: int, step: float) -> np.ndarray:
    """sqrt(eigenvalues / M) of a nonnegative circulant embedding of length M.

    ``kind='fgn'`` embeds unit-lattice fractional Gaussian noise, ``'exp'`` the
    kernel ``exp(-(k*step)^alpha)``.  The half-length grows (doubling) until
    the guard is satisfied.
    """
    half = sfft.next_fast_len(max(m, 1), real=False)
    for _ in range(_MAX_EMBED_DOUBLINGS + 1):
        lags = np.arange(half + 1)
        if kind == "fgn":
            r = fgn_autocovariance(alpha, lags)
        else:
            r = np.exp(-(lags * step) ** alpha)
        row = np.concatenate([r, r[-2:0:-1]])
        eig = sfft.fft(row).real
        try:
            root = _guarded_sqrt(eig, f"circulant embedding ({kind}, alpha={alpha})")
        except SpectralFailureError:
            if kind == "fgn":
                raise
            half = sfft.next_fast_len(2 * half)
            continue
        root = root / math.sqrt(row.size)
        root.setflags(write=False)
        return root
    raise SpectralFailureError(f"circulant embedding of exp(-|t|^{alpha}) stayed indefinite")


def _circulant_draw(root: np.ndarray, m: int, stream: RandomStream, n: int) -> np.ndarray:
    M = root.size
    h = (n + 1) // 2
    z = stream.normals((2, h, M))
    y = sfft.fft(root * (z[0] + 1j * z[1]), axis=1)[:, :m]
    return np.concatenate([y.real, y.imag])[:n]


def _dense_root(cov: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        eig, vec = np.linalg.eigh(cov)
        return vec * _guarded_sqrt(eig, what)


_DENSE_CACHE: dict = {}


def _dense_factor(key, builder, what):
    f = _DENSE_CACHE.get(key)
    if f is None:
        f = _dense_root(builder(), what)
        f.setflags(write=False)
        if len(_DENSE_CACHE) > 64:
            _DENSE_CACHE.clear()
        _DENSE_CACHE[key] = f
    return f


def fgn(alpha: float, m: int, stream: RandomStream, n: int) -> np.ndarray:
    """``n`` rows of ``m`` unit-lattice fractional Gaussian noise increments."""
    if alpha == 1.0:
        return stream.normals((n, m))
    if alpha == 2.0:
        return np.repeat(stream.normals((n, 1)), m, axis=1)
    return _circulant_draw(_circulant_root("fgn", alpha, m, 1.0), m, stream, n)


def _pick_method(method: str, n_random: int) -> str:
    if method == "auto":
        return "cholesky" if n_random <= CHOLESKY_MAX_POINTS else "circulant"
    if method not in ("cholesky", "circulant"):
        raise DomainError(f"unknown method {method!r}")
    return method


def _field(alpha, grid, stream, n_paths, gain, drift_coef, method):
    """gain * B_alpha(t) - drift_coef * |t|^alpha on the grid."""
    alpha = check_alpha(alpha)
    if grid.n_points < 2:
        raise DomainError("grid needs at least two points")
    t = grid.points
    drift = drift_coef * np.abs(t) ** alpha if drift_coef else np.zeros(t.size)
    m = grid.n_points - 1
    if _pick_method(method, m) == "cholesky" and alpha < 2.0:
        nz = np.flatnonzero(grid.indices != 0)
        tt = t[nz]
        root = _dense_factor(("fbm", alpha, grid.key()),
                             lambda: fbm_covariance(alpha, tt[:, None], tt[None, :]),
                             f"fBm covariance (alpha={alpha})")
        vals = np.zeros((n_paths, t.size))
        vals[:, nz] = stream.normals((n_paths, nz.size)) @ root.T
        return (vals * gain) - drift, "cholesky"
    inc = fgn(alpha, m, stream, n_paths)
    if grid.sided == "symmetric":
        # One stationary increment sequence across [-S, S], anchored at 0.
        origin = grid.origin_index
    else:
        origin = 0
    scale = grid.step ** (alpha / 2)
    return kernels.assemble_field(inc, origin, scale, gain, drift), "circulant"


def sample_fbm(alpha: float, grid: Grid, stream: RandomStream, n_paths: int = 1,
               method: str = "auto") -> PathSample:
    vals, how = _field(alpha, grid, stream, n_paths, 1.0, 0.0, method)
    return PathSample(grid, vals, {"kind": "fbm", "alpha": alpha, "method": how})


def sample_drifted_field(alpha: float, b_drift: float, grid: Grid, stream: RandomStream,
                         n_paths: int = 1, method: str = "auto") -> PathSample:
    """``sqrt(2) B_alpha(t) - (1 + b_drift) |t|^alpha``.

    ``b_drift = 0`` is the Pickands field; ``b_drift = b > 0`` is the
    Piterbarg field with the extra drift ``-b |t|^alpha``.
    """
    if b_drift < 0:
        raise DomainError("b_drift must be non-negative")
    coef = 1.0 + b_drift
    vals, how = _field(alpha, grid, stream, n_paths, SQRT2, coef, method)
    return PathSample(grid, vals, {"kind": "drifted_field", "alpha": alpha,
                                   "drift_coefficient": coef, "method": how})


def _stationary_values(alpha, grid, stream, n_paths, method):
    alpha = check_alpha(alpha)
    npts = grid.n_points
    if _pick_method(method, npts) == "cholesky":
        t = grid.points
        root = _dense_factor(("exp", alpha, grid.key()),
                             lambda: np.exp(-np.abs(t[:, None] - t[None, :]) ** alpha),
                             f"exp(-|t|^{alpha}) covariance")
        return stream.normals((n_paths, npts)) @ root.T, "cholesky"
    root = _circulant_root("exp", alpha, npts, grid.step)
    return _circulant_draw(root, npts, stream, n_paths), "circulant"


def sample_stationary(model: ProcessModel, grid: Grid, stream: RandomStream, n_paths: int = 1,
                      method: str = "auto") -> PathSample:
    if model.kind != "stationary_exp_alpha":
        raise DomainError("sample_stationary needs a stationary_exp_alpha model")
    vals, how = _stationary_values(model.alpha, grid, stream, n_paths, method)
    return PathSample(grid, vals, {**model.describe(), "method": how})


def sample_nonstationary(model: ProcessModel, grid: Grid, stream: RandomStream, n_paths: int = 1,
                         method: str = "auto") -> PathSample:
    """``sigma(t) Y(t)`` with ``sigma(t) = 1/(1 + b|t|^beta)`` and stationary ``Y``."""
    if model.kind != "variance_modulated":
        raise DomainError("sample_nonstationary needs a variance_modulated model")
    y, how = _stationary_values(model.alpha, grid, stream, n_paths, method)
    return PathSample(grid, y * model.sigma(grid.points), {**model.describe(), "method": how})


def sample_time_changed(model: ProcessModel, grid: Grid, stream: RandomStream,
                        n_paths: int = 1) -> PathSample:
    """``Y(c(t))`` for stationary ``Y``; covariance is factorized densely."""
    if model.kind != "time_changed_stationary":
        raise DomainError("sample_time_changed needs a time_changed_stationary model")
    t = grid.points
    ct = np.asarray(model.rate.c(t), dtype=float)
    if np.any(np.diff(ct) <= 0) or np.any(np.asarray(model.rate.dc(t)) <= 0):
        raise DomainError(f"time change {model.rate.label} is not strictly increasing on the grid")
    alpha = model.alpha
    root = _dense_factor(("tc", alpha, model.rate.label, grid.key()),
                         lambda: np.exp(-np.abs(ct[:, None] - ct[None, :]) ** alpha),
                         f"time-changed covariance ({model.rate.label})")
    vals = stream.normals((n_paths, t.size)) @ root.T
    h = model.local_h(t)
    meta = {**model.describe(), "method": "cholesky",
            "H_first": float(h[0]), "H_last": float(h[-1])}
    return PathSample(grid, vals, meta)


def sample_model(model: ProcessModel, grid: Grid, stream: RandomStream, n_paths: int = 1) -> PathSample:
    if model.kind == "stationary_exp_alpha":
        return sample_stationary(model, grid, stream, n_paths)
    if model.kind == "variance_modulated":
        return sample_nonstationary(model, grid, stream, n_paths)
    if model.kind == "time_changed_stationary":
        return sample_time_changed(model, grid, stream, n_paths)
    return sample_fbm(model.alpha, grid, stream, n_paths)


def dump_paths_csv(sample: PathSample, path) -> None:
    """Debug dump: header row of grid points, then one row per path."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([repr(float(t)) for t in sample.grid.points])
        for row in sample.values:
            w.writerow([repr(float(v)) for v in row])
