"""Crude Monte-Carlo sojourn tails and their high-level asymptotics.

The sojourn functional above level ``u`` is measured in the rescaled time of
``v(u)``: on the lattice ``(eta / v(u)) Z`` it is ``eta * #{t : X(t) > u}``,
and for ``eta = 0`` the Riemann sum ``v(u) * step * #{t : X(t) > u}``.

Predicted tails are ``normalizer(u) * constant(x)``:

=====================  ==========================================  ==========================
model / regime         normalizer                                  constant
=====================  ==========================================  ==========================
locally stationary     ``v(u) Psi(u)``                             ``int_0^T B^{eta,H}(x) dt``
alpha < beta           ``2 b^{-1/beta} Gamma(1/beta+1)``           Berman ``B^eta_alpha(x)``
                       ``* u^{2/alpha-2/beta} Psi(u)``
alpha = beta           ``Psi(u)``                                  Piterbarg ``P^{b,eta}(x)``
alpha > beta           ``Psi(u)``                                  ``T^{b,eta}_beta(x)`` (closed form)
=====================  ==========================================  ==========================

When the variance maximum sits at an endpoint of the interval, the factor 2
in the first non-stationary row is dropped and the one-sided Piterbarg
and T-function variants are used.

Constants for ``eta = 0`` are the continuous ones, estimated on the
default constants grid; for ``eta > 0`` they are estimated on the lattice
``eta Z`` itself.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kernels
from .analytic import (_snap_floor, gamma_fn, normal_survival, pickands_lower_bound_new,
                       t_constant_closed)
from .constants import lattice_btilde_curve, lattice_piterbarg_curve, normal_estimate
from .paths import DomainError, Grid, PathSample, ProcessModel, sample_model
from .stats import McEstimate, SeedSpec, proportion_estimate, run_batches

MIN_EXPECTED_HITS = 200
MAX_PATHS = 10_000_000
MAX_SCALED_STEP = 0.05
# seconds per (path * grid point), measured on one core; used only for cost reports
COST_PER_POINT = 4e-8


class PreflightRefusal(RuntimeError):
    """Raised when the requested level is too rare for crude Monte Carlo."""

    def __init__(self, message: str, report: dict):
        super().__init__(message)
        self.report = report


def scaling_v(model: ProcessModel, u: float) -> float:
    """``v(u) = u^{2/alpha}``, or ``u^{2/min(alpha, beta)}`` with a variance profile."""
    if model.kind == "variance_modulated":
        return u ** (2.0 / min(model.alpha, model.beta))
    return u ** (2.0 / model.alpha)


def resolve_regime(model: ProcessModel, interval: tuple[float, float]) -> tuple[str, bool]:
    """Return (regime, interior). Regimes: locally_stationary, i, ii, iii."""
    a, b = interval
    if not b > a:
        raise DomainError("interval must have a < b")
    if model.kind in ("stationary_exp_alpha", "time_changed_stationary"):
        return "locally_stationary", True
    if model.kind != "variance_modulated":
        raise DomainError(f"no asymptotic regime for model kind {model.kind!r}")
    if not a <= 0 <= b:
        raise DomainError("the variance maximizer t=0 must lie in the interval")
    interior = a < 0 < b
    if model.alpha < model.beta:
        return "i", interior
    if model.alpha == model.beta:
        return "ii", interior
    return "iii", interior


@dataclass
class SojournConfig:
    model: ProcessModel
    interval: tuple[float, float]
    eta: float
    u: float
    x_values: Sequence[float]
    n: int
    seed: SeedSpec | int = 0x5EED
    step: float | None = None
    window: float | None = None
    batch_size: int = 10_000
    threads: int | None = 1

    def __post_init__(self):
        if not self.u > 0:
            raise DomainError("u must be positive")
        if self.eta < 0:
            raise DomainError("eta must be non-negative")
        if any(x < 0 for x in self.x_values):
            raise DomainError("x values must be non-negative")
        if self.n < 1:
            raise DomainError("n must be positive")
        a, b = self.interval
        if not b > a:
            raise DomainError("interval must have a < b")
        if self.step is not None and self.eta == 0 and self.step > MAX_SCALED_STEP / self.v_u * (1 + 1e-12):
            raise DomainError(f"step must be at most {MAX_SCALED_STEP}/v(u) = {MAX_SCALED_STEP / self.v_u}")

    @property
    def master_seed(self) -> int:
        return self.seed.master_seed if isinstance(self.seed, SeedSpec) else int(self.seed)

    @property
    def v_u(self) -> float:
        return scaling_v(self.model, self.u)

    @property
    def t_step(self) -> float:
        """Simulation step in original time."""
        if self.eta > 0:
            return self.eta / self.v_u
        return self.step if self.step is not None else MAX_SCALED_STEP / self.v_u

    @property
    def weight(self) -> float:
        """Sojourn contribution of one lattice point above u."""
        return self.eta if self.eta > 0 else self.v_u * self.t_step

    @property
    def regime(self) -> tuple[str, bool]:
        return resolve_regime(self.model, self.interval)

    def grid(self) -> Grid:
        a, b = self.interval
        regime, interior = self.regime
        if regime == "locally_stationary":
            if self.model.kind == "time_changed_stationary" and a != 0:
                raise DomainError("time-changed models are simulated on intervals starting at 0")
            return Grid(self.t_step, self._span(b - a), "one_sided")
        # localize around the variance maximum: b_var * T^beta = 4 / u^2
        reach = self.window
        if reach is None:
            reach = (4.0 / (self.model.b * self.u ** 2)) ** (1.0 / self.model.beta)
        if interior:
            return Grid(self.t_step, self._span(min(reach, -a, b)), "symmetric")
        return Grid(self.t_step, self._span(min(reach, b - a)), "one_sided")

    def _span(self, length: float) -> float:
        k = _snap_floor(length / self.t_step)
        if k < 1:
            raise DomainError("simulation window holds fewer than two lattice points")
        return k * self.t_step

    def describe(self) -> dict:
        regime, interior = self.regime
        g = self.grid()
        return {"model": self.model.describe(), "interval": list(self.interval), "eta": self.eta,
                "u": self.u, "v_u": self.v_u, "x_values": [float(x) for x in self.x_values],
                "n": self.n, "seed": self.master_seed, "t_step": self.t_step,
                "weight": self.weight, "grid_points": g.n_points, "grid_sided": g.sided,
                "regime": regime, "interior": interior}


def sojourn_functional(path: PathSample, u: float, eta: float, v_u: float) -> np.ndarray:
    """Sojourn above ``u`` for every path in the batch (rescaled time)."""
    step = path.grid.step
    if eta > 0:
        if not math.isclose(step * v_u, eta, rel_tol=1e-9):
            raise DomainError(f"grid step {step} is not eta/v(u) = {eta / v_u}")
        weight = eta
    else:
        if step * v_u > MAX_SCALED_STEP * (1 + 1e-12):
            raise DomainError(f"grid step {step} exceeds {MAX_SCALED_STEP}/v(u)")
        weight = v_u * step
    counts = kernels.count_above(path.values, -float(u))
    return counts * weight


@dataclass
class TailCurve:
    x: np.ndarray
    counts: np.ndarray
    n: int
    p_hat: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    config: dict = field(default_factory=dict)
    normalizer: float | None = None
    constants: list | None = None
    predicted: np.ndarray | None = None
    ratio: np.ndarray | None = None
    ratio_low: np.ndarray | None = None
    ratio_high: np.ndarray | None = None
    prediction_meta: dict = field(default_factory=dict)

    def to_rows(self) -> list[dict]:
        rows = []
        for i, x in enumerate(self.x):
            rows.append({
                "x": float(x), "count": int(self.counts[i]), "n": self.n,
                "p_hat": float(self.p_hat[i]), "ci_low": float(self.ci_low[i]),
                "ci_high": float(self.ci_high[i]),
                "predicted": None if self.predicted is None else float(self.predicted[i]),
                "ratio": None if self.ratio is None else _num(self.ratio[i]),
                "ratio_low": None if self.ratio_low is None else _num(self.ratio_low[i]),
                "ratio_high": None if self.ratio_high is None else _num(self.ratio_high[i]),
            })
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["x", "count", "n", "p_hat", "ci_low", "ci_high", "predicted", "ratio",
                "ratio_low", "ratio_high"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in self.to_rows():
            w.writerow({k: ("" if v is None else (repr(v) if isinstance(v, float) else v))
                        for k, v in row.items()})
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"config": self.config, "normalizer": self.normalizer,
                "prediction": self.prediction_meta, "rows": self.to_rows()}


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else None


def preflight(config: SojournConfig) -> dict:
    """Expected number of exceedances at x=0, with constants replaced by proxies."""
    regime, interior = config.regime
    m = config.model
    u = config.u
    psi = normal_survival(u)
    a, b = config.interval
    if regime == "locally_stationary":
        t = np.linspace(a, b, 65)
        h_int = float(np.mean(m.local_h(t) ** (1.0 / m.alpha))) * (b - a)
        p = h_int * pickands_lower_bound_new(m.alpha) * config.v_u * psi
    elif regime == "i":
        lead = (2.0 if interior else 1.0) * m.b ** (-1.0 / m.beta) * gamma_fn(1.0 / m.beta + 1.0)
        p = lead * pickands_lower_bound_new(m.alpha) * u ** (2.0 / m.alpha - 2.0 / m.beta) * psi
    else:
        p = psi
    g = config.grid()
    expected = config.n * p
    report = {
        "u": u, "n": config.n, "p_proxy": p, "expected_hits": expected,
        "required_n": int(math.ceil(MIN_EXPECTED_HITS / p)),
        "grid_points": g.n_points,
        "estimated_seconds": config.n * g.n_points * COST_PER_POINT,
    }
    return report


def empirical_tail(config: SojournConfig) -> TailCurve:
    """Crude MC estimate of P(L > x) for every x with Wilson intervals."""
    report = preflight(config)
    if report["expected_hits"] < MIN_EXPECTED_HITS:
        raise PreflightRefusal(
            f"u={config.u}: expected {report['expected_hits']:.1f} exceedances at x=0, "
            f"need {MIN_EXPECTED_HITS}; about {report['required_n']} paths required", report)
    if config.n > MAX_PATHS:
        raise PreflightRefusal(f"n={config.n} exceeds the crude Monte-Carlo budget {MAX_PATHS}", report)
    grid = config.grid()
    xs = np.asarray(config.x_values, dtype=float)
    u = config.u
    weight = config.weight
    model = config.model

    def batch(stream, size):
        path = sample_model(model, grid, stream, size)
        counts = kernels.count_above(path.values, -u)
        sojourn = counts * weight
        return (sojourn[:, None] > xs[None, :]).sum(axis=0)

    parts = run_batches(config.n, config.batch_size, config.master_seed, batch, config.threads)
    hits = np.sum(parts, axis=0).astype(np.int64)
    ests = [proportion_estimate(int(h), config.n) for h in hits]
    return TailCurve(
        x=xs, counts=hits, n=config.n,
        p_hat=np.array([e.mean for e in ests]),
        ci_low=np.array([e.ci_low for e in ests]),
        ci_high=np.array([e.ci_high for e in ests]),
        config={**config.describe(), "preflight": report},
    )


@dataclass
class ConstantsSource:
    """Monte-Carlo constants used in predictions, memoized by lattice and x grid.

    ``step`` is the grid used for the continuous (eta = 0) constants.
    """

    n: int = 20_000
    seed: int = 0x5EED
    S: float = 10.0
    piterbarg_S: float = 8.0
    step: float = 0.01
    nodes: int = 32
    threads: int | None = 1
    _cache: dict = field(default_factory=dict, repr=False)

    def spacing(self, eta: float) -> float:
        return eta if eta > 0 else self.step

    def btilde(self, alpha: float, spacing: float, xs) -> list[McEstimate]:
        key = ("btilde", alpha, spacing, tuple(float(x) for x in xs))
        if key not in self._cache:
            self._cache[key] = lattice_btilde_curve(alpha, spacing, xs, self.S, self.n, self.seed,
                                                    threads=self.threads)
        return self._cache[key]

    def piterbarg(self, alpha: float, b: float, spacing: float, xs, sided: str) -> list[McEstimate]:
        key = ("piterbarg", alpha, b, spacing, sided, tuple(float(x) for x in xs))
        if key not in self._cache:
            self._cache[key] = lattice_piterbarg_curve(alpha, b, spacing, xs, self.piterbarg_S, sided,
                                                       self.n, self.seed, threads=self.threads)
        return self._cache[key]


def _combine(terms: list[tuple[float, McEstimate]], n: int) -> McEstimate:
    # stderrs add in quadrature (conservative for terms sharing paths)
    mean = sum(c * e.mean for c, e in terms)
    se = math.sqrt(sum((c * e.stderr) ** 2 for c, e in terms))
    return normal_estimate(mean, se, n)


def _locally_stationary_constant(config, source, xs):
    """int_a^b s(t) B^{s(t) eta}(s(t) x) dt with s = H^{1/alpha}, midpoint rule.

    Here ``B^{eta}(y)`` is ``E[1{I > y} / I]`` on the lattice ``eta Z`` (the
    continuous constant for eta = 0).
    """
    m = config.model
    lo, hi = config.interval
    eta = config.eta
    if m.kind == "stationary_exp_alpha":
        ests = source.btilde(m.alpha, source.spacing(eta), xs)
        return [e.scaled(hi - lo) for e in ests], {"H": "1"}
    t = lo + (np.arange(source.nodes) + 0.5) * (hi - lo) / source.nodes
    scale = np.asarray(m.local_h(t), dtype=float) ** (1.0 / m.alpha)
    dt = (hi - lo) / source.nodes
    by_scale: dict = {}
    for a in scale:
        by_scale[float(a)] = by_scale.get(float(a), 0) + 1
    per_x: list[list] = [[] for _ in xs]
    if eta == 0:
        # one continuous curve serves every node
        keys = sorted({a * x for a in by_scale for x in xs})
        curve = dict(zip(keys, source.btilde(m.alpha, source.step, keys)))
        for a, cnt in by_scale.items():
            for j, x in enumerate(xs):
                per_x[j].append((cnt * dt * a, curve[a * x]))
    else:
        for a, cnt in by_scale.items():
            ests = source.btilde(m.alpha, a * eta, [a * x for x in xs])
            for j, e in enumerate(ests):
                per_x[j].append((cnt * dt * a, e))
    meta = {"H_nodes": source.nodes,
            "H_range": [float(scale.min() ** m.alpha), float(scale.max() ** m.alpha)]}
    return [_combine(terms, source.n) for terms in per_x], meta


def asymptotic_prediction(config: SojournConfig, constants_source: ConstantsSource | None = None,
                          curve: TailCurve | None = None) -> TailCurve:
    """Fill the predicted columns of ``curve`` (or of an empty curve)."""
    source = constants_source or ConstantsSource(seed=config.master_seed)
    regime, interior = config.regime
    m = config.model
    u = config.u
    xs = [float(x) for x in config.x_values]
    psi = normal_survival(u)
    spacing = source.spacing(config.eta)
    meta = {"regime": regime, "interior": interior, "constants_lattice": spacing,
            "constants_n": source.n}
    if regime == "locally_stationary":
        normalizer = config.v_u * psi
        consts, extra = _locally_stationary_constant(config, source, xs)
        meta.update(extra, constant="Berman B^{eta,H}(x)")
    elif regime == "i":
        normalizer = ((2.0 if interior else 1.0) * m.b ** (-1.0 / m.beta) * gamma_fn(1.0 / m.beta + 1.0)
                      * u ** (2.0 / m.alpha - 2.0 / m.beta) * psi)
        consts = source.btilde(m.alpha, spacing, xs)
        meta["constant"] = "Berman B^eta_alpha(x)"
    elif regime == "ii":
        consts = source.piterbarg(m.alpha, m.b, spacing, xs,
                                  "symmetric" if interior else "one_sided")
        normalizer = psi
        meta["constant"] = "Piterbarg P^{b,eta}(x)"
    else:
        normalizer = psi
        consts = [t_constant_closed(m.beta, m.b, config.eta, x, interior) for x in xs]
        meta["constant"] = "closed-form T function"
    if curve is None:
        nan = np.full(len(xs), np.nan)
        curve = TailCurve(np.asarray(xs), np.zeros(len(xs), dtype=np.int64), 0, nan, nan, nan,
                          config.describe())
    mean_c = np.array([c.mean if isinstance(c, McEstimate) else c for c in consts], dtype=float)
    lo_c = np.array([max(c.ci_low, 0.0) if isinstance(c, McEstimate) else c for c in consts])
    hi_c = np.array([c.ci_high if isinstance(c, McEstimate) else c for c in consts])
    curve.normalizer = normalizer
    curve.constants = consts
    curve.predicted = normalizer * mean_c
    curve.prediction_meta = meta
    if curve.n > 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = mean_c > 0
            curve.ratio = np.where(ok, curve.p_hat / curve.predicted, np.nan)
            curve.ratio_low = np.where(ok, curve.ci_low / (normalizer * hi_c), np.nan)
            curve.ratio_high = np.where(ok & (lo_c > 0), curve.ci_high / (normalizer * lo_c), np.inf)
            curve.ratio_high = np.where(ok, curve.ratio_high, np.nan)
    return curve


def run_sojourn(config: SojournConfig, constants_source: ConstantsSource | None = None) -> TailCurve:
    return asymptotic_prediction(config, constants_source, empirical_tail(config))


def _distance_bounds(lo: float, hi: float) -> tuple[float, float]:
    """Smallest and largest |r - 1| over the interval [lo, hi]."""
    near = 0.0 if lo <= 1.0 <= hi else min(abs(lo - 1.0), abs(hi - 1.0))
    far = max(abs(lo - 1.0), abs(hi - 1.0))
    return near, far


@dataclass
class ConvergenceReport:
    u_values: list
    curves: list
    trend: dict
    trend_flag: bool | None

    def rows(self) -> list[dict]:
        out = []
        for u, c in zip(self.u_values, self.curves):
            for r in c.to_rows():
                out.append({"u": u, **r})
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        rows = self.rows()
        cols = ["u", "x", "count", "n", "p_hat", "ci_low", "ci_high", "predicted", "ratio",
                "ratio_low", "ratio_high"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if row[k] is None else (repr(row[k]) if isinstance(row[k], float) else row[k]))
                        for k in cols})
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"u_values": self.u_values, "trend": {repr(k): v for k, v in self.trend.items()},
                "trend_flag": self.trend_flag, "curves": [c.to_dict() for c in self.curves]}


def convergence_report(config: SojournConfig, u_list: Sequence[float],
                       constants_source: ConstantsSource | None = None) -> ConvergenceReport:
    """Ratios across increasing levels and a per-x trend flag.

    The flag at ``x`` is true when, between consecutive levels, the closest
    possible distance of the ratio interval to 1 at the higher level does not
    exceed the farthest possible distance at the lower level.  Undefined
    ratios give ``None`` (flagged empty).
    """
    u_list = sorted(float(u) for u in u_list)
    if len(u_list) < 2:
        raise DomainError("need at least two levels")
    source = constants_source or ConstantsSource(seed=config.master_seed)
    curves = [run_sojourn(replace(config, u=u), source) for u in u_list]
    trend = {}
    for j, x in enumerate(config.x_values):
        lows = [c.ratio_low[j] for c in curves]
        highs = [c.ratio_high[j] for c in curves]
        if any(not np.isfinite(v) for v in lows + highs):
            trend[float(x)] = None
            continue
        ok = True
        for k in range(len(u_list) - 1):
            near_next, _ = _distance_bounds(lows[k + 1], highs[k + 1])
            _, far_prev = _distance_bounds(lows[k], highs[k])
            ok = ok and near_next <= far_prev
        trend[float(x)] = bool(ok)
    defined = [v for v in trend.values() if v is not None]
    flag = all(defined) if defined else None
    return ConvergenceReport(u_list, curves, trend, flag)


def midpoint_x_grid(eta: float, k_max: int, interior: bool = True) -> list[float]:
    """x values at the midpoints of the constancy intervals of the lattice T function."""
    if eta <= 0:
        raise DomainError("eta must be positive")
    if interior:
        # breakpoints at (2k - 1) * eta
        edges = [0.0] + [(2 * k - 1) * eta for k in range(1, k_max + 2)]
    else:
        edges = [k * eta for k in range(k_max + 2)]
    return [0.5 * (lo + hi) for lo, hi in zip(edges[:-1], edges[1:])]
