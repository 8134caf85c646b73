"""Monte-Carlo estimators of Pickands, Berman and Piterbarg type constants.

All estimators sample the drifted field ``W(t) = sqrt(2) B_alpha(t) - c|t|^alpha``
on a lattice and integrate the exponential level analytically per path:

    int_R 1{m(z) > x} e^{-z} dz = e^{-z*},

where ``m(z)`` is the (lattice) occupation of ``{W + z > 0}`` and ``z*`` is minus
the k-th largest lattice value of ``W``, ``k = floor(x / weight) + 1``.  At
``x = 0`` this is ``exp(max W)``, so the sup representation of each constant
is reproduced path by path.

For ``eta = 0`` the continuous occupation is replaced by ``step * count`` on a
grid of spacing ``step``.  The bias that introduces is monitored by an
optional Richardson pair computed from the same paths on a grid twice as fine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .analytic import _snap_floor, tilt_rhs
from .paths import DomainError, Grid, check_alpha, sample_drifted_field
from .stats import (Accumulator, McEstimate, concat, estimate_from_values, finalize,
                    proportion_estimate, run_batches, _z)

DEFAULT_BATCH = 1000
DEFAULT_STEP = 0.01
DEFAULT_SPAN = 10.0
DEFAULT_PITERBARG_SPAN = 8.0
HEAVY_TAIL_QUANTILE = 0.999
# 1/I is flagged when its 0.999 quantile exceeds this fraction of 1/step.
HEAVY_TAIL_FRACTION = 0.5
_GROUP_STREAM_STRIDE = 1 << 20


@dataclass
class ConstantEstimate:
    constant_id: str
    value: McEstimate
    S: float
    step: float | None
    params: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return self.value.mean

    @property
    def stderr(self) -> float:
        return self.value.stderr

    def to_dict(self) -> dict:
        return {
            "constant_id": self.constant_id,
            "value": self.value.to_dict(),
            "S": self.S,
            "step": self.step,
            "params": dict(self.params),
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(obj):
    if isinstance(obj, McEstimate):
        return obj.to_dict()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def normal_estimate(mean: float, stderr: float, n: int, level: float = 0.99) -> McEstimate:
    half = _z(level) * stderr
    return McEstimate(mean, stderr, n, mean - half, mean + half, level)


def _check_common(alpha, S, step, n):
    check_alpha(alpha)
    if not S > 0:
        raise DomainError("window S must be positive")
    if step is not None and not 0 < step <= 0.05:
        raise DomainError(f"grid step must lie in (0, 0.05], got {step}")
    if n < 2:
        raise DomainError("need at least two sample paths")


def _richardson(alpha, coarse_vals, fine_vals, coarse_step):
    order = alpha / 2.0
    r = 2.0 ** order
    extrap = (r * fine_vals - coarse_vals) / (r - 1.0)
    return {
        "order": order,
        "coarse_step": coarse_step,
        "fine_step": coarse_step / 2.0,
        "coarse": estimate_from_values(coarse_vals),
        "fine": estimate_from_values(fine_vals),
        "extrapolated": estimate_from_values(extrap),
    }


# ---------------------------------------------------------------------------
# occupation-time representations (Berman's E[1/I], E[I], G, B-tilde)


def _occupations(alpha, S, step, n, seed, threads, batch_size, refine):
    """Per-path occupation I = step * #{s : W(s) + E > 0} on [-S, S].

    With ``refine`` the field is drawn on a grid of spacing step/2 and both the
    coarse (every other point) and fine occupations are returned.
    """
    _check_common(alpha, S, step, n)
    k = _snap_floor(S / step)
    if refine:
        grid = Grid(step / 2.0, 2 * k * (step / 2.0), "symmetric")
    else:
        grid = Grid(step, k * step, "symmetric")

    def batch(stream, size):
        w = sample_drifted_field(alpha, 0.0, grid, stream, size).values
        e = stream.exponentials(size)
        if refine:
            fine = kernels.count_above(w, e) * (step / 2.0)
            coarse = kernels.count_above(w[:, ::2], e) * step
            return coarse, fine
        return kernels.count_above(w, e) * step, None

    parts = run_batches(n, batch_size, seed, batch, threads)
    coarse = concat([p[0] for p in parts])
    fine = concat([p[1] for p in parts]) if refine else None
    return coarse, fine


def _occupation_params(alpha, S, step, n, seed):
    return {"alpha": alpha, "S": S, "step": step, "n": n, "seed": seed, "window": "symmetric"}


def estimate_pickands_berman(alpha: float, S: float = DEFAULT_SPAN, step: float = DEFAULT_STEP,
                             n: int = 100_000, seed: int = 0x5EED, *, threads: int | None = 1,
                             batch_size: int = DEFAULT_BATCH, richardson: bool = False) -> ConstantEstimate:
    """Pickands constant as E[1/I], I the occupation of {W + E > 0}.

    The origin is a grid point and W(0) = 0 < E, so I >= step on every path.
    """
    occ, fine = _occupations(alpha, S, step, n, seed, threads, batch_size, richardson)
    inv = 1.0 / occ
    q = float(np.quantile(inv, HEAVY_TAIL_QUANTILE))
    diag = {"heavy_tail": {"quantile": HEAVY_TAIL_QUANTILE, "value": q,
                           "grid_limited": q > HEAVY_TAIL_FRACTION / step}}
    if richardson:
        diag["richardson"] = _richardson(alpha, inv, 1.0 / fine, step)
    return ConstantEstimate("H_alpha[berman]", estimate_from_values(inv), S, step,
                            _occupation_params(alpha, S, step, n, seed), diag)


def estimate_occupation_mean(alpha: float, S: float = DEFAULT_SPAN, step: float = DEFAULT_STEP,
                             n: int = 100_000, seed: int = 0x5EED, *, threads: int | None = 1,
                             batch_size: int = DEFAULT_BATCH, richardson: bool = False) -> ConstantEstimate:
    occ, fine = _occupations(alpha, S, step, n, seed, threads, batch_size, richardson)
    diag = {}
    if richardson:
        diag["richardson"] = _richardson(alpha, occ, fine, step)
    return ConstantEstimate("E[I_alpha]", estimate_from_values(occ), S, step,
                            _occupation_params(alpha, S, step, n, seed), diag)


def estimate_Btilde(alpha: float, x: float, S: float = DEFAULT_SPAN, step: float = DEFAULT_STEP,
                    n: int = 100_000, seed: int = 0x5EED, *, threads: int | None = 1,
                    batch_size: int = DEFAULT_BATCH, richardson: bool = False) -> ConstantEstimate:
    """E[1{I > x} / I]; equals the Pickands constant at x = 0."""
    if x < 0:
        raise DomainError("x must be non-negative")
    occ, fine = _occupations(alpha, S, step, n, seed, threads, batch_size, richardson)
    vals = np.where(occ > x, 1.0 / occ, 0.0)
    diag = {}
    if richardson:
        diag["richardson"] = _richardson(alpha, vals, np.where(fine > x, 1.0 / fine, 0.0), step)
    params = {**_occupation_params(alpha, S, step, n, seed), "x": x}
    return ConstantEstimate("Btilde_alpha(x)", estimate_from_values(vals), S, step, params, diag)


def estimate_G_cdf(alpha: float, S: float = DEFAULT_SPAN, step: float = DEFAULT_STEP,
                   n: int = 100_000, seed: int = 0x5EED, x: float = 0.0, *,
                   threads: int | None = 1, batch_size: int = DEFAULT_BATCH) -> ConstantEstimate:
    """P(I <= x) with a Wilson interval."""
    if x < 0:
        raise DomainError("x must be non-negative")
    occ, _ = _occupations(alpha, S, step, n, seed, threads, batch_size, False)
    hits = int(np.count_nonzero(occ <= x))
    params = {**_occupation_params(alpha, S, step, n, seed), "x": x}
    return ConstantEstimate("G_alpha(x)", proportion_estimate(hits, occ.size), S, step, params,
                            {"count": hits})


# ---------------------------------------------------------------------------
# sup / order-statistic representations (Pickands sup, Berman B, Piterbarg)


def _rank(x: float, weight: float) -> int:
    return _snap_floor(x / weight) + 1


def _lattice(alpha, lam, eta, S, step, sided):
    """t-grid for W(lam^{1/alpha} s), s on the s-lattice; returns (grid, weight)."""
    if eta < 0:
        raise DomainError("eta must be non-negative")
    if not lam > 0:
        raise DomainError("lambda must be positive")
    spacing = eta if eta > 0 else step
    if eta == 0 and not 0 < step <= 0.05:
        raise DomainError(f"grid step must lie in (0, 0.05] for eta = 0, got {step}")
    k = _snap_floor(S / spacing)
    if k < 1:
        raise DomainError("window holds fewer than two lattice points")
    a = lam ** (1.0 / alpha)
    t_step = a * spacing
    return Grid(t_step, k * t_step, sided), spacing


def _order_stat_exp(w, ranks):
    """exp of the k-th largest value per row for each rank (0 where k exceeds the row)."""
    npts = w.shape[1]
    out = np.zeros((w.shape[0], len(ranks)))
    ok = [i for i, k in enumerate(ranks) if k <= npts]
    if ok:
        ks = [ranks[i] for i in ok]
        if all(k == 1 for k in ks):
            vals = np.repeat(kernels.row_max(w)[:, None], len(ks), axis=1)
        else:
            vals = kernels.kth_largest(w, ks)
        out[:, ok] = np.exp(vals)
    return out


def _window_slices(grid: Grid, spans: Sequence[float], spacing_t: float):
    """Column slices of ``grid`` for windows [0, S_i] or [-S_i, S_i] (S_i in t-units)."""
    out = []
    for s in spans:
        k = _snap_floor(s / spacing_t)
        if grid.sided == "one_sided":
            out.append(slice(0, k + 1))
        else:
            o = grid.origin_index
            out.append(slice(o - k, o + k + 1))
    return out


def _conditional_mc(alpha, b_drift, grid, weight, xs, n, seed, threads, batch_size,
                    refine=False, spans=None, stream_base=0):
    """Per-path e^{-z*} for each window and each x.

    Returns an array (n, n_windows, n_x), plus the fine-grid counterpart when
    ``refine`` is set (grid spacing halved, weight halved).
    """
    spans = [grid.half_span] if spans is None else list(spans)
    ranks = [_rank(x, weight) for x in xs]
    slices = _window_slices(grid, spans, grid.step)
    if refine:
        fine_grid = Grid(grid.step / 2.0, 2 * grid.n_steps * (grid.step / 2.0), grid.sided)
        fine_ranks = [_rank(x, weight / 2.0) for x in xs]
        fine_slices = _window_slices(fine_grid, spans, fine_grid.step)

    def batch(stream, size):
        g = fine_grid if refine else grid
        w = sample_drifted_field(alpha, b_drift, g, stream, size).values
        if refine:
            if g.sided == "symmetric":
                coarse_w = w[:, (g.origin_index % 2)::2]
            else:
                coarse_w = w[:, ::2]
            c = np.stack([_order_stat_exp(coarse_w[:, sl], ranks) for sl in slices], axis=1)
            f = np.stack([_order_stat_exp(w[:, sl], fine_ranks) for sl in fine_slices], axis=1)
            return c, f
        return np.stack([_order_stat_exp(w[:, sl], ranks) for sl in slices], axis=1), None

    parts = run_batches(n, batch_size, seed, batch, threads, stream_base=stream_base)
    coarse = np.concatenate([p[0] for p in parts])
    fine = np.concatenate([p[1] for p in parts]) if refine else None
    return coarse, fine


def estimate_pickands_sup(alpha: float, S: float = DEFAULT_SPAN, step: float = DEFAULT_STEP,
                          n: int = 100_000, seed: int = 0x5EED, *, threads: int | None = 1,
                          batch_size: int = DEFAULT_BATCH, richardson: bool = False) -> ConstantEstimate:
    """H_alpha([0, S]) = E[sup_{[0,S]} e^{W}]; diagnostics carry the value divided by S."""
    _check_common(alpha, S, step, n)
    grid, _ = _lattice(alpha, 1.0, 0.0, S, step, "one_sided")
    vals, fine = _conditional_mc(alpha, 0.0, grid, step, [0.0], n, seed, threads, batch_size, richardson)
    est = estimate_from_values(vals[:, 0, 0])
    diag = {"normalized": est.scaled(1.0 / S)}
    if richardson:
        diag["richardson"] = _richardson(alpha, vals[:, 0, 0], fine[:, 0, 0], step)
    params = {"alpha": alpha, "S": S, "step": step, "n": n, "seed": seed, "window": "one_sided"}
    return ConstantEstimate("H_alpha([0,S])", est, S, step, params, diag)


def estimate_berman_B(alpha: float, lam: float = 1.0, eta: float = 0.0, S: float = DEFAULT_SPAN,
                      x: float = 0.0, n: int = 100_000, seed: int = 0x5EED,
                      sided: str = "one_sided", step: float = DEFAULT_STEP, *,
                      threads: int | None = 1, batch_size: int = DEFAULT_BATCH,
                      richardson: bool = False) -> ConstantEstimate:
    """B^eta_{alpha,lambda}(S, x) by conditional Monte Carlo over the level."""
    check_alpha(alpha)
    if x < 0:
        raise DomainError("x must be non-negative")
    grid, weight = _lattice(alpha, lam, eta, S, step, sided)
    measure = weight * grid.n_points
    params = {"alpha": alpha, "lambda": lam, "eta": eta, "S": S, "x": x, "n": n,
              "seed": seed, "sided": sided, "step": step if eta == 0 else None,
              "window_measure": measure}
    refine = richardson and eta == 0
    vals, fine = _conditional_mc(alpha, 0.0, grid, weight, [x], n, seed, threads, batch_size, refine)
    diag = {}
    if refine:
        diag["richardson"] = _richardson(alpha, vals[:, 0, 0], fine[:, 0, 0], step)
    if x >= measure:
        diag["note"] = "x at or beyond the window measure: event impossible"
    return ConstantEstimate("B^eta_{alpha,lambda}(S,x)", estimate_from_values(vals[:, 0, 0]), S,
                            params["step"], params, diag)


def estimate_berman_rate(alpha: float, eta: float = 0.0, x: float = 0.0,
                         S_list: Sequence[float] = (8.0, 16.0), step: float = DEFAULT_STEP,
                         n: int = 100_000, seed: int = 0x5EED, *, threads: int | None = 1,
                         batch_size: int = DEFAULT_BATCH) -> ConstantEstimate:
    """Limit B^eta_alpha(x) as the slope of S -> B^eta_{alpha,1}(S, x).

    All windows are prefixes of one simulated path, so the slope between the
    two largest windows is a per-path difference with its own standard error.
    """
    check_alpha(alpha)
    S_list = [float(s) for s in S_list]
    if len(S_list) < 2 or any(b <= a for a, b in zip(S_list, S_list[1:])):
        raise DomainError("S_list needs at least two strictly increasing windows")
    if x < 0:
        raise DomainError("x must be non-negative")
    grid, weight = _lattice(alpha, 1.0, eta, S_list[-1], step, "one_sided")
    vals, _ = _conditional_mc(alpha, 0.0, grid, weight, [x], n, seed, threads, batch_size,
                              spans=S_list)
    per_s = {repr(s): estimate_from_values(vals[:, i, 0]) for i, s in enumerate(S_list)}
    s1, s2 = S_list[-2], S_list[-1]
    slope = (vals[:, -1, 0] - vals[:, -2, 0]) / (s2 - s1)
    params = {"alpha": alpha, "eta": eta, "x": x, "S_list": S_list, "n": n, "seed": seed,
              "step": step if eta == 0 else None}
    diag = {"per_S": per_s, "ratio_at_largest_S": per_s[repr(s2)].scaled(1.0 / s2)}
    return ConstantEstimate("B^eta_alpha(x)", estimate_from_values(slope), s2,
                            params["step"], params, diag)


def _as_h_function(H) -> Callable[[np.ndarray], np.ndarray]:
    if callable(H):
        return lambda t: np.asarray(H(np.asarray(t, dtype=float)), dtype=float) * np.ones(np.shape(t))
    c = float(H)
    return lambda t: np.full(np.shape(t), c)


def estimate_berman_locally_stationary(alpha: float, eta: float, x: float, H, T: float,
                                       S: float = DEFAULT_SPAN, step: float = DEFAULT_STEP,
                                       n: int = 100_000, seed: int = 0x5EED, *, nodes: int = 32,
                                       threads: int | None = 1,
                                       batch_size: int = DEFAULT_BATCH) -> ConstantEstimate:
    """int_0^T B^eta_{alpha,H(t)}(S, x) dt / S by composite midpoint quadrature.

    For eta = 0 one path per draw serves every node through
    B_{alpha,lam}(S, x) = B_{alpha,1}(lam^{1/alpha} S, lam^{1/alpha} x).
    For eta > 0 the lattice itself depends on lambda, so each distinct
    lambda gets its own independent sample.
    """
    check_alpha(alpha)
    if not T > 0:
        raise DomainError("T must be positive")
    if nodes < 32:
        raise DomainError("quadrature needs at least 32 nodes")
    if x < 0:
        raise DomainError("x must be non-negative")
    h = _as_h_function(H)
    t_nodes = (np.arange(nodes) + 0.5) * (T / nodes)
    lam = h(t_nodes)
    if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
        raise DomainError("H must be finite and positive on [0, T]")
    w_node = T / nodes / S
    params = {"alpha": alpha, "eta": eta, "x": x, "T": T, "S": S, "n": n, "seed": seed,
              "nodes": nodes, "step": step if eta == 0 else None,
              "H_range": [float(lam.min()), float(lam.max())]}

    if eta == 0:
        scales = lam ** (1.0 / alpha)
        grid, _ = _lattice(alpha, 1.0, 0.0, float(scales.max()) * S, step, "one_sided")
        keys = sorted({(_snap_floor(a * S / step), _rank(a * x, step)) for a in scales})
        index = {k: i for i, k in enumerate(keys)}

        def batch(stream, size):
            w = sample_drifted_field(alpha, 0.0, grid, stream, size).values
            out = np.zeros((size, len(keys)))
            by_window: dict = {}
            for i, (kw, rank) in enumerate(keys):
                by_window.setdefault(kw, []).append((i, rank))
            for kw, items in by_window.items():
                vals = _order_stat_exp(w[:, :kw + 1], [r for _, r in items])
                for col, (i, _) in enumerate(items):
                    out[:, i] = vals[:, col]
            return out

        parts = run_batches(n, batch_size, seed, batch, threads)
        vals = np.concatenate(parts)
        cols = [index[(_snap_floor(a * S / step), _rank(a * x, step))] for a in scales]
        per_path = w_node * vals[:, cols].sum(axis=1)
        return ConstantEstimate("B^{eta,H}_alpha(x)", estimate_from_values(per_path), S, step,
                                params, {"quadrature_nodes": nodes})

    uniq, counts = np.unique(lam, return_counts=True)
    mean = 0.0
    var = 0.0
    groups = []
    for g, (lv, cnt) in enumerate(zip(uniq, counts)):
        grid, weight = _lattice(alpha, float(lv), eta, S, step, "one_sided")
        vals, _ = _conditional_mc(alpha, 0.0, grid, weight, [x], n, seed, threads, batch_size,
                                  stream_base=g * _GROUP_STREAM_STRIDE)
        est = estimate_from_values(vals[:, 0, 0])
        coef = w_node * cnt
        mean += coef * est.mean
        var += (coef * est.stderr) ** 2
        groups.append({"lambda": float(lv), "nodes": int(cnt), "B": est})
    value = normal_estimate(mean, math.sqrt(var), n * len(uniq))
    return ConstantEstimate("B^{eta,H}_alpha(x)", value, S, None, params,
                            {"quadrature_nodes": nodes, "groups": groups})


def estimate_piterbarg(alpha: float, b: float, eta: float = 0.0, S: float = DEFAULT_PITERBARG_SPAN,
                       x: float = 0.0, n: int = 100_000, seed: int = 0x5EED,
                       sided: str = "symmetric", step: float = DEFAULT_STEP, *,
                       threads: int | None = 1, batch_size: int = DEFAULT_BATCH,
                       richardson: bool = False) -> ConstantEstimate:
    """P^{b,eta}_alpha(S, x) on the field W(s) - b|s|^alpha; read as the S -> inf limit."""
    check_alpha(alpha)
    if not b > 0:
        raise DomainError("b must be positive")
    if x < 0:
        raise DomainError("x must be non-negative")
    grid, weight = _lattice(alpha, 1.0, eta, S, step, sided)
    refine = richardson and eta == 0
    vals, fine = _conditional_mc(alpha, b, grid, weight, [x], n, seed, threads, batch_size, refine)
    params = {"alpha": alpha, "b": b, "eta": eta, "S": S, "x": x, "n": n, "seed": seed,
              "sided": sided, "step": step if eta == 0 else None,
              "window_measure": weight * grid.n_points}
    diag = {}
    if refine:
        diag["richardson"] = _richardson(alpha, vals[:, 0, 0], fine[:, 0, 0], step)
    return ConstantEstimate("P^{b,eta}_alpha(x)", estimate_from_values(vals[:, 0, 0]), S,
                            params["step"], params, diag)


def estimate_piterbarg_sup(alpha: float, b: float, S: float = DEFAULT_PITERBARG_SPAN,
                           step: float = DEFAULT_STEP, n: int = 100_000, seed: int = 0x5EED,
                           sided: str = "symmetric", *, threads: int | None = 1,
                           batch_size: int = DEFAULT_BATCH) -> ConstantEstimate:
    """Direct form E[sup_s exp(W(s) - b|s|^alpha)] over the grid."""
    check_alpha(alpha)
    if not b > 0:
        raise DomainError("b must be positive")
    grid, _ = _lattice(alpha, 1.0, 0.0, S, step, sided)

    def batch(stream, size):
        w = sample_drifted_field(alpha, b, grid, stream, size).values
        return np.exp(kernels.row_max(w))

    vals = concat(run_batches(n, batch_size, seed, batch, threads))
    params = {"alpha": alpha, "b": b, "S": S, "step": step, "n": n, "seed": seed, "sided": sided}
    return ConstantEstimate("P^b_alpha[sup]", estimate_from_values(vals), S, step, params)


def estimate_tilt_probability(c: float, n: int = 1_000_000, seed: int = 0x5EED, *,
                              threads: int | None = 1, batch_size: int = 100_000) -> ConstantEstimate:
    """Crude MC of P(cW - c^2/2 + Z > 0), W ~ N(0,1), Z ~ Exp(1); exact value 2 Psi(c/2)."""
    if not c > 0:
        raise DomainError("c must be positive")

    def batch(stream, size):
        w = stream.normals(size)
        z = stream.exponentials(size)
        return int(np.count_nonzero(c * w - c * c / 2.0 + z > 0))

    hits = sum(run_batches(n, batch_size, seed, batch, threads))
    est = proportion_estimate(hits, n)
    return ConstantEstimate("tilt", est, 0.0, None, {"c": c, "n": n, "seed": seed},
                            {"exact": tilt_rhs(c)})


# ---------------------------------------------------------------------------
# multi-x curves on an explicit lattice (used by the sojourn harness)


def lattice_btilde_curve(alpha: float, spacing: float, xs: Sequence[float], S: float = DEFAULT_SPAN,
                         n: int = 20_000, seed: int = 0x5EED, *, threads: int | None = 1,
                         batch_size: int = DEFAULT_BATCH) -> list[McEstimate]:
    """E[1{I > x} / I] for every x from one set of paths, I = spacing * count on spacing*Z.

    With ``spacing`` read as the lattice parameter this is the lattice Berman
    rate; shift invariance of the field on the lattice gives the same
    identity as in the continuous case.
    """
    check_alpha(alpha)
    if not spacing > 0:
        raise DomainError("spacing must be positive")
    k = _snap_floor(S / spacing)
    if k < 1:
        raise DomainError("window holds fewer than two lattice points")
    grid = Grid(spacing, k * spacing, "symmetric")
    xs = np.asarray(xs, dtype=float)
    if np.any(xs < 0):
        raise DomainError("x must be non-negative")

    def batch(stream, size):
        w = sample_drifted_field(alpha, 0.0, grid, stream, size).values
        e = stream.exponentials(size)
        occ = kernels.count_above(w, e) * spacing
        return np.where(occ[:, None] > xs[None, :], 1.0 / occ[:, None], 0.0)

    vals = np.concatenate(run_batches(n, batch_size, seed, batch, threads))
    return [estimate_from_values(vals[:, j]) for j in range(xs.size)]


def lattice_piterbarg_curve(alpha: float, b: float, spacing: float, xs: Sequence[float],
                            S: float = DEFAULT_PITERBARG_SPAN, sided: str = "symmetric",
                            n: int = 20_000, seed: int = 0x5EED, *, threads: int | None = 1,
                            batch_size: int = DEFAULT_BATCH) -> list[McEstimate]:
    """P^{b}(S, x) on the lattice spacing*Z for every x from one set of paths."""
    check_alpha(alpha)
    if not b > 0:
        raise DomainError("b must be positive")
    grid, weight = _lattice(alpha, 1.0, spacing, S, spacing, sided)
    vals, _ = _conditional_mc(alpha, b, grid, weight, list(xs), n, seed, threads, batch_size)
    return [estimate_from_values(vals[:, 0, j]) for j in range(len(xs))]
