"""Nonanticipative rate-distortion via Blahut-Arimoto style alternating minimisation.

The reproduction marginal ``Pbar(y^n)`` is the algorithm state.  Given it, the
exponential-family channel

    P(y_i | y^{i-1}, x_i) = exp(s rho(x_i, y_i)) Pbar(y_i | y^{i-1}) / Z_i(x_i, y^{i-1})

is formed stage by stage, and the next marginal is the reproduction marginal
that channel induces on the source.  Only single-letter distortions are
supported; the channel therefore looks at the current source letter only.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .directed import LN2, directed_information
from .prob import (
    CausalKernelFamily,
    DimensionError,
    KernelKind,
    ValidationError,
    _normalize_rows,
    broadcast_table,
    causal_product,
    lift,
    source_sequence_pmf,
)

log = logging.getLogger(__name__)


class InconsistencyError(RuntimeError):
    """The two independent rate formulas disagree beyond tolerance."""


def check_slope(s: float) -> float:
    s = float(s)
    if not math.isfinite(s) or s > 0:
        raise ValidationError(f"slope must be finite and <= 0, got {s}")
    return s


@dataclass(frozen=True, eq=False)
class DistortionSpec:
    """Single-letter distortion ``rho[x, y] >= 0`` summed over stages ``0..horizon``."""

    horizon: int
    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.ndim != 2:
            raise DimensionError("rho must be a matrix")
        if not np.all(np.isfinite(rho)) or np.any(rho < 0):
            raise ValidationError("rho entries must be finite and >= 0")
        rho.flags.writeable = False
        object.__setattr__(self, "rho", rho)

    def total_tensor(self) -> np.ndarray:
        """``d_{0,n}(x^n, y^n) = sum_i rho(x_i, y_i)`` on the full ``(x^n, y^n)`` grid."""
        n = self.horizon
        nx, ny = self.rho.shape
        out = np.zeros((nx,) * (n + 1) + (ny,) * (n + 1))
        for i in range(n + 1):
            out = out + lift(self.rho, [i, n + 1 + i], 2 * n + 2)
        return out

    def check_against(self, source: CausalKernelFamily) -> None:
        n = source.horizon
        if n != self.horizon:
            raise DimensionError(f"distortion horizon {self.horizon} != source horizon {n}")
        want = (source.x_indexer.shape[0], source.y_indexer.shape[0])
        if self.rho.shape != want or len(set(source.x_indexer.shape)) != 1 or len(
            set(source.y_indexer.shape)
        ) != 1:
            raise DimensionError(f"rho shape {self.rho.shape} does not fit alphabets {want}")


class Init(enum.Enum):
    UNIFORM = "uniform"
    SEEDED_RANDOM_POSITIVE = "seeded_random_positive"


@dataclass(frozen=True)
class BaaConfig:
    tol_marginal: float = 1e-10
    tol_fixed_point: float = 1e-9
    max_iter: int = 10_000
    init: Init = Init.UNIFORM
    seed: int = 0

    def __post_init__(self):
        if not (self.tol_marginal > 0 and self.tol_fixed_point > 0):
            raise ValidationError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")


class BaaIterate(NamedTuple):
    index: int
    objective: float
    distortion: float
    marginal_change: float
    fixed_point_residual: float


@dataclass(frozen=True, eq=False)
class BaaTrace:
    s: float
    iterates: list[BaaIterate]
    converged: bool
    final_channel: CausalKernelFamily
    final_marginal: np.ndarray
    final_marginal_kernels: tuple[np.ndarray, ...]

    @property
    def iterations(self) -> int:
        return len(self.iterates)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([it.objective for it in self.iterates])

    @property
    def fixed_point_residual(self) -> float:
        return self.iterates[-1].fixed_point_residual


@dataclass(frozen=True)
class RDPoint:
    s: float
    D_s: float
    R_per_letter: float
    iterations: int
    residual: float
    converged: bool = True
    rate_crosscheck: float = 0.0

    @property
    def R_bits_per_letter(self) -> float:
        return self.R_per_letter / LN2


def _source_pmf(source: CausalKernelFamily, d: DistortionSpec) -> np.ndarray:
    d.check_against(source)
    return source_sequence_pmf(source)


def marginal_kernels(pbar: np.ndarray) -> tuple[np.ndarray, ...]:
    """Stage kernels ``Pbar(y_i | y^{i-1})`` of a joint pmf on ``y^n`` (zero rows uniform)."""
    n = pbar.ndim - 1
    out = []
    for i in range(n + 1):
        m = pbar.sum(axis=tuple(range(i + 1, n + 1)))
        out.append(_normalize_rows(m)[0])
    return tuple(out)


def _tilted_stage(kernel: np.ndarray, expA: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Numerator ``expA[x, y] * K[y^{i-1}, y]`` with axes ``(y^{i-1}, x, y)`` and its row sums."""
    num = kernel[..., None, :] * expA
    return num, num.sum(axis=-1)


def optimal_channel_for_marginals(
    source: CausalKernelFamily,
    marginal_kernels: Sequence[np.ndarray],
    d: DistortionSpec,
    s: float,
) -> CausalKernelFamily:
    """Exponentially tilted channel that is optimal for fixed reproduction kernels."""
    s = check_slope(s)
    d.check_against(source)
    n = source.horizon
    expA = np.exp(s * d.rho)
    kind = KernelKind.CHANNEL_FF
    stages = []
    for i in range(n + 1):
        k = np.asarray(marginal_kernels[i], dtype=float)
        if k.shape != source.y_indexer.shape[: i + 1]:
            raise DimensionError(f"marginal kernel {i} has shape {k.shape}")
        if np.any(k <= 0):
            raise ValidationError(f"marginal kernel {i} is not strictly positive")
        num, z = _tilted_stage(k, expA)
        if np.any(z <= 0):
            raise RuntimeError("zero normaliser in tilted channel")
        table = num / z[..., None]
        shape = kind.table_shape(i, source.x_indexer.shape, source.y_indexer.shape)
        # table axes: y_0..y_{i-1}, x_i, y_i  ->  layout x_0..x_i, y_0..y_{i-1}, y_i
        positions = [i + 1 + j for j in range(i)] + [i, 2 * i + 1]
        stages.append(broadcast_table(table, positions, shape))
    return CausalKernelFamily(kind, source.x_indexer, source.y_indexer, tuple(stages))


def baa_update(
    source: CausalKernelFamily, marginal_state: np.ndarray, d: DistortionSpec, s: float
) -> np.ndarray:
    """One marginal update ``Pbar <- Pbar * E_X[prod_i A_i / sum_y A_i Pbar(y|y^{i-1})]``."""
    s = check_slope(s)
    px = _source_pmf(source, d)
    pbar = np.asarray(marginal_state, dtype=float)
    if pbar.shape != source.y_indexer.shape:
        raise DimensionError(f"marginal state has shape {pbar.shape}")
    if np.any(pbar <= 0):
        raise ValidationError("marginal state must be strictly positive")
    n = source.horizon
    nd = 2 * (n + 1)
    expA = np.exp(s * d.rho)
    ratio = np.ones(source.full_shape)
    for i, k in enumerate(marginal_kernels(pbar)):
        _, z = _tilted_stage(k, expA)  # z axes: y^{i-1}, x_i
        term = expA / z[..., None]  # axes: y^{i-1}, x_i, y_i
        ratio = ratio * lift(term, [n + 1 + j for j in range(i)] + [i, n + 1 + i], nd)
    weights = lift(px, list(range(n + 1)), nd)
    new = pbar * (weights * ratio).sum(axis=tuple(range(n + 1)))
    return new / new.sum()


def expected_distortion(
    source: CausalKernelFamily, channel: CausalKernelFamily, d: DistortionSpec
) -> float:
    """Per-letter expected distortion ``E[d_{0,n}] / (n + 1)``."""
    d.check_against(source)
    j = causal_product(source, channel)
    return float(np.sum(j.tensor * d.total_tensor())) / (source.horizon + 1)


def fixed_point_residual(
    source: CausalKernelFamily,
    channel: CausalKernelFamily,
    marginal_kernels_: Sequence[np.ndarray],
    d: DistortionSpec,
    s: float,
) -> float:
    """Largest gap between the given reproduction kernels and those the channel induces.

    Rows whose conditioning prefix ``y^{i-1}`` has zero induced probability
    are excluded.
    """
    d.check_against(source)
    n = source.horizon
    nu = causal_product(source, channel).tensor.sum(axis=tuple(range(n + 1)))
    worst = 0.0
    for i in range(n + 1):
        m = nu.sum(axis=tuple(range(i + 1, n + 1)))
        induced, zero = _normalize_rows(m)
        diff = np.abs(induced - np.asarray(marginal_kernels_[i]))[~zero]
        if diff.size:
            worst = max(worst, float(diff.max()))
    return worst


def _lagrangian_parts(px_l: np.ndarray, chan: np.ndarray, dist: np.ndarray, n: int):
    joint = px_l * chan
    nu = joint.sum(axis=tuple(range(n + 1)), keepdims=True)
    pos = joint > 0
    info = float(np.sum(joint[pos] * (np.log(np.broadcast_to(chan, joint.shape)[pos])
                                      - np.log(np.broadcast_to(nu, joint.shape)[pos]))))
    total_d = float(np.sum(joint * dist))
    return info, total_d


def _initial_marginal(shape, cfg: BaaConfig) -> np.ndarray:
    if cfg.init is Init.UNIFORM:
        out = np.ones(shape)
    else:
        out = np.random.default_rng(cfg.seed).uniform(0.05, 1.0, size=shape)
    return out / out.sum()


def baa_run(
    source: CausalKernelFamily,
    d: DistortionSpec,
    s: float,
    cfg: BaaConfig = BaaConfig(),
    initial_marginal: np.ndarray | None = None,
) -> BaaTrace:
    """Alternate channel and marginal updates at slope ``s`` until both stop moving.

    Each recorded objective is ``I(X^n -> Y^n) - s * E[d_{0,n}]`` for the
    channel built from the current marginal.  Hitting ``max_iter`` returns a
    trace with ``converged=False``.
    """
    s = check_slope(s)
    px = _source_pmf(source, d)
    n = source.horizon
    nd = 2 * (n + 1)
    px_l = lift(px, list(range(n + 1)), nd)
    dist = d.total_tensor()
    if initial_marginal is None:
        pbar = _initial_marginal(source.y_indexer.shape, cfg)
    else:
        pbar = np.asarray(initial_marginal, dtype=float).reshape(source.y_indexer.shape)
        pbar = pbar / pbar.sum()
    kernels = marginal_kernels(pbar)
    chan = optimal_channel_for_marginals(source, kernels, d, s)
    iterates: list[BaaIterate] = []
    converged = False
    for r in range(cfg.max_iter):
        info, total_d = _lagrangian_parts(px_l, chan.product_tensor(), dist, n)
        new = baa_update(source, pbar, d, s)
        change = float(np.abs(new - pbar).max())
        pbar = new
        kernels = marginal_kernels(pbar)
        chan = optimal_channel_for_marginals(source, kernels, d, s)
        resid = fixed_point_residual(source, chan, kernels, d, s)
        iterates.append(BaaIterate(r, info - s * total_d, total_d / (n + 1), change, resid))
        if change < cfg.tol_marginal and resid < cfg.tol_fixed_point:
            converged = True
            break
    if not converged:
        log.warning("BAA at s=%g did not converge in %d iterations", s, cfg.max_iter)
    return BaaTrace(s, iterates, converged, chan, pbar, kernels)


def na_rdf_value(
    source: CausalKernelFamily,
    d: DistortionSpec,
    s: float,
    trace: BaaTrace,
    tol: float = 1e-9,
) -> RDPoint:
    """Rate at slope ``s`` from the closed-form expression, cross-checked by directed information.

    ``R = s D (n+1) - sum_i E[ln Z_i(x_i, y^{i-1})]``.  For a converged trace a
    disagreement above ``10 * tol`` raises :class:`InconsistencyError`.
    """
    s = check_slope(s)
    d.check_against(source)
    n = source.horizon
    nd = 2 * (n + 1)
    joint = causal_product(source, trace.final_channel).tensor
    D = float(np.sum(joint * d.total_tensor())) / (n + 1)
    expA = np.exp(s * d.rho)
    log_z = 0.0
    for i, k in enumerate(trace.final_marginal_kernels):
        _, z = _tilted_stage(k, expA)
        lz = lift(np.log(z), [n + 1 + j for j in range(i)] + [i], nd)
        log_z += float(np.sum(joint * lz))
    rate = s * D * (n + 1) - log_z
    di = directed_information(source, trace.final_channel).value_nats
    gap = abs(rate - di)
    if trace.converged and gap > 10 * tol:
        raise InconsistencyError(f"rate formula {rate!r} vs directed information {di!r} at s={s}")
    return RDPoint(
        s=s,
        D_s=D,
        R_per_letter=rate / (n + 1),
        iterations=trace.iterations,
        residual=trace.fixed_point_residual,
        converged=trace.converged,
        rate_crosscheck=gap / (n + 1),
    )


def rd_curve(
    source: CausalKernelFamily,
    d: DistortionSpec,
    s_grid: Sequence[float],
    cfg: BaaConfig = BaaConfig(),
    warm_start: bool = True,
    parallel: bool = False,
) -> list[RDPoint]:
    """One :class:`RDPoint` per slope, most negative slope first.

    With ``warm_start`` each run starts from the previous run's marginal and
    the sweep is sequential; ``parallel`` is allowed only without it.
    """
    grid = [check_slope(s) for s in s_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValidationError("s_grid must be sorted ascending (most negative first)")
    if parallel and warm_start:
        raise ValidationError("parallel evaluation requires warm_start=False")

    def one(s, init=None):
        trace = baa_run(source, d, s, cfg, initial_marginal=init)
        return na_rdf_value(source, d, s, trace, tol=cfg.tol_fixed_point), trace

    if parallel:
        with ThreadPoolExecutor() as ex:
            return [pt for pt, _ in ex.map(one, grid)]
    points, init = [], None
    for s in grid:
        pt, trace = one(s, init)
        points.append(pt)
        if warm_start:
            init = trace.final_marginal
    return points


def curve_shape_violations(points: Sequence[RDPoint], tol: float = 1e-7) -> dict[str, float]:
    """Worst violation of monotone D, monotone R and convex chords along a curve.

    Zero or negative numbers mean the property holds.  Chords between points
    closer than ``1e-9`` in distortion are merged before slopes are taken.
    """
    D = np.array([p.D_s for p in points])
    R = np.array([p.R_per_letter for p in points])
    out = {
        "D_decrease": float(np.max(D[:-1] - D[1:], initial=0.0)),
        "R_increase": float(np.max(R[1:] - R[:-1], initial=0.0)),
    }
    order = np.argsort(D, kind="stable")
    keepD, keepR = [D[order[0]]] if len(D) else [], [R[order[0]]] if len(R) else []
    for k in order[1:]:
        if D[k] - keepD[-1] > 1e-9:
            keepD.append(D[k])
            keepR.append(R[k])
    slopes = np.diff(keepR) / np.diff(keepD) if len(keepD) > 1 else np.array([])
    out["chord_slope_decrease"] = float(np.max(slopes[:-1] - slopes[1:], initial=0.0))
    return out


def is_convex_curve(points: Sequence[RDPoint], tol: float = 1e-7) -> bool:
    return all(v <= tol for v in curve_shape_violations(points, tol).values())
