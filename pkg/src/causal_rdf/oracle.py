"""Ground-truth generators for checking the rate-distortion solver.

Nothing here imports :mod:`causal_rdf.rdf`; distortion specs are read by
duck typing (``.rho``, ``.horizon``) so that the checks stay independent of
the code they check.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .prob import CausalKernelFamily, KernelKind, broadcast_table, source_sequence_pmf

MAX_CHANNEL_GRID = 2_000_000
MAX_MARGINAL_GRID = 2_000_000
_CHUNK = 50_000


class OracleSizeError(ValueError):
    """Instance or grid too large for exhaustive enumeration."""


class OracleMethod(enum.Enum):
    GRID = "grid"
    CLASSICAL_BAA = "classical_baa"
    ANALYTIC_BINARY = "analytic_binary"


@dataclass(frozen=True, eq=False)
class OracleReport:
    """Result of an oracle computation.

    ``value_nats`` is the minimal Lagrangian ``I - s * E[d_{0,n}]`` for GRID,
    and the rate for CLASSICAL_BAA / ANALYTIC_BINARY.
    """

    method: OracleMethod
    value_nats: float
    argmin_channel: CausalKernelFamily | None = None
    resolution: float | None = None
    distortion: float | None = None
    converged: bool = True
    iterations: int = 0
    grid_mode: str | None = None


def h2(p: float) -> float:
    """Binary entropy in nats."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log(p) - (1.0 - p) * math.log(1.0 - p)


def analytic_binary_rdf(p: float, D: float) -> float:
    """``h2(p) - h2(D)`` for ``D < min(p, 1-p)``, else 0; Hamming distortion, nats."""
    if not (0.0 < p < 1.0):
        raise ValueError(f"source bias must lie in (0, 1), got {p}")
    if D < 0:
        raise ValueError(f"distortion must be >= 0, got {D}")
    p = min(p, 1.0 - p)
    return h2(p) - h2(D) if D < p else 0.0


def classical_blahut(source_letter, rho, s: float, tol: float = 1e-14, max_iter: int = 200_000) -> OracleReport:
    """Memoryless Blahut-Arimoto at slope ``s``; returns rate (nats) and distortion."""
    p = np.asarray(getattr(source_letter, "mass", source_letter), dtype=float)
    rho = np.asarray(rho, dtype=float)
    if s > 0:
        raise ValueError("slope must be <= 0")
    A = np.exp(s * rho)
    q = np.full(rho.shape[1], 1.0 / rho.shape[1])
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        z = A @ q
        q_new = q * ((p / z) @ A)
        q_new /= q_new.sum()
        delta = np.abs(q_new - q).max()
        q = q_new
        if delta < tol:
            converged = True
            break
    chan = A * q / (A @ q)[:, None]
    joint = p[:, None] * chan
    out = joint.sum(axis=0)
    pos = joint > 0
    rate = float(np.sum(joint[pos] * np.log((chan / out)[pos])))
    dist = float(np.sum(joint * rho))
    return OracleReport(OracleMethod.CLASSICAL_BAA, max(rate, 0.0), distortion=dist,
                        converged=converged, iterations=it)


def simplex_grid(m: int, step: float) -> np.ndarray:
    """All points of the ``m``-simplex with coordinates on multiples of ``step``, lexicographic."""
    k = round(1.0 / step)
    if abs(k * step - 1.0) > 1e-9:
        raise ValueError(f"step {step} must divide 1")
    if m == 1:
        return np.ones((1, 1))
    bars = np.array(list(combinations(range(k + m - 1), m - 1)), dtype=np.int64)
    edges = np.hstack([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), k + m - 1)])
    return (np.diff(edges, axis=1) - 1) / k


def _n_simplex_points(m: int, k: int) -> int:
    return math.comb(k + m - 1, m - 1)


def _exact_lagrangian(px: np.ndarray, chan: np.ndarray, total_d: np.ndarray, s: float) -> tuple[float, float]:
    """``(I(X^n -> Y^n), E[d_{0,n}])`` by direct summation over the full grid."""
    n = px.ndim - 1
    joint = px.reshape(px.shape + (1,) * (n + 1)) * chan
    nu = joint.sum(axis=tuple(range(n + 1)), keepdims=True)
    pos = joint > 0
    info = float(np.sum(joint[pos] * np.log((chan / np.where(nu > 0, nu, 1.0))[pos])))
    return info, float(np.sum(joint * total_d))


def _total_distortion(rho: np.ndarray, n: int) -> np.ndarray:
    nx, ny = rho.shape
    shape = (nx,) * (n + 1) + (ny,) * (n + 1)
    out = np.zeros(shape)
    for i in range(n + 1):
        out += broadcast_table(rho, [i, n + 1 + i], shape)
    return out


def _channel_grid_n0(p0: np.ndarray, rho: np.ndarray, s: float, k: int):
    """Enumerate every channel ``q(y|x)`` with rows on the simplex grid (horizon 0)."""
    rows = simplex_grid(rho.shape[1], 1.0 / k)
    nx = rho.shape[0]
    total = len(rows) ** nx
    best_val, best_idx = math.inf, None
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total))
        digits = np.stack(np.unravel_index(idx, (len(rows),) * nx), axis=1)
        q = rows[digits]  # (C, X, Y)
        joint = p0[None, :, None] * q
        nu = joint.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(joint > 0, joint * np.log(q / nu), 0.0)
        val = terms.sum(axis=(1, 2)) - s * (joint * rho).sum(axis=(1, 2))
        j = int(np.argmin(val))
        if val[j] < best_val:
            best_val, best_idx = float(val[j]), digits[j]
    return rows[best_idx]


def _dp_values(nub: np.ndarray, px: np.ndarray, rho: np.ndarray, s: float, want_channel: bool = False):
    """Exact minimum over causal channels of ``E[ln Q/nub] - s E[d]`` for each marginal ``nub``.

    ``nub`` has shape ``(G,) + y_shape``.  Solved by backward recursion over
    stages: the stage-``i`` choice is a Gibbs distribution that accounts for
    the expected cost-to-go of later stages.
    """
    G = nub.shape[0]
    n = px.ndim - 1
    nd = 2 * (n + 1)
    xa = lambda i: 1 + i  # noqa: E731
    ya = lambda i: 1 + n + 1 + i  # noqa: E731
    # full-layout views: (G, x_0..x_n, y_0..y_n)
    nub_full = nub.reshape((G,) + (1,) * (n + 1) + nub.shape[1:])
    W = np.zeros((G,) + (1,) * nd)
    stage_tables = [None] * (n + 1)
    for i in range(n, -1, -1):
        pre_i = nub_full.sum(axis=tuple(ya(j) for j in range(i + 1, n + 1)), keepdims=True)
        pre_im1 = pre_i.sum(axis=ya(i), keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(pre_im1 > 0, pre_i / np.where(pre_im1 > 0, pre_im1, 1.0), 0.0)
        rho_view = rho.reshape(
            (1,) + tuple(rho.shape[0] if a == i else 1 for a in range(n + 1))
            + tuple(rho.shape[1] if a == i else 1 for a in range(n + 1))
        )
        with np.errstate(over="ignore"):
            inner = cond * np.exp(s * rho_view - W)
        tot = inner.sum(axis=ya(i), keepdims=True)
        with np.errstate(divide="ignore"):
            V = -np.log(tot)
        if want_channel:
            stage_tables[i] = np.where(tot > 0, inner / np.where(tot > 0, tot, 1.0), 1.0 / rho.shape[1])
        # average V over x_i given x^{i-1}
        px_i = px.sum(axis=tuple(range(i + 1, n + 1)), keepdims=True)
        px_im1 = px_i.sum(axis=i, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            cx = np.where(px_im1 > 0, px_i / np.where(px_im1 > 0, px_im1, 1.0), 0.0)
        cx = cx.reshape((1,) + cx.shape + (1,) * (n + 1))
        W = np.where(cx > 0, cx * V, 0.0).sum(axis=xa(i), keepdims=True)
    values = W.reshape(G)
    return (values, stage_tables) if want_channel else values


def grid_lagrangian_min(source: CausalKernelFamily, d, s: float, step: float, mode: str = "auto") -> OracleReport:
    """Brute-force minimum of ``I(X^n -> Y^n) - s * E[d_{0,n}]`` over causal channels.

    ``mode="channel"`` enumerates every channel whose rows lie on the simplex
    grid (horizon 0 only).  ``mode="marginal"`` enumerates candidate
    reproduction marginals on the grid and solves the inner channel
    minimisation exactly by backward recursion.  ``auto`` picks ``channel``
    when that enumeration fits in memory and time.  The returned value is the
    exact Lagrangian of the returned channel, so it upper-bounds the optimum.
    """
    rho = np.asarray(d.rho, dtype=float)
    n = int(d.horizon)
    nx, ny = rho.shape
    if n > 1 or nx > 3 or ny > 3:
        raise OracleSizeError(
            f"grid oracle supports horizon <= 1 and alphabets <= 3 (got n={n}, |X|={nx}, |Y|={ny})"
        )
    if not (0 < step <= 0.05):
        raise OracleSizeError(f"grid step must lie in (0, 0.05], got {step}")
    if s > 0:
        raise ValueError("slope must be <= 0")
    k = round(1.0 / step)
    px = source_sequence_pmf(source)
    channel_count = _n_simplex_points(ny, k) ** nx
    marginal_count = _n_simplex_points(ny ** (n + 1), k)
    if mode == "auto":
        mode = "channel" if n == 0 and channel_count <= MAX_CHANNEL_GRID else "marginal"
    if mode == "channel":
        if n != 0 or channel_count > MAX_CHANNEL_GRID:
            raise OracleSizeError(f"channel grid needs horizon 0 and <= {MAX_CHANNEL_GRID} cells")
        table = _channel_grid_n0(px, rho, s, k)
        tables = [table]
    elif mode == "marginal":
        if marginal_count > MAX_MARGINAL_GRID:
            raise OracleSizeError(
                f"marginal grid has {marginal_count} points (limit {MAX_MARGINAL_GRID}); use a coarser step"
            )
        pts = simplex_grid(ny ** (n + 1), step)
        vals = np.concatenate([
            _dp_values(pts[a:a + _CHUNK].reshape((-1,) + (ny,) * (n + 1)), px, rho, s)
            for a in range(0, len(pts), _CHUNK)
        ])
        g = int(np.argmin(vals))
        _, full = _dp_values(pts[g:g + 1].reshape((1,) + (ny,) * (n + 1)), px, rho, s, want_channel=True)
        tables = []
        for i in range(n + 1):
            t = full[i][0]
            # drop singleton axes x_{i+1..n}, y_{i+1..n}
            t = t.reshape(tuple(t.shape[a] for a in range(i + 1))
                          + tuple(t.shape[n + 1 + a] for a in range(i + 1)))
            tables.append(np.broadcast_to(
                t, (nx,) * (i + 1) + (ny,) * (i + 1)).copy())
    else:
        raise ValueError(f"unknown mode {mode!r}")
    channel = CausalKernelFamily(KernelKind.CHANNEL_FF, source.x_indexer, source.y_indexer, tuple(tables))
    chan = channel.product_tensor()
    info, tot_d = _exact_lagrangian(px, chan, _total_distortion(rho, n), s)
    return OracleReport(
        OracleMethod.GRID,
        info - s * tot_d,
        argmin_channel=channel,
        resolution=step,
        distortion=tot_d / (n + 1),
        grid_mode=mode,
    )
