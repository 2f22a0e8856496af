"""Finite-alphabet probability primitives for causally conditioned sequences.

Sequences ``x^n = (x_0, ..., x_n)`` are stored as numpy tensors with one axis
per stage; flattening is C-order (row-major), so stage 0 is the most
significant digit of a flat index.  A joint pmf over ``(x^n, y^n)`` is held as
an ``(Nx, Ny)`` matrix and viewed as a ``(X_0, ..., X_n, Y_0, ..., Y_n)``
tensor whenever stage structure is needed.

Stage kernel tables share one axis layout regardless of kind::

    (x_0, ..., x_{a-1}, y_0, ..., y_{b-1}, output)

where ``a``/``b`` are the number of conditioning source/reproduction symbols
for that kind at stage ``i`` (see :class:`KernelKind`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_JOINT_ENTRIES = 10**7
PMF_ATOL = 1e-12
_NEG_CLAMP = 1e-15


class DimensionError(ValueError):
    """Shapes, horizons or alphabets of the operands do not agree."""


class ValidationError(ValueError):
    """A value violates a probability invariant (negative mass, bad total)."""


@dataclass(frozen=True)
class Alphabet:
    size: int
    label: str = ""

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ValidationError(f"alphabet size must be a positive integer, got {self.size!r}")


def _clean_mass(mass, what: str) -> np.ndarray:
    arr = np.array(mass, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what}: non-finite probability")
    if np.any(arr < -_NEG_CLAMP):
        raise ValidationError(f"{what}: negative probability {arr.min():.3e}")
    arr[arr < 0] = 0.0
    return arr


@dataclass(frozen=True, eq=False)
class FinitePmf:
    """Probability vector over a finite alphabet."""

    alphabet: Alphabet
    mass: np.ndarray

    def __post_init__(self):
        arr = _clean_mass(self.mass, "FinitePmf")
        if arr.ndim != 1 or arr.shape[0] != self.alphabet.size:
            raise DimensionError(
                f"mass has shape {arr.shape}, alphabet size is {self.alphabet.size}"
            )
        if abs(arr.sum() - 1.0) > PMF_ATOL:
            raise ValidationError(f"FinitePmf mass sums to {arr.sum():.15g}")
        arr.flags.writeable = False
        object.__setattr__(self, "mass", arr)

    @classmethod
    def from_array(cls, mass, label: str = "") -> "FinitePmf":
        mass = np.asarray(mass, dtype=float).ravel()
        return cls(Alphabet(mass.shape[0], label), mass)

    @classmethod
    def uniform(cls, size: int, label: str = "") -> "FinitePmf":
        return cls(Alphabet(size, label), np.full(size, 1.0 / size))

    def __len__(self):
        return self.alphabet.size


@dataclass(frozen=True)
class SequenceIndexer:
    """Bijection between flat indices and stage tuples ``(x_0, ..., x_n)``."""

    horizon: int
    stage_alphabets: tuple[Alphabet, ...]

    def __post_init__(self):
        object.__setattr__(self, "stage_alphabets", tuple(self.stage_alphabets))
        if self.horizon < 0:
            raise ValidationError("horizon must be >= 0")
        if len(self.stage_alphabets) != self.horizon + 1:
            raise DimensionError(
                f"horizon {self.horizon} needs {self.horizon + 1} stage alphabets, "
                f"got {len(self.stage_alphabets)}"
            )

    @classmethod
    def uniform(cls, horizon: int, size: int, label: str = "") -> "SequenceIndexer":
        return cls(horizon, tuple(Alphabet(size, f"{label}{i}") for i in range(horizon + 1)))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.stage_alphabets)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def to_flat(self, symbols: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(symbols), self.shape))

    def to_tuple(self, flat: int) -> tuple[int, ...]:
        return tuple(int(v) for v in np.unravel_index(flat, self.shape))

    def same_shape(self, other: "SequenceIndexer") -> bool:
        return self.shape == other.shape


class KernelKind(enum.Enum):
    """Causal conditioning patterns for stage kernels.

    ========== ======= ========================
    kind       output  conditions on
    ========== ======= ========================
    SOURCE_FB  x_i     x^{i-1}, y^{i-1}
    CHANNEL_FF y_i     x^i, y^{i-1}
    S_KIND     y_i     x^{i-1}, y^{i-1}
    R_KIND     x_i     x^{i-1}, y^i
    ========== ======= ========================
    """

    SOURCE_FB = "source_fb"
    CHANNEL_FF = "channel_ff"
    S_KIND = "s_kind"
    R_KIND = "r_kind"

    @property
    def output(self) -> str:
        return "x" if self in (KernelKind.SOURCE_FB, KernelKind.R_KIND) else "y"

    def n_conditioning(self, i: int) -> tuple[int, int]:
        """Number of (source, reproduction) symbols stage ``i`` conditions on."""
        if self is KernelKind.CHANNEL_FF:
            return i + 1, i
        if self is KernelKind.R_KIND:
            return i, i + 1
        return i, i

    def positions(self, i: int, horizon: int) -> list[int]:
        """Axis of each stage-table axis inside the full ``(x^n, y^n)`` tensor."""
        a, b = self.n_conditioning(i)
        out = i if self.output == "x" else horizon + 1 + i
        return list(range(a)) + [horizon + 1 + j for j in range(b)] + [out]

    def table_shape(self, i: int, x_shape, y_shape) -> tuple[int, ...]:
        a, b = self.n_conditioning(i)
        out = x_shape[i] if self.output == "x" else y_shape[i]
        return tuple(x_shape[:a]) + tuple(y_shape[:b]) + (out,)


def lift(table: np.ndarray, positions: Sequence[int], ndim: int) -> np.ndarray:
    """View ``table`` so it broadcasts against an ``ndim`` tensor.

    ``positions[k]`` is the target axis of table axis ``k``; every other axis
    becomes a singleton.
    """
    order = np.argsort(positions, kind="stable")
    t = np.transpose(table, order)
    view = [1] * ndim
    for p, s in zip(np.asarray(positions)[order], t.shape):
        view[p] = s
    return t.reshape(view)


def broadcast_table(table: np.ndarray, positions: Sequence[int], shape: Sequence[int]) -> np.ndarray:
    """Materialise ``table`` over the full ``shape`` (inverse of dropping axes)."""
    return np.broadcast_to(lift(table, positions, len(shape)), tuple(shape)).copy()


def _normalize_rows(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalise along the last axis; all-zero rows become uniform and are flagged."""
    tot = arr.sum(axis=-1, keepdims=True)
    zero = tot[..., 0] <= 0
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(tot > 0, arr / np.where(tot > 0, tot, 1.0), 1.0 / arr.shape[-1])
    return out, zero


@dataclass(frozen=True, eq=False)
class CausalKernelFamily:
    """Per-stage conditional pmfs with a declared causal conditioning pattern.

    ``zero_rows[i]`` (when present) marks rows that were filled uniformly
    because their conditioning event had zero probability.
    """

    kind: KernelKind
    x_indexer: SequenceIndexer
    y_indexer: SequenceIndexer
    stages: tuple[np.ndarray, ...]
    zero_rows: tuple[np.ndarray, ...] | None = field(default=None)

    def __post_init__(self):
        if self.x_indexer.horizon != self.y_indexer.horizon:
            raise DimensionError("x and y horizons differ")
        n = self.horizon
        if len(self.stages) != n + 1:
            raise DimensionError(f"expected {n + 1} stages, got {len(self.stages)}")
        cleaned = []
        for i, st in enumerate(self.stages):
            arr = _clean_mass(st, f"{self.kind.name} stage {i}")
            want = self.kind.table_shape(i, self.x_indexer.shape, self.y_indexer.shape)
            if arr.shape != want:
                raise DimensionError(
                    f"{self.kind.name} stage {i} has shape {arr.shape}, expected {want}"
                )
            dev = np.abs(arr.sum(axis=-1) - 1.0).max()
            if dev > PMF_ATOL:
                raise ValidationError(
                    f"{self.kind.name} stage {i}: a row misses total mass 1 by {dev:.3e}"
                )
            arr.flags.writeable = False
            cleaned.append(arr)
        object.__setattr__(self, "stages", tuple(cleaned))

    @property
    def horizon(self) -> int:
        return self.x_indexer.horizon

    @property
    def full_shape(self) -> tuple[int, ...]:
        return self.x_indexer.shape + self.y_indexer.shape

    def lifted(self, i: int) -> np.ndarray:
        return lift(self.stages[i], self.kind.positions(i, self.horizon), 2 * (self.horizon + 1))

    def product_tensor(self) -> np.ndarray:
        """``prod_i k_i`` as a full ``(x^n, y^n)`` tensor."""
        out = np.ones(self.full_shape)
        for i in range(self.horizon + 1):
            out = out * self.lifted(i)
        return out

    def compatible_with(self, other: "CausalKernelFamily") -> bool:
        return self.x_indexer.same_shape(other.x_indexer) and self.y_indexer.same_shape(
            other.y_indexer
        )

    @property
    def any_flagged(self) -> bool:
        return self.zero_rows is not None and any(z.any() for z in self.zero_rows)


def _check_size(x_indexer: SequenceIndexer, y_indexer: SequenceIndexer) -> None:
    total = x_indexer.size * y_indexer.size
    if total > MAX_JOINT_ENTRIES:
        raise DimensionError(
            f"joint has {total} entries, limit is {MAX_JOINT_ENTRIES}; reduce horizon or alphabets"
        )


def indexers(horizon: int, x_size: int, y_size: int) -> tuple[SequenceIndexer, SequenceIndexer]:
    xi = SequenceIndexer.uniform(horizon, x_size, "X")
    yi = SequenceIndexer.uniform(horizon, y_size, "Y")
    _check_size(xi, yi)
    return xi, yi


def family_from_stages(kind: KernelKind, stages, x_indexer, y_indexer) -> CausalKernelFamily:
    return CausalKernelFamily(kind, x_indexer, y_indexer, tuple(np.asarray(s, float) for s in stages))


def iid_source(pmf, horizon: int, y_size: int) -> CausalKernelFamily:
    """Feedback-free source emitting i.i.d. letters with probabilities ``pmf``."""
    pmf = np.asarray(pmf, dtype=float)
    xi, yi = indexers(horizon, pmf.shape[0], y_size)
    kind = KernelKind.SOURCE_FB
    stages = []
    for i in range(horizon + 1):
        shape = kind.table_shape(i, xi.shape, yi.shape)
        stages.append(np.broadcast_to(pmf, shape).copy())
    return CausalKernelFamily(kind, xi, yi, tuple(stages))


def markov_source(initial, transition, horizon: int, y_size: int) -> CausalKernelFamily:
    """Feedback-free first-order Markov source, ``transition[a, b] = P(x_i=b | x_{i-1}=a)``."""
    initial = np.asarray(initial, dtype=float)
    transition = np.asarray(transition, dtype=float)
    k = initial.shape[0]
    if transition.shape != (k, k):
        raise DimensionError(f"transition must be {k}x{k}, got {transition.shape}")
    xi, yi = indexers(horizon, k, y_size)
    kind = KernelKind.SOURCE_FB
    stages = [np.broadcast_to(initial, (k,)).copy()]
    for i in range(1, horizon + 1):
        shape = kind.table_shape(i, xi.shape, yi.shape)
        # table axes: x_0..x_{i-1}, y_0..y_{i-1}, x_i
        stages.append(broadcast_table(transition, [i - 1, len(shape) - 1], shape))
    return CausalKernelFamily(kind, xi, yi, tuple(stages))


def memoryless_channel(matrix, horizon: int) -> CausalKernelFamily:
    """Channel applying ``matrix[x, y] = q(y | x)`` independently at every stage."""
    matrix = np.asarray(matrix, dtype=float)
    xi, yi = indexers(horizon, matrix.shape[0], matrix.shape[1])
    kind = KernelKind.CHANNEL_FF
    stages = []
    for i in range(horizon + 1):
        shape = kind.table_shape(i, xi.shape, yi.shape)
        stages.append(broadcast_table(matrix, [i, len(shape) - 1], shape))
    return CausalKernelFamily(kind, xi, yi, tuple(stages))


def is_feedback_free(p: CausalKernelFamily, atol: float = PMF_ATOL) -> bool:
    """True when no SOURCE_FB stage depends on past reproductions."""
    if p.kind is not KernelKind.SOURCE_FB:
        raise ValidationError("feedback check applies to SOURCE_FB families only")
    for i, st in enumerate(p.stages):
        # y axes of stage i are i..2i-1
        base = st[(slice(None),) * i + (slice(0, 1),) * i]
        if np.abs(st - base).max() > atol:
            return False
    return True


def source_sequence_pmf(p: CausalKernelFamily) -> np.ndarray:
    """``P_{X^n}`` tensor of a feedback-free source."""
    if not is_feedback_free(p):
        raise ValidationError("source depends on past reproductions; it has no fixed P_{X^n}")
    n = p.horizon
    out = np.ones(p.x_indexer.shape)
    for i, st in enumerate(p.stages):
        t = st[(slice(None),) * i + (0,) * i]
        out = out * lift(t, list(range(i + 1)), n + 1)
    return out


@dataclass(frozen=True, eq=False)
class JointCausalDistribution:
    """Joint pmf over ``(x^n, y^n)`` as an ``(Nx, Ny)`` matrix."""

    indexer_x: SequenceIndexer
    indexer_y: SequenceIndexer
    joint: np.ndarray

    def __post_init__(self):
        _check_size(self.indexer_x, self.indexer_y)
        arr = _clean_mass(self.joint, "joint")
        want = (self.indexer_x.size, self.indexer_y.size)
        if arr.size != want[0] * want[1]:
            raise DimensionError(f"joint has {arr.size} entries, expected {want}")
        arr = arr.reshape(want)
        if abs(arr.sum() - 1.0) > PMF_ATOL:
            raise ValidationError(f"joint mass sums to {arr.sum():.15g}")
        arr.flags.writeable = False
        object.__setattr__(self, "joint", arr)

    @classmethod
    def from_tensor(cls, indexer_x, indexer_y, tensor) -> "JointCausalDistribution":
        return cls(indexer_x, indexer_y, np.asarray(tensor).reshape(indexer_x.size, indexer_y.size))

    @property
    def horizon(self) -> int:
        return self.indexer_x.horizon

    @property
    def tensor(self) -> np.ndarray:
        return self.joint.reshape(self.indexer_x.shape + self.indexer_y.shape)


def causal_product(p: CausalKernelFamily, q: CausalKernelFamily) -> JointCausalDistribution:
    """Joint ``prod_i p_i(x_i|x^{i-1},y^{i-1}) q_i(y_i|y^{i-1},x^i)``."""
    if p.kind is not KernelKind.SOURCE_FB or q.kind is not KernelKind.CHANNEL_FF:
        raise DimensionError(f"need (SOURCE_FB, CHANNEL_FF), got ({p.kind.name}, {q.kind.name})")
    if not p.compatible_with(q):
        raise DimensionError("source and channel horizons/alphabets differ")
    _check_size(p.x_indexer, p.y_indexer)
    t = p.product_tensor() * q.product_tensor()
    return JointCausalDistribution.from_tensor(p.x_indexer, p.y_indexer, t)


def marginals(j: JointCausalDistribution) -> tuple[FinitePmf, FinitePmf]:
    """``(mu, nu)``: marginals on the source and reproduction sequence spaces."""
    mu = j.joint.sum(axis=1)
    nu = j.joint.sum(axis=0)
    return (
        FinitePmf(Alphabet(j.indexer_x.size, "X^n"), mu / mu.sum()),
        FinitePmf(Alphabet(j.indexer_y.size, "Y^n"), nu / nu.sum()),
    )


def pi_measure(j: JointCausalDistribution, p: CausalKernelFamily) -> JointCausalDistribution:
    """Reference measure ``prod_i p_i(x_i|x^{i-1},y^{i-1}) * nu(y^n)``."""
    if p.kind is not KernelKind.SOURCE_FB:
        raise DimensionError("pi_measure needs the SOURCE_FB family")
    if j.indexer_x.shape != p.x_indexer.shape or j.indexer_y.shape != p.y_indexer.shape:
        raise DimensionError("joint and source family shapes differ")
    n = j.horizon
    nu = j.tensor.sum(axis=tuple(range(n + 1)))
    t = p.product_tensor() * nu.reshape((1,) * (n + 1) + nu.shape)
    return JointCausalDistribution.from_tensor(j.indexer_x, j.indexer_y, t)


def condition_joint(j: JointCausalDistribution, kind: KernelKind) -> CausalKernelFamily:
    """Exact stage conditionals of ``j`` under the conditioning pattern ``kind``.

    Rows whose conditioning tuple has zero probability are filled uniform and
    reported in ``zero_rows``.
    """
    n = j.horizon
    t = j.tensor
    stages, flags = [], []
    for i in range(n + 1):
        a, b = kind.n_conditioning(i)
        keep_x = a + (1 if kind.output == "x" else 0)
        keep_y = b + (1 if kind.output == "y" else 0)
        drop = tuple(range(keep_x, n + 1)) + tuple(n + 1 + k for k in range(keep_y, n + 1))
        m = t.sum(axis=drop)
        # m axes: x_0..x_{keep_x-1}, y_0..y_{keep_y-1}; move the output last
        out_axis = keep_x - 1 if kind.output == "x" else keep_x + keep_y - 1
        m = np.moveaxis(m, out_axis, -1)
        table, zero = _normalize_rows(m)
        stages.append(table)
        flags.append(zero)
    return CausalKernelFamily(kind, j.indexer_x, j.indexer_y, tuple(stages), tuple(flags))


def _as_array(v) -> np.ndarray:
    if isinstance(v, FinitePmf):
        return v.mass
    if isinstance(v, JointCausalDistribution):
        return v.joint
    return np.asarray(v, dtype=float)


def kl_divergence(a, b) -> float:
    """Relative entropy ``D(a || b)`` in nats; ``inf`` if ``a`` is not dominated by ``b``."""
    a, b = _as_array(a), _as_array(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    pos = a > 0
    if np.any(b[pos] <= 0):
        return math.inf
    val = float(np.sum(a[pos] * (np.log(a[pos]) - np.log(b[pos]))))
    return max(val, 0.0)


def random_pmf_rows(shape, rng: np.random.Generator, min_mass: float = 1e-6) -> np.ndarray:
    """Uniform draws on each simplex row (last axis), floored at ``min_mass``."""
    arr = rng.dirichlet(np.ones(shape[-1]), size=tuple(shape[:-1]))
    arr = np.maximum(arr, min_mass)
    return arr / arr.sum(axis=-1, keepdims=True)


def random_family(
    kind: KernelKind,
    x_indexer: SequenceIndexer,
    y_indexer: SequenceIndexer,
    rng: np.random.Generator,
    min_mass: float = 1e-6,
) -> CausalKernelFamily:
    stages = tuple(
        random_pmf_rows(kind.table_shape(i, x_indexer.shape, y_indexer.shape), rng, min_mass)
        for i in range(x_indexer.horizon + 1)
    )
    return CausalKernelFamily(kind, x_indexer, y_indexer, stages)
