"""Directed information and its two variational characterisations.

All values are in nats.  Infimum-side quantities return ``+inf`` and
supremum-side quantities ``-inf`` when a support condition fails, so random
searches can sample freely without exception handling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .prob import (
    CausalKernelFamily,
    DimensionError,
    FinitePmf,
    JointCausalDistribution,
    KernelKind,
    ValidationError,
    _normalize_rows,
    causal_product,
    is_feedback_free,
    kl_divergence,
    lift,
    pi_measure,
)

LN2 = math.log(2.0)


@dataclass(frozen=True)
class DirectedInfoReport:
    value_nats: float
    per_stage: tuple[float, ...]
    chain_check_residual: float

    @property
    def value_bits(self) -> float:
        return self.value_nats / LN2

    @property
    def per_stage_bits(self) -> tuple[float, ...]:
        return tuple(v / LN2 for v in self.per_stage)


def _check_pair(p: CausalKernelFamily, q: CausalKernelFamily) -> None:
    if p.kind is not KernelKind.SOURCE_FB or q.kind is not KernelKind.CHANNEL_FF:
        raise DimensionError(f"need (SOURCE_FB, CHANNEL_FF), got ({p.kind.name}, {q.kind.name})")
    if not p.compatible_with(q):
        raise DimensionError("source and channel horizons/alphabets differ")


def _expect_log_ratio(weights: np.ndarray, num: np.ndarray, den: np.ndarray) -> float:
    """``sum weights * ln(num/den)`` over the support of ``weights``."""
    pos = weights > 0
    num = np.broadcast_to(num, weights.shape)[pos]
    den = np.broadcast_to(den, weights.shape)[pos]
    if np.any(den <= 0):
        return math.inf
    if np.any(num <= 0):
        return -math.inf
    return float(np.sum(weights[pos] * (np.log(num) - np.log(den))))


def stage_conditional_mi(tensor: np.ndarray, i: int) -> float:
    """``I(X^i; Y_i | Y^{i-1})`` from a joint ``(x^n, y^n)`` tensor.

    Works only from marginals of the joint, never from the kernels that built
    it, so it can serve as an independent check on the relative-entropy form.
    """
    n = tensor.ndim // 2 - 1
    drop = tuple(range(i + 1, n + 1)) + tuple(range(n + 2 + i, 2 * n + 2))
    m = tensor.sum(axis=drop)  # axes x_0..x_i, y_0..y_i
    k = i + 1
    m_x_ypast = m.sum(axis=-1, keepdims=True)
    m_y = m.sum(axis=tuple(range(k)), keepdims=True)
    m_ypast = m_y.sum(axis=-1, keepdims=True)
    pos = m > 0
    num = (m * m_ypast)[pos]
    den = np.broadcast_to(m_x_ypast * m_y, m.shape)[pos]
    return float(np.sum(m[pos] * (np.log(num) - np.log(den))))


def directed_information(p: CausalKernelFamily, q: CausalKernelFamily) -> DirectedInfoReport:
    """``I(X^n -> Y^n) = E[ln Q(y^n|x^n) / nu(y^n)]`` with a chain-rule cross-check."""
    _check_pair(p, q)
    j = causal_product(p, q)
    n = j.horizon
    t = j.tensor
    nu = t.sum(axis=tuple(range(n + 1)), keepdims=True)
    value = _expect_log_ratio(t, q.product_tensor(), nu)
    per_stage = tuple(stage_conditional_mi(t, i) for i in range(n + 1))
    return DirectedInfoReport(value, per_stage, abs(value - sum(per_stage)))


def mutual_information(j: JointCausalDistribution) -> float:
    mu = j.joint.sum(axis=1, keepdims=True)
    nu = j.joint.sum(axis=0, keepdims=True)
    return kl_divergence(j.joint, mu * nu)


def variational_A(p: CausalKernelFamily, q: CausalKernelFamily, nu_bar) -> float:
    """``E[ln Q(y^n|x^n) / nu_bar(y^n)]`` under ``p (x) q``; minimised at the true marginal."""
    _check_pair(p, q)
    nb = nu_bar.mass if isinstance(nu_bar, FinitePmf) else np.asarray(nu_bar, dtype=float)
    if nb.size != p.y_indexer.size:
        raise DimensionError(f"nu_bar has {nb.size} entries, expected {p.y_indexer.size}")
    j = causal_product(p, q)
    n = j.horizon
    nb = nb.reshape((1,) * (n + 1) + p.y_indexer.shape)
    return _expect_log_ratio(j.tensor, q.product_tensor(), nb)


def variational_B(
    p: CausalKernelFamily,
    q: CausalKernelFamily,
    s: CausalKernelFamily,
    r: CausalKernelFamily,
) -> float:
    """``E[ln (S (x) R) / Pi]`` under ``p (x) q``; maximised when ``S (x) R`` is the joint."""
    _check_pair(p, q)
    if s.kind is not KernelKind.S_KIND or r.kind is not KernelKind.R_KIND:
        raise DimensionError(f"need (S_KIND, R_KIND), got ({s.kind.name}, {r.kind.name})")
    if not (p.compatible_with(s) and p.compatible_with(r)):
        raise DimensionError("S/R families do not match the source/channel shapes")
    j = causal_product(p, q)
    pi = pi_measure(j, p)
    sr = s.product_tensor() * r.product_tensor()
    return _expect_log_ratio(j.tensor, sr, pi.tensor)


def optimal_r_kernel(p: CausalKernelFamily, q: CausalKernelFamily) -> CausalKernelFamily:
    """Posterior ``r_i(x_i | x^{i-1}, y^i)`` proportional to ``p_i * q_i``."""
    _check_pair(p, q)
    n = p.horizon
    stages, flags = [], []
    for i in range(n + 1):
        # local axes: x_0..x_i, y_0..y_i
        nd = 2 * (i + 1)
        pos_p = [k for k in range(i)] + [i + 1 + k for k in range(i)] + [i]
        pos_q = [k for k in range(i + 1)] + [i + 1 + k for k in range(i)] + [2 * i + 1]
        joint_i = lift(p.stages[i], pos_p, nd) * lift(q.stages[i], pos_q, nd)
        table, zero = _normalize_rows(np.moveaxis(joint_i, i, -1))
        stages.append(table)
        flags.append(zero)
    return CausalKernelFamily(KernelKind.R_KIND, p.x_indexer, p.y_indexer, tuple(stages), tuple(flags))


def mi_equals_di_check(p: CausalKernelFamily, q: CausalKernelFamily) -> float:
    """``|I(X^n;Y^n) - I(X^n -> Y^n)|`` for a source without feedback."""
    _check_pair(p, q)
    if not is_feedback_free(p):
        raise ValidationError("source kernels depend on past reproductions (feedback present)")
    mi = mutual_information(causal_product(p, q))
    return abs(mi - directed_information(p, q).value_nats)
