import math

import numpy as np
import pytest

from causal_rdf.directed import (
    LN2,
    directed_information,
    mi_equals_di_check,
    mutual_information,
    optimal_r_kernel,
    stage_conditional_mi,
    variational_A,
    variational_B,
)
from causal_rdf.prob import (
    DimensionError,
    KernelKind,
    ValidationError,
    causal_product,
    condition_joint,
    iid_source,
    kl_divergence,
    marginals,
    memoryless_channel,
    random_family,
    random_pmf_rows,
)

from conftest import BSC01, IDENTITY2, brute_directed_information, h2, random_instances


class TestDirectedInformation:
    def test_noiseless_uniform_is_one_bit(self):
        rep = directed_information(iid_source([0.5, 0.5], 0, 2), memoryless_channel(IDENTITY2, 0))
        assert rep.value_nats == pytest.approx(LN2, abs=1e-15)
        assert rep.value_bits == pytest.approx(1.0, abs=1e-15)

    def test_bsc(self, bsc_pair):
        rep = directed_information(*bsc_pair)
        assert rep.value_nats == pytest.approx(LN2 - h2(0.1), abs=1e-14)
        assert rep.value_bits == pytest.approx(0.531004, abs=1e-6)

    def test_memoryless_pair_is_additive(self):
        n = 3
        rep = directed_information(iid_source([0.5, 0.5], n, 2), memoryless_channel(BSC01, n))
        assert rep.value_nats == pytest.approx((n + 1) * (LN2 - h2(0.1)), abs=1e-13)
        np.testing.assert_allclose(rep.per_stage, LN2 - h2(0.1), atol=1e-13)

    def test_x_independent_channel_is_zero(self):
        q = memoryless_channel([[0.2, 0.8], [0.2, 0.8]], 2)
        assert abs(directed_information(iid_source([0.4, 0.6], 2, 2), q).value_nats) <= 1e-14

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_brute_force_and_chain_rule(self, seed):
        (p, q), = random_instances(1, seed)
        rep = directed_information(p, q)
        assert rep.value_nats == pytest.approx(brute_directed_information(p, q), abs=1e-12)
        assert rep.chain_check_residual <= 1e-12
        assert rep.value_nats >= -1e-15

    def test_stage_mi_on_product_is_zero(self):
        t = np.einsum("a,b,c,d->abcd", [0.3, 0.7], [0.5, 0.5], [0.1, 0.9], [0.6, 0.4])
        for i in range(2):
            assert abs(stage_conditional_mi(t, i)) <= 1e-15

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            directed_information(iid_source([0.5, 0.5], 1, 2), memoryless_channel(BSC01, 0))


class TestVariationalA:
    def test_bsc_with_biased_marginal(self, bsc_pair):
        p, q = bsc_pair
        di = directed_information(p, q).value_nats
        gap = variational_A(p, q, [0.75, 0.25]) - di
        assert gap == pytest.approx(kl_divergence([0.5, 0.5], [0.75, 0.25]), abs=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_gap_is_divergence(self, seed):
        (p, q), = random_instances(1, seed)
        rng = np.random.default_rng(100 + seed)
        j = causal_product(p, q)
        _, nu = marginals(j)
        di = directed_information(p, q).value_nats
        for _ in range(10):
            nb = random_pmf_rows((nu.mass.size,), rng)
            gap = variational_A(p, q, nb) - di
            assert gap >= -1e-12
            assert gap == pytest.approx(kl_divergence(nu, nb), abs=1e-10)
        assert abs(variational_A(p, q, nu) - di) <= 1e-10

    def test_zero_candidate_on_support_is_infinite(self, bsc_pair):
        assert variational_A(*bsc_pair, [1.0, 0.0]) == math.inf

    def test_wrong_size(self, bsc_pair):
        with pytest.raises(DimensionError):
            variational_A(*bsc_pair, [0.2, 0.3, 0.5])


class TestVariationalB:
    def test_conditional_decomposition_attains(self, bsc_pair):
        p, q = bsc_pair
        j = causal_product(p, q)
        s = condition_joint(j, KernelKind.S_KIND)
        r = condition_joint(j, KernelKind.R_KIND)
        assert variational_B(p, q, s, r) == pytest.approx(LN2 - h2(0.1), abs=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_gap_is_divergence(self, seed):
        (p, q), = random_instances(1, seed)
        rng = np.random.default_rng(200 + seed)
        j = causal_product(p, q)
        di = directed_information(p, q).value_nats
        for _ in range(10):
            s = random_family(KernelKind.S_KIND, p.x_indexer, p.y_indexer, rng)
            r = random_family(KernelKind.R_KIND, p.x_indexer, p.y_indexer, rng)
            gap = di - variational_B(p, q, s, r)
            assert gap >= -1e-12
            sr = s.product_tensor() * r.product_tensor()
            assert gap == pytest.approx(kl_divergence(j.tensor, sr), abs=1e-10)

    def test_kind_check(self, bsc_pair):
        p, q = bsc_pair
        fam = random_family(KernelKind.S_KIND, p.x_indexer, p.y_indexer, np.random.default_rng(0))
        with pytest.raises(DimensionError):
            variational_B(p, q, fam, fam)


class TestOptimalRKernel:
    def test_identity_channel(self):
        r = optimal_r_kernel(iid_source([0.5, 0.5], 0, 2), memoryless_channel(IDENTITY2, 0))
        np.testing.assert_allclose(r.stages[0], np.eye(2))

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_conditional_extraction(self, seed):
        (p, q), = random_instances(1, seed)
        r_opt = optimal_r_kernel(p, q)
        r_ext = condition_joint(causal_product(p, q), KernelKind.R_KIND)
        for a, b, z in zip(r_opt.stages, r_ext.stages, r_ext.zero_rows):
            assert np.abs(a - b)[~z].max() <= 1e-12


class TestMutualVsDirected:
    @pytest.mark.parametrize("seed", range(8))
    def test_equal_without_feedback(self, seed):
        (p, q), = random_instances(1, seed, feedback=False)
        assert mi_equals_di_check(p, q) <= 1e-10

    def test_feedback_rejected(self):
        (p, q), = random_instances(1, 1)
        with pytest.raises(ValidationError):
            mi_equals_di_check(p, q)

    def test_feedback_makes_mi_exceed_di(self):
        # with feedback present I(X;Y) >= I(X->Y), typically strictly
        gaps = []
        for (p, q) in random_instances(5, 7):
            if p.horizon == 0:
                continue
            gaps.append(mutual_information(causal_product(p, q)) - directed_information(p, q).value_nats)
        assert min(gaps) >= -1e-12
        assert max(gaps) > 1e-6
