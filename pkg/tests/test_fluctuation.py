import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vpmerge import (
    ConditionalMoments,
    DegenerateError,
    DomainError,
    LabeledDataset,
    NumericError,
    SeedPolicy,
    conditional_fluctuation,
    cross_fluctuation_G,
    gaussian_central_moment,
    normalized_M,
    scalar_moment_trajectory,
    sweep,
    top_eigenvalue,
    top_eigenvalue_matrix_free,
)
from vpmerge.fluctuation import moments_from_rows
from vpmerge.schedule import j_values


def gaussian_sweep(ddpm, seed, n=100000, d=4, steps=(0,)):
    rng = np.random.default_rng(seed)
    ds = LabeledDataset(
        features=rng.standard_normal((n, d)), labels=np.zeros(n, dtype=int)
    )
    return sweep(ds, ddpm, steps, SeedPolicy(base_seed=seed))


def from_matrix(mat):
    return ConditionalMoments.from_tensor(np.asarray(mat, dtype=np.float64))


class TestConditionalFluctuation:
    def test_standard_normal_covariance(self, ddpm):
        sw = gaussian_sweep(ddpm, 0)
        m = conditional_fluctuation(sw, np.arange(100000), 0, n=2)
        assert np.linalg.norm(m.tensor - np.eye(4), ord=2) < 0.03

    def test_first_order_conditional_centering_is_zero(self, ddpm):
        sw = gaussian_sweep(ddpm, 1, n=500)
        m = conditional_fluctuation(sw, np.arange(500), 0, n=1)
        assert np.array_equal(m.tensor, np.zeros(4))

    def test_half_space_mean_global_centering(self, ddpm):
        # E[x1 | x1 > 0] = sqrt(2/pi) for a standard normal, others 0
        sw = gaussian_sweep(ddpm, 2, n=200000)
        event = np.flatnonzero(sw.dataset.features[:, 0] > 0)
        m = conditional_fluctuation(sw, event, 0, n=1, centering="global_mean")
        assert m.tensor[0] == pytest.approx(math.sqrt(2 / math.pi), abs=0.01)
        assert np.all(np.abs(m.tensor[1:]) < 0.01)

    def test_empty_event(self, ddpm):
        sw = gaussian_sweep(ddpm, 3, n=100)
        with pytest.raises(DomainError):
            conditional_fluctuation(sw, np.array([], dtype=int), 0)

    def test_degenerate_event_for_order_two(self, ddpm):
        sw = gaussian_sweep(ddpm, 4, n=100)
        with pytest.raises(DegenerateError):
            conditional_fluctuation(sw, np.array([3]), 0, n=2)

    def test_propagated_matches_empirical(self, ddpm):
        sw = gaussian_sweep(ddpm, 5, n=50000, d=6, steps=(0, 300))
        ev = np.arange(25000)
        ana = conditional_fluctuation(sw, ev, 300, n=2, propagate=True)
        emp = conditional_fluctuation(sw, ev, 300, n=2, propagate=False)
        assert np.linalg.norm(ana.tensor - emp.tensor, ord=2) < 0.05
        assert ana.top_eigenvalue == pytest.approx(emp.top_eigenvalue, rel=0.05)

    def test_frobenius_matches_tensor_norm(self, ddpm):
        sw = gaussian_sweep(ddpm, 6, n=1000)
        m = conditional_fluctuation(sw, np.arange(1000), 0, n=2)
        assert m.frobenius_sq == pytest.approx(np.sum(m.tensor**2), rel=1e-9)


class TestCrossFluctuation:
    def test_identity_pair(self):
        assert cross_fluctuation_G(from_matrix(np.eye(2)), from_matrix(np.eye(2))) == 2.0

    def test_orthogonal_structures(self):
        a, b = from_matrix(np.diag([1.0, 0.0])), from_matrix(np.diag([0.0, 1.0]))
        assert cross_fluctuation_G(a, b) == 0.0

    def test_trace_arithmetic(self):
        a, b = from_matrix(np.eye(2)), from_matrix(np.diag([2.0, 0.0]))
        assert cross_fluctuation_G(a, b) == 2.0

    def test_mismatch_errors(self):
        a = from_matrix(np.eye(2))
        v = ConditionalMoments.from_tensor(np.array([1.0, 0.0]), order=1)
        with pytest.raises(DomainError):
            cross_fluctuation_G(a, v)
        with pytest.raises(DomainError):
            cross_fluctuation_G(a, from_matrix(np.eye(3)))


class TestNormalizedM:
    def test_self_similarity(self):
        rng = np.random.default_rng(0)
        raw = rng.standard_normal((4, 4))
        a = from_matrix(raw @ raw.T)
        assert normalized_M(a, a) == 1.0

    def test_orthogonal_zero(self):
        a, b = from_matrix(np.diag([1.0, 0.0])), from_matrix(np.diag([0.0, 1.0]))
        assert normalized_M(a, b) == 0.0

    def test_closed_arithmetic(self):
        a, b = from_matrix(np.eye(2)), from_matrix(np.diag([2.0, 0.0]))
        assert normalized_M(a, b) == pytest.approx(2 / (math.sqrt(2) * 2), abs=1e-9)
        assert normalized_M(a, b) == pytest.approx(0.70711, abs=1e-5)

    def test_zero_norm_rejected(self):
        with pytest.raises(DegenerateError):
            normalized_M(from_matrix(np.zeros((2, 2))), from_matrix(np.eye(2)))

    def test_orthogonal_and_scale_invariance(self, ddpm):
        rng = np.random.default_rng(1)
        xa = rng.standard_normal((4000, 6)) * np.sqrt(np.r_[5.0, np.ones(5)])
        xb = rng.standard_normal((4000, 6)) * np.sqrt(np.r_[2.0, 2.0, np.ones(4)])
        q, r = np.linalg.qr(rng.standard_normal((6, 6)))
        q *= np.sign(np.diag(r))
        scale = 3.7

        def cka(u, v):
            ma = ConditionalMoments.from_tensor(moments_from_rows(u, 2)[1], order=2)
            mb = ConditionalMoments.from_tensor(moments_from_rows(v, 2)[1], order=2)
            return normalized_M(ma, mb)

        base = cka(xa, xb)
        mapped = cka(scale * xa @ q.T, scale * xb @ q.T)
        assert mapped == pytest.approx(base, abs=1e-8)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_bounds_and_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        ra, rb = rng.standard_normal((2, 3, 3))
        a, b = from_matrix(ra @ ra.T + 1e-6 * np.eye(3)), from_matrix(rb @ rb.T + 1e-6 * np.eye(3))
        m_ab, m_ba = normalized_M(a, b), normalized_M(b, a)
        assert 0.0 <= m_ab <= 1.0
        assert abs(m_ab - m_ba) < 1e-12
        assert abs(normalized_M(a, a) - 1.0) < 1e-12


class TestTopEigenvalue:
    def test_identity(self):
        assert top_eigenvalue(np.eye(7)) == pytest.approx(1.0, rel=1e-12)

    def test_diagonal(self):
        assert top_eigenvalue(np.diag([3.0, 1.0])) == pytest.approx(3.0, rel=1e-12)

    def test_random_psd_matches_dense_oracle(self):
        rng = np.random.default_rng(42)
        raw = rng.standard_normal((16, 16))
        mat = raw @ raw.T
        oracle = np.linalg.eigvalsh(mat)[-1]
        assert top_eigenvalue(mat) == pytest.approx(oracle, rel=1e-8)

    def test_power_iteration_path_matches_dense(self):
        # d > 256 forces the matrix-free branch
        rng = np.random.default_rng(7)
        raw = rng.standard_normal((300, 40))
        mat = raw.T @ raw / 300 + np.diag(np.linspace(2.0, 0.0, 40))
        big = np.zeros((300, 300))
        big[:40, :40] = mat
        oracle = np.linalg.eigvalsh(big)[-1]
        assert top_eigenvalue(big) == pytest.approx(oracle, rel=1e-6)

    def test_matrix_free_matches_dense_covariance(self):
        rng = np.random.default_rng(3)
        rows = rng.standard_normal((5000, 12)) * np.sqrt(np.r_[6.0, np.ones(11)])
        dev = rows - rows.mean(axis=0)
        oracle = np.linalg.eigvalsh(dev.T @ dev / 5000)[-1]
        assert top_eigenvalue_matrix_free(rows) == pytest.approx(oracle, rel=1e-6)

    def test_non_convergence_reports(self):
        mat = np.zeros((300, 300))
        mat[0, 0], mat[1, 1] = 1.0, 0.99  # slow mode, zero tolerance
        with pytest.raises(NumericError, match="interval"):
            top_eigenvalue(mat, tol=0.0, max_iter=3)

    def test_non_square_rejected(self):
        with pytest.raises(DomainError):
            top_eigenvalue(np.zeros((2, 3)))


class TestScalarMoments:
    def test_gaussian_central_moments(self):
        assert gaussian_central_moment(3) == 0.0
        assert gaussian_central_moment(4) == 3.0
        assert gaussian_central_moment(6) == 15.0
        assert gaussian_central_moment(0) == 1.0

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 16))
    def test_double_factorial_brute_force(self, n):
        if n % 2 == 1:
            assert gaussian_central_moment(n) == 0.0
        else:
            assert gaussian_central_moment(n) == math.prod(range(1, n, 2))

    def test_variance_preservation(self, ddpm):
        for t in (0, 100, 500, 1000):
            assert scalar_moment_trajectory(1.0, 2, ddpm, t) == pytest.approx(1.0, rel=1e-12)

    def test_odd_moment_decay(self, ddpm):
        t = 400
        j3 = float(j_values(ddpm, t)) ** 3
        assert scalar_moment_trajectory(2.0, 3, ddpm, t) == pytest.approx(2.0 * j3, rel=1e-12)
        # the quoted arithmetic case: J^3 = 0.125 gives 0.25
        assert 0.125 * 2.0 + (1 - 0.125) * gaussian_central_moment(3) == 0.25

    def test_laplace_fourth_moment_mc_oracle(self, ddpm):
        # unit-variance Laplace has mu4 = 6; noised toward the Gaussian 3
        rng = np.random.default_rng(11)
        x0 = rng.laplace(0.0, 1 / math.sqrt(2), size=100000)
        t = 182  # J^4 close to 0.5
        j = float(j_values(ddpm, t))
        xt = j * x0 + math.sqrt(1 - j * j) * rng.standard_normal(100000)
        emp = np.mean((xt - xt.mean()) ** 4)
        pred = scalar_moment_trajectory(6.0, 4, ddpm, t)
        assert abs(emp - pred) / pred < 0.05
        assert pred == pytest.approx(j**4 * 6 + (1 - j**4) * 3, rel=1e-12)

    def test_order_below_two_rejected(self, ddpm):
        with pytest.raises(DomainError):
            scalar_moment_trajectory(1.0, 1, ddpm, 5)


class TestOneSweepEstimator:
    def test_error_shrinks_with_more_sweeps(self, ddpm):
        # half-space event of a standard normal, global centering, p known:
        # the analytic conditional second-moment tensor is the identity
        d, n, t = 4, 2000, 300
        tensors = []
        for r in range(50):
            rng = np.random.default_rng(1000 + r)
            ds = LabeledDataset(
                features=rng.standard_normal((n, d)), labels=np.zeros(n, dtype=int)
            )
            sw = sweep(ds, ddpm, [0, t], SeedPolicy(base_seed=r))
            event = np.flatnonzero(ds.features[:, 0] > 0)
            m = conditional_fluctuation(
                sw, event, t, n=2, centering="global_mean",
                propagate=False, known_prob=0.5,
            )
            tensors.append(m.tensor)
        target = np.eye(d)

        def err(k):
            return np.linalg.norm(np.mean(tensors[:k], axis=0) - target, ord=2)

        assert err(50) < err(5)

    def test_ratio_estimator_consistency(self):
        d = 8
        spec_a, spec_b = np.r_[10.0, np.ones(7)], np.r_[4.0, 2.0, np.ones(6)]
        truth = np.sum(spec_a * spec_b) / math.sqrt(np.sum(spec_a**2) * np.sum(spec_b**2))

        def avg_err(n):
            errs = []
            for s in range(20):
                rng = np.random.default_rng(s)
                xa = rng.standard_normal((n, d)) * np.sqrt(spec_a)
                xb = rng.standard_normal((n, d)) * np.sqrt(spec_b)
                ma = ConditionalMoments.from_tensor(moments_from_rows(xa, 2)[1], order=2)
                mb = ConditionalMoments.from_tensor(moments_from_rows(xb, 2)[1], order=2)
                errs.append(abs(normalized_M(ma, mb) - truth))
            return np.mean(errs)

        assert avg_err(10000) < avg_err(1000)


class TestContractionLaw:
    def test_empirical_top_eigenvalue_follows_law(self, ddpm):
        rng = np.random.default_rng(21)
        feats = rng.standard_normal((50000, 16)) * np.sqrt(np.r_[10.0, np.ones(15)])
        ds = LabeledDataset(features=feats, labels=np.zeros(50000, dtype=int))
        steps = [0, 200, 400, 600]
        sw = sweep(ds, ddpm, steps, SeedPolicy(base_seed=22))
        lam0 = conditional_fluctuation(sw, np.arange(50000), 0, n=2).top_eigenvalue
        for t in steps[1:]:
            emp = conditional_fluctuation(
                sw, np.arange(50000), t, n=2, propagate=False
            ).top_eigenvalue
            j2 = float(j_values(ddpm, t)) ** 2
            law = lam0 * j2 + (1 - j2)
            assert abs(emp - law) / law < 0.03
