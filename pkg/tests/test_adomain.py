import numpy as np
import pytest

from moldesign.adomain import (
    AdEnsemble,
    AdError,
    DegenerateData,
    OneClassSvm,
    ad_vote,
    fit_ad_ensemble,
    fit_svm,
    grid_search_hyperparams,
    rbf_kernel,
    scale_gamma,
)


def gaussian_cloud(seed, n=100, d=4):
    return np.random.default_rng(seed).standard_normal((n, d))


class TestFit:
    def test_dual_constraints(self):
        x = gaussian_cloud(0)
        svm = fit_svm(x, nu=0.1)
        cap = 1.0 / (0.1 * len(x))
        assert svm.alphas.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(svm.alphas >= -1e-12)
        assert np.all(svm.alphas <= cap + 1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_nu_property(self, seed):
        x = gaussian_cloud(seed, n=100)
        nu = 0.05
        svm = fit_svm(x, nu=nu)
        outliers = int(np.sum(svm.decision(x) < 0))
        assert outliers <= 7  # fraction <= nu + 0.02 of 100
        assert len(svm.alphas) >= (nu - 0.02) * len(x)

    @pytest.mark.parametrize("seed", range(10))
    def test_isolated_points_become_bound_sv_outliers(self, seed):
        # tight cluster plus 5 far scatter points: the far points cannot
        # reach the margin under the alpha cap, so they land at f < 0
        rng = np.random.default_rng(seed)
        x = np.vstack([0.1 * rng.standard_normal((195, 4)),
                       rng.uniform(-50.0, 50.0, (5, 4))])
        svm = fit_svm(x, nu=0.05, gamma=1.0)
        f = svm.decision(x)
        assert np.all(f[-5:] < 0)
        assert int(np.sum(f < 0)) <= 0.05 * 200 + 4
        cap = 1.0 / (0.05 * 200)
        assert np.sum(svm.alphas > cap - 1e-9) >= 5

    def test_centroid_inside_far_point_outside(self):
        rng = np.random.default_rng(4)
        x = 0.01 * rng.standard_normal((60, 3)) + 5.0
        svm = fit_svm(x, nu=0.1, gamma=1.0)
        assert svm.decision(np.full(3, 5.0)) > 0
        assert svm.decision(np.full(3, 100.0)) < 0

    def test_nu_one_all_support_vectors(self):
        x = gaussian_cloud(1, n=40)
        svm = fit_svm(x, nu=1.0)
        assert len(svm.alphas) == len(x)

    def test_degenerate_data(self):
        x = np.ones((10, 3))
        with pytest.raises(DegenerateData):
            fit_svm(x, nu=0.1, gamma=1.0)

    def test_bad_nu(self):
        with pytest.raises(AdError):
            fit_svm(gaussian_cloud(0), nu=0.0)

    def test_scale_gamma_rule(self):
        x = gaussian_cloud(2, n=50, d=8)
        assert scale_gamma(x) == pytest.approx(1.0 / (8 * x.var()))

    def test_state_round_trip(self):
        svm = fit_svm(gaussian_cloud(3), nu=0.1)
        clone = OneClassSvm.from_state(svm.to_state())
        q = gaussian_cloud(9, n=5)
        assert np.array_equal(svm.decision(q), clone.decision(q))


class _StubSvm:
    def __init__(self, value):
        self.value = value

    def decision(self, _):
        return self.value


def stub_ensemble(signs):
    return AdEnsemble(svms=[_StubSvm(1.0 if s > 0 else -1.0) for s in signs])


class TestVote:
    def test_31_of_40(self):
        ad = stub_ensemble([1] * 31 + [-1] * 9)
        inside, vote_sum = ad_vote(np.zeros(2), ad)
        assert vote_sum == 22
        assert inside

    def test_20_of_40_tie_is_outside(self):
        ad = stub_ensemble([1] * 20 + [-1] * 20)
        inside, vote_sum = ad_vote(np.zeros(2), ad)
        assert vote_sum == 0
        assert not inside

    def test_k1(self):
        ad = stub_ensemble([1])
        assert ad_vote(np.zeros(2), ad) == (True, 1)

    def test_member_tie_counts_positive(self):
        ad = AdEnsemble(svms=[_StubSvm(0.0)])
        assert ad_vote(np.zeros(2), ad) == (True, 1)

    def test_flip_changes_sum_by_two(self):
        base = [1] * 7 + [-1] * 3
        _, s0 = ad_vote(np.zeros(2), stub_ensemble(base))
        flipped = list(base)
        flipped[0] = -1
        _, s1 = ad_vote(np.zeros(2), stub_ensemble(flipped))
        assert s0 - s1 == 2

    def test_per_member_fingerprints(self):
        ad = stub_ensemble([1, -1, 1])
        fps = [np.zeros(2)] * 3
        assert ad_vote(fps, ad) == (True, 1)
        with pytest.raises(AdError):
            ad_vote([np.zeros(2)] * 2, ad)

    def test_training_set_mostly_accepted(self):
        rng = np.random.default_rng(8)
        clouds = [rng.standard_normal((80, 4)) for _ in range(5)]
        ad = fit_ad_ensemble(clouds, nu=0.05)
        accepted = 0
        for i in range(80):
            inside, _ = ad_vote([c[i] for c in clouds], ad)
            accepted += inside
        assert accepted / 80 >= 1 - 0.05 - 0.05


class TestGridSearch:
    def test_single_cluster_prefers_small_gamma(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((80, 4))
        gammas = [0.5, 0.1, 0.01, 0.005, 0.001, "scale"]
        gamma, nu, table = grid_search_hyperparams(x, gammas, [0.5, 0.1, 0.05])
        assert nu == 0.05
        assert gamma <= scale_gamma(x)

    def test_sv_fraction_at_least_nu(self):
        x = gaussian_cloud(5, n=60)
        _, _, table = grid_search_hyperparams(x, [0.5, 0.1, "scale"],
                                              [0.5, 0.1, 0.05])
        for row in table:
            assert row["n_support_vectors"] / 60 >= row["nu"] - 0.02

    def test_single_gamma_selected(self):
        x = gaussian_cloud(6, n=50)
        gamma, _, _ = grid_search_hyperparams(x, [0.25], [0.05])
        assert gamma == 0.25

    def test_empty_grid(self):
        with pytest.raises(AdError):
            grid_search_hyperparams(gaussian_cloud(0), [], [0.05])


class TestKernel:
    def test_rbf_identity(self):
        x = gaussian_cloud(7, n=10)
        k = rbf_kernel(x, x, 0.3)
        assert np.allclose(np.diag(k), 1.0)
        assert np.allclose(k, k.T)
        assert np.all(k > 0)
