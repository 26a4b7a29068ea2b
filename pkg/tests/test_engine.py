import numpy as np
import pytest

from levelpath import (Dataset, LeakyReLU, NetworkSpec, PreconditionError,
                       Theta, align_first_layer, first_layer_permutation_path,
                       forward, loss, numeric_rank, random_theta,
                       restore_full_rank, verify_path)
from levelpath.linalg import independent_columns


def duplicate_neuron_instance(N=2, n0=2, n1=3, seed=0):
    """First layer with two identical neurons, so the features are rank-deficient
    only if enough columns coincide; here column 2 duplicates column 1."""
    rng = np.random.default_rng(seed)
    spec = NetworkSpec((n0, n1, 1))
    X = rng.standard_normal((N, n0))
    data = Dataset(X, rng.standard_normal((N, 1)))
    W1 = rng.standard_normal((n0, n1))
    W1[:, 2] = W1[:, 1]
    b1 = rng.standard_normal(n1)
    b1[2] = b1[1]
    theta = Theta((W1, rng.standard_normal((n1, 1))), (b1,))
    return spec, data, theta


def collapsed_instance(N, n1, n0=3, seed=0, rank=1):
    """All first-layer neurons drawn from ``rank`` distinct columns."""
    rng = np.random.default_rng(seed)
    spec = NetworkSpec((n0, n1, 1))
    data = Dataset(rng.standard_normal((N, n0)), rng.standard_normal((N, 1)))
    base = rng.standard_normal((n0, rank))
    picks = rng.integers(0, rank, n1)
    W1 = base[:, picks]
    b_base = rng.standard_normal(rank)
    theta = Theta((W1, rng.standard_normal((n1, 1))), (b_base[picks],))
    return spec, data, theta


class TestRestoreFullRank:
    def test_already_full_rank_constant_path(self):
        rng = np.random.default_rng(1)
        spec = NetworkSpec((2, 4, 1))
        data = Dataset(rng.standard_normal((3, 2)), rng.standard_normal((3, 1)))
        theta = random_theta(spec, 2)
        result = restore_full_rank(spec, data, theta, rng=0)
        assert result.achieved_rank.rank == 3
        assert len(result.path) == 1
        assert result.path.segments[0].start.equal(theta)
        assert result.path.segments[0].end.equal(theta)

    def test_duplicated_neuron_restored(self):
        spec, data, theta = duplicate_neuron_instance(N=2, n1=3, seed=3)
        F1 = forward(spec, theta, data.X)[1]
        assert np.array_equal(F1[:, 1], F1[:, 2])
        result = restore_full_rank(spec, data, theta, rng=0)
        assert result.achieved_rank.rank == 2
        report = verify_path(spec, data, result.path, alpha=np.inf, n_samples=60,
                             expected_endpoints=(theta, result.path.end))
        assert max(report.per_segment_invariance) <= 1e-10
        assert report.endpoint_residuals == (0.0, 0.0)

    def test_collapsed_first_layer_restored(self):
        spec, data, theta = collapsed_instance(N=4, n1=5, seed=4, rank=1)
        assert numeric_rank(forward(spec, theta, data.X)[1]).rank < 4
        result = restore_full_rank(spec, data, theta, rng=5)
        assert result.achieved_rank.rank == 4
        F1 = forward(spec, result.path.end, data.X)[1]
        assert numeric_rank(F1).rank == 4

    def test_many_seeds_zero_failures(self):
        failures = 0
        for seed in range(40):
            spec, data, theta = collapsed_instance(N=4, n1=5, seed=seed,
                                                   rank=1 + seed % 3)
            result = restore_full_rank(spec, data, theta, rng=seed)
            if result.achieved_rank.rank != 4:
                failures += 1
        assert failures == 0

    def test_output_preserved_along_path(self):
        spec, data, theta = collapsed_instance(N=3, n1=4, seed=6, rank=2)
        result = restore_full_rank(spec, data, theta, rng=7)
        base = loss(spec, theta, data)
        for _, _, point in result.path.sample(40):
            assert abs(loss(spec, point, data) - base) <= 1e-9 * max(1.0, base)

    def test_width_below_samples_rejected(self):
        rng = np.random.default_rng(8)
        spec = NetworkSpec((2, 2, 1))
        data = Dataset(rng.standard_normal((3, 2)), rng.standard_normal((3, 1)))
        with pytest.raises(PreconditionError):
            restore_full_rank(spec, data, random_theta(spec, 0), rng=0)


class TestAlignFirstLayer:
    def _restored_pair(self, spec, data, seed_a, seed_b, rng):
        ta = restore_full_rank(spec, data, random_theta(spec, seed_a), rng=rng).path.end
        tb = restore_full_rank(spec, data, random_theta(spec, seed_b), rng=rng + 1).path.end
        F1b = forward(spec, tb, data.X)[1]
        lead = sorted(independent_columns(F1b))
        order = lead + sorted(set(range(spec.widths[1])) - set(lead))
        tb = first_layer_permutation_path(spec, data, tb, order).end
        return ta, tb

    def test_identical_points_constant(self):
        rng = np.random.default_rng(0)
        spec = NetworkSpec((2, 4, 1))
        data = Dataset(rng.standard_normal((3, 2)), rng.standard_normal((3, 1)))
        theta = restore_full_rank(spec, data, random_theta(spec, 1), rng=0).path.end
        path = align_first_layer(spec, data, theta, theta)
        assert path.start.equal(theta) and path.end.equal(theta)
        report = verify_path(spec, data, path, alpha=np.inf, n_samples=10)
        assert max(report.per_segment_invariance) == 0.0

    def test_scalar_case_hand_traceable(self):
        # N=1 sample, width 2: one aligning pass per neuron
        spec = NetworkSpec((1, 2, 1))
        data = Dataset(np.array([[1.0]]), np.array([[2.0]]))
        ta, tb = self._restored_pair(spec, data, 3, 4, rng=10)
        path = align_first_layer(spec, data, ta, tb)
        assert np.array_equal(path.end.weights[0], tb.weights[0])
        assert np.array_equal(path.end.biases[0], tb.biases[0])
        base = loss(spec, ta, data)
        worst = max(abs(loss(spec, p, data) - base)
                    for _, _, p in path.sample(1000 // max(1, len(path)) + 2))
        assert worst <= 1e-10 * max(1.0, base)

    @pytest.mark.parametrize("seed", range(8))
    def test_alignment_randomized(self, seed):
        rng = np.random.default_rng(100 + seed)
        spec = NetworkSpec((3, 5, 2, 1))
        data = Dataset(rng.standard_normal((4, 3)), rng.standard_normal((4, 1)))
        ta, tb = self._restored_pair(spec, data, seed, 50 + seed, rng=200 + seed)
        path = align_first_layer(spec, data, ta, tb)
        assert np.array_equal(path.end.weights[0], tb.weights[0])
        assert np.array_equal(path.end.biases[0], tb.biases[0])
        report = verify_path(spec, data, path, alpha=np.inf, n_samples=50,
                             expected_endpoints=(ta, path.end))
        base = loss(spec, ta, data)
        worst = max(abs(loss(spec, p, data) - base) for _, _, p in path.sample(50))
        assert worst <= 1e-7 * max(1.0, abs(base))
        assert report.endpoint_residuals == (0.0, 0.0)

    def test_width_rule_enforced(self):
        rng = np.random.default_rng(9)
        spec = NetworkSpec((2, 3, 1))
        data = Dataset(rng.standard_normal((3, 2)), rng.standard_normal((3, 1)))
        with pytest.raises(PreconditionError):
            align_first_layer(spec, data, random_theta(spec, 0), random_theta(spec, 1))

    def test_dependent_target_prefix_rejected(self):
        # target whose leading feature columns are forced to coincide
        spec, data, theta = duplicate_neuron_instance(N=2, n1=3, seed=11)
        W1 = theta.weights[0].copy()
        W1[:, 1] = W1[:, 0]
        b1 = theta.biases[0].copy()
        b1[1] = b1[0]
        bad_target = theta.replace(1, W=W1, b=b1)
        good = restore_full_rank(spec, data, random_theta(spec, 12), rng=0).path.end
        with pytest.raises(PreconditionError):
            align_first_layer(spec, data, good, bad_target)


class TestFirstLayerPermutation:
    @pytest.mark.parametrize("seed", range(6))
    def test_relabeling_exact_and_invariant(self, seed):
        rng = np.random.default_rng(seed)
        spec = NetworkSpec((2, 5, 2, 1))
        data = Dataset(rng.standard_normal((4, 2)), rng.standard_normal((4, 1)))
        theta = restore_full_rank(spec, data, random_theta(spec, seed), rng=seed).path.end
        order = list(rng.permutation(5))
        path = first_layer_permutation_path(spec, data, theta, order)
        end = path.end
        np.testing.assert_array_equal(end.weights[0], theta.weights[0][:, order])
        np.testing.assert_array_equal(end.biases[0], theta.biases[0][order])
        np.testing.assert_array_equal(end.weights[1], theta.weights[1][order, :])
        np.testing.assert_array_equal(end.weights[2], theta.weights[2])
        report = verify_path(spec, data, path, alpha=np.inf, n_samples=40,
                             expected_endpoints=(theta, end))
        assert max(report.per_segment_invariance) <= 1e-10
        assert report.endpoint_residuals == (0.0, 0.0)

    def test_identity_order_constant(self):
        rng = np.random.default_rng(20)
        spec = NetworkSpec((2, 4, 1))
        data = Dataset(rng.standard_normal((3, 2)), rng.standard_normal((3, 1)))
        theta = random_theta(spec, 0)
        path = first_layer_permutation_path(spec, data, theta, [0, 1, 2, 3])
        assert len(path) == 1 and path.start.equal(theta) and path.end.equal(theta)

    def test_order_validated(self):
        rng = np.random.default_rng(21)
        spec = NetworkSpec((2, 4, 1))
        data = Dataset(rng.standard_normal((3, 2)), rng.standard_normal((3, 1)))
        with pytest.raises(PreconditionError):
            first_layer_permutation_path(spec, data, random_theta(spec, 0), [0, 1, 1, 3])
