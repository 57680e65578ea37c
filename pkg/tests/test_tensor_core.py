import numpy as np
import pytest
from numpy.testing import assert_allclose

from thermopepo.exceptions import NumericalError, TensorArgumentError, TensorDimensionError
from thermopepo.tensor_core import DenseTensor, contract, truncated_svd


def _random(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


class TestDenseTensor:
    def test_stores_complex_row_major(self):
        t = DenseTensor(np.arange(6).reshape(2, 3))
        assert t.data.dtype == np.complex128
        assert t.data.flags['C_CONTIGUOUS']
        assert t.reshape((6,)).data[4] == 4

    def test_label_count_must_match_rank(self):
        with pytest.raises(TensorArgumentError):
            DenseTensor(np.zeros((2, 2)), ('a',))

    def test_permute_moves_labels(self, rng):
        t = DenseTensor(_random(rng, 2, 3, 4), ('a', 'b', 'c'))
        moved = t.permute((2, 0, 1))
        assert moved.shape == (4, 2, 3)
        assert moved.labels == ('c', 'a', 'b')
        assert moved.index_of('b') == 2

    def test_permute_rejects_non_permutation(self):
        with pytest.raises(TensorArgumentError):
            DenseTensor(np.zeros((2, 2))).permute((0, 0))

    def test_reshape_size_mismatch(self):
        with pytest.raises(TensorDimensionError):
            DenseTensor(np.zeros((2, 3))).reshape((4, 2))


class TestContract:
    def test_matches_tensordot_and_orders_free_indices(self, rng):
        a = DenseTensor(_random(rng, 2, 3, 4), ('i', 'j', 'k'))
        b = DenseTensor(_random(rng, 4, 5, 3), ('k', 'l', 'j'))
        c = contract(a, b, [(1, 2), (2, 0)])
        assert c.shape == (2, 5)
        assert c.labels == ('i', 'l')
        assert_allclose(c.data, np.einsum('ijk,klj->il', a.data, b.data), atol=1e-12)

    def test_permuting_first_then_contracting_agrees(self, rng):
        a = DenseTensor(_random(rng, 3, 4, 2))
        b = DenseTensor(_random(rng, 2, 3))
        direct = contract(a, b, [(0, 1)])
        permuted = contract(a.permute((2, 0, 1)), b, [(1, 1)])
        assert_allclose(direct.data, permuted.data.transpose(1, 0, 2), atol=1e-12)

    def test_identity_composition(self):
        eye = DenseTensor(np.eye(2))
        assert_allclose(contract(eye, eye, [(1, 0)]).data, np.eye(2))

    def test_dot_product(self):
        v = DenseTensor(np.array([3.0, 4.0]))
        assert contract(v, v, [(0, 0)]).data == pytest.approx(25.0)

    def test_trace_of_sz_squared(self):
        sz = DenseTensor(np.diag([1.0, -1.0]))
        assert contract(sz, sz, [(0, 0), (1, 1)]).data == pytest.approx(2.0)

    @pytest.mark.parametrize('alpha', [2.5, -1j, 0.3 - 0.7j])
    def test_bilinear(self, rng, alpha):
        a = DenseTensor(_random(rng, 3, 4))
        b = DenseTensor(_random(rng, 4, 2))
        scaled = contract(DenseTensor(alpha * a.data), b, [(1, 0)])
        assert_allclose(scaled.data, alpha * contract(a, b, [(1, 0)]).data, atol=1e-12)

    def test_extent_mismatch(self, rng):
        with pytest.raises(TensorDimensionError):
            contract(DenseTensor(_random(rng, 2, 3)), DenseTensor(_random(rng, 4, 2)), [(1, 0)])

    def test_repeated_index(self, rng):
        a = DenseTensor(_random(rng, 2, 2))
        with pytest.raises(TensorArgumentError):
            contract(a, a, [(0, 0), (0, 1)])


class TestTruncatedSvd:
    def test_full_rank_reconstructs(self, rng):
        t = DenseTensor(_random(rng, 3, 4, 5))
        result = truncated_svd(t, ([0, 2], [1]), max_rank=100)
        assert result.left_isometry.shape == (3, 5, 4)
        assert result.right_isometry.shape == (4, 4)
        rebuilt = np.einsum('akx,x,xb->akb', result.left_isometry.data, result.singular_values,
                            result.right_isometry.data)
        assert_allclose(rebuilt.transpose(0, 2, 1), t.data, atol=1e-10)
        assert result.truncation_error < 1e-14

    def test_truncation_error_is_relative_discarded_weight(self, rng):
        t = DenseTensor(_random(rng, 6, 6))
        s = np.linalg.svd(t.data, compute_uv=False)
        result = truncated_svd(t, ([0], [1]), max_rank=2)
        assert result.kept == 2
        assert result.truncation_error == pytest.approx(np.sqrt(np.sum(s[2:] ** 2) / np.sum(s ** 2)))
        assert_allclose(result.discarded, s[2:], rtol=1e-10)

    def test_rank_one_outer_product(self, rng):
        x = _random(rng, 4)
        y = _random(rng, 5)
        t = DenseTensor(np.outer(x / np.linalg.norm(x), y / np.linalg.norm(y)))
        result = truncated_svd(t, ([0], [1]), max_rank=1)
        assert result.kept == 1
        assert result.truncation_error == pytest.approx(0.0, abs=1e-14)

    def test_identity_keeps_half_the_weight(self):
        result = truncated_svd(DenseTensor(np.eye(2)), ([0], [1]), max_rank=1)
        assert result.truncation_error == pytest.approx(1 / np.sqrt(2))

    def test_diagonal_values_are_sorted(self):
        result = truncated_svd(DenseTensor(np.diag([3.0, 4.0])), ([0], [1]), max_rank=2)
        assert_allclose(result.singular_values, [4.0, 3.0])

    @pytest.mark.parametrize('max_rank', [1, 2, 4])
    def test_reconstruction_error_equals_truncation_error(self, rng, max_rank):
        t = DenseTensor(_random(rng, 3, 2, 5))
        result = truncated_svd(t, ([0, 1], [2]), max_rank=max_rank)
        rebuilt = np.einsum('abx,x,xc->abc', result.left_isometry.data, result.singular_values,
                            result.right_isometry.data)
        relative = np.linalg.norm(rebuilt - t.data) / np.linalg.norm(t.data)
        assert relative == pytest.approx(result.truncation_error, abs=1e-10)

    def test_singular_values_descending_and_nonnegative(self, rng):
        result = truncated_svd(DenseTensor(_random(rng, 5, 7)), ([0], [1]), max_rank=5)
        s = result.singular_values
        assert np.all(s >= 0)
        assert np.all(np.diff(s) <= 0)

    def test_cutoff_drops_small_values(self):
        matrix = np.diag([1.0, 1e-3, 1e-12])
        result = truncated_svd(DenseTensor(matrix), ([0], [1]), max_rank=3, cutoff=1e-10)
        assert result.kept == 2

    def test_isometries(self, rng):
        result = truncated_svd(DenseTensor(_random(rng, 4, 6)), ([0], [1]), max_rank=3)
        u = result.left_isometry.data
        vh = result.right_isometry.data
        assert_allclose(u.conj().T @ u, np.eye(3), atol=1e-12)
        assert_allclose(vh @ vh.conj().T, np.eye(3), atol=1e-12)

    @pytest.mark.parametrize('split', [([0], [0]), ([0], []), ([0, 1], [1])])
    def test_invalid_split(self, rng, split):
        with pytest.raises(TensorArgumentError):
            truncated_svd(DenseTensor(_random(rng, 2, 3)), split, max_rank=2)

    def test_max_rank_must_be_positive(self, rng):
        with pytest.raises(TensorArgumentError):
            truncated_svd(DenseTensor(_random(rng, 2, 3)), ([0], [1]), max_rank=0)

    def test_non_finite_input(self):
        with pytest.raises(NumericalError):
            truncated_svd(DenseTensor(np.array([[1.0, np.nan], [0.0, 1.0]])), ([0], [1]), max_rank=2)
