import numpy as np
import pytest

from ffrelay import numkit


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestToeplitzFilter:
    def test_single_tap_is_identity(self):
        assert np.array_equal(numkit.toeplitz_filter([1.0], 3), np.eye(3))

    def test_two_taps_unrolled(self):
        expected = np.array([[1, 2, 0], [0, 1, 2]], dtype=complex)
        assert np.array_equal(numkit.toeplitz_filter([1, 2], 2), expected)

    def test_band_structure_matches_tap_lookup(self):
        rng = np.random.default_rng(0)
        v = crandn(rng, 3)
        M = numkit.toeplitz_filter(v, 32)
        for row in range(32):
            for col in range(M.shape[1]):
                tap = col - row
                want = v[tap] if 0 <= tap <= 2 else 0.0
                assert M[row, col] == want

    def test_apply_equals_windowed_convolution(self):
        # output window of the filter matrix = causal convolution restricted
        # to the newest-first window
        rng = np.random.default_rng(1)
        for _ in range(5):
            L, rows, n_in = rng.integers(1, 5), 8, None
            v = crandn(rng, L)
            M = numkit.toeplitz_filter(v, rows)
            x = crandn(rng, M.shape[1])
            # newest-first: y[a] = sum_t v[t] x[a + t]
            direct = np.array([np.dot(v, x[a:a + L]) for a in range(rows)])
            assert np.abs(M @ x - direct).max() < 1e-12

    def test_empty_vector_rejected(self):
        with pytest.raises(ValueError):
            numkit.toeplitz_filter([], 3)


class TestCirculantEigenvalues:
    def test_identity_circulant(self):
        assert np.allclose(numkit.circulant_eigenvalues([1, 0, 0, 0]),
                           np.ones(4))

    def test_shift_circulant(self):
        lam = numkit.circulant_eigenvalues([0, 1, 0, 0])
        assert np.allclose(lam, [1, -1j, -1, 1j])

    @pytest.mark.parametrize("N", [2, 3, 4, 8, 16, 33, 64])
    def test_matches_dense_eigensolver_as_multiset(self, N):
        rng = np.random.default_rng(N)
        c = crandn(rng, N)
        # brute-force oracle: form the circulant explicitly, eigendecompose
        C = np.empty((N, N), dtype=complex)
        for a in range(N):
            for b in range(N):
                C[a, b] = c[(b - a) % N]
        brute = np.linalg.eigvals(C)
        mine = numkit.circulant_eigenvalues(c)
        key = lambda z: (round(z.real, 8), round(z.imag, 8))
        assert sorted(map(key, brute)) == pytest.approx(
            sorted(map(key, mine)), abs=1e-10)

    def test_eigenvector_convention(self):
        # lambda_k pairs with xi_k(a) = w^(-ak)/sqrt(N)
        rng = np.random.default_rng(5)
        N = 8
        c = crandn(rng, N)
        C = np.array([[c[(b - a) % N] for b in range(N)] for a in range(N)])
        lam = numkit.circulant_eigenvalues(c)
        for k in range(N):
            xi = np.exp(-2j * np.pi * np.arange(N) * k / N) / np.sqrt(N)
            assert np.abs(C @ xi - lam[k] * xi).max() < 1e-10


class TestDftRows:
    def test_smallest_idft(self):
        W, _ = numkit.dft_rows(2, 0)
        assert np.allclose(W, np.array([[1, 1], [1, -1]]) / np.sqrt(2))

    def test_unitary(self):
        W, _ = numkit.dft_rows(4, 0)
        assert np.abs(W.conj().T @ W - np.eye(4)).max() < 1e-14

    def test_extension_rows_wrap_once(self):
        W, Wx = numkit.dft_rows(8, 3)
        assert Wx.shape == (11, 8)
        assert np.array_equal(Wx[8:], Wx[:3])
        # direct construction: rows descend from index N-1 and wrap
        for c in range(11):
            assert np.array_equal(Wx[c], W[(8 - 1 - c) % 8])

    def test_ext_longer_than_n_rejected(self):
        with pytest.raises(ValueError):
            numkit.dft_rows(4, 5)


class TestHermitianEig:
    def test_identity(self):
        vals, _ = numkit.hermitian_eig(np.eye(3))
        assert np.allclose(vals, [1, 1, 1])

    def test_diagonal(self):
        vals, vecs = numkit.hermitian_eig(np.diag([3.0, 1.0]))
        assert np.allclose(vals, [3, 1])
        assert np.allclose(np.abs(vecs), np.eye(2))

    def test_rank_one_construction(self):
        rng = np.random.default_rng(2)
        u = crandn(rng, 5)
        vals, vecs = numkit.hermitian_eig(np.outer(u, u.conj()))
        assert abs(vals[0] - np.linalg.norm(u) ** 2) < 1e-10 * vals[0]
        assert np.all(np.abs(vals[1:]) <= 1e-10 * vals[0])

    def test_reconstruction_and_ordering(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            A = crandn(rng, 6, 6)
            A = A + A.conj().T
            vals, vecs = numkit.hermitian_eig(A)
            assert np.all(np.diff(vals) <= 1e-12)
            recon = (vecs * vals) @ vecs.conj().T
            assert np.linalg.norm(recon - A) <= 1e-10 * np.linalg.norm(A)

    def test_psd_eigenvalues_nonnegative(self):
        rng = np.random.default_rng(4)
        B = crandn(rng, 6, 3)
        vals, _ = numkit.hermitian_eig(B @ B.conj().T)
        assert vals.min() >= -1e-10 * max(vals.max(), 1.0)

    def test_non_hermitian_rejected(self):
        A = np.array([[1.0, 2.0], [0.0, 1.0]])
        with pytest.raises(ValueError):
            numkit.hermitian_eig(A)


class TestKron:
    def test_identity_scalar(self):
        assert np.array_equal(numkit.kron(np.eye(2), [[5.0]]), np.diag([5.0, 5.0]))

    def test_block_shift(self):
        A = np.array([[0, 1], [0, 0]])
        K = numkit.kron(A, np.eye(2))
        expected = np.zeros((4, 4))
        expected[0, 2] = expected[1, 3] = 1.0
        assert np.array_equal(K, expected)

    def test_elementwise_definition(self):
        rng = np.random.default_rng(6)
        A = crandn(rng, 2, 3)
        B = crandn(rng, 3, 2)
        K = numkit.kron(A, B)
        # triple-loop oracle
        for i in range(2):
            for j in range(3):
                for a in range(3):
                    for b in range(2):
                        assert K[i * 3 + a, j * 2 + b] == A[i, j] * B[a, b]

    def test_mixed_product_rule(self):
        rng = np.random.default_rng(7)
        A, C = crandn(rng, 2, 3), crandn(rng, 3, 2)
        B, D = crandn(rng, 2, 2), crandn(rng, 2, 3)
        lhs = numkit.kron(A, B) @ numkit.kron(C, D)
        rhs = numkit.kron(A @ C, B @ D)
        assert np.abs(lhs - rhs).max() < 1e-12
