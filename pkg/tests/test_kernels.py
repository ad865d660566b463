import numpy as np
import pytest

from hankelid import (
    Dataset,
    ImpulseResponse,
    NotPositiveDefiniteError,
    SplineHyper,
    SubspaceBasis,
    build_hankel,
    build_weights,
    combined_precision,
    hankel_dims,
    hankel_permutation,
    hankel_precisions,
    q_matrix,
    spline_precision,
    tc_kernel,
    weighted_hankel,
)
from hankelid.kernels import build_kernel_system, tc_precision_block
from conftest import random_orthogonal


def random_hankel_setup(rng, p, m, T, empirical=False):
    dims = hankel_dims(T, p, m)
    if empirical:
        d = Dataset(rng.standard_normal((200, m)), rng.standard_normal((200, p)))
        weights = build_weights(d, dims, "empirical")
    else:
        weights = build_weights(
            Dataset(np.ones((T + 5, m)), np.ones((T + 5, p))), dims, "identity"
        )
    pr = p * dims.r
    n = int(rng.integers(0, pr + 1))
    basis = SubspaceBasis(random_orthogonal(rng, pr), n, np.zeros(pr))
    h = ImpulseResponse(rng.standard_normal(T * m * p), T=T, m=m, p=p)
    return dims, weights, basis, h


class TestTcKernel:
    def test_entry_values(self):
        K = tc_kernel(SplineHyper(1.0, 0.5), 3)
        assert K[0, 0] == 0.5
        K2 = tc_kernel(SplineHyper(2.0, 0.5), 3)
        assert K2[1, 2] == pytest.approx(0.25)

    def test_positive_definite(self):
        K = tc_kernel(SplineHyper(1.0, 0.9), 30)
        evals = np.linalg.eigvalsh(K)
        assert np.all(evals > 0)
        np.linalg.cholesky(K)  # must not raise


class TestSplinePrecision:
    def test_T1_scalar(self):
        G0 = spline_precision(SplineHyper(2.0, 0.5), 1, 1, 1)
        assert G0 == pytest.approx(np.array([[1.0]]))

    def test_inverse_of_kernel(self):
        hp = SplineHyper(1.0, 0.8)
        T = 40
        K = tc_kernel(hp, T)
        G0 = tc_precision_block(hp, T)
        assert np.max(np.abs(G0 @ K - np.eye(T))) < 1e-8

    def test_matches_dense_inversion_up_to_T60(self):
        for T in (2, 7, 25, 60):
            hp = SplineHyper(0.7, 0.9)
            dense = np.linalg.inv(tc_kernel(hp, T))
            analytic = tc_precision_block(hp, T)
            scale = np.max(np.abs(dense))
            assert np.max(np.abs(dense - analytic)) < 1e-8 * scale

    def test_blockdiag_channels(self):
        hp = SplineHyper(1.3, 0.6)
        T = 4
        G0 = spline_precision(hp, T, 2, 1)
        block = tc_precision_block(hp, T)
        assert np.array_equal(G0[:T, :T], block)
        assert np.array_equal(G0[T:, T:], block)
        assert not np.any(G0[:T, T:])

    def test_degenerate_hyper_rejected(self):
        with pytest.raises(ValueError):
            tc_precision_block(SplineHyper(0.0, 0.5), 3)
        with pytest.raises(ValueError):
            tc_precision_block(SplineHyper(1.0, 1.0), 3)
        with pytest.raises(ValueError):
            tc_precision_block(SplineHyper(1.0, 0.0), 3)


class TestQMatrix:
    def test_empty_signal_subspace(self, rng):
        basis = SubspaceBasis(random_orthogonal(rng, 4), 0, np.zeros(4))
        assert np.allclose(q_matrix(basis, 3.0, 2.0), 2.0 * np.eye(4))

    def test_equal_weights_give_identity(self, rng):
        basis = SubspaceBasis(random_orthogonal(rng, 5), 2, np.zeros(5))
        assert np.max(np.abs(q_matrix(basis, 1.5, 1.5) - 1.5 * np.eye(5))) < 1e-12

    def test_eigenvalues(self, rng):
        basis = SubspaceBasis(random_orthogonal(rng, 6), 2, np.zeros(6))
        Q = q_matrix(basis, 5.0, 0.5)
        evals = np.sort(np.linalg.eigvalsh(Q))
        assert np.allclose(evals, [0.5, 0.5, 0.5, 0.5, 5.0, 5.0])

    def test_rotation_invariance_within_signal_block(self, rng):
        pr, n = 6, 3
        U = random_orthogonal(rng, pr)
        R = random_orthogonal(rng, n)
        U_rot = U.copy()
        U_rot[:, :n] = U[:, :n] @ R
        b1 = SubspaceBasis(U, n, np.zeros(pr))
        b2 = SubspaceBasis(U_rot, n, np.zeros(pr))
        assert np.max(np.abs(q_matrix(b1, 2.0, 0.1) - q_matrix(b2, 2.0, 0.1))) < 1e-10


class TestHankelPrecisions:
    def test_zero_signal_dimension(self, rng):
        dims, weights, basis, _ = random_hankel_setup(rng, 2, 1, 5)
        basis = SubspaceBasis(basis.U, 0, basis.s)
        G1, G2 = hankel_precisions(dims, weights, basis, 2, 1)
        assert not np.any(G1)

    def test_full_signal_dimension_frobenius(self, rng):
        p, m, T = 2, 1, 5
        dims = hankel_dims(T, p, m)
        pr = p * dims.r
        weights = build_weights(Dataset(np.ones((9, m)), np.ones((9, p))), dims)
        basis = SubspaceBasis(random_orthogonal(rng, pr), pr, np.zeros(pr))
        G1, G2 = hankel_precisions(dims, weights, basis, p, m)
        assert not np.any(G2)
        h = ImpulseResponse(rng.standard_normal(T * m * p), T=T, m=m, p=p)
        H = build_hankel(h, dims)
        assert h.h @ G1 @ h.h == pytest.approx(np.sum(H**2), rel=1e-12)

    @pytest.mark.parametrize("empirical", [False, True])
    def test_trace_form_oracle(self, rng, empirical):
        for _ in range(10):
            p, m = int(rng.integers(1, 3)), int(rng.integers(1, 3))
            T = int(rng.integers(2, 8))
            dims, weights, basis, h = random_hankel_setup(rng, p, m, T, empirical)
            lam1, lam2 = rng.uniform(0.1, 3.0, size=2)
            G1, G2 = hankel_precisions(dims, weights, basis, p, m)
            Ht = weighted_hankel(h, dims, weights)
            Q = q_matrix(basis, lam1, lam2)
            lhs = h.h @ (lam1 * G1 + lam2 * G2) @ h.h
            rhs = np.trace(Ht @ Ht.T @ Q)
            assert lhs == pytest.approx(rhs, abs=1e-10 * max(1.0, abs(rhs)))

    def test_matches_dense_kron_oracle(self, rng):
        p, m, T = 2, 2, 6
        dims, weights, basis, _ = random_hankel_setup(rng, p, m, T, empirical=True)
        G1, G2 = hankel_precisions(dims, weights, basis, p, m)
        P = hankel_permutation(T, p, m, dims).toarray()
        Gw = weights.W1.T @ weights.W1
        for G, Ub in ((G1, basis.U_n), (G2, basis.U_n_perp)):
            W2U = weights.W2 @ Ub
            dense = P.T @ np.kron(W2U @ W2U.T, Gw) @ P
            assert np.max(np.abs(G - dense)) < 1e-10 * max(1.0, np.max(np.abs(dense)))

    def test_sum_is_basis_free_gram(self, rng):
        p, m, T = 2, 1, 6
        dims, weights, basis, _ = random_hankel_setup(rng, p, m, T, empirical=True)
        G1, G2 = hankel_precisions(dims, weights, basis, p, m)
        P = hankel_permutation(T, p, m, dims).toarray()
        gram = P.T @ np.kron(weights.W2 @ weights.W2.T, weights.W1.T @ weights.W1) @ P
        assert np.max(np.abs(G1 + G2 - gram)) < 1e-10 * max(1.0, np.max(np.abs(gram)))


class TestCombinedPrecision:
    def make_system(self, rng, p=1, m=1, T=4):
        dims = hankel_dims(T, p, m)
        weights = build_weights(Dataset(np.ones((9, m)), np.ones((9, p))), dims)
        pr = p * dims.r
        basis = SubspaceBasis(random_orthogonal(rng, pr), pr // 2, np.zeros(pr))
        return build_kernel_system(SplineHyper(1.0, 0.7), T, p, m, dims, weights, basis)

    def test_spline_only(self, rng):
        ks = self.make_system(rng)
        K_inv = combined_precision(ks, [1.0, 0.0, 0.0])
        assert np.array_equal(K_inv, ks.G0)

    def test_nuclear_norm_special_case(self, rng):
        # identity weights, lam1 = lam2: penalty = lam * sum of squared
        # singular values, and the precision is lam * P^T P
        p, m, T = 1, 2, 5
        dims = hankel_dims(T, p, m)
        weights = build_weights(Dataset(np.ones((T + 9, m)), np.ones((T + 9, p))), dims)
        pr = p * dims.r
        basis = SubspaceBasis(random_orthogonal(rng, pr), 1, np.zeros(pr))
        ks = build_kernel_system(SplineHyper(1.0, 0.7), T, p, m, dims, weights, basis)
        lam_star = 1.7
        K_inv = combined_precision(ks, [0.0, lam_star, lam_star], check=False)
        P = hankel_permutation(T, p, m, dims).toarray()
        assert np.max(np.abs(K_inv - lam_star * P.T @ P)) < 1e-10
        h = ImpulseResponse(rng.standard_normal(T * m * p), T=T, m=m, p=p)
        s = np.linalg.svd(build_hankel(h, dims), compute_uv=False)
        penalty = h.h @ K_inv @ h.h
        assert penalty == pytest.approx(lam_star * np.sum(s**2), rel=1e-10)

    def test_positive_lambda_is_pd(self, rng):
        ks = self.make_system(rng, p=2, m=1, T=5)
        K_inv = combined_precision(ks, rng.uniform(0.1, 2.0, size=3))
        assert np.min(np.linalg.eigvalsh(K_inv)) > 0

    def test_non_pd_signaled(self, rng):
        ks = self.make_system(rng)
        # zero out everything: clearly not PD
        with pytest.raises(NotPositiveDefiniteError):
            combined_precision(ks, [0.0, 0.0, 0.0])

    def test_invalid_lambda_rejected(self, rng):
        ks = self.make_system(rng)
        with pytest.raises(ValueError):
            combined_precision(ks, [-0.5, 1.0, 1.0])


class TestSubspaceBasis:
    def test_orthogonality_enforced(self, rng):
        U = random_orthogonal(rng, 4)
        U[:, 0] *= 1.01
        with pytest.raises(ValueError):
            SubspaceBasis(U, 1, np.zeros(4))

    def test_partition(self, rng):
        U = random_orthogonal(rng, 5)
        b = SubspaceBasis(U, 2, np.zeros(5))
        assert b.U_n.shape == (5, 2)
        assert b.U_n_perp.shape == (5, 3)
        assert np.array_equal(np.hstack([b.U_n, b.U_n_perp]), U)


class TestErrorContracts:
    def test_hankel_precisions_dimension_mismatch(self, rng):
        dims = hankel_dims(5, 2, 1)
        weights = build_weights(Dataset(np.ones((9, 1)), np.ones((9, 2))), dims)
        wrong_basis = SubspaceBasis(random_orthogonal(rng, 3), 1, np.zeros(3))
        with pytest.raises(ValueError, match="basis dimension"):
            hankel_precisions(dims, weights, wrong_basis, 2, 1)

    def test_lambda_vector_validation(self):
        from hankelid import LambdaVec

        v = LambdaVec(1.0, 0.5, 2.0)
        assert np.array_equal(v.as_array(), [1.0, 0.5, 2.0])
        with pytest.raises(ValueError):
            LambdaVec(-0.1, 0.0, 0.0)
