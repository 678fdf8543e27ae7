import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from romdb import matcore
from romdb.errors import (
    InvalidInputError,
    LogUndefinedError,
    NotSpdError,
    SingularMatrixError,
)


def random_spd(rng, n, shift=0.5):
    a = rng.standard_normal((n, n))
    return a @ a.T + shift * np.eye(n)


class TestSvd:
    def test_identity(self):
        u, s, vh = matcore.svd(np.eye(3))
        assert np.allclose(s, [1, 1, 1])

    def test_diagonal(self):
        u, s, vh = matcore.svd(np.diag([3.0, 2.0]))
        assert np.allclose(s, [3, 2])
        assert np.allclose(np.abs(u), np.eye(2))
        assert np.allclose(np.abs(vh), np.eye(2))

    def test_reconstruction_oracle(self):
        rng = np.random.default_rng(0)
        m = rng.standard_normal((5, 3))
        u, s, vh = matcore.svd(m)
        # independent oracle: multiply the factors back together
        rebuilt = u @ np.diag(s) @ vh
        assert np.linalg.norm(rebuilt - m) <= 1e-12 * np.linalg.norm(m)
        assert np.allclose(u.T @ u, np.eye(3), atol=1e-12)
        assert np.all(np.diff(s) <= 0)

    def test_orthogonal_matrix_singular_values(self):
        rng = np.random.default_rng(1)
        q = matcore.random_orthogonal(6, rng)
        _, s, _ = matcore.svd(q)
        assert np.allclose(s, 1.0, atol=1e-12)

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidInputError):
            matcore.svd(np.array([[np.nan, 0.0], [0.0, 1.0]]))


class TestCholesky:
    def test_scaled_identity(self):
        assert np.allclose(matcore.cholesky(4.0 * np.eye(2)), 2.0 * np.eye(2))

    def test_hand_case(self):
        s = matcore.cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]))
        assert np.allclose(s, [[2.0, 0.0], [1.0, np.sqrt(2.0)]])

    def test_indefinite_pivot(self):
        with pytest.raises(NotSpdError) as err:
            matcore.cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))
        # second pivot fails (0-based index 1)
        assert err.value.pivot == 1

    def test_asymmetric_rejected(self):
        with pytest.raises(InvalidInputError):
            matcore.cholesky(np.array([[1.0, 0.5], [0.0, 1.0]]))

    @pytest.mark.parametrize("n", [2, 5, 9])
    def test_spd_reconstruction(self, n):
        rng = np.random.default_rng(n)
        m = random_spd(rng, n)
        s = matcore.cholesky(m)
        assert np.linalg.norm(s @ s.T - m) <= 1e-12 * np.linalg.norm(m)
        assert np.allclose(np.triu(s, 1), 0.0)
        assert np.all(np.diag(s) > 0)


class TestSymEig:
    def test_diagonal(self):
        vals, _ = matcore.sym_eig(np.diag([5.0, 1.0]))
        assert np.allclose(vals, [5, 1])

    def test_identity(self):
        vals, _ = matcore.sym_eig(np.eye(3))
        assert np.allclose(vals, 1.0)

    def test_residual_oracle(self):
        rng = np.random.default_rng(3)
        m = random_spd(rng, 6) - 2.0 * np.eye(6)
        vals, vecs = matcore.sym_eig(m)
        norm = np.linalg.norm(m, 2)
        for i in range(6):
            assert np.linalg.norm(m @ vecs[:, i] - vals[i] * vecs[:, i]) <= 1e-11 * norm
        assert np.allclose(vecs.T @ vecs, np.eye(6), atol=1e-12)
        assert np.all(np.diff(vals) <= 0)

    def test_asymmetric_rejected(self):
        with pytest.raises(InvalidInputError):
            matcore.sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestLogExp:
    def test_log_identity(self):
        assert np.allclose(matcore.mat_log_spd(np.eye(4)), 0.0, atol=1e-14)

    def test_log_scaled_identity(self):
        assert np.allclose(matcore.mat_log_spd(np.e * np.eye(2)), np.eye(2))

    def test_round_trip(self):
        rng = np.random.default_rng(4)
        m = random_spd(rng, 5)
        back = matcore.mat_exp_sym(matcore.mat_log_spd(m))
        assert np.linalg.norm(back - m) <= 1e-10 * np.linalg.norm(m)

    def test_round_trip_eig_oracle(self):
        # independent oracle: scalar log through an explicit eigenbasis
        rng = np.random.default_rng(5)
        m = random_spd(rng, 5)
        vals, vecs = np.linalg.eigh(m)
        oracle = vecs @ np.diag(np.log(vals)) @ vecs.T
        assert np.allclose(matcore.mat_log_spd(m), oracle, atol=1e-10)

    def test_exp_zero_structure(self):
        out = matcore.mat_exp_sym(np.zeros((3, 3)))
        assert np.allclose(np.diag(out), 1.0)
        off = out - np.diag(np.diag(out))
        assert np.max(np.abs(off)) <= 1e-15

    def test_not_spd(self):
        with pytest.raises(NotSpdError):
            matcore.mat_log_spd(np.diag([1.0, -1.0]))


class TestGeneralLogExp:
    def test_identity(self):
        assert np.allclose(matcore.mat_log_general(np.eye(3)), 0.0, atol=1e-14)

    def test_scaled_identity(self):
        assert np.allclose(matcore.mat_log_general(2.0 * np.eye(3)), np.log(2.0) * np.eye(3))

    def test_round_trip(self):
        rng = np.random.default_rng(6)
        m = np.eye(4) + 0.4 * rng.standard_normal((4, 4))
        back = matcore.mat_exp_general(matcore.mat_log_general(m))
        assert np.linalg.norm(back - m) <= 1e-8 * np.linalg.norm(m)
        assert not np.iscomplexobj(matcore.mat_log_general(m))

    def test_negative_axis_rejected(self):
        with pytest.raises(LogUndefinedError):
            matcore.mat_log_general(np.diag([-1.0, 2.0]))


class TestSolve:
    def test_identity(self):
        b = np.arange(6.0).reshape(3, 2)
        assert np.allclose(matcore.solve(np.eye(3), b), b)

    def test_scaled_identity(self):
        assert np.allclose(matcore.solve(2.0 * np.eye(3), np.eye(3)), 0.5 * np.eye(3))

    def test_residual_oracle(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((8, 8))
        b = rng.standard_normal((8, 3))
        x = matcore.solve(a, b)
        res = np.linalg.norm(a @ x - b)
        assert res <= 1e-10 * np.linalg.norm(a) * max(np.linalg.norm(x), 1.0)

    def test_singular(self):
        with pytest.raises(SingularMatrixError) as err:
            matcore.solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))
        assert err.value.cond_estimate is None or err.value.cond_estimate > 1e10

    def test_vector_rhs(self):
        rng = np.random.default_rng(8)
        a = random_spd(rng, 4)
        b = rng.standard_normal(4)
        x = matcore.solve(a, b)
        assert x.shape == (4,)
        assert np.allclose(a @ x, b)


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_cholesky_exists_for_all_spd(n, seed):
    rng = np.random.default_rng(seed)
    m = random_spd(rng, n, shift=0.1)
    s = matcore.cholesky(m)
    assert np.linalg.norm(s @ s.T - m) <= 1e-12 * max(np.linalg.norm(m), 1e-6)
