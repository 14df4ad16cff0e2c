import numpy as np
import pytest
from hypothesis import given

from panfem.errors import AsymmetricInput
from panfem.tensor3 import (EPS, IDENTITY, cof_det, cross, ddot, outer_voigt, sym, trace,
                            unvoigt, voigt, wedge_fourth_order, fourth_to_voigt,
                            wedge_operator_matrix)

from conftest import matrices, random_sym


def cross_oracle(A, B):
    """Brute-force double permutation sum."""
    out = np.zeros((3, 3))
    for i in range(3):
        for a in range(3):
            for j in range(3):
                for k in range(3):
                    for b in range(3):
                        for g in range(3):
                            out[i, a] += EPS[i, j, k] * EPS[a, b, g] * A[j, b] * B[k, g]
    return out


def laplace_det(A):
    return (A[0, 0] * (A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
            - A[0, 1] * (A[1, 0] * A[2, 2] - A[1, 2] * A[2, 0])
            + A[0, 2] * (A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0]))


def adjugate_transpose(A):
    """Cofactor matrix from 2x2 minors."""
    cof = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(A, i, 0), j, 1)
            cof[i, j] = (-1) ** (i + j) * (minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0])
    return cof


class TestCross:
    def test_identity(self):
        np.testing.assert_array_equal(cross(IDENTITY, IDENTITY), 2 * IDENTITY)

    def test_diag_with_identity(self):
        A = np.diag([1.0, 2.0, 3.0])
        np.testing.assert_allclose(cross(A, IDENTITY), np.diag([5.0, 4.0, 3.0]))
        np.testing.assert_allclose(cross(A, IDENTITY), cross_oracle(A, IDENTITY))

    def test_diag_square(self):
        A = np.diag([2.0, 3.0, 4.0])
        np.testing.assert_allclose(cross(A, A), 2 * np.diag([12.0, 8.0, 6.0]))

    def test_matches_epsilon_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            A, B = rng.normal(size=(2, 3, 3))
            np.testing.assert_allclose(cross(A, B), cross_oracle(A, B), rtol=1e-13, atol=1e-13)

    def test_batched(self):
        rng = np.random.default_rng(1)
        A, B = rng.normal(size=(2, 5, 3, 3))
        out = cross(A, B)
        for k in range(5):
            np.testing.assert_allclose(out[k], cross(A[k], B[k]))

    def test_symmetry_many_pairs(self):
        rng = np.random.default_rng(2)
        A, B = rng.normal(size=(2, 1000, 3, 3))
        np.testing.assert_allclose(cross(A, B), cross(B, A), rtol=0, atol=1e-14)

    @given(matrices, matrices)
    def test_symmetric_property(self, A, B):
        np.testing.assert_allclose(cross(A, B), cross(B, A), atol=1e-12)

    @given(matrices, matrices, matrices)
    def test_bilinear(self, A, B, C):
        np.testing.assert_allclose(cross(A + 2.0 * C, B), cross(A, B) + 2.0 * cross(C, B),
                                   atol=1e-11)

    @given(matrices, matrices, matrices)
    def test_cyclic_triple_product(self, A, B, C):
        lhs = ddot(cross(A, B), C)
        rhs = ddot(cross(B, C), A)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


class TestCofDet:
    def test_identity(self):
        cof, det = cof_det(IDENTITY)
        np.testing.assert_array_equal(cof, IDENTITY)
        assert det == 1.0

    def test_diagonal(self):
        cof, det = cof_det(np.diag([4.0, 1.0, 1.0]))
        np.testing.assert_allclose(cof, np.diag([1.0, 4.0, 4.0]))
        assert det == pytest.approx(4.0)

    def test_laplace_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            A = rng.normal(size=(3, 3))
            cof, det = cof_det(A)
            np.testing.assert_allclose(cof, adjugate_transpose(A), rtol=1e-12, atol=1e-13)
            assert det == pytest.approx(laplace_det(A), rel=1e-13, abs=1e-14)

    def test_singular(self):
        A = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]])
        cof, det = cof_det(A)
        assert det == 0.0
        np.testing.assert_allclose(cof, adjugate_transpose(A))

    def test_inverse_relation(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            A = rng.normal(size=(3, 3)) + 2 * np.eye(3)
            cof, det = cof_det(A)
            np.testing.assert_allclose(cof, det * np.linalg.inv(A).T, rtol=1e-12, atol=1e-12)

    @given(matrices)
    def test_half_cross_square(self, A):
        cof, det = cof_det(A)
        np.testing.assert_allclose(cof, 0.5 * cross(A, A), atol=1e-12)
        assert abs(det - laplace_det(A)) <= 1e-12 * max(1.0, abs(det))


class TestVoigt:
    def test_identity_stress(self):
        np.testing.assert_array_equal(voigt(IDENTITY, "stress"), [1, 1, 1, 0, 0, 0])

    def test_shear_strain(self):
        A = np.zeros((3, 3))
        A[0, 1] = A[1, 0] = 1.0
        np.testing.assert_array_equal(voigt(A, "strain"), [0, 0, 0, 2, 0, 0])

    def test_order(self):
        A = np.array([[1.0, 4.0, 6.0], [4.0, 2.0, 5.0], [6.0, 5.0, 3.0]])
        np.testing.assert_array_equal(voigt(A), [1, 2, 3, 4, 5, 6])

    def test_contraction(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            S, E = random_sym(rng), random_sym(rng)
            direct = sum(S[i, j] * E[i, j] for i in range(3) for j in range(3))
            assert voigt(S, "stress") @ voigt(E, "strain") == pytest.approx(direct, rel=1e-13)

    @pytest.mark.parametrize("role", ["stress", "strain"])
    def test_round_trip(self, role):
        A = random_sym(np.random.default_rng(6))
        np.testing.assert_allclose(unvoigt(voigt(A, role), role), A, rtol=1e-15)

    def test_asymmetric(self):
        A = np.eye(3)
        A[0, 1] = 1e-3
        with pytest.raises(AsymmetricInput):
            voigt(A)

    def test_unknown_role(self):
        with pytest.raises(ValueError):
            voigt(IDENTITY, "flux")

    @given(matrices)
    def test_round_trip_property(self, A):
        S = sym(A)
        np.testing.assert_allclose(unvoigt(voigt(S, "strain"), "strain"), S, atol=1e-15)


class TestWedgeOperator:
    def test_identity_on_identity(self):
        np.testing.assert_allclose(wedge_operator_matrix(IDENTITY) @ voigt(IDENTITY, "strain"),
                                   voigt(2 * IDENTITY))

    def test_identity_on_symmetric(self):
        B = random_sym(np.random.default_rng(7))
        expected = voigt(trace(B) * IDENTITY - B)
        np.testing.assert_allclose(wedge_operator_matrix(IDENTITY) @ voigt(B, "strain"), expected,
                                   atol=1e-14)
        np.testing.assert_allclose(voigt(cross_oracle(IDENTITY, B)), expected, atol=1e-14)

    def test_matches_cross(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            A, B = random_sym(rng), random_sym(rng)
            np.testing.assert_allclose(wedge_operator_matrix(A) @ voigt(B, "strain"),
                                       voigt(cross(A, B)), atol=1e-13)

    def test_linearity(self):
        rng = np.random.default_rng(9)
        A1, A2 = random_sym(rng), random_sym(rng)
        np.testing.assert_allclose(wedge_operator_matrix(A1 + A2),
                                   wedge_operator_matrix(A1) + wedge_operator_matrix(A2),
                                   atol=1e-14)

    def test_fourth_order_route(self):
        A = random_sym(np.random.default_rng(10))
        np.testing.assert_allclose(fourth_to_voigt(wedge_fourth_order(A)),
                                   wedge_operator_matrix(A), atol=1e-14)

    def test_asymmetric(self):
        with pytest.raises(AsymmetricInput):
            wedge_operator_matrix(np.arange(9.0).reshape(3, 3))

    def test_outer(self):
        a, b = np.arange(6.0), np.ones(6)
        np.testing.assert_array_equal(outer_voigt(a, b), np.outer(a, b))
