import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from panfem.calibration import init_params
from panfem.errors import NegativeWeight, NonPositiveJacobian
from panfem.kinematics import invariants
from panfem.material import (MR_COMPRESSIBLE, MR_NEARLY_INCOMPRESSIBLE, MooneyRivlin, MrParams,
                             PannParams, growth, material_tangent, mr_eval, pann_build,
                             pann_nn_eval, pk2, softplus, stress_and_tangent)
from panfem.tensor3 import IDENTITY, voigt

from conftest import random_rotation, random_spd


def sym_from6(c):
    return np.array([[c[0], c[3], c[5]], [c[3], c[1], c[4]], [c[5], c[4], c[2]]])


def energy_of_C(model, C):
    inv = invariants(C)
    return model.response(inv.I1, inv.I2, inv.J).w


def fd_grad(f, x, h=1e-6):
    g = np.zeros((np.size(f(x)), x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h * (1 + abs(x[i]))
        g[:, i] = (np.atleast_1d(f(x + e)) - np.atleast_1d(f(x - e))) / (2 * e[i])
    return g


pann_seeds = st.integers(0, 10_000)


class TestMooneyRivlin:
    def test_table_params(self):
        assert MR_COMPRESSIBLE.d == 2 * (MR_COMPRESSIBLE.a + 2 * MR_COMPRESSIBLE.b) == 2327.5
        assert MR_NEARLY_INCOMPRESSIBLE.d == 2 * (126.0 + 2 * 252.0) == 1260.0

    def test_reference(self):
        r = mr_eval(MR_COMPRESSIBLE, 3.0, 3.0, 1.0)
        assert r.w == 0.0
        np.testing.assert_allclose(r.dw, [831.25, 166.25, -2327.5])

    def test_hand_value(self):
        r = mr_eval(MR_NEARLY_INCOMPRESSIBLE, 6.0, 9.0, 2.0)
        expected = 126 * 3 + 252 * 6 + 81512 / 2 - 1260 * np.log(2.0)
        assert r.w == pytest.approx(expected, rel=1e-15)
        assert r.d2w[2, 2] == pytest.approx(81512 + 1260 / 4)
        assert np.count_nonzero(r.d2w) == 1

    @pytest.mark.parametrize("params", [MR_COMPRESSIBLE, MR_NEARLY_INCOMPRESSIBLE])
    def test_stress_free(self, params):
        assert np.abs(pk2(MooneyRivlin(params), IDENTITY)).max() <= 1e-10

    def test_inconsistent_d_warns(self):
        with pytest.warns(UserWarning):
            MrParams(1.0, 1.0, 1.0, 1.0)

    def test_consistent_d_silent(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            MrParams(1.0, 1.0, 1.0, 6.0)

    def test_negative(self):
        with pytest.raises(ValueError):
            MrParams(-1.0, 0.0, 0.0, -2.0)

    def test_non_positive_J(self):
        with pytest.raises(NonPositiveJacobian):
            mr_eval(MR_COMPRESSIBLE, 3.0, 3.0, 0.0)


class TestNetwork:
    def test_single_neuron(self):
        p = PannParams([[1.0, 0.0, 0.0, 0.0]], [1.0], [0.0])
        r = pann_nn_eval(p, np.array([0.0, 5.0, 1.0, -1.0]))
        assert r.w == pytest.approx(np.log(2.0))
        assert r.dw[0] == pytest.approx(0.5)
        assert r.d2w[0, 0] == pytest.approx(0.25)

    def test_softplus_overflow_safe(self):
        x = np.array([-800.0, -40.0, 0.0, 40.0, 800.0])
        y = softplus(x)
        assert np.all(np.isfinite(y))
        assert y[-1] == 800.0
        assert y[3] == pytest.approx(40.0 + np.log1p(np.exp(-40.0)), rel=1e-15)
        assert y[0] == 0.0

    def test_first_derivative_fd(self):
        p = init_params(8, 11)
        q = np.array([3.4, 3.1, 1.1, -1.1])
        fd = fd_grad(lambda x: pann_nn_eval(p, x).w, q)[0]
        np.testing.assert_allclose(pann_nn_eval(p, q).dw, fd, rtol=1e-7)

    @given(pann_seeds)
    def test_hessian_psd_and_monotone(self, seed):
        rng = np.random.default_rng(seed)
        p = init_params(8, seed)
        q = rng.uniform(0.0, 6.0, (100, 4))
        r = pann_nn_eval(p, q)
        lam = np.linalg.eigvalsh(r.d2w)
        norm = np.abs(r.d2w).max()
        assert lam.min() >= -1e-12 * max(norm, 1e-300)
        assert r.dw.min() >= 0.0


class TestPannBuild:
    def test_single_neuron_constants(self):
        m = pann_build(PannParams([[1.0, 0.0, 0.0, 0.0]], [1.0], [0.0]))
        assert m.n_frak == pytest.approx(1.9051482, abs=1e-7)
        assert m.w_energy == pytest.approx(-3.0485874, abs=1e-7)

    def test_negative_weight(self):
        with pytest.raises(NegativeWeight):
            pann_build(PannParams([[1.0, -0.1, 0.0, 0.0]], [1.0], [0.0]))
        with pytest.raises(NegativeWeight):
            pann_build(PannParams([[1.0, 0.0, 0.0, 0.0]], [-1.0], [0.0]))

    @given(pann_seeds, st.integers(1, 16))
    def test_normalization(self, seed, n):
        m = pann_build(init_params(n, seed))
        r = m.response(3.0, 3.0, 1.0)
        assert abs(r.w) <= 1e-12 * max(1.0, abs(m.w_energy))
        assert np.abs(pk2(m, IDENTITY)).max() <= 1e-10 * max(1.0, m.n_frak)

    def test_growth(self):
        g, dg, d2g = growth(np.array([1.0, 2.0]))
        assert g[0] == 0.0 and dg[0] == 0.0
        assert dg[1] == pytest.approx(0.75)
        zero = pann_build(PannParams(np.zeros((1, 4)), [0.0], [0.0]))
        assert zero.response(3.0, 3.0, 2.0).dw[2] == pytest.approx(0.75)

    def test_growth_barrier(self, pann):
        J = np.linspace(0.01, 0.2, 30)
        w = pann.energy(3.0, 3.0, J)
        assert np.all(np.diff(w) < 0.0)
        assert w[0] > 1e3

    def test_energy_matches_response(self, pann):
        I1, I2, J = np.array([3.5, 4.0]), np.array([3.2, 5.0]), np.array([0.9, 1.3])
        np.testing.assert_allclose(pann.energy(I1, I2, J), pann.response(I1, I2, J).w)

    def test_response_fd(self, pann):
        rng = np.random.default_rng(12)
        for _ in range(100):
            x = np.array([rng.uniform(2.5, 6), rng.uniform(2.5, 6), rng.uniform(0.5, 2)])
            r = pann.response(*x)
            g = fd_grad(lambda y: pann.response(*y).w, x)[0]
            H = fd_grad(lambda y: pann.response(*y).dw, x)
            np.testing.assert_allclose(r.dw, g, rtol=1e-6, atol=1e-8 * np.abs(g).max())
            np.testing.assert_allclose(r.d2w, H, rtol=1e-6, atol=1e-6 * np.abs(H).max())


class TestStress:
    def test_energy_gradient(self, model):
        rng = np.random.default_rng(13)
        for _ in range(10):
            C = random_spd(rng)
            c6 = voigt(C)
            g = fd_grad(lambda c: energy_of_C(model, sym_from6(c)), c6)[0]
            S = voigt(pk2(model, C))
            half = np.array([0.5, 0.5, 0.5, 1.0, 1.0, 1.0])
            np.testing.assert_allclose(S * half, g, rtol=1e-6, atol=1e-6 * np.abs(g).max())

    def test_symmetric(self, model):
        S = pk2(model, random_spd(np.random.default_rng(14)))
        np.testing.assert_allclose(S, S.T, rtol=1e-14)

    def test_isotropy(self, model):
        rng = np.random.default_rng(15)
        for _ in range(10):
            C, Q = random_spd(rng), random_rotation(rng)
            np.testing.assert_allclose(pk2(model, Q.T @ C @ Q), Q.T @ pk2(model, C) @ Q,
                                       rtol=1e-10, atol=1e-9)


class TestTangent:
    def _fd(self, model, C):
        c6 = voigt(C)
        J = fd_grad(lambda c: voigt(pk2(model, sym_from6(c))), c6)
        half = np.array([0.5, 0.5, 0.5, 1.0, 1.0, 1.0])
        return J / half[None, :]

    def test_fd(self, model):
        rng = np.random.default_rng(16)
        for _ in range(5):
            C = random_spd(rng)
            D = material_tangent(model, C)
            fd = self._fd(model, C)
            assert np.abs(D - fd).max() / np.abs(fd).max() <= 1e-5

    def test_reference(self, mr):
        D = material_tangent(mr, IDENTITY)
        fd = self._fd(mr, IDENTITY)
        assert np.abs(D - fd).max() / np.abs(fd).max() <= 1e-7

    def test_major_symmetry(self, model):
        D = material_tangent(model, random_spd(np.random.default_rng(17)))
        np.testing.assert_allclose(D, D.T, rtol=1e-12, atol=1e-12 * np.abs(D).max())

    def test_combined_call(self, model):
        C = random_spd(np.random.default_rng(18))
        w, S, D = stress_and_tangent(model, C)
        np.testing.assert_allclose(S, pk2(model, C))
        np.testing.assert_allclose(D, material_tangent(model, C))
        assert w == pytest.approx(energy_of_C(model, C))
