import numpy as np
import pytest
from hypothesis import given

from panfem.diagnostics import fd_jacobian
from panfem.discrete_gradients import (DEGENERATE_TOL, algo_stress, algo_stress_and_tangent,
                                       greenspan_dg, midpoint_stress)
from panfem.dynamics import DynamicState, run_dynamic, time_step
from panfem.errors import DegenerateTimeStep, NonPositiveJacobian
from panfem.kinematics import invariants
from panfem.material import MaterialResponse, material_tangent, pk2
from panfem.scene import Scene, box_mesh
from panfem.solver import FeProblem, NewtonConfig
from panfem.tensor3 import IDENTITY, ddot, voigt

from conftest import deformations, random_F, random_spd


class PolyModel:
    """``W = a I1 + I1^2 / 2 + J^3`` for exact quotient checks."""

    def __init__(self, a=2.0, quad=0.0, cubic=0.0):
        self.a, self.quad, self.cubic = a, quad, cubic

    def response(self, I1, I2, J):
        I1, I2, J = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (I1, I2, J)))
        w = self.a * I1 + 0.5 * self.quad * I1**2 + self.cubic * J**3
        dw = np.stack((self.a + self.quad * I1, np.zeros_like(I1), 3 * self.cubic * J**2), -1)
        d2w = np.zeros(I1.shape + (3, 3))
        d2w[..., 0, 0] = self.quad
        d2w[..., 2, 2] = 6 * self.cubic * J
        return MaterialResponse(w, dw, d2w)


def energy(model, C):
    inv = invariants(C)
    return model.response(inv.I1, inv.I2, inv.J).w


def sym_from6(c):
    return np.array([[c[0], c[3], c[5]], [c[3], c[1], c[4]], [c[5], c[4], c[2]]])


class TestGreenspan:
    def test_linear(self):
        dg = greenspan_dg(PolyModel(a=2.5), [3.0, 3.0, 1.0], [4.2, 3.5, 1.3])
        assert dg.dI1 == pytest.approx(2.5, rel=1e-14)

    def test_quadratic_is_midpoint(self):
        dg = greenspan_dg(PolyModel(a=0.0, quad=1.0), [3.0, 3.0, 1.0], [5.0, 3.5, 1.3])
        assert dg.dI1 == pytest.approx(4.0, rel=1e-14)

    def test_four_point_oracle(self, mr):
        W = lambda *x: float(mr.response(*x).w)  # noqa: E731
        dg = greenspan_dg(mr, [3.0, 3.0, 1.0], [6.0, 9.0, 2.0])
        p = mr.params
        assert dg.dI1 == pytest.approx(p.a, rel=1e-13)
        assert dg.dI2 == pytest.approx(p.b, rel=1e-13)
        expected = (W(3, 3, 2) - W(3, 3, 1) + W(6, 9, 2) - W(6, 9, 1)) / 2
        assert dg.dJ == pytest.approx(expected, rel=1e-13)

    def test_directionality_invariants(self, model):
        rng = np.random.default_rng(0)
        for _ in range(50):
            p0 = np.array([rng.uniform(2.8, 5), rng.uniform(2.8, 5), rng.uniform(0.7, 1.4)])
            p1 = p0 + rng.uniform(-0.3, 0.3, 3)
            dg = greenspan_dg(model, p0, p1).as_array()
            dW = model.response(*p1).w - model.response(*p0).w
            assert abs(dg @ (p1 - p0) - dW) <= 1e-12 * max(1.0, abs(model.response(*p1).w))

    def test_partial_degenerate(self, mr):
        p0 = np.array([3.5, 3.4, 1.1])
        p1 = np.array([3.5, 3.9, 1.2])
        dg = greenspan_dg(mr, p0, p1)
        assert dg.dI1 == pytest.approx(mr.params.a)
        assert dg.dI2 == pytest.approx(mr.params.b)

    def test_fully_degenerate_is_derivative(self, model):
        p = np.array([3.6, 3.8, 1.15])
        dg = greenspan_dg(model, p, p).as_array()
        np.testing.assert_allclose(dg, model.response(*p).dw, rtol=1e-14)

    def test_jacobian_fd(self, model):
        p0 = np.array([3.6, 3.8, 1.15])
        p1 = np.array([3.9, 3.5, 1.05])
        _, jac = greenspan_dg(model, p0, p1, with_jacobian=True)
        fd = fd_jacobian(lambda x: greenspan_dg(model, p0, x).as_array(), p1)
        assert np.abs(jac - fd).max() <= 1e-6 * np.abs(fd).max()

    def test_non_positive(self, mr):
        with pytest.raises(NonPositiveJacobian):
            greenspan_dg(mr, [3.0, 3.0, 1.0], [3.0, 3.0, -0.5])


class TestAlgoStress:
    def test_collapse(self, model):
        C = random_spd(np.random.default_rng(1))
        np.testing.assert_allclose(algo_stress(model, C, C), pk2(model, C), rtol=1e-13,
                                   atol=1e-12 * np.abs(pk2(model, C)).max())

    @given(deformations, deformations)
    def test_directionality(self, F0, F1):
        from panfem.material import MR_COMPRESSIBLE, MooneyRivlin

        model = MooneyRivlin(MR_COMPRESSIBLE)
        C0, C1 = F0.T @ F0, F1.T @ F1
        S = algo_stress(model, C0, C1)
        dW = energy(model, C1) - energy(model, C0)
        assert abs(ddot(S, 0.5 * (C1 - C0)) - dW) <= 1e-11 * max(1.0, abs(dW))

    def test_directionality_pann(self, pann):
        rng = np.random.default_rng(2)
        for _ in range(200):
            C0, C1 = random_spd(rng), random_spd(rng)
            dW = energy(pann, C1) - energy(pann, C0)
            S = algo_stress(pann, C0, C1)
            assert abs(ddot(S, 0.5 * (C1 - C0)) - dW) <= 1e-11 * max(1.0, abs(dW))

    def test_symmetric(self, model):
        rng = np.random.default_rng(3)
        S = algo_stress(model, random_spd(rng), random_spd(rng))
        np.testing.assert_allclose(S, S.T, rtol=1e-13)

    def test_second_order(self, model):
        rng = np.random.default_rng(4)
        C0 = random_spd(rng)
        D = random_spd(rng) - IDENTITY
        hs = np.array([1e-1, 5e-2, 2.5e-2, 1.25e-2])
        err = [np.abs(algo_stress(model, C0, C0 + h * D) - pk2(model, C0 + 0.5 * h * D)).max()
               for h in hs]
        slope = np.polyfit(np.log(hs), np.log(err), 1)[0]
        assert slope >= 1.9

    def test_tangent_fd(self, model):
        rng = np.random.default_rng(5)
        C0, C1 = random_spd(rng), random_spd(rng)
        _, A = algo_stress_and_tangent(model, C0, C1)
        c6 = voigt(C1)
        fd = fd_jacobian(lambda c: voigt(algo_stress(model, C0, sym_from6(c))), c6)
        # a shear parameter moves two entries of C, i.e. twice its strain-Voigt entry
        fd = fd / np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])[None, :]
        assert np.abs(A - fd).max() <= 1e-6 * np.abs(fd).max()

    def test_tangent_degenerate_limit(self, model):
        C = random_spd(np.random.default_rng(6))
        _, A = algo_stress_and_tangent(model, C, C)
        np.testing.assert_allclose(A, 0.25 * material_tangent(model, C), rtol=1e-10,
                                   atol=1e-12 * np.abs(A).max())

    def test_threshold_documented(self):
        assert 0.0 < DEGENERATE_TOL < 1e-3


class TestMidpointStress:
    def test_identity(self, model):
        assert np.abs(midpoint_stress(model, IDENTITY)).max() <= 1e-10 * 1e4

    def test_definition(self, model):
        F = random_F(np.random.default_rng(7))
        np.testing.assert_allclose(midpoint_stress(model, F), pk2(model, F.T @ F))

    def test_differs_second_order(self, mr):
        rng = np.random.default_rng(8)
        F0 = random_F(rng)
        dF = 0.3 * rng.uniform(-1, 1, (3, 3))
        hs = np.array([1e-1, 5e-2, 2.5e-2])
        err = []
        for h in hs:
            F1 = F0 + h * dF
            err.append(np.abs(midpoint_stress(mr, 0.5 * (F0 + F1))
                              - algo_stress(mr, F0.T @ F0, F1.T @ F1)).max())
        assert np.polyfit(np.log(hs), np.log(err), 1)[0] >= 1.9


def two_element_scene(rho0=1000.0):
    mesh = box_mesh((2, 1, 1), (2.0, 1.0, 1.0))
    return Scene(mesh, rho0=rho0, name="bar")


def spinning_state(scene, stretch=0.1):
    X = scene.mesh.nodes
    c = X.mean(axis=0)
    u = stretch * (X - c) * np.array([1.0, -0.3, -0.3])
    v = np.cross([0.0, 0.3, 1.0], X - c) + 0.3 * np.outer(np.sign(X[:, 0] - c[0]), [1, 0, 0])
    return DynamicState(0.0, u.ravel(), v.ravel())


TIGHT = NewtonConfig(tol_residual=1e-12, abs_floor=1e-11, max_iter=30)


class TestTimeStep:
    def test_rest_stays(self, mr):
        sc = two_element_scene()
        state, audit = time_step(sc, mr, "EMS", DynamicState.rest(3 * sc.mesh.n_nodes), 0.1)
        assert np.all(state.u == 0.0) and np.all(state.v == 0.0)
        assert audit.T == 0.0 and audit.E == pytest.approx(0.0, abs=1e-12)
        assert audit.newton_iterations == 0

    @pytest.mark.parametrize("integrator", ["EMS", "midpoint"])
    def test_free_flight(self, mr, integrator):
        sc = two_element_scene()
        n = 3 * sc.mesh.n_nodes
        v = np.tile([0.3, -0.2, 0.1], n // 3)
        s0 = DynamicState(0.0, np.zeros(n), v.copy())
        s1, audit = time_step(sc, mr, integrator, s0, 0.1, TIGHT)
        np.testing.assert_allclose(s1.u, 0.1 * v, atol=1e-12)
        np.testing.assert_allclose(s1.v, v, atol=1e-10)
        # rho0 V |v|^2 / 2 with V = 2
        assert audit.T == pytest.approx(0.5 * 1000.0 * 2.0 * 0.14, rel=1e-10)

    def test_ems_energy_and_momentum(self, mr):
        sc = two_element_scene()
        s0 = spinning_state(sc)
        problem = FeProblem(sc)
        s1, audit = time_step(sc, mr, "EMS", s0, 0.05, TIGHT, problem)
        from panfem.dynamics import make_audit

        a0 = make_audit(problem, mr, s0)
        assert abs(audit.E - a0.E) <= 1e-9 * a0.E
        assert abs(audit.energy_residual) <= 1e-9 * a0.E
        np.testing.assert_allclose(audit.J_ang, a0.J_ang, rtol=0, atol=1e-9 * np.abs(a0.J_ang).max())

    def test_midpoint_energy_error(self, mr):
        sc = two_element_scene()
        s0 = spinning_state(sc, stretch=0.2)
        _, ems = time_step(sc, mr, "EMS", s0, 0.05, TIGHT)
        _, mid = time_step(sc, mr, "midpoint", s0, 0.05, TIGHT)
        assert abs(mid.energy_residual) > 1e3 * max(abs(ems.energy_residual), 1e-12)
        assert np.abs(mid.momentum_residual).max() <= 1e-8 * np.abs(mid.J_ang).max()

    def test_velocity_update(self, mr):
        sc = two_element_scene()
        s0 = spinning_state(sc)
        s1, _ = time_step(sc, mr, "EMS", s0, 0.05, TIGHT)
        np.testing.assert_allclose(s1.v, 2.0 / 0.05 * (s1.u - s0.u) - s0.v)

    def test_velocity_predictor(self, mr):
        sc = two_element_scene()
        s0 = spinning_state(sc)
        a, _ = time_step(sc, mr, "EMS", s0, 0.05, TIGHT)
        b, _ = time_step(sc, mr, "EMS", s0, 0.05, TIGHT, predictor="velocity")
        np.testing.assert_allclose(a.u, b.u, atol=1e-10)
        with pytest.raises(ValueError):
            time_step(sc, mr, "EMS", s0, 0.05, TIGHT, predictor="guess")

    def test_bad_inputs(self, mr):
        sc = two_element_scene()
        s0 = spinning_state(sc)
        with pytest.raises(DegenerateTimeStep):
            time_step(sc, mr, "EMS", s0, 0.0)
        with pytest.raises(ValueError):
            time_step(sc, mr, "leapfrog", s0, 0.1)

    def test_external_work(self, mr):
        from panfem.scene import AmplitudeFn, NeumannBC

        mesh = box_mesh((1, 1, 1))
        sc = Scene(mesh, neumann=[NeumannBC("xmax", np.array([50.0, 0.0, 0.0]),
                                            AmplitudeFn("ramp", 1.0, 1.0))], rho0=1000.0)
        run = run_dynamic(sc, mr, "EMS", 0.1, 0.5, TIGHT)
        for a in run.audits[1:]:
            assert abs(a.energy_residual) <= 1e-9 * max(1.0, a.w_ext_cum)
        assert run.audits[-1].w_ext_cum > 0.0
        total = sum(a.dW_ext for a in run.audits[1:])
        assert total == pytest.approx(run.audits[-1].w_ext_cum, rel=1e-12)


class TestRunDynamic:
    def test_keeps_states_and_callback(self, mr):
        sc = two_element_scene()
        seen = []
        run = run_dynamic(sc, mr, "EMS", 0.05, 0.2, TIGHT, initial=spinning_state(sc),
                          keep_states=True, callback=lambda s, a: seen.append(s.t))
        assert len(run.audits) == 5 and len(run.states) == 5
        assert seen == pytest.approx([0.05, 0.1, 0.15, 0.2])
        assert not run.aborted

    def test_abort_is_flagged(self, mr):
        sc = two_element_scene(rho0=1e-3)
        init = spinning_state(sc)
        init.v *= 200.0
        run = run_dynamic(sc, mr, "midpoint", 0.5, 2.0, NewtonConfig(max_iter=3), initial=init)
        assert run.aborted and run.error
