"""
Conservation audits and finite-difference verification harnesses.
"""

from dataclasses import dataclass, field

import numpy as np

from .element import static_batch


@dataclass(frozen=True)
class StepAudit:
    """Energies and angular momentum at one time level, with step balances."""

    t: float
    T: float
    Pi_int: float
    E: float
    J_ang: np.ndarray
    w_ext_cum: float = 0.0
    dW_ext: float = 0.0
    energy_residual: float = 0.0
    momentum_residual: np.ndarray = field(default_factory=lambda: np.zeros(3))
    newton_iterations: int = 0

    def row(self):
        """Time-series row ``t, T, Pi_int, E, Jx, Jy, Jz, W_ext_cum, energy_residual``."""
        return (self.t, self.T, self.Pi_int, self.E, *np.asarray(self.J_ang).tolist(),
                self.w_ext_cum, self.energy_residual)


def audit_quantities(scene, model, state, problem=None):
    """
    Kinetic energy ``v.M.v / 2``, internal energy at the Gauss points and
    consistent-mass angular momentum ``sum phi_a x M_ab v_b``.
    """
    from .solver import FeProblem

    problem = problem or FeProblem(scene)
    u = np.asarray(state.u, dtype=float)
    v = np.asarray(state.v, dtype=float)
    if problem.mass_blocks is None:
        T = 0.0
        J = np.zeros(3)
    else:
        ve = problem.gather(v).reshape(-1, 8, 3)
        Mv_e = np.einsum("eab,ebi->eai", problem.mass_blocks, ve)
        Mv = problem.assemble_vector(Mv_e.reshape(-1, 24))
        T = 0.5 * float(v @ Mv)
        phi = scene.mesh.nodes + u.reshape(-1, 3)
        J = np.cross(phi, Mv.reshape(-1, 3)).sum(axis=0)
    Pi = float(problem.element_energies(_energy_evaluator(model), u).sum())
    return T, Pi, J


def _energy_evaluator(model):
    def ev(geom, ue, chunk=None):
        return static_batch(model, "H1", geom, ue, tangent=False)
    return ev


# --------------------------------------------------------------------------
# Finite-difference verification
# --------------------------------------------------------------------------

FD_TARGETS = ("material", "element_static", "element_dynamic", "loss_gradient")


@dataclass(frozen=True)
class FdReport:
    target: str
    max_rel_err: float
    worst_index: tuple


def fd_jacobian(fun, x):
    """
    Central differences ``d fun / d x`` with step ``1e-5 (1 + |x_i|)``.

    Returns an array of shape ``fun(x).shape + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x), dtype=float)
    out = np.empty(f0.shape + (x.size,))
    flat = x.ravel()
    for i in range(flat.size):
        h = 1e-5 * (1.0 + abs(flat[i]))
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += h
        xm[i] -= h
        out[..., i] = (np.asarray(fun(xp.reshape(x.shape))) - np.asarray(fun(xm.reshape(x.shape)))) / (2.0 * h)
    return out.reshape(f0.shape + x.shape)


def compare(target, analytic, fd):
    """``max |A - A_fd| / max |A_fd|`` and the index of the largest deviation."""
    analytic = np.asarray(analytic, dtype=float)
    fd = np.asarray(fd, dtype=float)
    diff = np.abs(analytic - fd)
    scale = max(float(np.max(np.abs(fd))), 1e-300)
    idx = np.unravel_index(int(np.argmax(diff)), diff.shape)
    return FdReport(target, float(diff[idx]) / scale, tuple(int(i) for i in idx))


def _sym_param(c6):
    """Symmetric tensor from its six independent components ``11,22,33,12,23,13``."""
    c6 = np.asarray(c6, dtype=float)
    return np.array([[c6[0], c6[3], c6[5]], [c6[3], c6[1], c6[4]], [c6[5], c6[4], c6[2]]])


def _test_models():
    from .calibration import init_params
    from .material import MR_COMPRESSIBLE, MooneyRivlin, pann_build

    return {"MR": MooneyRivlin(MR_COMPRESSIBLE), "PANN": pann_build(init_params(8, 7))}


def _perturbed_coords(rng, scale=0.1):
    from .element import NODE_XI

    return 0.5 * (NODE_XI + 1.0) + scale * rng.uniform(-1.0, 1.0, (8, 3))


def _material_pairs(model, rng):
    """(analytic, fd) pairs for dW/dC -> S/2 and dS/dC -> tangent/2."""
    from .material import stress_and_tangent
    from .tensor3 import voigt

    F = np.eye(3) + 0.2 * rng.uniform(-1.0, 1.0, (3, 3))
    C = F.T @ F
    c6 = voigt(C, "stress")
    _, S, D = stress_and_tangent(model, C)
    energy = lambda c: model_energy(model, _sym_param(c))  # noqa: E731
    stress = lambda c: voigt(stress_and_tangent(model, _sym_param(c))[1], "stress")  # noqa: E731
    # a shear parameter moves two entries of C: dW/dc_12 = S_12, dS/dc_12 = D[:, 3]
    half = np.array([0.5, 0.5, 0.5, 1.0, 1.0, 1.0])
    dW = voigt(S, "stress") * half
    dS = D * half[None, :]
    return [(dW, fd_jacobian(energy, c6)), (dS, fd_jacobian(stress, c6))]


def model_energy(model, C):
    from .kinematics import invariants

    inv = invariants(C)
    return model.response(inv.I1, inv.I2, inv.J).w


def fd_check(target, model=None, formulation=None, integrator="EMS", seed=0, mutate=None):
    """
    Compare an analytic derivative with central finite differences.

    Parameters
    ----------
    target : {"material", "element_static", "element_dynamic", "loss_gradient"}
    model : material model, optional
        Defaults to checking both the compressible Mooney-Rivlin model and a
        randomly initialized PANN8; the worst result is reported.
    formulation : str, optional
        Element formulation for ``element_static``; all three by default.
    integrator : {"EMS", "midpoint"}
    seed : int
        Seed of the random evaluation point.
    mutate : callable, optional
        Applied to each analytic array before comparison (mutation testing).
    """
    from .element import FORMULATIONS, element_dynamic, element_static

    if target not in FD_TARGETS:
        raise ValueError(f"unknown fd target {target!r}")
    mutate = mutate or (lambda a: a)
    rng = np.random.default_rng(seed)
    models = _test_models() if model is None else {"model": model}
    pairs = []
    if target == "material":
        for m in models.values():
            pairs += _material_pairs(m, rng)
    elif target == "element_static":
        forms = FORMULATIONS if formulation is None else (formulation,)
        X = _perturbed_coords(rng)
        u = 0.05 * rng.uniform(-1.0, 1.0, 24)
        for m in models.values():
            for f in forms:
                em = element_static(m, f, X, u)
                pairs.append((em.k, fd_jacobian(lambda x: element_static(m, f, X, x).r, u)))
                pairs.append((em.r, fd_jacobian(lambda x: element_static(m, f, X, x).energy, u)))
    elif target == "element_dynamic":
        X = _perturbed_coords(rng)
        u_n = 0.05 * rng.uniform(-1.0, 1.0, 24)
        u_n1 = u_n + 0.03 * rng.uniform(-1.0, 1.0, 24)
        v_n = rng.uniform(-1.0, 1.0, 24)
        for m in models.values():
            def res(x, m=m):
                return element_dynamic(m, integrator, X, u_n, x, v_n, 0.1, 1.0).r
            pairs.append((element_dynamic(m, integrator, X, u_n, u_n1, v_n, 0.1, 1.0).k,
                          fd_jacobian(res, u_n1)))
    else:
        from .calibration import calibration_dataset, init_params, loss_and_grad, sobolev_loss
        from .material import PannParams

        gt = _test_models()["MR"]
        d = calibration_dataset(gt, 10)
        p = init_params(8, seed)
        p = PannParams(p.w1, 64.0 * p.w2, p.b)
        _, g = loss_and_grad(p, d)
        fd = fd_jacobian(lambda th: sobolev_loss(PannParams.unflatten(th, 8), d), p.flatten())
        pairs.append((g.flatten(), fd))
    reports = [compare(target, mutate(np.array(a, dtype=float)), f) for a, f in pairs]
    return max(reports, key=lambda r: r.max_rel_err)
