"""
One-step time integration with velocity condensation.

Both integrators share the condensed residual

    r(u_n+1) = (2/dt^2) M du - (2/dt) M v_n + f_int(S*) - f_ext(t_n+1/2)

and differ only in the stress ``S*``: the algorithmic stress built from
Greenspan discrete gradients (``"EMS"``) or the stress at the midpoint
deformation (``"midpoint"``). The velocity follows as
``v_n+1 = (2/dt) du - v_n``.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import StepAudit, audit_quantities
from .discrete_gradients import (DiscreteGradients, algo_stress,  # noqa: F401
                                 greenspan_dg, midpoint_stress)
from .element import INTEGRATORS, dynamic_batch
from .errors import DegenerateTimeStep, NewtonDiverged, NonPositiveJacobian
from .solver import FeProblem, NewtonConfig, newton


@dataclass
class DynamicState:
    t: float
    u: np.ndarray
    v: np.ndarray
    w_ext_cum: float = 0.0

    @classmethod
    def rest(cls, n_dofs, t=0.0):
        return cls(t, np.zeros(n_dofs), np.zeros(n_dofs), 0.0)


def dynamic_evaluator(model, integrator, problem, u_n, v_n, dt):
    """Chunk evaluator of the condensed dynamic residual (without loads)."""
    ue_n = problem.gather(u_n)
    ve_n = problem.gather(v_n)
    mass = problem.mass_blocks
    if mass is None:
        mass = np.zeros((problem.geom.n_elements, 8, 8))

    def ev(geom, ue, chunk, tangent=True):
        return dynamic_batch(model, integrator, geom, mass[chunk], ue_n[chunk], ue,
                             ve_n[chunk], dt, tangent=tangent)

    return ev


def time_step(scene, model, integrator, state, dt, cfg=None, problem=None, audit_n=None,
              predictor="none"):
    """
    Advance ``state`` by ``dt``.

    Parameters
    ----------
    scene : Scene
    model : invariant material model
    integrator : {"EMS", "midpoint"}
    state : DynamicState
    dt : float
    cfg : NewtonConfig, optional
    problem : FeProblem, optional
        Cached discretization of ``scene``.
    audit_n : StepAudit, optional
        Audit of ``state``; recomputed when omitted.
    predictor : {"velocity", "none"}
        Newton start ``u_n + dt v_n`` or ``u_n``.

    Returns
    -------
    (DynamicState, StepAudit)
    """
    if integrator not in INTEGRATORS:
        raise ValueError(f"unknown integrator {integrator!r}")
    if not dt > 0.0:
        raise DegenerateTimeStep(f"dt = {dt} must be positive")
    cfg = cfg or NewtonConfig()
    problem = problem or FeProblem(scene)
    if audit_n is None:
        audit_n = make_audit(problem, model, state)

    t_mid = state.t + 0.5 * dt
    f_mid = problem.external_force(t_mid)
    ev = dynamic_evaluator(model, integrator, problem, state.u, state.v, dt)
    base = problem.dirichlet_vector()
    free = problem.free
    f_free = f_mid[free]

    def system(x):
        u = base.copy()
        u[free] = x
        s = problem.assemble(ev, u)
        return s.residual - f_free, s.jacobian

    if predictor == "velocity":
        x0 = state.u[free] + dt * state.v[free]
    elif predictor == "none":
        x0 = state.u[free]
    else:
        raise ValueError(f"unknown predictor {predictor!r}")
    try:
        out = newton(system, x0, cfg)
    except NewtonDiverged as exc:
        exc.step = state.t
        raise
    u1 = base.copy()
    u1[free] = out.x
    du = u1 - state.u
    v1 = (2.0 / dt) * du - state.v
    dW = float(f_mid @ du)
    new = DynamicState(state.t + dt, u1, v1, state.w_ext_cum + dW)

    audit = make_audit(problem, model, new)
    phi_mid = problem.scene.mesh.nodes.ravel() + 0.5 * (state.u + u1)
    M_ext = np.cross(phi_mid.reshape(-1, 3), f_mid.reshape(-1, 3)).sum(axis=0)
    audit = replace(
        audit,
        dW_ext=dW,
        energy_residual=(audit.T - audit_n.T) + (audit.Pi_int - audit_n.Pi_int) - dW,
        momentum_residual=(audit.J_ang - audit_n.J_ang) / dt - M_ext,
        newton_iterations=out.iterations,
    )
    return new, audit


def make_audit(problem, model, state):
    T, Pi, J = audit_quantities(problem.scene, model, state, problem=problem)
    return StepAudit(t=state.t, T=T, Pi_int=Pi, E=T + Pi, J_ang=J, w_ext_cum=state.w_ext_cum)


@dataclass
class DynamicRun:
    audits: list = field(default_factory=list)
    states: list = field(default_factory=list)
    final: DynamicState = None
    aborted: bool = False
    error: str = ""


def run_dynamic(scene, model, integrator, dt, t_end, cfg=None, problem=None, initial=None,
                keep_states=False, raise_on_divergence=False, callback=None):
    """
    Integrate from ``initial`` (rest by default) up to ``t_end``.

    A Newton failure stops the run; the returned :class:`DynamicRun` is then
    flagged ``aborted`` unless ``raise_on_divergence`` is set.
    """
    problem = problem or FeProblem(scene)
    state = initial or DynamicState.rest(problem.n_dofs)
    n_steps = int(round((t_end - state.t) / dt))
    audit = make_audit(problem, model, state)
    run = DynamicRun([audit], [state] if keep_states else [])
    for _ in range(n_steps):
        try:
            state, audit = time_step(scene, model, integrator, state, dt, cfg, problem, audit)
        except (NewtonDiverged, NonPositiveJacobian) as exc:
            if raise_on_divergence:
                exc.audits = run.audits
                raise
            run.aborted = True
            run.error = str(exc)
            break
        run.audits.append(audit)
        if keep_states:
            run.states.append(state)
        if callback is not None:
            callback(state, audit)
    run.final = state
    return run
