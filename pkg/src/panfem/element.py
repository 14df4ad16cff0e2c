"""
Trilinear hexahedral elements.

The element kernels are vectorized over a batch of elements: nodal arrays
have shape ``(ne, 8, 3)`` and element vectors are ordered node-major,
``dof = 3 * a + i``. Local node numbering follows the usual right-handed
convention, nodes 0-3 on the bottom face (xi3 = -1), 4-7 above them.

Three static formulations are available:

``"H1"``
    displacement based.
``"GJ"``
    constant cofactor and Jacobian fields per element, condensed.
``"IIIJ"``
    constant invariants ``I1, I2, J`` per element, condensed.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

from .discrete_gradients import algo_stress_and_tangent, midpoint_stress_and_tangent
from .errors import DegenerateFace, DegenerateTimeStep, NonPositiveJacobian
from .kinematics import invariants
from .material import generator_derivative_voigt, generator_voigt, stress_and_tangent
from .tensor3 import IDENTITY, cof_det, cross, voigt

FORMULATIONS = ("H1", "GJ", "IIIJ")
INTEGRATORS = ("EMS", "midpoint")

NODE_XI = np.array([
    [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
    [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
], dtype=float)

#: Local faces, ordered so that the right-hand normal points outwards.
FACES = {
    0: (0, 3, 2, 1),   # xi3 = -1
    1: (4, 5, 6, 7),   # xi3 = +1
    2: (0, 1, 5, 4),   # xi2 = -1
    3: (1, 2, 6, 5),   # xi1 = +1
    4: (2, 3, 7, 6),   # xi2 = +1
    5: (3, 0, 4, 7),   # xi1 = -1
}

_G = 1.0 / np.sqrt(3.0)
GAUSS_POINTS = np.array([[x, y, z] for z, y, x in product((-_G, _G), repeat=3)])
GAUSS_WEIGHTS = np.ones(8)
FACE_POINTS = np.array([[x, y] for y, x in product((-_G, _G), repeat=2)])
FACE_WEIGHTS = np.ones(4)


@dataclass(frozen=True)
class QuadraturePoint:
    xi: np.ndarray
    weight: float


def quadrature():
    """The 2x2x2 Gauss rule as a list of :class:`QuadraturePoint`."""
    return [QuadraturePoint(x, w) for x, w in zip(GAUSS_POINTS, GAUSS_WEIGHTS)]


def hex_shape(xi):
    """
    Trilinear shape functions and their parametric derivatives.

    Parameters
    ----------
    xi : array_like of shape (..., 3)

    Returns
    -------
    N : numpy.ndarray of shape (..., 8)
    dN : numpy.ndarray of shape (..., 8, 3)
    """
    xi = np.asarray(xi, dtype=float)
    t = 1.0 + xi[..., None, :] * NODE_XI
    N = 0.125 * t.prod(axis=-1)
    dN = np.empty(t.shape)
    dN[..., 0] = 0.125 * NODE_XI[:, 0] * t[..., 1] * t[..., 2]
    dN[..., 1] = 0.125 * NODE_XI[:, 1] * t[..., 0] * t[..., 2]
    dN[..., 2] = 0.125 * NODE_XI[:, 2] * t[..., 0] * t[..., 1]
    return N, dN


def quad_shape(xi):
    """Bilinear shape functions on a quadrilateral face, (..., 4) and (..., 4, 2)."""
    xi = np.asarray(xi, dtype=float)
    corners = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
    t = 1.0 + xi[..., None, :] * corners
    N = 0.25 * t[..., 0] * t[..., 1]
    dN = np.stack((0.25 * corners[:, 0] * t[..., 1], 0.25 * corners[:, 1] * t[..., 0]), axis=-1)
    return N, dN


_N_GP, _DN_GP = hex_shape(GAUSS_POINTS)


@dataclass
class HexGeometry:
    """Reference-configuration quantities of a batch of elements at the Gauss points."""

    coords: np.ndarray      # (ne, 8, 3)
    dNdX: np.ndarray        # (ne, 8gp, 8, 3)
    wdv: np.ndarray         # (ne, 8gp)

    @property
    def volume(self):
        return self.wdv.sum(axis=1)

    @property
    def n_elements(self):
        return self.coords.shape[0]

    def subset(self, idx):
        return HexGeometry(self.coords[idx], self.dNdX[idx], self.wdv[idx])


def hex_geometry(coords):
    """
    Precompute shape gradients and integration weights.

    Raises
    ------
    NonPositiveJacobian
        If the isoparametric map is not orientation preserving at a Gauss point.
    """
    X = np.asarray(coords, dtype=float)
    if X.ndim == 2:
        X = X[None]
    Jac = np.einsum("gaj,eai->egij", _DN_GP, X)
    detJ = np.linalg.det(Jac)
    if not np.all(detJ > 0.0):
        bad = np.unique(np.nonzero(detJ <= 0.0)[0])
        raise NonPositiveJacobian(f"reference Jacobian <= 0 in elements {bad.tolist()[:10]}")
    invJ = np.linalg.inv(Jac)
    dNdX = np.einsum("gaj,egji->egai", _DN_GP, invJ)
    return HexGeometry(X, dNdX, detJ * GAUSS_WEIGHTS)


def deformation_gradient(geom, ue):
    """``F = I + u (x) grad N`` at every Gauss point, shape (ne, 8, 3, 3)."""
    ue = np.asarray(ue, dtype=float).reshape(geom.n_elements, 8, 3)
    return IDENTITY + np.einsum("eai,egaJ->egiJ", ue, geom.dNdX)


def b_operator(F, dNdX):
    """
    Strain-displacement operator with ``B du = voigt(sym(F^T dF), "strain")``.

    Returns an array of shape (..., 6, 24).
    """
    M = np.einsum("...iI,...aJ->...IJai", F, dNdX)
    I = np.array([0, 1, 2, 0, 1, 0])
    J = np.array([0, 1, 2, 1, 2, 2])
    B = M[..., I, J, :, :] + M[..., J, I, :, :]
    B[..., :3, :, :] *= 0.5
    return B.reshape(B.shape[:-2] + (24,))


def _geometric(dNdX, S, wdv):
    """``delta_ik sum_g w dN_aI S_IJ dN_bJ`` expanded to (ne, 24, 24)."""
    g = np.einsum("eg,egaI,egIJ,egbJ->eab", wdv, dNdX, S, dNdX)
    ne = g.shape[0]
    k = np.zeros((ne, 8, 3, 8, 3))
    for i in range(3):
        k[:, :, i, :, i] = g
    return k.reshape(ne, 24, 24)


def _kernel(B, S, D, dNdX, wdv, B_right=None, d_factor=1.0, geo_factor=1.0, tangent=True):
    """
    Residual ``sum_g w B^T voigt(S)`` and tangent
    ``sum_g w B^T D B_right d_factor + geo_factor * geometric(S)``.
    """
    vS = voigt(S, check=False)
    r = np.einsum("eg,egva,egv->ea", wdv, B, vS)
    if not tangent:
        return r, None
    Br = B if B_right is None else B_right
    DB = D @ Br
    k = d_factor * np.einsum("eg,egva,egvb->eab", wdv, B, DB)
    k += geo_factor * _geometric(dNdX, S, wdv)
    return r, k


@dataclass
class MixedInternal:
    """
    Condensed element fields.

    For ``"IIIJ"`` the means ``(I1, I2, J)`` and multipliers ``lam``; for
    ``"GJ"`` additionally the mean cofactor ``G`` and ``Lambda_G``.
    """

    formulation: str
    I1: np.ndarray
    I2: np.ndarray
    J: np.ndarray
    lam: np.ndarray
    G: np.ndarray = None
    Lambda_G: np.ndarray = None


@dataclass
class ElementMatrices:
    r: np.ndarray
    k: np.ndarray
    energy: np.ndarray = None
    internal: MixedInternal = None


def _gauss_state(geom, ue):
    F = deformation_gradient(geom, ue)
    _, detF = cof_det(F)
    if not np.all(detF > 0.0):
        bad = np.unique(np.nonzero(detF <= 0.0)[0])
        raise NonPositiveJacobian(f"det F <= 0 in elements {bad.tolist()[:10]}")
    C = np.einsum("...ki,...kj->...ij", F, F)
    return F, C


def static_batch(model, formulation, geom, ue, tangent=True):
    """
    Static residuals, tangents and energies of a batch of elements.

    Parameters
    ----------
    model : invariant material model
    formulation : {"H1", "GJ", "IIIJ"}
    geom : HexGeometry
    ue : numpy.ndarray of shape (ne, 24)
    tangent : bool
        Skip the stiffness computation when False.

    Returns
    -------
    ElementMatrices with arrays stacked over elements.
    """
    if formulation not in FORMULATIONS:
        raise ValueError(f"unknown formulation {formulation!r}")
    F, C = _gauss_state(geom, ue)
    B = b_operator(F, geom.dNdX)
    wdv = geom.wdv

    if formulation == "H1":
        w, S, D = stress_and_tangent(model, C)
        r, k = _kernel(B, S, D, geom.dNdX, wdv, tangent=tangent)
        return ElementMatrices(r, k, np.einsum("eg,eg->e", wdv, w))

    inv = invariants(C)
    pi = inv.as_array()                                   # (ne, g, 3)
    gv = generator_voigt(C)                               # (ne, g, 3, 6)
    gens = np.stack([np.broadcast_to(IDENTITY, C.shape), cross(IDENTITY, C),
                     0.5 * cof_det(C)[0] / inv.J[..., None, None]], axis=-3)
    V = geom.volume
    b = np.einsum("eg,egva,egkv->eka", wdv, B, 2.0 * gv)  # (ne, 3, 24)
    mean = np.einsum("eg,egk->ek", wdv, pi) / V[:, None]
    dgen = generator_derivative_voigt(C) if tangent else None

    if formulation == "IIIJ":
        resp = model.response(mean[:, 0], mean[:, 1], mean[:, 2])
        lam = resp.dw
        r = np.einsum("ek,eka->ea", lam, b)
        k = None
        if tangent:
            S = 2.0 * np.einsum("ek,egkij->egij", lam, gens)
            D = 4.0 * np.einsum("ek,egkpq->egpq", lam, dgen)
            _, k = _kernel(B, S, D, geom.dNdX, wdv)
            k += np.einsum("ekl,eka,elb->eab", resp.d2w, b, b) / V[:, None, None]
        internal = MixedInternal("IIIJ", mean[:, 0], mean[:, 1], mean[:, 2], lam)
        return ElementMatrices(r, k, V * resp.w, internal)

    # GJ: local I1, element-mean I2 and J
    resp = model.response(pi[..., 0], mean[:, 1, None], mean[:, 2, None])
    dw, d2w = resp.dw, resp.d2w                           # (ne, g, 3), (ne, g, 3, 3)
    Lam = np.einsum("eg,egk->ek", wdv, dw) / V[:, None]
    S = 2.0 * (dw[..., 0, None, None] * IDENTITY
               + Lam[:, 1, None, None, None] * gens[:, :, 1]
               + Lam[:, 2, None, None, None] * gens[:, :, 2])
    r = np.einsum("eg,egva,egv->ea", wdv, B, voigt(S, check=False))
    k = None
    if tangent:
        D = 4.0 * (Lam[:, 1, None, None, None] * dgen[:, :, 1]
                   + Lam[:, 2, None, None, None] * dgen[:, :, 2])
        _, k = _kernel(B, S, D, geom.dNdX, wdv)
        d = np.empty(B.shape[:2] + (3, 24))
        d[:, :, 0] = np.einsum("egva,v->ega", B, 2.0 * voigt(IDENTITY))
        d[:, :, 1] = (b[:, 1] / V[:, None])[:, None]
        d[:, :, 2] = (b[:, 2] / V[:, None])[:, None]
        k += np.einsum("eg,egka,egkl,eglb->eab", wdv, d, d2w, d)
    Gbar = np.einsum("eg,egij->eij", wdv, cof_det(C)[0]) / V[:, None, None]
    internal = MixedInternal("GJ", mean[:, 0], mean[:, 1], mean[:, 2], Lam,
                             G=Gbar, Lambda_G=Lam[:, 1, None, None] * IDENTITY)
    return ElementMatrices(r, k, np.einsum("eg,eg->e", wdv, resp.w), internal)


def _single(em):
    out = ElementMatrices(em.r[0], None if em.k is None else em.k[0],
                          None if em.energy is None else em.energy[0])
    if em.internal is not None:
        it = em.internal
        out.internal = MixedInternal(
            it.formulation, it.I1[0], it.I2[0], it.J[0], it.lam[0],
            None if it.G is None else it.G[0],
            None if it.Lambda_G is None else it.Lambda_G[0])
    return out


def element_static(model, formulation, coords, u):
    """Residual and tangent of a single element; see :func:`static_batch`."""
    geom = hex_geometry(coords)
    return _single(static_batch(model, formulation, geom, np.asarray(u)[None]))


def mass_batch(geom, rho0):
    """Scalar consistent mass blocks ``rho0 int N_a N_b dV``, shape (ne, 8, 8)."""
    if rho0 < 0.0:
        raise ValueError("rho0 must be non-negative")
    return rho0 * np.einsum("eg,ga,gb->eab", geom.wdv, _N_GP, _N_GP)


def expand_mass(m):
    """Expand scalar (..., 8, 8) blocks to (..., 24, 24) with the 3x3 identity."""
    return np.einsum("...ab,ij->...aibj", m, IDENTITY).reshape(m.shape[:-2] + (24, 24))


def element_mass(coords, rho0):
    """Consistent 24x24 element mass matrix."""
    return expand_mass(mass_batch(hex_geometry(coords), rho0)[0])


def face_geometry(face_coords):
    """Shape values and area weights at the 2x2 face Gauss points, batched."""
    X = np.asarray(face_coords, dtype=float)
    if X.ndim == 2:
        X = X[None]
    N, dN = quad_shape(FACE_POINTS)
    t1 = np.einsum("ga,fai->fgi", dN[..., 0], X)
    t2 = np.einsum("ga,fai->fgi", dN[..., 1], X)
    dA = np.linalg.norm(np.cross(t1, t2), axis=-1) * FACE_WEIGHTS
    area = dA.sum(axis=1)
    if np.any(area <= 1e-14):
        raise DegenerateFace(f"face area {area.min():.3e} <= 1e-14")
    return N, dA


def surface_load_batch(face_coords, traction, amplitude=1.0):
    """Consistent nodal dead loads of a batch of faces, shape (nf, 4, 3)."""
    N, dA = face_geometry(face_coords)
    w = np.einsum("ga,fg->fa", N, dA)
    return amplitude * w[..., None] * np.asarray(traction, dtype=float)


def surface_load(face_coords, traction, amplitude=1.0):
    """Consistent 12-vector of a dead traction on one bilinear face."""
    return surface_load_batch(face_coords, traction, amplitude)[0].ravel()


def dynamic_batch(model, integrator, geom, mass, ue_n, ue_n1, ve_n, dt, tangent=True):
    """
    Condensed one-step residual of the dynamic H1 element.

    ``r = (2/dt)(M du/dt - M v_n) + int B(F_mid)^T S* dV``; external loads are
    added by the caller. ``k`` is the derivative with respect to ``u_n+1``.

    Parameters
    ----------
    mass : numpy.ndarray of shape (ne, 8, 8)
        Scalar mass blocks from :func:`mass_batch`.
    """
    if integrator not in INTEGRATORS:
        raise ValueError(f"unknown integrator {integrator!r}")
    if not dt > 0.0:
        raise DegenerateTimeStep(f"dt = {dt} must be positive")
    ne = geom.n_elements
    ue_n = np.asarray(ue_n, dtype=float).reshape(ne, 24)
    ue_n1 = np.asarray(ue_n1, dtype=float).reshape(ne, 24)
    ve_n = np.asarray(ve_n, dtype=float).reshape(ne, 24)
    du = ue_n1 - ue_n

    Mdu = np.einsum("eab,ebi->eai", mass, du.reshape(ne, 8, 3)).reshape(ne, 24)
    Mv = np.einsum("eab,ebi->eai", mass, ve_n.reshape(ne, 8, 3)).reshape(ne, 24)
    r = (2.0 / dt) * (Mdu / dt - Mv)

    F_n, C_n = _gauss_state(geom, ue_n)
    F_n1, C_n1 = _gauss_state(geom, ue_n1)
    F_mid, _ = _gauss_state(geom, 0.5 * (ue_n + ue_n1))
    B_mid = b_operator(F_mid, geom.dNdX)

    if integrator == "EMS":
        out = algo_stress_and_tangent(model, C_n, C_n1, tangent=tangent)
        S, A = out if tangent else (out, None)
        ri, ki = _kernel(B_mid, S, A, geom.dNdX, geom.wdv,
                         B_right=None if not tangent else b_operator(F_n1, geom.dNdX),
                         d_factor=2.0, geo_factor=0.5, tangent=tangent)
    else:
        S, D = midpoint_stress_and_tangent(model, F_mid)
        ri, ki = _kernel(B_mid, S, D, geom.dNdX, geom.wdv, d_factor=0.5,
                         geo_factor=0.5, tangent=tangent)
    r = r + ri
    k = None
    if tangent:
        k = ki + (2.0 / dt**2) * expand_mass(mass)
    return ElementMatrices(r, k)


def element_dynamic(model, integrator, coords, u_n, u_n1, v_n, dt, rho0, f_ext=None):
    """Single-element version of :func:`dynamic_batch` with optional load vector."""
    geom = hex_geometry(coords)
    em = _single(dynamic_batch(model, integrator, geom, mass_batch(geom, rho0),
                               np.asarray(u_n)[None], np.asarray(u_n1)[None],
                               np.asarray(v_n)[None], dt))
    if f_ext is not None:
        em.r = em.r - np.asarray(f_ext, dtype=float)
    return em
