"""
Partitioned Greenspan discrete gradients in the invariants ``(I1, I2, J)`` and
the resulting algorithmic second Piola-Kirchhoff stress.

The three quotients satisfy
``D1 dI1 + D2 dI2 + DJ dJ = W(n+1) - W(n)`` identically, which makes the
algorithmic stress energy consistent: ``S_algo : dC / 2 = dW``.
"""

from dataclasses import dataclass

import numpy as np

from .kinematics import algo_kinematics, invariants
from .material import generator_voigt, pk2, stress_and_tangent
from .tensor3 import IDENTITY, cross, outer_voigt, voigt, wedge_operator_matrix

#: Relative increment below which a quotient is replaced by its limit.
DEGENERATE_TOL = 1e-5

# Corner states as (I1, I2, J) selectors: 0 -> time n, 1 -> time n+1, 2 -> midpoint.
_POINTS = (
    (0, 0, 0), (1, 0, 0), (1, 1, 1), (0, 1, 1), (1, 1, 0), (0, 0, 1),
    (2, 0, 0), (2, 1, 1), (1, 2, 0), (0, 2, 1), (1, 1, 2), (0, 0, 2),
)
_IDX = {p: k for k, p in enumerate(_POINTS)}


@dataclass
class DiscreteGradients:
    dI1: np.ndarray
    dI2: np.ndarray
    dJ: np.ndarray

    def as_array(self):
        return np.stack((self.dI1, self.dI2, self.dJ), axis=-1)


def _as_inv_array(inv):
    if hasattr(inv, "as_array"):
        return inv.as_array()
    return np.asarray(inv, dtype=float)


def greenspan_dg(model, inv_n, inv_n1, tol=DEGENERATE_TOL, with_jacobian=False):
    """
    Partitioned Greenspan discrete gradients of ``model``.

    Parameters
    ----------
    model : invariant model with a ``response`` method
    inv_n, inv_n1 : InvariantTriple or array of shape (..., 3)
    tol : float
        A component whose increment is below
        ``tol * max(1, |pi_n|, |pi_n+1|)`` uses the average of the partial
        derivatives taken at the midpoint of that invariant instead.
    with_jacobian : bool
        Also return ``dD_i / dpi_k`` with respect to the ``n+1`` invariants,
        shape (..., 3, 3).
    """
    p0 = _as_inv_array(inv_n)
    p1 = _as_inv_array(inv_n1)
    p0, p1 = np.broadcast_arrays(p0, p1)
    pm = 0.5 * (p0 + p1)
    table = np.stack((p0, p1, pm), axis=0)
    pts = np.stack([np.stack([table[sel, ..., k] for k, sel in enumerate(point)], axis=-1)
                    for point in _POINTS], axis=0)
    resp = model.response(pts[..., 0], pts[..., 1], pts[..., 2])
    W, W1, W2 = resp.w, resp.dw, resp.d2w

    def w(p):
        return W[_IDX[p]]

    def g(p, i):
        return W1[_IDX[p]][..., i]

    def h(p, i, j):
        return W2[_IDX[p]][..., i, j]

    delta = p1 - p0
    scale = np.maximum(1.0, np.maximum(np.abs(p0), np.abs(p1)))
    degenerate = np.abs(delta) < tol * scale
    safe = np.where(degenerate, 1.0, delta)

    n1 = w((1, 0, 0)) - w((0, 0, 0)) + w((1, 1, 1)) - w((0, 1, 1))
    n2 = w((1, 1, 0)) - w((1, 0, 0)) + w((0, 1, 1)) - w((0, 0, 1))
    n3 = w((1, 1, 1)) - w((1, 1, 0)) + w((0, 0, 1)) - w((0, 0, 0))
    q = np.stack((n1, n2, n3), axis=-1) / (2.0 * safe)

    fb = np.stack((
        0.5 * (g((2, 0, 0), 0) + g((2, 1, 1), 0)),
        0.5 * (g((1, 2, 0), 1) + g((0, 2, 1), 1)),
        0.5 * (g((1, 1, 2), 2) + g((0, 0, 2), 2)),
    ), axis=-1)
    D = np.where(degenerate, fb, q)
    dg = DiscreteGradients(D[..., 0], D[..., 1], D[..., 2])
    if not with_jacobian:
        return dg

    dn = np.empty(D.shape + (3,))
    dn[..., 0, 0] = g((1, 0, 0), 0) + g((1, 1, 1), 0)
    dn[..., 0, 1] = g((1, 1, 1), 1) - g((0, 1, 1), 1)
    dn[..., 0, 2] = g((1, 1, 1), 2) - g((0, 1, 1), 2)
    dn[..., 1, 0] = g((1, 1, 0), 0) - g((1, 0, 0), 0)
    dn[..., 1, 1] = g((1, 1, 0), 1) + g((0, 1, 1), 1)
    dn[..., 1, 2] = g((0, 1, 1), 2) - g((0, 0, 1), 2)
    dn[..., 2, 0] = g((1, 1, 1), 0) - g((1, 1, 0), 0)
    dn[..., 2, 1] = g((1, 1, 1), 1) - g((1, 1, 0), 1)
    dn[..., 2, 2] = g((1, 1, 1), 2) + g((0, 0, 1), 2)
    jq = dn / (2.0 * safe[..., :, None])
    for i in range(3):
        jq[..., i, i] -= q[..., i] / safe[..., i]

    jf = np.empty_like(jq)
    jf[..., 0, 0] = 0.25 * (h((2, 0, 0), 0, 0) + h((2, 1, 1), 0, 0))
    jf[..., 0, 1] = 0.5 * h((2, 1, 1), 0, 1)
    jf[..., 0, 2] = 0.5 * h((2, 1, 1), 0, 2)
    jf[..., 1, 0] = 0.5 * h((1, 2, 0), 1, 0)
    jf[..., 1, 1] = 0.25 * (h((1, 2, 0), 1, 1) + h((0, 2, 1), 1, 1))
    jf[..., 1, 2] = 0.5 * h((0, 2, 1), 1, 2)
    jf[..., 2, 0] = 0.5 * h((1, 1, 2), 2, 0)
    jf[..., 2, 1] = 0.5 * h((1, 1, 2), 2, 1)
    jf[..., 2, 2] = 0.25 * (h((1, 1, 2), 2, 2) + h((0, 0, 2), 2, 2))
    jac = np.where(degenerate[..., :, None], jf, jq)
    return dg, jac


def algo_stress(model, C_n, C_n1, tol=DEGENERATE_TOL):
    """Algorithmic PK2 stress ``2(D1 I + D2 I^C_algo + DJ J_algo^-1 G_algo / 2)``."""
    return algo_stress_and_tangent(model, C_n, C_n1, tol=tol, tangent=False)


def algo_stress_and_tangent(model, C_n, C_n1, tol=DEGENERATE_TOL, tangent=True):
    """
    Algorithmic stress and its derivative with respect to ``C_n+1``.

    The derivative is returned as a 6x6 Voigt matrix ``A`` with
    ``voigt(dS) = A @ voigt(dC_n+1, "strain")``; it is not symmetric in general.
    """
    C_n = np.asarray(C_n, dtype=float)
    C_n1 = np.asarray(C_n1, dtype=float)
    inv0 = invariants(C_n)
    inv1 = invariants(C_n1)
    ak = algo_kinematics(C_n, C_n1)
    out = greenspan_dg(model, inv0, inv1, tol=tol, with_jacobian=tangent)
    dg, jac = out if tangent else (out, None)
    D = dg.as_array()
    Ja = ak.J_algo
    IxCa = cross(IDENTITY, ak.C_algo)
    S = (2.0 * D[..., 0, None, None] * IDENTITY
         + 2.0 * D[..., 1, None, None] * IxCa
         + (D[..., 2] / Ja)[..., None, None] * ak.G_algo)
    if not tangent:
        return S

    V1 = generator_voigt(C_n1)
    rows = np.einsum("...ik,...kp->...ip", jac, V1)
    vI = voigt(IDENTITY, check=False)
    vIxCa = voigt(IxCa, check=False)
    vGa = voigt(ak.G_algo, check=False)
    A = 2.0 * outer_voigt(np.broadcast_to(vI, vIxCa.shape), rows[..., 0, :])
    A += 2.0 * outer_voigt(vIxCa, rows[..., 1, :])
    A += (1.0 / Ja)[..., None, None] * outer_voigt(vGa, rows[..., 2, :])
    A += D[..., 1, None, None] * wedge_operator_matrix(IDENTITY, check=False)
    A -= (0.5 * D[..., 2] / Ja**2)[..., None, None] * outer_voigt(vGa, V1[..., 2, :])
    A += (D[..., 2] / Ja / 3.0)[..., None, None] * (
        wedge_operator_matrix(ak.C_algo, check=False)
        + 0.5 * wedge_operator_matrix(C_n1, check=False))
    return S, A


def midpoint_stress(model, F_half):
    """PK2 stress evaluated entirely at the midpoint deformation gradient."""
    F_half = np.asarray(F_half, dtype=float)
    C = np.einsum("...ki,...kj->...ij", F_half, F_half)
    return pk2(model, C)


def midpoint_stress_and_tangent(model, F_half):
    C = np.einsum("...ki,...kj->...ij", F_half, F_half)
    _, S, D = stress_and_tangent(model, C)
    return S, D
