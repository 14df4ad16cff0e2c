"""
Invariant-based hyperelastic constitutive models.

Every model exposes ``energy(I1, I2, J)`` and ``response(I1, I2, J)``; the
latter returns a :class:`MaterialResponse` with the energy, its gradient with
respect to ``(I1, I2, J)`` and the symmetric 3x3 Hessian. Inputs are arrays of
any (common) shape. Finite element code only ever sees these three invariants.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import NegativeWeight, NonPositiveJacobian
from .kinematics import generators, invariants
from .tensor3 import (IDENTITY, cof_det, cross, outer_voigt, voigt,
                      wedge_operator_matrix)

#: Invariant input of the undeformed state, ``(I1, I2, J, J*)`` at F = I.
REFERENCE_INPUT = np.array([3.0, 3.0, 1.0, -1.0])
#: Weights of the stress normalization constant.
_NFRAK_WEIGHTS = np.array([1.0, 2.0, 0.5, -0.5])


@dataclass
class MaterialResponse:
    w: np.ndarray
    dw: np.ndarray
    d2w: np.ndarray


def _check_J(J):
    if not np.all(np.asarray(J) > 0.0):
        raise NonPositiveJacobian(f"J <= 0 (min {np.min(J):.6g})")


def softplus(x):
    return np.logaddexp(0.0, x)


# --------------------------------------------------------------------------
# Mooney-Rivlin
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MrParams:
    """Mooney-Rivlin constants in Pa. Stress-free reference iff d = 2(a + 2b)."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if min(self.a, self.b, self.c) < 0.0:
            raise ValueError("Mooney-Rivlin a, b, c must be non-negative")
        target = 2.0 * (self.a + 2.0 * self.b)
        if abs(self.d - target) > 1e-12 * max(1.0, abs(target)):
            warnings.warn(
                f"d = {self.d} differs from 2(a+2b) = {target}; the reference "
                "configuration is not stress free", stacklevel=2)


MR_COMPRESSIBLE = MrParams(a=831.25, b=166.25, c=10000.0, d=2327.5)
MR_NEARLY_INCOMPRESSIBLE = MrParams(a=126.0, b=252.0, c=81512.0, d=1260.0)


class MooneyRivlin:
    """``W = a(I1-3) + b(I2-3) + c/2 (J-1)^2 - d log J``."""

    def __init__(self, params):
        self.params = params

    def __repr__(self):
        return f"MooneyRivlin({self.params})"

    def energy(self, I1, I2, J):
        p = self.params
        J = np.asarray(J, dtype=float)
        _check_J(J)
        return (p.a * (np.asarray(I1) - 3.0) + p.b * (np.asarray(I2) - 3.0)
                + 0.5 * p.c * (J - 1.0) ** 2 - p.d * np.log(J))

    def response(self, I1, I2, J):
        return mr_eval(self.params, I1, I2, J)


def mr_eval(p, I1, I2, J):
    I1, I2, J = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (I1, I2, J)))
    _check_J(J)
    w = p.a * (I1 - 3.0) + p.b * (I2 - 3.0) + 0.5 * p.c * (J - 1.0) ** 2 - p.d * np.log(J)
    dw = np.stack((np.full_like(J, p.a), np.full_like(J, p.b), p.c * (J - 1.0) - p.d / J), axis=-1)
    d2w = np.zeros(J.shape + (3, 3))
    d2w[..., 2, 2] = p.c + p.d / J**2
    return MaterialResponse(w, dw, d2w)


# --------------------------------------------------------------------------
# Physics-augmented neural network
# --------------------------------------------------------------------------

@dataclass
class PannParams:
    """Single hidden layer ICNN weights: ``w1`` (n, 4), ``w2`` (n,), ``b`` (n,)."""

    w1: np.ndarray
    w2: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.w1 = np.array(self.w1, dtype=float).reshape(-1, 4)
        n = self.w1.shape[0]
        self.w2 = np.array(self.w2, dtype=float).reshape(n)
        self.b = np.array(self.b, dtype=float).reshape(n)

    @property
    def n(self):
        return self.w1.shape[0]

    def validate(self):
        if np.any(self.w1 < 0.0) or np.any(self.w2 < 0.0):
            raise NegativeWeight("w1 and w2 entries must be non-negative")
        for name in ("w1", "w2", "b"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite entries in {name}")

    def copy(self):
        return PannParams(self.w1.copy(), self.w2.copy(), self.b.copy())

    def flatten(self):
        return np.concatenate((self.w1.ravel(), self.w2, self.b))

    @classmethod
    def unflatten(cls, theta, n):
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:4 * n].reshape(n, 4), theta[4 * n:5 * n], theta[5 * n:6 * n])


def pann_nn_eval(p, q):
    """
    Network energy and its first two derivatives with respect to its input.

    Parameters
    ----------
    p : PannParams
    q : numpy.ndarray of shape (..., 4)
        Inputs ``(I1, I2, J, J*)``.

    Returns
    -------
    MaterialResponse with ``dw`` of shape (..., 4) and ``d2w`` (..., 4, 4).
    """
    q = np.asarray(q, dtype=float)
    h = q @ p.w1.T + p.b
    s = expit(h)
    w = softplus(h) @ p.w2
    dw = (s * p.w2) @ p.w1
    curv = s * (1.0 - s) * p.w2
    d2w = np.einsum("...a,ai,aj->...ij", curv, p.w1, p.w1)
    return MaterialResponse(w, dw, d2w)


def growth(J):
    """``(J + 1/J - 2)^2`` with first and second derivative."""
    J = np.asarray(J, dtype=float)
    t = J + 1.0 / J - 2.0
    dt = 1.0 - J**-2
    return t**2, 2.0 * t * dt, 2.0 * dt**2 + 4.0 * t * J**-3


class PannModel:
    """
    Normalized PANN potential

    ``W = W_NN(I1, I2, J, -J) - n_frak (J - 1) + w_energy + (J + 1/J - 2)^2``.
    """

    def __init__(self, params, n_frak, w_energy):
        self.params = params
        self.n_frak = float(n_frak)
        self.w_energy = float(w_energy)

    def __repr__(self):
        return f"PannModel(n={self.params.n}, n_frak={self.n_frak:.6g})"

    def _collapse(self, I1, I2, J):
        I1, I2, J = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (I1, I2, J)))
        _check_J(J)
        q = np.stack((I1, I2, J, -J), axis=-1)
        return J, pann_nn_eval(self.params, q)

    def energy(self, I1, I2, J):
        I1, I2, J = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (I1, I2, J)))
        _check_J(J)
        q = np.stack((I1, I2, J, -J), axis=-1)
        w_nn = softplus(q @ self.params.w1.T + self.params.b) @ self.params.w2
        return w_nn - self.n_frak * (J - 1.0) + self.w_energy + (J + 1.0 / J - 2.0) ** 2

    def response(self, I1, I2, J):
        J, nn = self._collapse(I1, I2, J)
        g, dg, d2g = growth(J)
        # J* = -J: fold the fourth input back onto J
        T = np.array([[1.0, 0.0, 0.0, 0.0],
                      [0.0, 1.0, 0.0, 0.0],
                      [0.0, 0.0, 1.0, -1.0]])
        w = nn.w - self.n_frak * (J - 1.0) + self.w_energy + g
        dw = nn.dw @ T.T
        dw[..., 2] += dg - self.n_frak
        d2w = T @ nn.d2w @ T.T
        d2w[..., 2, 2] += d2g
        return MaterialResponse(w, dw, d2w)


def pann_build(p):
    """Attach the stress and energy normalization constants to network weights."""
    p.validate()
    ref = pann_nn_eval(p, REFERENCE_INPUT)
    n_frak = 2.0 * float(ref.dw @ _NFRAK_WEIGHTS)
    return PannModel(p, n_frak=n_frak, w_energy=-float(ref.w))


# --------------------------------------------------------------------------
# Tensor-level evaluation shared by all models
# --------------------------------------------------------------------------

def evaluate_invariants(model, C):
    inv = invariants(C)
    return inv, model.response(inv.I1, inv.I2, inv.J)


def stress_from_derivatives(dw, C, G=None, J=None):
    """``S = 2(dW1 I + dW2 I^C + dWJ J^-1 G / 2)`` for given derivatives."""
    C = np.asarray(C, dtype=float)
    if G is None or J is None:
        G, detC = cof_det(C)
        J = np.sqrt(detC)
    dw = np.asarray(dw)
    return (2.0 * dw[..., 0, None, None] * IDENTITY
            + 2.0 * dw[..., 1, None, None] * cross(IDENTITY, C)
            + (dw[..., 2] / J)[..., None, None] * G)


def pk2(model, C):
    """Second Piola-Kirchhoff stress of an invariant model at ``C``."""
    C = np.asarray(C, dtype=float)
    inv, resp = evaluate_invariants(model, C)
    G, _ = cof_det(C)
    return stress_from_derivatives(resp.dw, C, G, inv.J)


def generator_voigt(C):
    """Stress-role Voigt rows of the three generators, shape (..., 3, 6)."""
    g = generators(C)
    return np.stack([voigt(t, "stress", check=False) for t in (g.gI1, g.gI2, g.gJ)], axis=-2)


def generator_derivative_voigt(C):
    """
    Voigt operators ``dg_k/dC`` of the generators, shape (..., 3, 6, 6).

    ``d(I ^ C)/dC = D(I)`` and
    ``d(J^-1 G / 2)/dC = -J^-3 G (x) G / 4 + J^-1 D(C) / 2``.
    """
    C = np.asarray(C, dtype=float)
    G, detC = cof_det(C)
    J = np.sqrt(detC)
    vG = voigt(G, "stress", check=False)
    DI = wedge_operator_matrix(IDENTITY, check=False)
    dJ = (-0.25 * J**-3)[..., None, None] * outer_voigt(vG, vG) \
        + (0.5 / J)[..., None, None] * wedge_operator_matrix(C, check=False)
    out = np.zeros(C.shape[:-2] + (3, 6, 6))
    out[..., 1, :, :] = DI
    out[..., 2, :, :] = dJ
    return out


def tangent_from_derivatives(dw, d2w, C):
    """Voigt form of ``4 d2W/dC dC`` from invariant derivatives."""
    gv = generator_voigt(C)
    dg = generator_derivative_voigt(C)
    D = 4.0 * np.einsum("...ij,...ip,...jq->...pq", d2w, gv, gv)
    D += 4.0 * np.einsum("...i,...ipq->...pq", dw, dg)
    return D


def material_tangent(model, C):
    """
    Material tangent ``2 dS/dC`` as a 6x6 Voigt matrix (strain to stress role).
    """
    C = np.asarray(C, dtype=float)
    _, resp = evaluate_invariants(model, C)
    return tangent_from_derivatives(resp.dw, resp.d2w, C)


def stress_and_tangent(model, C):
    """Energy, PK2 stress and Voigt tangent in a single model evaluation."""
    C = np.asarray(C, dtype=float)
    inv, resp = evaluate_invariants(model, C)
    G, _ = cof_det(C)
    S = stress_from_derivatives(resp.dw, C, G, inv.J)
    D = tangent_from_derivatives(resp.dw, resp.d2w, C)
    return resp.w, S, D
