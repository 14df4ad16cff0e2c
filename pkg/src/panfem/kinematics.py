"""
Strain measures, isotropic invariants, tensor generators and the mid-step
kinematic quantities used by the energy-momentum integrator.

Everything broadcasts over leading axes of ``(..., 3, 3)`` inputs.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveJacobian
from .tensor3 import IDENTITY, cof_det, cross, trace


@dataclass(frozen=True)
class InvariantTriple:
    """``(tr C, tr cof C, det F)``; fields may be arrays of equal shape."""

    I1: np.ndarray
    I2: np.ndarray
    J: np.ndarray

    def as_array(self):
        return np.stack(np.broadcast_arrays(self.I1, self.I2, self.J), axis=-1)


@dataclass(frozen=True)
class InvariantQuad:
    """Network input ``(I1, I2, J, -J)``."""

    I1: np.ndarray
    I2: np.ndarray
    J: np.ndarray

    @property
    def Jstar(self):
        return -np.asarray(self.J)

    def as_array(self):
        I1, I2, J = np.broadcast_arrays(self.I1, self.I2, self.J)
        return np.stack((I1, I2, J, -J), axis=-1)


@dataclass(frozen=True)
class GeneratorSet:
    """Derivatives of ``(I1, I2, J)`` with respect to C."""

    gI1: np.ndarray
    gI2: np.ndarray
    gJ: np.ndarray

    def stacked(self):
        """Array of shape (..., 3, 3, 3) with the generator index at axis -3."""
        gI1 = np.broadcast_to(self.gI1, self.gJ.shape)
        return np.stack((gI1, self.gI2, self.gJ), axis=-3)


@dataclass(frozen=True)
class AlgoKinematics:
    C_algo: np.ndarray
    G_algo: np.ndarray
    J_algo: np.ndarray


def _require_positive(J, what="det F"):
    J = np.asarray(J)
    if not np.all(J > 0.0):
        raise NonPositiveJacobian(f"{what} <= 0 (min {np.min(J):.6g})")


def strain_measures(F):
    """Return ``C = F^T F``, ``G = cof C`` and ``J = det F``."""
    F = np.asarray(F, dtype=float)
    _, J = cof_det(F)
    _require_positive(J)
    C = np.einsum("...ki,...kj->...ij", F, F)
    G, _ = cof_det(C)
    return C, G, J


def jacobian_from_C(C):
    _, detC = cof_det(C)
    _require_positive(detC, "det C")
    return np.sqrt(detC)


def invariants(C):
    """Isotropic invariants ``(tr C, tr cof C, +sqrt(det C))``."""
    C = np.asarray(C, dtype=float)
    G, detC = cof_det(C)
    _require_positive(detC, "det C")
    return InvariantTriple(trace(C), trace(G), np.sqrt(detC))


def generators(C):
    """Tensor generators ``(I, I ^ C, J^-1 G / 2)``."""
    C = np.asarray(C, dtype=float)
    G, detC = cof_det(C)
    _require_positive(detC, "det C")
    J = np.sqrt(detC)
    gI1 = np.broadcast_to(IDENTITY, C.shape).copy()
    gI2 = cross(IDENTITY, C)
    gJ = 0.5 * G / J[..., None, None]
    return GeneratorSet(gI1, gI2, gJ)


def algo_kinematics(C_n, C_n1):
    """
    Mid-step kinematics of the energy-momentum scheme.

    ``C_algo`` is the arithmetic mean, ``G_algo = (C_algo ^ C_algo + mean G) / 3``
    and ``J_algo`` the mean Jacobian of the two endpoint states.
    """
    C_n = np.asarray(C_n, dtype=float)
    C_n1 = np.asarray(C_n1, dtype=float)
    G_n, d_n = cof_det(C_n)
    G_n1, d_n1 = cof_det(C_n1)
    _require_positive(d_n, "det C_n")
    _require_positive(d_n1, "det C_n+1")
    C_a = 0.5 * (C_n + C_n1)
    G_a = (cross(C_a, C_a) + 0.5 * (G_n + G_n1)) / 3.0
    J_a = 0.5 * (np.sqrt(d_n) + np.sqrt(d_n1))
    return AlgoKinematics(C_a, G_a, J_a)
