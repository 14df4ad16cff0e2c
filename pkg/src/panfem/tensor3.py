"""
Dense 3x3 tensor algebra.

All routines operate on numpy arrays of shape ``(..., 3, 3)`` and broadcast
over leading axes, in the style of a collection of functions rather than a
tensor class.

Voigt ordering is fixed to (11, 22, 33, 12, 23, 13). Stress-like vectors carry
the shear entries once, strain-like vectors carry them twice, so that
``voigt(S, "stress") @ voigt(E, "strain") == S : E``.
"""

import numpy as np

from .errors import AsymmetricInput

VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2))
_VI = np.array([p[0] for p in VOIGT_PAIRS])
_VJ = np.array([p[1] for p in VOIGT_PAIRS])
_SHEAR = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])

_N1 = np.array([1, 2, 0])
_N2 = np.array([2, 0, 1])

SYM_TOL = 1e-12

EPS = np.zeros((3, 3, 3))
EPS[0, 1, 2] = EPS[1, 2, 0] = EPS[2, 0, 1] = 1.0
EPS[0, 2, 1] = EPS[2, 1, 0] = EPS[1, 0, 2] = -1.0

IDENTITY = np.eye(3)


def cross(A, B):
    """
    Tensor cross product ``A ^ B``.

    ``(A ^ B)_ia = e_ijk e_abg A_jb B_kg``, expanded in closed form.

    Parameters
    ----------
    A, B : numpy.ndarray of shape (..., 3, 3)

    Returns
    -------
    numpy.ndarray of shape (..., 3, 3)
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    r1 = _N1[:, None]
    r2 = _N2[:, None]
    c1 = _N1[None, :]
    c2 = _N2[None, :]
    return (A[..., r1, c1] * B[..., r2, c2]
            - A[..., r1, c2] * B[..., r2, c1]
            - A[..., r2, c1] * B[..., r1, c2]
            + A[..., r2, c2] * B[..., r1, c1])


def cof_det(A):
    """Cofactor ``1/2 A ^ A`` and determinant ``(cof A : A) / 3``."""
    A = np.asarray(A, dtype=float)
    cof = 0.5 * cross(A, A)
    det = np.einsum("...ij,...ij->...", cof, A) / 3.0
    return cof, det


def ddot(A, B):
    """Double contraction ``A : B``."""
    return np.einsum("...ij,...ij->...", A, B)


def trace(A):
    return np.trace(A, axis1=-2, axis2=-1)


def transpose(A):
    return np.swapaxes(A, -1, -2)


def sym(A):
    return 0.5 * (A + transpose(A))


def _check_symmetric(A):
    scale = np.max(np.abs(A), axis=(-2, -1), initial=0.0)
    asym = np.max(np.abs(A - transpose(A)), axis=(-2, -1), initial=0.0)
    if np.any(asym > SYM_TOL * np.maximum(scale, 1e-300)):
        raise AsymmetricInput(
            f"tensor not symmetric to {SYM_TOL:g} relative (max skew part {np.max(asym):.3e})")


def voigt(A, role="stress", check=True):
    """
    Pack a symmetric tensor into a Voigt 6-vector.

    Parameters
    ----------
    A : numpy.ndarray of shape (..., 3, 3)
    role : {"stress", "strain"}
        Strain role doubles the shear entries.
    check : bool
        Raise :class:`AsymmetricInput` if ``A`` is not symmetric.
    """
    A = np.asarray(A, dtype=float)
    if check:
        _check_symmetric(A)
    v = 0.5 * (A[..., _VI, _VJ] + A[..., _VJ, _VI])
    if role == "strain":
        v = v * _SHEAR
    elif role != "stress":
        raise ValueError(f"unknown Voigt role {role!r}")
    return v


def unvoigt(v, role="stress"):
    """Inverse of :func:`voigt`."""
    v = np.asarray(v, dtype=float)
    if role == "strain":
        v = v / _SHEAR
    elif role != "stress":
        raise ValueError(f"unknown Voigt role {role!r}")
    A = np.empty(v.shape[:-1] + (3, 3))
    A[..., _VI, _VJ] = v
    A[..., _VJ, _VI] = v
    return A


def wedge_fourth_order(A):
    """
    Fourth-order tensor ``T`` with ``T : B = A ^ B`` for symmetric ``B``.

    Symmetrized in its last index pair.
    """
    A = np.asarray(A, dtype=float)
    T = np.einsum("ijk,abg,...jb->...iakg", EPS, EPS, A)
    return 0.5 * (T + np.swapaxes(T, -1, -2))


def fourth_to_voigt(T):
    """6x6 matrix mapping strain-role vectors to stress-role vectors."""
    return T[..., _VI[:, None], _VJ[:, None], _VI[None, :], _VJ[None, :]]


def wedge_operator_matrix(A, check=True):
    """
    Operator matrix ``D(A)`` of the cross product with a symmetric tensor.

    ``voigt(A ^ B, "stress") == D(A) @ voigt(B, "strain")`` for every
    symmetric ``B``.
    """
    A = np.asarray(A, dtype=float)
    if check:
        _check_symmetric(A)
    return fourth_to_voigt(wedge_fourth_order(A))


def outer_voigt(a, b):
    """Dyad of two Voigt vectors, broadcasting over leading axes."""
    return a[..., :, None] * b[..., None, :]
