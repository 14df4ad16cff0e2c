"""
Synthetic strain-stress data and Sobolev (stress-based) calibration of PANN
weights with full-batch ADAM.

The loss gradient is computed in closed form: the model stress is linear in
the invariant derivatives ``(W_1, W_2, W_J)``, which are in turn explicit in
the network weights, including the stress normalization constant.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .errors import DivergedLoss, IoError, RootFindFailure
from .kinematics import invariants
from .material import (REFERENCE_INPUT, _NFRAK_WEIGHTS, PannParams, growth, pann_build,
                       pk2, softplus, stress_and_tangent)
from .tensor3 import IDENTITY, cof_det, cross

CASES = ("uniaxial", "equibiaxial", "simple_shear", "mixed")
CSV_HEADER = ["C11", "C12", "C13", "C22", "C23", "C33",
              "S11", "S12", "S13", "S22", "S23", "S33"]
_UPPER = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


@dataclass(frozen=True)
class StrainStressSample:
    C: np.ndarray
    S: np.ndarray


@dataclass
class Dataset:
    """Stacked right Cauchy-Green tensors ``C`` (m, 3, 3) and PK2 stresses ``S``."""

    C: np.ndarray
    S: np.ndarray
    label: str = "calibration"

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=float).reshape(-1, 3, 3)
        self.S = np.asarray(self.S, dtype=float).reshape(-1, 3, 3)
        if self.C.shape[0] == 0:
            raise ValueError("dataset must not be empty")
        if self.C.shape != self.S.shape:
            raise ValueError("C and S must have equal shapes")

    def __len__(self):
        return self.C.shape[0]

    @property
    def samples(self):
        return [StrainStressSample(c, s) for c, s in zip(self.C, self.S)]

    @classmethod
    def concatenate(cls, parts, label="calibration"):
        return cls(np.concatenate([p.C for p in parts]), np.concatenate([p.S for p in parts]), label)


@dataclass
class TrainConfig:
    epochs: int = 5000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 42
    n: int = 8
    output_scale: float = 128.0
    """Optimizer variable for ``w2`` is ``w2 / output_scale``; ``None`` picks it from the data."""
    input_scale: float = 16.0
    """Optimizer variables for ``w1`` and ``b`` are divided by this factor."""

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        for name in ("learning_rate", "beta1", "beta2"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")


# --------------------------------------------------------------------------
# Data generation
# --------------------------------------------------------------------------

def _c_of(F):
    return np.einsum("...ki,...kj->...ij", F, F)


def _lateral_solve(gt, build_F, comp, guess, lo=0.2, hi=3.0, tol=1e-13, max_iter=100):
    """
    Solve ``S[comp, comp](mu) = 0`` for the free stretch ``mu``.

    Newton with the consistent tangent, falling back to Brent's method on a
    bracket when Newton leaves the admissible range or stalls.
    """
    def s_and_ds(mu):
        F = build_F(mu)
        C = _c_of(F)
        _, S, D = stress_and_tangent(gt, C)
        # dC_kk/dmu = 2 mu for every k that carries mu
        carriers = [k for k in range(3) if F[k, k] == mu]
        dS = sum(0.5 * D[comp, k] * 2.0 * mu for k in carriers)
        return S[comp, comp], dS, np.max(np.abs(S))

    mu = guess
    for _ in range(max_iter):
        s, ds, scale = s_and_ds(mu)
        if abs(s) <= tol * max(scale, 1.0):
            return mu
        if ds == 0.0:
            break
        step = s / ds
        mu_new = mu - step
        if not lo < mu_new < hi:
            break
        mu = mu_new
    f = lambda m: s_and_ds(m)[0]  # noqa: E731
    try:
        return brentq(f, lo, hi, xtol=1e-15, rtol=4e-16, maxiter=max_iter)
    except (ValueError, RuntimeError) as exc:
        raise RootFindFailure(f"lateral stretch solve failed: {exc}") from exc


def _deformations(gt, case, n_points):
    if case == "uniaxial":
        lams = np.linspace(0.75, 1.75, n_points)
        out, mu = [], 1.0
        for lam in lams:
            mu = _lateral_solve(gt, lambda m, l=lam: np.diag([l, m, m]), 1, mu)
            out.append(np.diag([lam, mu, mu]))
        return np.array(out)
    if case == "equibiaxial":
        lams = np.linspace(0.75, 1.755, n_points)
        out, mu = [], 1.0
        for lam in lams:
            mu = _lateral_solve(gt, lambda m, l=lam: np.diag([l, l, m]), 2, mu)
            out.append(np.diag([lam, lam, mu]))
        return np.array(out)
    if case == "simple_shear":
        F = np.tile(np.eye(3), (n_points, 1, 1))
        F[:, 0, 1] = np.linspace(-0.25, 0.75, n_points)
        return F
    if case == "mixed":
        g = np.linspace(0.0, 0.75, n_points)
        F = np.tile(np.eye(3), (n_points, 1, 1))
        F[:, 0, 0] += g
        F[:, 0, 1] += g
        return F
    raise ValueError(f"unknown load case {case!r}")


def gen_loadcase(gt, case, n_points=100, label=None):
    """
    Sample a ground-truth model along one load path.

    ``uniaxial`` and ``equibiaxial`` solve for the stress-free lateral
    stretch, ``simple_shear`` and ``mixed`` are purely kinematic.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    F = _deformations(gt, case, n_points)
    C = _c_of(F)
    S = pk2(gt, C)
    return Dataset(C, S, label or ("test" if case == "mixed" else "calibration"))


def calibration_dataset(gt, n_points=100):
    """Uniaxial, equibiaxial and simple shear, concatenated."""
    return Dataset.concatenate(
        [gen_loadcase(gt, c, n_points) for c in ("uniaxial", "equibiaxial", "simple_shear")])


def test_dataset(gt, n_points=100):
    return gen_loadcase(gt, "mixed", n_points, label="test")


# --------------------------------------------------------------------------
# Loss and gradient
# --------------------------------------------------------------------------

@dataclass
class _Features:
    q: np.ndarray        # (m, 4) network inputs
    T: np.ndarray        # (m, 3, 3, 3) stress bases 2I, 2 I^C, J^-1 G
    J: np.ndarray


def _features(C):
    inv = invariants(C)
    G, _ = cof_det(C)
    q = np.stack((inv.I1, inv.I2, inv.J, -inv.J), axis=-1)
    T = np.stack((np.broadcast_to(2.0 * IDENTITY, C.shape), 2.0 * cross(IDENTITY, C),
                  G / inv.J[:, None, None]), axis=1)
    return _Features(q, T, inv.J)


def _model_stress(p, feat):
    h = feat.q @ p.w1.T + p.b
    s = expit(h)
    dnn = (s * p.w2) @ p.w1                       # (m, 4)
    ref_h = REFERENCE_INPUT @ p.w1.T + p.b
    n_frak = 2.0 * float(((expit(ref_h) * p.w2) @ p.w1) @ _NFRAK_WEIGHTS)
    _, dg, _ = growth(feat.J)
    dw = np.stack((dnn[:, 0], dnn[:, 1], dnn[:, 2] - dnn[:, 3] - n_frak + dg), axis=-1)
    S = np.einsum("mk,mkij->mij", dw, feat.T)
    return S, h, s


def sobolev_loss(p, d):
    """``sum_i ||S_i - S_model(C_i)||_F^2 / (9 m)`` with freshly built normalization."""
    model = pann_build(p)
    S = pk2(model, d.C)
    return float(np.sum((S - d.S) ** 2) / (9.0 * len(d)))


def loss_and_grad(p, d, feat=None):
    """
    Loss and its gradient with respect to ``(w1, w2, b)``.

    Returns
    -------
    loss : float
    grad : PannParams
        Gradient arrays in the layout of the parameters.
    """
    feat = feat or _features(d.C)
    m = len(d)
    S, h, s = _model_stress(p, feat)
    E = S - d.S
    loss = float(np.sum(E**2) / (9.0 * m))
    e = np.einsum("mij,mkij->mk", E, feat.T) * (2.0 / (9.0 * m))   # (m, 3)
    u = np.stack((e[:, 0], e[:, 1], e[:, 2], -e[:, 2]), axis=-1)     # (m, 4)
    c = u @ p.w1.T                                                   # (m, n)
    sp = s * (1.0 - s)

    g_w2 = np.sum(s * c, axis=0)
    g_b = np.sum(p.w2 * sp * c, axis=0)
    g_w1 = np.einsum("ma,mk->ak", p.w2 * sp * c, feat.q) + np.einsum("ma,mk->ak", p.w2 * s, u)

    # stress normalization n_frak enters W_J with a minus sign
    e3 = float(np.sum(e[:, 2]))
    h0 = REFERENCE_INPUT @ p.w1.T + p.b
    s0 = expit(h0)
    sp0 = s0 * (1.0 - s0)
    v = p.w1 @ _NFRAK_WEIGHTS
    g_w2 -= e3 * 2.0 * s0 * v
    g_b -= e3 * 2.0 * p.w2 * sp0 * v
    g_w1 -= e3 * 2.0 * p.w2[:, None] * (np.outer(sp0 * v, REFERENCE_INPUT)
                                        + np.outer(s0, _NFRAK_WEIGHTS))
    return loss, PannParams(g_w1, g_w2, g_b)


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------

def init_params(n=8, seed=42):
    """``|N(0, 1/sqrt(fan_in))|`` weights and ``N(0, 0.1)`` biases."""
    rng = np.random.default_rng(seed)
    w1 = np.abs(rng.normal(0.0, 1.0 / np.sqrt(4.0), (n, 4)))
    w2 = np.abs(rng.normal(0.0, 1.0 / np.sqrt(n), n))
    b = rng.normal(0.0, 0.1, n)
    return PannParams(w1, w2, b)


def auto_output_scale(p, d):
    """Ratio of RMS data stress to RMS initial model stress, rounded to a power of two."""
    S, _, _ = _model_stress(p, _features(d.C))
    ratio = np.sqrt(np.mean(d.S**2)) / max(np.sqrt(np.mean(S**2)), 1e-300)
    return float(2.0 ** np.round(np.log2(max(ratio, 1.0))))


@dataclass
class TrainResult:
    params: PannParams
    history: list = field(default_factory=list)
    output_scale: float = 1.0


def train_adam(init, d, cfg=None, record_every=100):
    """
    Full-batch ADAM on :func:`loss_and_grad` with non-negativity projection.

    Parameters
    ----------
    init : PannParams or int
        Initial weights, used as given, or a seed for :func:`init_params`
        whose ``w2`` is then multiplied by the output scale.
    d : Dataset
    cfg : TrainConfig

    Returns
    -------
    TrainResult
        Trained weights (``w2`` in model units) and the loss every
        ``record_every`` epochs.
    """
    cfg = cfg or TrainConfig()
    seeded = isinstance(init, (int, np.integer))
    p0 = init_params(cfg.n, init) if seeded else init.copy()
    alpha = cfg.output_scale if cfg.output_scale is not None else auto_output_scale(p0, d)
    if seeded:
        # a seeded start is lifted to the stress magnitude of the data
        p0 = PannParams(p0.w1, alpha * p0.w2, p0.b)
    feat = _features(d.C)
    n = p0.n
    # optimizer variables: w2 / alpha, w1 / input_scale and b / input_scale
    theta = np.concatenate((p0.w1.ravel(), p0.w2 / alpha, p0.b))
    nonneg = np.zeros(theta.size, dtype=bool)
    nonneg[:5 * n] = True
    scale = np.ones(theta.size)
    scale[4 * n:5 * n] = alpha
    scale[:4 * n] *= cfg.input_scale
    scale[5 * n:] *= cfg.input_scale
    theta[:4 * n] /= cfg.input_scale
    theta[5 * n:] /= cfg.input_scale
    mom = np.zeros_like(theta)
    vel = np.zeros_like(theta)
    b1, b2 = cfg.beta1, cfg.beta2
    history = []
    for epoch in range(1, cfg.epochs + 1):
        p = PannParams.unflatten(theta * scale, n)
        loss, g = loss_and_grad(p, d, feat)
        if not np.isfinite(loss):
            raise DivergedLoss(f"non-finite loss at epoch {epoch}")
        if record_every and (epoch - 1) % record_every == 0:
            history.append((epoch - 1, loss))
        grad = g.flatten() * scale
        mom = b1 * mom + (1.0 - b1) * grad
        vel = b2 * vel + (1.0 - b2) * grad**2
        mhat = mom / (1.0 - b1**epoch)
        vhat = vel / (1.0 - b2**epoch)
        theta = theta - cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.eps)
        theta[nonneg] = np.maximum(theta[nonneg], 0.0)
    p = PannParams.unflatten(theta * scale, n)
    if record_every:
        history.append((cfg.epochs, sobolev_loss(p, d)))
    return TrainResult(p, history, alpha)


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

def write_dataset_csv(path, d):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for C, S in zip(d.C, d.S):
                w.writerow([repr(float(C[i, j])) for i, j in _UPPER]
                           + [repr(float(S[i, j])) for i, j in _UPPER])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_dataset_csv(path, label="calibration"):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0] != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header")
    vals = np.array(rows[1:], dtype=float).reshape(-1, 12)
    C = np.empty((vals.shape[0], 3, 3))
    S = np.empty_like(C)
    for k, (i, j) in enumerate(_UPPER):
        C[:, i, j] = C[:, j, i] = vals[:, k]
        S[:, i, j] = S[:, j, i] = vals[:, 6 + k]
    return Dataset(C, S, label)
