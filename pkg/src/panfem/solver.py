"""
Global assembly, Newton iteration and the static load-stepping driver.

Element kernels run over fixed-size chunks of elements. Chunks may be
dispatched to a thread pool, but the chunk partition does not depend on the
thread count and results are reduced in element order, so assembled arrays
are bit-identical for any number of threads.
"""

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, splu

from .element import hex_geometry, mass_batch, static_batch, surface_load_batch
from .errors import NewtonDiverged, NonPositiveJacobian, SingularMatrix

CHUNK = 64


def resolve_threads(threads=None):
    """Thread count from the argument, ``PANFEM_THREADS`` or 1."""
    if threads is None:
        threads = os.environ.get("PANFEM_THREADS", 1)
    threads = int(threads)
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return threads


@dataclass
class NewtonConfig:
    """
    Relative residual tolerance with an absolute floor and an iteration cap.

    ``backtrack`` is the number of step halvings allowed when an iterate
    cannot be evaluated (inverted element) or, with ``line_search``, does not
    decrease the residual norm. Zero disables both. ``polish`` extra
    iterations are taken after the tolerance is met.
    """

    tol_residual: float = 1e-8
    abs_floor: float = 1e-10
    max_iter: int = 20
    backtrack: int = 0
    line_search: bool = False
    polish: int = 0

    def __post_init__(self):
        if not self.tol_residual > 0.0:
            raise ValueError("tol_residual must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class LoadStepSchedule:
    n_steps: int = 10

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")

    def amplitudes(self):
        return [(k + 1) / self.n_steps for k in range(self.n_steps)]


@dataclass
class SparseSystem:
    """Residual and Jacobian restricted to the free dofs, plus the full residual."""

    residual: np.ndarray
    jacobian: sp.csr_matrix
    full_residual: np.ndarray
    free: np.ndarray


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    history: list = field(default_factory=list)


class FeProblem:
    """
    Discretization data of a scene: element geometry, dof numbering,
    Dirichlet data, consistent mass and reference load vectors.
    """

    def __init__(self, scene, threads=None, chunk=CHUNK):
        self.scene = scene
        mesh = scene.mesh
        self.n_dofs = 3 * mesh.n_nodes
        self.hexes = np.asarray(mesh.hexes)
        self.geom = hex_geometry(mesh.element_coords())
        self.edofs = (3 * self.hexes[:, :, None] + np.arange(3)).reshape(-1, 24)
        self.fixed, self.prescribed = scene.fixed_dofs()
        self.free = np.nonzero(~self.fixed)[0]
        self.threads = resolve_threads(threads)
        self.chunk = int(chunk)
        ne = self.hexes.shape[0]
        self.chunks = [slice(i, min(i + self.chunk, ne)) for i in range(0, ne, self.chunk)]
        self._rows = np.repeat(self.edofs, 24, axis=1).ravel()
        self._cols = np.tile(self.edofs, (1, 24)).ravel()
        self.mass_blocks = mass_batch(self.geom, scene.rho0) if scene.rho0 > 0.0 else None
        self.load_refs = []
        for bc in scene.neumann:
            fn = mesh.face_nodes(bc.face_set)
            forces = surface_load_batch(mesh.nodes[fn], bc.traction)
            vec = np.zeros(self.n_dofs)
            dofs = (3 * fn[:, :, None] + np.arange(3)).ravel()
            vec += np.bincount(dofs, weights=forces.ravel(), minlength=self.n_dofs)
            self.load_refs.append((vec, bc.amplitude))

    # -- loads -----------------------------------------------------------

    def external_force(self, t):
        """Dead load vector at time ``t`` from the amplitude functions."""
        f = np.zeros(self.n_dofs)
        for vec, amp in self.load_refs:
            f += amp(t) * vec
        return f

    def reference_load(self):
        """Sum of all load vectors at unit amplitude (static load stepping)."""
        f = np.zeros(self.n_dofs)
        for vec, _ in self.load_refs:
            f += vec
        return f

    def dirichlet_vector(self, scale=1.0):
        u = np.zeros(self.n_dofs)
        u[self.fixed] = scale * self.prescribed[self.fixed]
        return u

    # -- assembly --------------------------------------------------------

    def map_chunks(self, fn):
        """Apply ``fn(slice)`` to every chunk, in element order."""
        if self.threads == 1 or len(self.chunks) == 1:
            return [fn(c) for c in self.chunks]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, self.chunks))

    def gather(self, u):
        return np.asarray(u)[self.edofs]

    def assemble_vector(self, r_e):
        return np.bincount(self.edofs.ravel(), weights=r_e.ravel(), minlength=self.n_dofs)

    def assemble_matrix(self, k_e):
        K = sp.coo_matrix((k_e.ravel(), (self._rows, self._cols)),
                          shape=(self.n_dofs, self.n_dofs))
        return K.tocsr()

    def assemble(self, evaluator, u, tangent=True, reduce=True):
        """
        Assemble element contributions ``evaluator(geom, ue, chunk) -> ElementMatrices``.

        Dirichlet values must already be inserted in ``u``; the returned
        system is restricted to the free dofs.
        """
        ue = self.gather(u)
        parts = self.map_chunks(lambda c: evaluator(self.geom.subset(c), ue[c], c))
        r_e = np.concatenate([p.r for p in parts])
        r = self.assemble_vector(r_e)
        K = None
        if tangent:
            K = self.assemble_matrix(np.concatenate([p.k for p in parts]))
            if reduce:
                K = K[self.free][:, self.free]
        return SparseSystem(r[self.free], K, r, self.free)

    def element_energies(self, evaluator, u):
        """Per-element energies from an evaluator that fills ``energy``."""
        ue = self.gather(u)
        parts = self.map_chunks(lambda c: evaluator(self.geom.subset(c), ue[c], c))
        return np.concatenate([p.energy for p in parts])

    def mass_matrix(self):
        if self.mass_blocks is None:
            return sp.csr_matrix((self.n_dofs, self.n_dofs))
        eye = np.eye(3)
        k = np.einsum("eab,ij->eaibj", self.mass_blocks, eye).reshape(-1, 24, 24)
        return self.assemble_matrix(k)


def assemble(problem, evaluator, u, tangent=True):
    """Module-level alias of :meth:`FeProblem.assemble`."""
    return problem.assemble(evaluator, u, tangent=tangent)


def static_evaluator(model, formulation):
    def ev(geom, ue, chunk=None, tangent=True):
        return static_batch(model, formulation, geom, ue, tangent=tangent)
    return ev


def static_system(problem, model, formulation, amplitude=1.0):
    """``x (free dofs) -> (r, K)`` for the static problem at a load amplitude."""
    ev = static_evaluator(model, formulation)
    f = amplitude * problem.reference_load()[problem.free]
    base = problem.dirichlet_vector(amplitude)

    def system(x):
        u = base.copy()
        u[problem.free] = x
        s = problem.assemble(ev, u)
        return s.residual - f, s.jacobian

    return system


def _solve(K, r):
    if sp.issparse(K):
        with warnings.catch_warnings():
            warnings.simplefilter("error", MatrixRankWarning)
            try:
                lu = splu(sp.csc_matrix(K))
            except (RuntimeError, MatrixRankWarning) as exc:
                raise SingularMatrix(f"LU factorization failed: {exc}") from exc
        dx = lu.solve(r)
    else:
        K = np.atleast_2d(np.asarray(K, dtype=float))
        try:
            dx = np.linalg.solve(K, np.atleast_1d(r))
        except np.linalg.LinAlgError as exc:
            raise SingularMatrix(f"singular Jacobian: {exc}") from exc
    if not np.all(np.isfinite(dx)):
        raise SingularMatrix("non-finite Newton update")
    return dx


def newton(system_fn, x0, cfg=None):
    """
    Newton-Raphson iteration on ``system_fn(x) -> (r, K)``.

    Converged when ``||r|| <= max(tol_residual * ||r0||, abs_floor)``.

    Returns
    -------
    NewtonResult
        Solution, number of linear solves and the residual norm history.

    Raises
    ------
    NewtonDiverged
        Iteration cap, non-finite residual, or an update that inverts an
        element at every backtracking length.
    SingularMatrix
        Factorization failure.
    """
    cfg = cfg or NewtonConfig()
    x = np.array(x0, dtype=float)
    r, K = system_fn(x)
    norm = float(np.linalg.norm(r))
    history = [norm]
    if not np.isfinite(norm):
        raise NewtonDiverged("Newton diverged: non-finite initial residual", history)
    tol = max(cfg.tol_residual * norm, cfg.abs_floor)
    it = 0
    extra = cfg.polish
    while norm > tol or (extra > 0 and it > 0 and norm > 0.0):
        if norm <= tol:
            extra -= 1
        elif it >= cfg.max_iter:
            raise NewtonDiverged(
                f"Newton diverged: {cfg.max_iter} iterations, residual {norm:.3e} > {tol:.3e}",
                history)
        dx = _solve(K, -np.asarray(r)).reshape(x.shape)
        it += 1
        alpha = 1.0
        best = None
        for attempt in range(cfg.backtrack + 1):
            last = attempt == cfg.backtrack
            try:
                trial = system_fn(x + alpha * dx)
            except NonPositiveJacobian as exc:
                if last and best is None:
                    raise NewtonDiverged(
                        f"Newton diverged: every trial step inverts an element ({exc})",
                        history) from exc
                alpha *= 0.5
                continue
            tnorm = float(np.linalg.norm(trial[0]))
            if best is None or tnorm < best[0]:
                best = (tnorm, alpha, trial)
            if not cfg.line_search or tnorm <= (1.0 - 1e-4 * alpha) * norm or last:
                break
            alpha *= 0.5
        _, alpha, (r, K) = best
        x = x + alpha * dx
        norm = float(np.linalg.norm(r))
        history.append(norm)
        if not np.isfinite(norm):
            raise NewtonDiverged("Newton diverged: non-finite residual", history)
    return NewtonResult(x, it, history)


@dataclass
class StaticResult:
    amplitudes: list
    displacements: list
    iterations: list
    histories: list
    probes: dict


def static_driver(scene, model, formulation="H1", schedule=None, cfg=None, problem=None,
                  bisect=True):
    """
    Load-stepped static solution with linearly ramped amplitude.

    Each step starts from the previous converged state. A failed step is
    retried once as two half steps when ``bisect`` is set.
    """
    schedule = schedule or LoadStepSchedule()
    cfg = cfg or NewtonConfig()
    problem = problem or FeProblem(scene)
    x = np.zeros(problem.free.size)
    res = StaticResult([], [], [], [], {name: [] for name in scene.probes})
    a_prev = 0.0
    for step, a in enumerate(schedule.amplitudes(), start=1):
        try:
            out = newton(static_system(problem, model, formulation, a), x, cfg)
            its, hist = out.iterations, out.history
        except NewtonDiverged as exc:
            if not bisect:
                exc.step = step
                raise
            try:
                half = newton(static_system(problem, model, formulation, 0.5 * (a_prev + a)), x, cfg)
                out = newton(static_system(problem, model, formulation, a), half.x, cfg)
            except NewtonDiverged as exc2:
                raise NewtonDiverged(f"load step {step}: {exc2}", exc2.history, step) from exc
            its, hist = half.iterations + out.iterations, half.history + out.history
        x = out.x
        u = problem.dirichlet_vector(a)
        u[problem.free] = x
        res.amplitudes.append(a)
        res.displacements.append(u)
        res.iterations.append(its)
        res.histories.append(hist)
        for name, node in scene.probes.items():
            res.probes[name].append(u[3 * node:3 * node + 3].copy())
        a_prev = a
    return res
