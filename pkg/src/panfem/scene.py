"""
Benchmark geometries, structured hexahedral meshing and boundary conditions.

Meshes are generated by mapped subdivision of bilinear quadrilateral blocks
that are extruded along the remaining axis. Coincident nodes of adjacent
blocks are merged.
"""

from dataclasses import dataclass, field

import numpy as np

from .element import FACES, hex_geometry
from .errors import ConfigInvalid

#: L-shape traction direction in N/m^2.
LSHAPE_TRACTION = np.array([256.0, 512.0, 768.0]) / 9.0


# --------------------------------------------------------------------------
# Mesh
# --------------------------------------------------------------------------

@dataclass
class Mesh:
    nodes: np.ndarray                       # (nn, 3)
    hexes: np.ndarray                       # (ne, 8)
    face_sets: dict = field(default_factory=dict)   # name -> (nf, 2) (element, local face)
    node_sets: dict = field(default_factory=dict)   # name -> node ids

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.hexes.shape[0]

    def face_nodes(self, name):
        """Node ids of the faces in a face set, shape (nf, 4)."""
        fs = self.face_sets[name]
        local = np.array([FACES[int(f)] for f in fs[:, 1]], dtype=int).reshape(-1, 4)
        return self.hexes[fs[:, 0][:, None], local]

    def element_coords(self):
        return self.nodes[self.hexes]

    def check(self):
        """Raise if connectivity is out of range or an element is inverted."""
        if self.hexes.min() < 0 or self.hexes.max() >= self.n_nodes:
            raise ValueError("connectivity index out of range")
        hex_geometry(self.element_coords())


def _block(corners, n1, n2, depth, n3, axes):
    """
    Nodes and elements of one extruded bilinear block.

    ``corners`` are the four in-plane vertices ordered counter-clockwise,
    ``axes = (a1, a2, a3)`` maps the block directions onto global axes with
    ``a3`` the extrusion axis.
    """
    corners = np.asarray(corners, dtype=float)
    s = np.linspace(0.0, 1.0, n1 + 1)
    t = np.linspace(0.0, 1.0, n2 + 1)
    z = np.linspace(0.0, depth, n3 + 1)
    S, T = np.meshgrid(s, t, indexing="ij")
    P = (np.einsum("ij,k->ijk", (1 - S) * (1 - T), corners[0])
         + np.einsum("ij,k->ijk", S * (1 - T), corners[1])
         + np.einsum("ij,k->ijk", S * T, corners[2])
         + np.einsum("ij,k->ijk", (1 - S) * T, corners[3]))
    nodes = np.zeros((n1 + 1, n2 + 1, n3 + 1, 3))
    nodes[..., axes[0]] = P[..., 0][..., None]
    nodes[..., axes[1]] = P[..., 1][..., None]
    nodes[..., axes[2]] = z
    idx = np.arange(nodes[..., 0].size).reshape(n1 + 1, n2 + 1, n3 + 1)
    # local directions follow (s, t, z); swap the two layers when that frame
    # is left-handed in global coordinates
    sign = np.linalg.det(np.eye(3)[:, list(axes)])
    hexes = []
    for i in range(n1):
        for j in range(n2):
            for k in range(n3):
                c = [idx[i, j, k], idx[i + 1, j, k], idx[i + 1, j + 1, k], idx[i, j + 1, k],
                     idx[i, j, k + 1], idx[i + 1, j, k + 1], idx[i + 1, j + 1, k + 1],
                     idx[i, j + 1, k + 1]]
                if sign < 0:
                    c = c[4:] + c[:4]
                hexes.append(c)
    return nodes.reshape(-1, 3), np.array(hexes, dtype=int)


def merge_blocks(blocks, decimals=9):
    """Concatenate blocks and merge nodes with identical rounded coordinates."""
    all_nodes = np.concatenate([b[0] for b in blocks])
    offset = np.cumsum([0] + [b[0].shape[0] for b in blocks])
    all_hex = np.concatenate([b[1] + o for b, o in zip(blocks, offset[:-1])])
    key = np.round(all_nodes, decimals) + 0.0
    uniq, inverse = np.unique(key, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    first = np.full(uniq.shape[0], -1)
    for i in range(all_nodes.shape[0] - 1, -1, -1):
        first[inverse[i]] = i
    return all_nodes[first], inverse[all_hex]


def faces_where(mesh, predicate):
    """All element faces whose four nodes satisfy ``predicate(coords) -> bool array``."""
    ok = predicate(mesh.nodes)
    out = []
    for lf, loc in FACES.items():
        sel = np.all(ok[mesh.hexes[:, list(loc)]], axis=1)
        for e in np.nonzero(sel)[0]:
            out.append((e, lf))
    out.sort()
    return np.array(out, dtype=int).reshape(-1, 2)


def nodes_where(mesh, predicate):
    return np.nonzero(predicate(mesh.nodes))[0]


def box_mesh(n=(1, 1, 1), size=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    """Structured mesh of an axis-aligned box."""
    n1, n2, n3 = n
    lx, ly, lz = size
    corners = [(0, 0), (lx, 0), (lx, ly), (0, ly)]
    nodes, hexes = _block(corners, n1, n2, lz, n3, (0, 1, 2))
    mesh = Mesh(nodes + np.asarray(origin, dtype=float), hexes)
    tol = 1e-9 * max(size)
    o = np.asarray(origin, dtype=float)
    for ax, name in enumerate("xyz"):
        lo, hi = o[ax], o[ax] + size[ax]
        mesh.node_sets[f"{name}min"] = nodes_where(mesh, lambda X, a=ax, v=lo: np.abs(X[:, a] - v) < tol)
        mesh.node_sets[f"{name}max"] = nodes_where(mesh, lambda X, a=ax, v=hi: np.abs(X[:, a] - v) < tol)
        mesh.face_sets[f"{name}min"] = faces_where(mesh, lambda X, a=ax, v=lo: np.abs(X[:, a] - v) < tol)
        mesh.face_sets[f"{name}max"] = faces_where(mesh, lambda X, a=ax, v=hi: np.abs(X[:, a] - v) < tol)
    boundary = np.unique(np.concatenate([mesh.node_sets[k] for k in list(mesh.node_sets)]))
    mesh.node_sets["boundary"] = boundary
    return mesh


def cook_mesh(n=4, n_thick=1, thickness=4.0):
    """
    Cook's membrane: the tapered profile (0,0), (48,44), (48,60), (0,44) in
    the x-z plane, extruded along y.

    Node set ``clamped`` is the face x = 0, face set ``loaded`` is x = 48 and
    node set ``A`` holds the corner (48, 0, 60).
    """
    corners = [(0.0, 0.0), (48.0, 44.0), (48.0, 60.0), (0.0, 44.0)]
    nodes, hexes = _block(corners, n, n, thickness, n_thick, (0, 2, 1))
    nodes, hexes = merge_blocks([(nodes, hexes)])
    mesh = Mesh(nodes, hexes)
    tol = 1e-9
    mesh.node_sets["clamped"] = nodes_where(mesh, lambda X: np.abs(X[:, 0]) < tol)
    mesh.face_sets["loaded"] = faces_where(mesh, lambda X: np.abs(X[:, 0] - 48.0) < tol)
    mesh.node_sets["A"] = nodes_where(
        mesh, lambda X: (np.abs(X[:, 0] - 48.0) < tol) & (np.abs(X[:, 2] - 60.0) < tol)
        & (np.abs(X[:, 1]) < tol))
    return mesh


def lshape_mesh(h=1.0, n_thick=4, thickness=3.0):
    """
    L-shaped body with outer legs 7 (along y) and 6 (along x), limb width 3,
    extruded along z. Face sets ``P1`` (y = 7) and ``P2`` (x = 6).
    """
    def div(length):
        return max(1, int(round(length / h)))

    lower = _block([(0, 0), (6, 0), (6, 3), (0, 3)], div(6), div(3), thickness, n_thick, (0, 1, 2))
    upper = _block([(0, 3), (3, 3), (3, 7), (0, 7)], div(3), div(4), thickness, n_thick, (0, 1, 2))
    nodes, hexes = merge_blocks([lower, upper])
    mesh = Mesh(nodes, hexes)
    tol = 1e-9
    mesh.face_sets["P1"] = faces_where(mesh, lambda X: np.abs(X[:, 1] - 7.0) < tol)
    mesh.face_sets["P2"] = faces_where(mesh, lambda X: np.abs(X[:, 0] - 6.0) < tol)
    return mesh


# --------------------------------------------------------------------------
# Load amplitudes and boundary conditions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AmplitudeFn:
    """Time dependent load factor: ``constant``, ``ramp`` or ``lshape_hat``."""

    kind: str = "constant"
    value: float = 1.0
    t_ramp: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "ramp", "lshape_hat"):
            raise ValueError(f"unknown amplitude kind {self.kind!r}")

    def __call__(self, t):
        if self.kind == "constant":
            return self.value
        if self.kind == "ramp":
            return self.value * min(max(t / self.t_ramp, 0.0), 1.0)
        return self.value * load_amplitude("lshape_hat", t)


def load_amplitude(kind, t):
    """Scalar amplitude functions; ``lshape_hat`` rises to 2.5 at t = 2.5 and vanishes after 5."""
    if kind == "lshape_hat":
        if t <= 2.5:
            return float(t)
        if t <= 5.0:
            return 5.0 - float(t)
        return 0.0
    if kind == "constant":
        return 1.0
    raise ValueError(f"unknown amplitude kind {kind!r}")


@dataclass
class DirichletBC:
    """Prescribed displacement ``values`` on ``nodes`` for the components in ``mask``."""

    nodes: np.ndarray
    values: np.ndarray              # (len(nodes), 3)
    mask: tuple = (True, True, True)


@dataclass
class NeumannBC:
    """Dead traction (per reference area) on a face set, scaled by ``amplitude(t)``."""

    face_set: str
    traction: np.ndarray
    amplitude: AmplitudeFn = AmplitudeFn()


@dataclass
class Scene:
    mesh: Mesh
    dirichlet: list = field(default_factory=list)
    neumann: list = field(default_factory=list)
    rho0: float = 0.0
    body_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    probes: dict = field(default_factory=dict)
    name: str = ""

    def fixed_dofs(self):
        """Boolean dof mask and prescribed full-length value vector."""
        n = 3 * self.mesh.n_nodes
        fixed = np.zeros(n, dtype=bool)
        values = np.zeros(n)
        for bc in self.dirichlet:
            for i, on in enumerate(bc.mask):
                if on:
                    d = 3 * np.asarray(bc.nodes) + i
                    fixed[d] = True
                    values[d] = np.asarray(bc.values)[:, i]
        return fixed, values

    def check(self):
        self.mesh.check()
        fixed, _ = self.fixed_dofs()
        for bc in self.neumann:
            loaded = np.unique(self.mesh.face_nodes(bc.face_set))
            if np.any(np.all(fixed.reshape(-1, 3)[loaded], axis=1)):
                raise ValueError(f"Neumann set {bc.face_set!r} overlaps fully clamped nodes")


def cook_scene(n=4, n_thick=1, thickness=4.0, p=200.0):
    """Clamped at x = 0, uniform dead traction ``p`` in +e3 on x = 48."""
    mesh = cook_mesh(n, n_thick, thickness)
    clamped = mesh.node_sets["clamped"]
    scene = Scene(
        mesh,
        dirichlet=[DirichletBC(clamped, np.zeros((clamped.size, 3)))],
        neumann=[NeumannBC("loaded", np.array([0.0, 0.0, p]))],
        probes={"A": int(mesh.node_sets["A"][0])},
        name="cook",
    )
    return scene


def lshape_scene(h=1.0, n_thick=4, thickness=3.0, rho0=100.0):
    """Free-flying L-shape loaded by opposite tractions on its two leg ends."""
    mesh = lshape_mesh(h, n_thick, thickness)
    amp = AmplitudeFn("lshape_hat")
    return Scene(
        mesh,
        neumann=[NeumannBC("P1", LSHAPE_TRACTION.copy(), amp),
                 NeumannBC("P2", -LSHAPE_TRACTION, amp)],
        rho0=rho0,
        name="lshape",
    )


def box_patch_scene(F, n=(2, 2, 2), distort=0.0, seed=0):
    """
    Box with affine Dirichlet data ``u = (F - I) X`` on all boundary nodes.

    ``distort`` moves interior nodes randomly by up to that fraction of the
    element size, which leaves the exact solution unchanged.
    """
    mesh = box_mesh(n)
    F = np.asarray(F, dtype=float)
    if distort > 0.0:
        rng = np.random.default_rng(seed)
        interior = np.setdiff1d(np.arange(mesh.n_nodes), mesh.node_sets["boundary"])
        hmin = 1.0 / max(n)
        mesh.nodes[interior] += distort * hmin * rng.uniform(-1, 1, (interior.size, 3))
    b = mesh.node_sets["boundary"]
    vals = mesh.nodes[b] @ (F - np.eye(3)).T
    return Scene(mesh, dirichlet=[DirichletBC(b, vals)], name="patch")


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

def _get(cfg, path, default=None, required=False):
    node = cfg
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            if required:
                raise ConfigInvalid(path, "missing required field")
            return default
        node = node[key]
    return node


def build_scene(config):
    """
    Build a :class:`Scene` from a parsed configuration mapping.

    The ``geometry`` section selects ``kind = "cook" | "lshape" | "box"`` and
    its refinement; ``loads`` and ``material`` supply load magnitudes and the
    density.
    """
    kind = _get(config, "geometry.kind", required=True)
    try:
        if kind == "cook":
            scene = cook_scene(
                n=int(_get(config, "geometry.n", 4)),
                n_thick=int(_get(config, "geometry.n_thick", 1)),
                thickness=float(_get(config, "geometry.thickness", 4.0)),
                p=float(_get(config, "loads.p", 200.0)),
            )
        elif kind == "lshape":
            scene = lshape_scene(
                h=float(_get(config, "geometry.h", 1.0)),
                n_thick=int(_get(config, "geometry.n_thick", 4)),
                thickness=float(_get(config, "geometry.thickness", 3.0)),
                rho0=float(_get(config, "material.rho0", 100.0)),
            )
        elif kind == "box":
            n = int(_get(config, "geometry.n", 2))
            F = np.asarray(_get(config, "bc.F", np.eye(3).tolist()), dtype=float)
            if F.shape != (3, 3):
                raise ConfigInvalid("bc.F", "expected a 3x3 array")
            scene = box_patch_scene(F, (n, n, n), float(_get(config, "geometry.distort", 0.0)))
            scene.rho0 = float(_get(config, "material.rho0", 0.0))
        else:
            raise ConfigInvalid("geometry.kind", f"unknown geometry {kind!r}")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigInvalid):
            raise
        raise ConfigInvalid("geometry", str(exc)) from exc
    rho0 = _get(config, "material.rho0")
    if rho0 is not None:
        if float(rho0) < 0.0:
            raise ConfigInvalid("material.rho0", "density must be non-negative")
        scene.rho0 = float(rho0)
    scene.check()
    return scene
