"""
File formats: PANN weights, legacy VTK, time-series and probe CSV, and TOML
run configurations.
"""

import csv
import json
import sys
from pathlib import Path

import numpy as np

from .element import deformation_gradient
from .errors import ConfigInvalid, IoError, NormalizationMismatch, SchemaMismatch
from .material import PannParams, pann_build, pk2

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
TIMESERIES_HEADER = ["t", "T", "Pi_int", "E", "Jx", "Jy", "Jz", "W_ext_cum", "energy_residual"]
VTK_HEXAHEDRON = 12


def _fmt(x):
    return format(float(x), ".17g")


# --------------------------------------------------------------------------
# Weights
# --------------------------------------------------------------------------

def write_weights(path, params, audit=True):
    """
    Write PANN weights as a JSON document with named arrays.

    Floats are written with 17 significant digits, so reading the file back
    reproduces the arrays bit for bit. With ``audit`` the normalization
    constants of the built model are stored for cross-checking on load.
    """
    params.validate()
    doc = {"schema_version": SCHEMA_VERSION, "n": params.n,
           "w1": params.w1.tolist(), "b": params.b.tolist(), "w2": params.w2.tolist()}
    if audit:
        model = pann_build(params)
        doc["n_frak"] = model.n_frak
        doc["w_energy"] = model.w_energy
    text = json.dumps(doc, indent=2)
    try:
        Path(path).write_text(text + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_weights(path):
    """
    Read and validate a weights file.

    Raises
    ------
    SchemaMismatch
        Unknown schema version, missing fields or inconsistent shapes.
    NegativeWeight
        Negative ``w1`` or ``w2`` entries.
    NormalizationMismatch
        Stored ``n_frak`` or ``w_energy`` disagree with recomputation by more
        than 1e-10 relative.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: not a weights document ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaMismatch(f"{path}: expected schema_version {SCHEMA_VERSION}")
    for key in ("n", "w1", "b", "w2"):
        if key not in doc:
            raise SchemaMismatch(f"{path}: missing field {key!r}")
    n = int(doc["n"])
    w1 = np.asarray(doc["w1"], dtype=float)
    b = np.asarray(doc["b"], dtype=float)
    w2 = np.asarray(doc["w2"], dtype=float)
    if w1.shape != (n, 4) or b.shape != (n,) or w2.shape != (n,):
        raise SchemaMismatch(f"{path}: array shapes do not match n = {n}")
    params = PannParams(w1, w2, b)
    model = pann_build(params)
    for key in ("n_frak", "w_energy"):
        if key in doc:
            stored = float(doc[key])
            fresh = getattr(model, key)
            if abs(stored - fresh) > 1e-10 * max(1.0, abs(fresh)):
                raise NormalizationMismatch(key, stored, fresh)
    return params


# --------------------------------------------------------------------------
# VTK
# --------------------------------------------------------------------------

def von_mises(sigma):
    s = np.asarray(sigma)
    dev = s - np.trace(s, axis1=-2, axis2=-1)[..., None, None] * np.eye(3) / 3.0
    return np.sqrt(1.5 * np.einsum("...ij,...ij->...", dev, dev))


def cell_von_mises(model, geom, ue):
    """
    Von Mises stress of the element-mean Cauchy stress ``J^-1 F S F^T``.

    The mean is taken over the Gauss points with their reference volume
    weights.
    """
    F = deformation_gradient(geom, ue)
    C = np.einsum("...ki,...kj->...ij", F, F)
    S = pk2(model, C)
    J = np.linalg.det(F)
    sigma = np.einsum("...iI,...IJ,...jJ->...ij", F, S, F) / J[..., None, None]
    mean = np.einsum("eg,egij->eij", geom.wdv, sigma) / geom.wdv.sum(axis=1)[:, None, None]
    return von_mises(mean)


def write_vtk(mesh, fields, path, title="panfem"):
    """
    Legacy ASCII VTK 3.0 unstructured grid of hexahedra.

    Parameters
    ----------
    fields : dict
        ``"displacement"`` (n_nodes, 3) point data and ``"von_mises"``
        (n_cells,) cell data; both optional.
    """
    nodes = np.asarray(mesh.nodes)
    hexes = np.asarray(mesh.hexes)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nodes.shape[0]} double"]
    lines += [" ".join(_fmt(x) for x in p) for p in nodes]
    lines.append(f"CELLS {hexes.shape[0]} {9 * hexes.shape[0]}")
    lines += ["8 " + " ".join(str(int(i)) for i in h) for h in hexes]
    lines.append(f"CELL_TYPES {hexes.shape[0]}")
    lines += [str(VTK_HEXAHEDRON)] * hexes.shape[0]
    u = fields.get("displacement")
    if u is not None:
        u = np.asarray(u, dtype=float).reshape(nodes.shape[0], 3)
        lines += [f"POINT_DATA {nodes.shape[0]}", "VECTORS displacement double"]
        lines += [" ".join(_fmt(x) for x in row) for row in u]
    vm = fields.get("von_mises")
    if vm is not None:
        vm = np.asarray(vm, dtype=float).reshape(hexes.shape[0])
        lines += [f"CELL_DATA {hexes.shape[0]}", "SCALARS von_mises double 1",
                  "LOOKUP_TABLE default"]
        lines += [_fmt(x) for x in vm]
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

def write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([v if isinstance(v, str) else _fmt(v) if isinstance(v, float)
                            else v for v in row])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_timeseries(path, rows):
    """Energy and angular momentum history; ``rows`` are StepAudits or 9-tuples."""
    out = []
    for r in rows:
        vals = r.row() if hasattr(r, "row") else tuple(r)
        if len(vals) != len(TIMESERIES_HEADER):
            raise ValueError("time-series rows need 9 columns")
        out.append([float(v) for v in vals])
    write_csv(path, TIMESERIES_HEADER, out)


def read_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return rows[0], [[float(v) for v in r] for r in rows[1:]]


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

def load_config(path):
    """Parse a TOML run configuration; relative paths resolve against its folder."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid(str(path), f"TOML syntax error: {exc}") from exc
    cfg.setdefault("_base", str(path.parent.resolve()))
    return cfg


def resolve_path(cfg, value):
    p = Path(value)
    if not p.is_absolute():
        p = Path(cfg.get("_base", ".")) / p
    return p
