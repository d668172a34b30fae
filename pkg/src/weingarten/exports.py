"""Artifact writers: Wavefront OBJ, legacy ASCII VTK, JSON fields and history.

Everything is rendered to text deterministically (shortest round-trip float
repr, fixed iteration order), so identical states produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from . import graphgeom, psidsl, symfunc

__all__ = ["mesh_obj", "mesh_vtk", "field_json", "history_json"]


def _fmt(x: float) -> str:
    return repr(float(x))


def mesh_obj(mesh: graphgeom.Mesh) -> str:
    """Wavefront OBJ: v records then triangulated f records (1-based)."""
    lines = []
    for vx in mesh.vertices:
        lines.append(f"v {_fmt(vx[0])} {_fmt(vx[1])} {_fmt(vx[2])}")
    for f in mesh.faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    return "\n".join(lines) + "\n"


def mesh_vtk(mesh: graphgeom.Mesh, wk: np.ndarray, psi_vals: np.ndarray) -> str:
    """Legacy VTK POLYDATA with per-vertex scalars "Wk" and "psi"."""
    n = mesh.vertices.shape[0]
    m = mesh.faces.shape[0]
    lines = [
        "# vtk DataFile Version 3.0",
        "prescribed Weingarten curvature cap",
        "ASCII",
        "DATASET POLYDATA",
        f"POINTS {n} double",
    ]
    for vx in mesh.vertices:
        lines.append(f"{_fmt(vx[0])} {_fmt(vx[1])} {_fmt(vx[2])}")
    lines.append(f"POLYGONS {m} {4 * m}")
    for f in mesh.faces:
        lines.append(f"3 {f[0]} {f[1]} {f[2]}")
    lines.append(f"POINT_DATA {n}")
    for name, arr in (("Wk", wk), ("psi", psi_vals)):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        for val in arr:
            lines.append(_fmt(val))
    return "\n".join(lines) + "\n"


def solution_arrays(state: graphgeom.GraphState, psi: psidsl.PsiExpr, k: int):
    """Per-vertex W_k and psi(eta) for the VTK export."""
    geo = state.geometry
    wk = symfunc.elem_sym_norm(geo.kappa, k)
    psi_vals = psidsl.evaluate(psi, geo.eta)
    return wk, psi_vals


def field_json(state: graphgeom.GraphState, name: str) -> str:
    """A scalar field with its node positions, as a JSON document."""
    doc = {
        "name": name,
        "representation": state.rep,
        "values": [float(v) for v in state.values],
        "u": [float(v) for v in state.u],
        "points": [[float(c) for c in row] for row in state.grid.x],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def history_json(history) -> str:
    doc = [asdict(h) for h in history]
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
