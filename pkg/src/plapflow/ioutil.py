"""CSV/JSON readers and writers for the command line formats.

Formats:
- boundary/interior field CSV: header ``node_index,value``; boundary files
  list the mesh-global indices of boundary nodes in boundary order.
- trajectory CSV: header ``t,node_index,value``.
- source JSON: {"type": "indicator"|"two_point"|"table", ...}.
- geodesic JSON: {"dist": [[...]]}.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from plapflow.flow import (SourceTerm, Trajectory, constant_source,
                           indicator_source, table_source)
from plapflow.mesh import DomainMesh, GeodesicTable


def field_to_csv(indices, values) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["node_index", "value"])
    for i, v in zip(indices, values):
        w.writerow([int(i), repr(float(v))])
    return out.getvalue()


def boundary_field_to_csv(mesh: DomainMesh, values) -> str:
    return field_to_csv(mesh.boundary_nodes, values)


def interior_field_to_csv(values) -> str:
    return field_to_csv(range(len(values)), values)


def field_from_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:2] != ["node_index", "value"]:
        raise ValueError("expected header 'node_index,value'")
    idx = np.array([int(r[0]) for r in rows[1:]])
    vals = np.array([float(r[1]) for r in rows[1:]])
    return idx, vals


def boundary_field_from_csv(mesh: DomainMesh, text: str) -> np.ndarray:
    idx, vals = field_from_csv(text)
    lookup = dict(zip(idx.tolist(), vals.tolist()))
    try:
        return np.array([lookup[int(n)] for n in mesh.boundary_nodes])
    except KeyError as exc:
        raise ValueError(f"boundary node {exc} missing from field file") from None


def trajectory_to_csv(mesh: DomainMesh, traj: Trajectory) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t", "node_index", "value"])
    for t, state in zip(traj.times, traj.states):
        for n, v in zip(mesh.boundary_nodes, state):
            w.writerow([repr(float(t)), int(n), repr(float(v))])
    return out.getvalue()


def trajectory_from_csv(mesh: DomainMesh, text: str) -> Trajectory:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:3] != ["t", "node_index", "value"]:
        raise ValueError("expected header 't,node_index,value'")
    data: dict[float, dict[int, float]] = {}
    for r in rows[1:]:
        data.setdefault(float(r[0]), {})[int(r[1])] = float(r[2])
    times = np.array(sorted(data))
    states = np.array([[data[t][int(n)] for n in mesh.boundary_nodes] for t in times])
    return Trajectory(times=times, states=states)


def source_from_json(mesh: DomainMesh, text: str) -> SourceTerm:
    doc = json.loads(text)
    kind = doc.get("type")
    if kind == "two_point":
        vals = np.asarray(doc["values"], dtype=float)
        if len(vals) != mesh.n_boundary:
            raise ValueError("two_point source needs one value per boundary node")
        return constant_source(vals)
    if kind == "indicator":
        return indicator_source(mesh, doc["gamma_nodes"], rate=doc.get("rate", 1.0))
    if kind == "table":
        return table_source(doc["times"], doc["values"],
                            interpolation=doc.get("interpolation", "previous"))
    raise ValueError(f"unknown source type {kind!r}")


def geodesic_to_json(geo: GeodesicTable) -> str:
    return json.dumps({"dist": geo.dist.tolist()}, sort_keys=True)


def geodesic_from_json(text: str) -> GeodesicTable:
    return GeodesicTable(dist=np.asarray(json.loads(text)["dist"], dtype=float))
