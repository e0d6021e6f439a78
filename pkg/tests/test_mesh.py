import json

import numpy as np
import pytest

from plapflow.mesh import (DisconnectedMeshError, GeodesicTable, MeshError,
                           boundary_pairwise_distances, build_interval_mesh,
                           build_polygon_mesh, geodesic_distance,
                           mesh_from_json, mesh_to_json, regular_polygon,
                           square_mesh)


def test_interval_smallest():
    m = build_interval_mesh(1)
    assert np.allclose(m.nodes.ravel(), [0.0, 1.0])
    assert len(m.elements) == 1
    assert np.allclose(m.boundary_weights, [1.0, 1.0])


def test_interval_equispacing():
    m = build_interval_mesh(4)
    assert np.allclose(sorted(m.nodes.ravel()), [0.0, 0.25, 0.5, 0.75, 1.0])
    assert len(m.elements) == 4


def test_interval_volume_partition():
    m = build_interval_mesh(10)
    assert abs(m.volumes.sum() - 1.0) < 1e-12


def test_interval_rejects_zero():
    with pytest.raises(MeshError):
        build_interval_mesh(0)


@pytest.mark.parametrize("h", [0.5, 0.1])
def test_square_boundary_measure(h):
    m = square_mesh(h)
    assert abs(m.boundary_weights.sum() - 4.0) < 1e-12
    assert abs(m.volumes.sum() - 1.0) < 1e-12


def test_square_edge_lengths_bounded():
    m = square_mesh(0.25)
    assert m.edge_lengths.max() <= 2 * 0.25 + 1e-12


def test_polygon_rejects_self_intersection():
    bowtie = np.array([[0, 0], [1, 1], [1, 0], [0, 1.0]])
    with pytest.raises(MeshError):
        build_polygon_mesh(bowtie, 0.2)


def test_polygon_rejects_huge_h():
    square = np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]])
    with pytest.raises(MeshError):
        build_polygon_mesh(square, 10.0)


def test_boundary_nodes_first_and_cyclic():
    m = square_mesh(0.25)
    # boundary nodes lead the numbering and walk the perimeter in order
    assert np.array_equal(np.sort(m.boundary_nodes),
                          np.arange(m.n_boundary))
    pts = m.nodes[m.boundary_nodes]
    steps = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    assert steps.max() <= 0.25 + 1e-12


def test_geodesic_interval():
    m = build_interval_mesh(5)
    d = geodesic_distance(m, [m.boundary_nodes[1]])
    assert abs(d[m.boundary_nodes[0]] - 1.0) < 1e-12


def test_geodesic_single_source_zero():
    m = square_mesh(0.5)
    src = m.boundary_nodes[0]
    assert geodesic_distance(m, [src])[src] == 0.0


def test_geodesic_rejects_empty_source():
    m = build_interval_mesh(2)
    with pytest.raises(MeshError):
        geodesic_distance(m, [])


def test_geodesic_disconnected_reported():
    doc = {
        "nodes": [[0.0], [0.4], [0.6], [1.0]],
        "elements": [[0, 1], [2, 3]],
        "boundary": [0, 3],
        "boundary_weights": [1.0, 1.0],
    }
    m = mesh_from_json(json.dumps(doc))
    with pytest.raises(DisconnectedMeshError):
        geodesic_distance(m, [0])


def test_boundary_table_interval():
    m = build_interval_mesh(3)
    geo = boundary_pairwise_distances(m)
    assert np.allclose(geo.dist, [[0.0, 1.0], [1.0, 0.0]])


def test_adjacent_corner_distance():
    m = square_mesh(0.05)
    geo = boundary_pairwise_distances(m)
    pts = m.nodes[m.boundary_nodes]
    c0 = int(np.argmin(np.abs(pts).sum(axis=1)))
    c1 = int(np.argmin(np.abs(pts - [1.0, 0.0]).sum(axis=1)))
    assert abs(geo.dist[c0, c1] - 1.0) <= 0.05


def test_metric_invariants_all_triples():
    m = square_mesh(0.25)
    d = boundary_pairwise_distances(m).dist
    pts = m.nodes[m.boundary_nodes]
    B = len(pts)
    chord = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    assert (d >= chord - 1e-10).all()
    tri = d[:, None, :] + d[None, :, :]  # d_ij + d_jk vs d_ik
    assert (d[:, :, None] <= tri.transpose(0, 2, 1) + 1e-10).all()


def test_metric_ratio_bound_and_trend():
    ratios = []
    verts = regular_polygon(64)
    for h in (0.2, 0.1, 0.05):
        m = build_polygon_mesh(verts, h)
        d = boundary_pairwise_distances(m).dist
        pts = m.nodes[m.boundary_nodes]
        chord = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
        mask = chord > 1e-9
        ratios.append(float((d[mask] / chord[mask]).max()))
    # the ratio settles toward a grid constant; allow millesimal wobble
    assert ratios[2] <= ratios[0] + 5e-3
    assert ratios[-1] <= 1.09


def test_refinement_never_increases_distances():
    coarse = square_mesh(0.2)
    fine = square_mesh(0.1)
    dc = boundary_pairwise_distances(coarse).dist
    df = boundary_pairwise_distances(fine).dist
    pc = coarse.nodes[coarse.boundary_nodes]
    pf = fine.nodes[fine.boundary_nodes]
    # coarse boundary nodes are a subset of the fine ones
    idx = [int(np.argmin(((pf - q) ** 2).sum(axis=1))) for q in pc]
    assert np.abs(pf[idx] - pc).max() < 1e-12
    assert (df[np.ix_(idx, idx)] <= dc + 1e-10).all()


def test_json_roundtrip():
    m = square_mesh(0.5)
    m2 = mesh_from_json(mesh_to_json(m))
    assert np.allclose(m.nodes, m2.nodes)
    assert np.array_equal(m.elements, m2.elements)
    assert np.array_equal(m.boundary_nodes, m2.boundary_nodes)
    assert np.allclose(m.boundary_weights, m2.boundary_weights)


def test_geodesic_table_validation():
    with pytest.raises(MeshError):
        GeodesicTable(dist=np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(MeshError):
        GeodesicTable(dist=np.array([[0.5]]))
