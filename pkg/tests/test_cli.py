import json

import numpy as np
import pytest

from plapflow import ioutil
from plapflow.cli import main
from plapflow.flow import Trajectory
from plapflow.mesh import (boundary_pairwise_distances, build_interval_mesh,
                           mesh_from_json, square_mesh)


# ---------------------------------------------------------------- io formats

def test_field_csv_roundtrip():
    mesh = build_interval_mesh(3)
    vals = np.array([0.25, 1.75])
    text = ioutil.boundary_field_to_csv(mesh, vals)
    assert np.allclose(ioutil.boundary_field_from_csv(mesh, text), vals)


def test_field_csv_rejects_bad_header():
    mesh = build_interval_mesh(2)
    with pytest.raises(ValueError):
        ioutil.boundary_field_from_csv(mesh, "idx,val\n0,1.0\n")


def test_field_csv_missing_node():
    mesh = build_interval_mesh(2)
    text = "node_index,value\n0,1.0\n"
    with pytest.raises(ValueError):
        ioutil.boundary_field_from_csv(mesh, text)


def test_trajectory_csv_roundtrip():
    mesh = build_interval_mesh(3)
    traj = Trajectory(times=np.array([0.0, 0.1, 0.2]),
                      states=np.array([[0.0, 0.0], [0.0, 0.1], [0.0, 0.2]]))
    back = ioutil.trajectory_from_csv(mesh, ioutil.trajectory_to_csv(mesh, traj))
    assert np.allclose(back.times, traj.times)
    assert np.allclose(back.states, traj.states)


def test_source_json_variants():
    mesh = build_interval_mesh(3)
    f = ioutil.source_from_json(mesh, json.dumps(
        {"type": "two_point", "values": [0.0, 1.0]}))
    assert np.allclose(f(0.3), [0.0, 1.0])
    f = ioutil.source_from_json(mesh, json.dumps(
        {"type": "table", "times": [0.0, 1.0],
         "values": [[0.0, 0.0], [1.0, 1.0]]}))
    assert np.allclose(f(0.5), [0.0, 0.0])
    with pytest.raises(ValueError):
        ioutil.source_from_json(mesh, json.dumps({"type": "nope"}))


def test_geodesic_json_roundtrip():
    geo = boundary_pairwise_distances(square_mesh(0.5))
    back = ioutil.geodesic_from_json(ioutil.geodesic_to_json(geo))
    assert np.allclose(back.dist, geo.dist)


# ------------------------------------------------------------------ commands

def _run(tmp_path, *argv):
    return main(["--out-dir", str(tmp_path), *argv])


def test_cli_mesh_and_project(tmp_path):
    assert _run(tmp_path, "mesh", "--shape", "interval", "--n", "4",
                "--out", "mesh.json", "--geo-out", "geo.json") == 0
    mesh = mesh_from_json((tmp_path / "mesh.json").read_text())
    (tmp_path / "g.csv").write_text(
        ioutil.boundary_field_to_csv(mesh, np.array([0.0, 3.0])))
    assert _run(tmp_path, "project", "--mesh", str(tmp_path / "mesh.json"),
                "--geo", str(tmp_path / "geo.json"),
                "--in", str(tmp_path / "g.csv"), "--out", "proj.csv") == 0
    v = ioutil.boundary_field_from_csv(mesh, (tmp_path / "proj.csv").read_text())
    assert np.abs(v - [1.0, 2.0]).max() < 1e-8


def test_cli_prox_checkpoint(tmp_path):
    _run(tmp_path, "mesh", "--shape", "interval", "--n", "4",
         "--out", "mesh.json")
    mesh = mesh_from_json((tmp_path / "mesh.json").read_text())
    (tmp_path / "g.csv").write_text(
        ioutil.boundary_field_to_csv(mesh, np.array([0.0, 2.0])))
    assert _run(tmp_path, "prox-ep", "--mesh", str(tmp_path / "mesh.json"),
                "--in", str(tmp_path / "g.csv"), "--lambda", "0.5",
                "--p", "4", "--out", "v.csv") == 0
    v = ioutil.boundary_field_from_csv(mesh, (tmp_path / "v.csv").read_text())
    assert np.abs(v - [0.5, 1.5]).max() < 1e-7


def test_cli_evolve_deterministic(tmp_path):
    _run(tmp_path, "mesh", "--shape", "interval", "--n", "4",
         "--out", "mesh.json")
    (tmp_path / "src.json").write_text(json.dumps(
        {"type": "two_point", "values": [0.0, 1.0]}))
    for name in ("a.csv", "b.csv"):
        assert _run(tmp_path, "evolve", "--functional", "einf",
                    "--mesh", str(tmp_path / "mesh.json"),
                    "--source", str(tmp_path / "src.json"),
                    "--tau", "0.05", "--T", "1.5", "--out", name) == 0
    # byte-identical repeated runs
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cli_example1_simulation(tmp_path):
    assert _run(tmp_path, "example", "--id", "1", "--tau", "0.01",
                "--T", "2.0", "--simulate") == 0
    summary = json.loads((tmp_path / "example1_summary.json").read_text())
    assert summary["sup_error_vs_exact"] < 5 * 0.01


def test_cli_sandpile(tmp_path):
    _run(tmp_path, "mesh", "--shape", "square", "--h", "0.25",
         "--out", "mesh.json")
    mesh = mesh_from_json((tmp_path / "mesh.json").read_text())
    border = mesh.boundary_nodes
    bottom = border[np.abs(mesh.nodes[border, 1]) < 1e-12]
    (tmp_path / "gamma.json").write_text(json.dumps(
        {"nodes": [int(n) for n in bottom]}))
    assert _run(tmp_path, "sandpile", "--mesh", str(tmp_path / "mesh.json"),
                "--gamma", str(tmp_path / "gamma.json"), "--t", "0.5",
                "--out", "pile.csv") == 0
    u = ioutil.boundary_field_from_csv(mesh, (tmp_path / "pile.csv").read_text())
    assert (u >= -1e-12).all()
    assert abs((mesh.boundary_weights * u).sum() - 0.5) < 1e-10


def test_cli_transport(tmp_path):
    geo = boundary_pairwise_distances(build_interval_mesh(2))
    (tmp_path / "geo.json").write_text(ioutil.geodesic_to_json(geo))
    (tmp_path / "mu.csv").write_text(ioutil.field_to_csv([0, 1], [1.0, 0.0]))
    (tmp_path / "nu.csv").write_text(ioutil.field_to_csv([0, 1], [0.0, 1.0]))
    assert _run(tmp_path, "transport", "--geo", str(tmp_path / "geo.json"),
                "--mu", str(tmp_path / "mu.csv"),
                "--nu", str(tmp_path / "nu.csv"),
                "--out", "plan.csv", "--dual", "pot.csv") == 0
    plan = (tmp_path / "plan.csv").read_text().strip().splitlines()
    assert plan[0] == "i,j,mass"
    assert plan[1].startswith("0,1,")


def test_cli_mosco_report(tmp_path):
    _run(tmp_path, "mesh", "--shape", "interval", "--n", "4",
         "--out", "mesh.json")
    mesh = mesh_from_json((tmp_path / "mesh.json").read_text())
    (tmp_path / "g.csv").write_text(
        ioutil.boundary_field_to_csv(mesh, np.array([0.0, 3.0])))
    assert _run(tmp_path, "mosco", "--mesh", str(tmp_path / "mesh.json"),
                "--g", str(tmp_path / "g.csv"), "--lambdas", "0.5",
                "--pladder", "4,16", "--report", "rep.json") == 0
    doc = json.loads((tmp_path / "rep.json").read_text())
    assert doc["resolvent_errors"][0][1] < doc["resolvent_errors"][0][0]


def test_cli_verify_potential(tmp_path):
    _run(tmp_path, "mesh", "--shape", "interval", "--n", "4",
         "--out", "mesh.json")
    (tmp_path / "src.json").write_text(json.dumps(
        {"type": "two_point", "values": [0.0, 1.0]}))
    _run(tmp_path, "evolve", "--functional", "einf",
         "--mesh", str(tmp_path / "mesh.json"),
         "--source", str(tmp_path / "src.json"),
         "--tau", "0.01", "--T", "2.0", "--out", "traj.csv")
    assert _run(tmp_path, "verify-potential",
                "--mesh", str(tmp_path / "mesh.json"),
                "--traj", str(tmp_path / "traj.csv"),
                "--source", str(tmp_path / "src.json"),
                "--t", "1.5", "--report", "rep.json") == 0
    doc = json.loads((tmp_path / "rep.json").read_text())
    assert doc["transport_applicable"]
    assert abs(doc["rel_gap"]) <= 1e-6 + 10 * 0.01


def test_cli_suite_rejects_empty_config(tmp_path):
    cfg = tmp_path / "empty.json"
    cfg.write_text("")
    with pytest.raises(SystemExit):
        main(["suite", "--config", str(cfg)])
    cfg.write_text("{}")
    with pytest.raises(SystemExit):
        main(["suite", "--config", str(cfg)])


def test_cli_mesh_missing_args():
    with pytest.raises(SystemExit):
        main(["mesh", "--shape", "interval", "--out", "m.json"])
