import math
import pathlib

import pytest

import torlink

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def test_version_and_scenarios():
    assert torlink.__version__ == "0.1.0"
    names = torlink.list_scenarios()
    assert "rigid-rotation" in names and len(names) >= 7
    assert "name = rigid-rotation" in torlink.scenario_text("rigid-rotation")


def test_run_scenario_report():
    report = torlink.run_scenario("rigid-rotation", jobs=2)
    assert report["toolkit"] == "torlink"
    assert report["all_passed"] is True
    assert report["summary"]["failed_asserted"] == 0
    labels = [e["label"] for e in report["experiments"]]
    assert "commutator" in labels


def test_seed_override_and_echo():
    report = torlink.run_scenario("trivial-suspension", seed=12)
    assert report["seed"] == 12 and report["seed_source"] == "override"
    echo = torlink.load_scenario("split-winding")
    assert echo["col"]["annulus"] == "y0"


def test_files_written(tmp_path):
    torlink.run_scenario("normally-contracting", out_dir=tmp_path)
    assert (tmp_path / "normally-contracting.json").exists()
    assert (tmp_path / "normally-contracting.iterate_return.csv").exists()


def test_rotation_pair():
    pair = torlink.FieldPair(
        "x - a*(x^2 + y^2)*y; y + a*(x^2 + y^2)*x; x^2 + y^2", "-a*y; a*x; 1", params={"a": 0.7}
    )
    assert max(abs(c) for c in pair.commutator(0.2, 0.1, 0.3)) < 1e-12
    h = pair.holonomy(0.3, 0.0)
    assert h["tau"] == pytest.approx(1.0, abs=1e-9)
    assert h["end"][0] == pytest.approx(0.3 * math.cos(0.7), abs=1e-9)
    spec = pair.fixed_point_spectrum(0.0, 0.0)
    assert spec["class"] == "elliptic"
    assert abs(spec["lambda1"]) == pytest.approx(1.0)
    assert pair.linking_numbers(0.3) == (0, 0)
    assert abs(pair.segment_sweep(0.3, 0.0)) == pytest.approx(1.4, rel=1e-8)


def test_tilted_return_identity():
    pair = torlink.FieldPair(
        "x - a*(x^2 + y^2)*y; y + a*(x^2 + y^2)*x; x^2 + y^2", "-a*y; a*x; 1", tilt=0.3, params={"a": 0.7}
    )
    r = pair.return_identity(0.3, 0.2)
    assert abs(r["lhs"]) > 1e-3
    assert r["residual"] < 1e-8 * max(1.0, abs(r["lhs"]))


def test_scenario_pairs():
    split = torlink.FieldPair.from_scenario("split-winding")
    assert split.linking_numbers(0.2) == (1, 0)
    assert abs(split.index_region(grid=64, jobs=2)) == 1
    nc = torlink.FieldPair.from_scenario("normally-contracting")
    orbit = nc.iterate_return(0.3, 0.4)
    assert orbit["converged"]
    assert abs(orbit["limit"][1]) < 1e-6


def read_mesh(path):
    verts, values, tris = [], [], []
    for line in path.read_text().splitlines():
        parts = line.split()
        if parts and parts[0] == "v":
            verts.append(tuple(map(float, parts[1:4])))
            values.append(tuple(map(float, parts[4:7])))
        elif parts and parts[0] == "f":
            tris.append(tuple(map(int, parts[1:4])))
    return verts, tris, values


def test_degrees():
    assert abs(torlink.model_map_degree(2, -1)["degree"]) == 3
    verts, tris, values = read_mesh(FIXTURES / "antipodal-icosphere.mesh")
    assert torlink.sphere_degree(verts, tris, values, jobs=2)["degree"] == -1
    assert torlink.sphere_degree(verts, tris, verts)["degree"] == 1
    with pytest.raises(torlink.TorlinkError):
        torlink.sphere_degree(verts, [(0, 1, 10**6)], values)


def test_errors():
    with pytest.raises(torlink.ParseError):
        torlink.FieldPair("cos(2*pi*theta; 0; 1", "0; 0; 1")
    with pytest.raises(torlink.TorlinkError):
        torlink.run_scenario("no-such-scenario")
    nc = torlink.FieldPair.from_scenario("rigid-rotation")
    with pytest.raises(torlink.TorlinkError, match="NotFixed"):
        nc.fixed_point_spectrum(0.3, 0.0)
