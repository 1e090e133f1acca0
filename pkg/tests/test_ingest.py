import math

import numpy as np
import pytest

from equitransit.ingest import (
    ProblemConfig,
    TractRecord,
    assemble_problem,
    build_network,
    great_circle_km,
    load_config,
    load_od,
    load_tracts,
    parse_cost_rule,
)
from equitransit.network import ValidationError

HEADER = "tract_id,lat,lon,median_income,vehicle_rate\n"


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def three_tracts(tmp_path):
    return write(tmp_path / "tracts.csv", HEADER + "A,35.0,-85.3,20000,0.4\nB,35.01,-85.31,50000,0.8\nC,35.02,-85.29,90000,0.95\n")


def vector_distance(lat1, lon1, lat2, lon2, radius=6371.0088):
    def unit(lat, lon):
        la, lo = math.radians(lat), math.radians(lon)
        return np.array([math.cos(la) * math.cos(lo), math.cos(la) * math.sin(lo), math.sin(la)])

    a, b = unit(lat1, lon1), unit(lat2, lon2)
    return radius * math.atan2(np.linalg.norm(np.cross(a, b)), float(a @ b))


def test_load_tracts_in_order(tmp_path):
    recs = load_tracts(three_tracts(tmp_path))
    assert [r.tract_id for r in recs] == ["A", "B", "C"]


@pytest.mark.parametrize(
    "body, message",
    [
        ("", "no tracts"),
        ("A,35,-85,1,0.5\nA,35.1,-85,1,0.5\n", "duplicate"),
        ("A,35,-85,1,0.5\nB,35,-85,1,0.5\n", "coincident"),
        ("A,95,-85,1,0.5\n", "latitude"),
        ("A,35,-85,1,1.5\n", "vehicle rate"),
        ("A,35,-85,oops,0.5\n", "cannot parse"),
    ],
)
def test_load_tracts_errors(tmp_path, body, message):
    with pytest.raises(ValidationError, match=message):
        load_tracts(write(tmp_path / "t.csv", HEADER + body))


def test_missing_column(tmp_path):
    with pytest.raises(ValidationError, match="missing column"):
        load_tracts(write(tmp_path / "t.csv", "tract_id,lat\nA,1\n"))


def test_error_reports_line(tmp_path):
    with pytest.raises(ValidationError, match=":3:"):
        load_tracts(write(tmp_path / "t.csv", HEADER + "A,35,-85,1,0.5\nB,35,-85,1,2\n"))


def test_load_od_aggregates(tmp_path):
    od = write(tmp_path / "od.csv", "origin,destination,count\nA,B,5\nA,B,3\nB,C,1\n")
    demand = load_od(od, ["A", "B", "C"])
    assert demand["A", "B"] == 8
    assert sum(1 for v in demand.values() if v > 0) == 2
    assert sum(1 for v in demand.values() if v == 0) == 4


@pytest.mark.parametrize(
    "row, message",
    [("A,A,5", "origin equals destination"), ("A,Z,5", "unknown tract"), ("A,B,-1", "negative"), ("A,B,1.5", "integer")],
)
def test_load_od_errors(tmp_path, row, message):
    with pytest.raises(ValidationError, match=message):
        load_od(write(tmp_path / "od.csv", f"origin,destination,count\n{row}\n"), ["A", "B"])


@pytest.mark.parametrize(
    "a, b",
    [((35.0, -85.3), (35.0, -85.2)), ((0.0, 0.0), (0.0, 1.0)), ((51.5, -0.12), (40.7, -74.0)), ((-33.9, 151.2), (35.7, 139.7))],
)
def test_great_circle_matches_vector_formula(a, b):
    assert great_circle_km(*a, *b) == pytest.approx(vector_distance(*a, *b), rel=1e-9)


def test_great_circle_about_nine_km():
    # 0.1 degree of longitude at 36N: 8.996 km on the mean sphere, 9.016 km on the ellipsoid
    assert great_circle_km(36.0, -85.0, 36.0, -85.1) == pytest.approx(9.01, abs=0.02)
    assert great_circle_km(36.0, -85.0, 36.0, -85.1) == pytest.approx(vector_distance(36.0, -85.0, 36.0, -85.1), rel=1e-12)
    assert great_circle_km(35.0, -85.3, 35.0, -85.3) == 0.0


def test_build_network_complete(tmp_path):
    recs = load_tracts(three_tracts(tmp_path))
    net = build_network(recs)
    assert len(net.arcs) == 6
    assert all(arc.cost == arc.length > 0 for arc in net.arcs)
    scaled = build_network(recs, cost_rule="scale:2")
    assert all(arc.cost == pytest.approx(2 * arc.length) for arc in scaled.arcs)


def test_build_network_knn_is_connected():
    recs = [TractRecord(f"T{i}", 35.0 + 0.01 * i, -85.0 + (0.5 if i >= 4 else 0.0), 1.0, 0.5) for i in range(8)]
    net = build_network(recs, topology="knn:1")
    assert len(net.nodes) == 8
    assert len(net.arcs) < 8 * 7
    assert all(net.arc_lookup.get((a.head, a.tail)) is not None for a in net.arcs)


def test_build_network_errors():
    rec = TractRecord("A", 0.0, 0.0, 1.0, 0.5)
    with pytest.raises(ValidationError):
        build_network([rec])
    with pytest.raises(ValidationError):
        build_network([rec, TractRecord("B", 0.0, 0.1, 1.0, 0.5)], topology="ring")
    with pytest.raises(ValidationError):
        parse_cost_rule("cube")


def test_config_roundtrip(tmp_path):
    path = write(tmp_path / "c.toml", 'alpha = 3.0\nk = 4\ntopology = "knn:2"\nbudget_fractions = [0.5, 1.0]\n')
    cfg = load_config(path)
    assert (cfg.alpha, cfg.k, cfg.topology, cfg.budget_fractions) == (3.0, 4, "knn:2", (0.5, 1.0))
    assert cfg.updated(alpha=None, k=2).k == 2
    assert load_config(None) == ProblemConfig()


def test_config_rejects_unknown_key(tmp_path):
    with pytest.raises(ValidationError, match="unknown config"):
        load_config(write(tmp_path / "c.toml", "colour = 1\n"))
    with pytest.raises(ValidationError):
        load_config(write(tmp_path / "c.toml", "alpha = 1.0\n"))


def test_assemble_problem(tmp_path):
    recs = load_tracts(three_tracts(tmp_path))
    od = write(tmp_path / "od.csv", "origin,destination,count\nA,B,5\nC,A,2\n")
    problem = assemble_problem(recs, od, {"A": 0.9, "B": 0.5, "C": 0.1}, budget=1.0)
    assert len(problem.pairs) == 6 and problem.priority["A", "C"] == 0.9
    positive = assemble_problem(recs, od, None, ProblemConfig(od_pairs="positive"))
    assert positive.pairs == (("A", "B"), ("C", "A"))
    assert set(positive.priority.values()) == {0.5}
