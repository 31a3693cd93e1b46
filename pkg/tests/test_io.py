import csv
import io as _io
import json

import numpy as np
import pytest

from distcone import ConstraintError, DistanceMatrix, StructuralError, sample_D
from distcone import io
from distcone.matdist import path_graph


def test_matrix_json_roundtrip(tmp_path, unit3):
    path = io.write_matrix(tmp_path / "m.json", unit3, note="x")
    obj = json.loads(path.read_text())
    assert obj["order"] == 3 and obj["upper"] == [1.0, 1.0, 1.0] and obj["note"] == "x"
    assert io.read_matrix(path) == unit3


def test_square_and_csv_inputs(tmp_path, unit3):
    (tmp_path / "sq.json").write_text(json.dumps(unit3.square().tolist()))
    assert io.read_matrix(tmp_path / "sq.json") == unit3
    (tmp_path / "m.csv").write_text(io.matrix_to_csv(unit3))
    assert io.read_matrix(tmp_path / "m.csv") == unit3
    (tmp_path / "bad.csv").write_text("0,1\n2,0\n")
    with pytest.raises(ConstraintError):
        io.read_matrix(tmp_path / "bad.csv")
    assert io.read_square(tmp_path / "bad.csv").tolist() == [[0, 1], [2, 0]]
    (tmp_path / "junk.json").write_text("{not json")
    with pytest.raises(StructuralError):
        io.read_matrix(tmp_path / "junk.json")
    with pytest.raises(StructuralError):
        io.matrix_from_obj({"rows": 3})


def test_csv_exact_floats(tmp_path, rng):
    from conftest import random_metric
    r = random_metric(rng, 6)
    (tmp_path / "r.csv").write_text(io.matrix_to_csv(r))
    assert io.read_matrix(tmp_path / "r.csv") == r


def test_triple_roundtrip(tmp_path):
    T = path_graph(4, weights=[0.1, 0.2, 0.3, 0.4], label="p4")
    path = io.write_triple(tmp_path / "t.json", T)
    back = io.read_triple(path)
    assert back.label == "p4" and back.space == T.space
    assert np.array_equal(back.weights, T.weights)
    (tmp_path / "nw.json").write_text(json.dumps({"order": 2, "upper": [1.0]}))
    with pytest.raises(StructuralError):
        io.read_triple(tmp_path / "nw.json")


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "sub" / "out.json"
    io.write_json(target, {"a": 1})
    io.write_json(target, {"a": 2})
    assert json.loads(target.read_text()) == {"a": 2}
    assert [p.name for p in target.parent.iterdir()] == ["out.json"]


def test_samples_jsonl_packed_order(tmp_path):
    E = sample_D(path_graph(5), 4, 30, seed=0)
    path = tmp_path / "s.jsonl"
    path.write_text(io.samples_jsonl(E))
    back = io.read_samples(path)
    assert len(back) == 30
    for m, r in zip(E.matrices, back):
        assert np.array_equal(r.square(), m)


def _rows(text):
    rows = list(csv.reader(_io.StringIO(text)))
    assert rows[0] == ["bin_left", "bin_right", "count"]
    return [(float(a), float(b), int(c)) for a, b, c in rows[1:]]


def test_histogram_csv():
    rng = np.random.default_rng(0)
    rows = _rows(io.histogram_csv(rng.normal(size=100), 10))
    assert len(rows) == 10 and sum(c for *_, c in rows) == 100
    assert all(rows[i][1] == rows[i + 1][0] for i in range(9))
    const = _rows(io.histogram_csv([2.0] * 40, 5))
    assert sum(1 for *_, c in const if c) == 1 and sum(c for *_, c in const) == 40
    grid = _rows(io.histogram_csv(np.arange(100) + 0.5, 10))
    assert [c for *_, c in grid] == [10] * 10
    assert _rows(io.histogram_csv([], 4)) == [(0.0, 0.0, 0)]
    with pytest.raises(StructuralError):
        io.histogram_csv([1.0], 0)


def test_vertices_file(tmp_path):
    path = io.write_vertices(tmp_path / "v.json", np.eye(2))
    assert json.loads(path.read_text()) == [[1.0, 0.0], [0.0, 1.0]]
    assert DistanceMatrix([1.0]).to_dict()["order"] == 2
