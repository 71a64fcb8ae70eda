import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphtf import build_graph, grid2d
from graphtf.exceptions import DimensionMismatch, ParseError
from graphtf.io import (
    format_edge_list,
    format_float,
    read_edge_list,
    read_features,
    read_labels,
    read_signal,
    write_edge_list,
    write_json,
    write_labels,
    write_signal,
)


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_edge_list_round_trip_unweighted(tmp_path):
    g = grid2d(3, 4)
    p = str(tmp_path / "g.txt")
    write_edge_list(g, p)
    h = read_edge_list(p)
    assert (h.n, h.m) == (g.n, g.m)
    assert h.edges == g.edges
    assert format_edge_list(h) == format_edge_list(g)
    assert open(p).read().splitlines()[1] == "0 1"


def test_edge_list_round_trip_weighted(tmp_path):
    g = build_graph(4, [(0, 1, 0.1), (1, 2, 1 / 3), (2, 3, 2.0)])
    p = str(tmp_path / "g.txt")
    write_edge_list(g, p)
    assert read_edge_list(p).edges == g.edges


def test_edge_list_comments_and_isolated(tmp_path):
    p = _write(tmp_path, "g.txt", "# header comment\n5 2\n\n0 1\n# mid\n3 4 2.5\n")
    g = read_edge_list(p)
    assert g.n == 5 and g.m == 2
    assert g.edges[1] == (3, 4, 2.5)
    assert read_edge_list(_write(tmp_path, "e.txt", "3 0\n")).m == 0


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("4 2\n0 1\n1 x\n", 3),
        ("4 1\n0 9\n", 2),
        ("4 1\n2 2\n", 2),
        ("4 1\n0 1 -1\n", 2),
        ("4 2\n0 1\n1 0\n", 3),
        ("4 1\n0 1 2 3\n", 2),
        ("four 1\n", 1),
        ("# c\n0 0\n", 2),
    ],
)
def test_edge_list_errors_report_line(tmp_path, text, lineno):
    with pytest.raises(ParseError) as exc:
        read_edge_list(_write(tmp_path, "bad.txt", text))
    assert exc.value.lineno == lineno
    assert f":{lineno}:" in str(exc.value)


def test_edge_list_count_mismatch(tmp_path):
    with pytest.raises(ParseError):
        read_edge_list(_write(tmp_path, "g.txt", "4 3\n0 1\n"))
    with pytest.raises(ParseError):
        read_edge_list(_write(tmp_path, "g.txt", "# only\n"))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_edge_list(str(tmp_path / "nope.txt"))
    with pytest.raises(FileNotFoundError):
        read_signal(str(tmp_path / "nope.csv"))


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=30))
def test_signal_round_trip_exact(tmp_path_factory, vals):
    p = str(tmp_path_factory.mktemp("s") / "y.csv")
    write_signal(p, vals)
    np.testing.assert_array_equal(read_signal(p), np.asarray(vals))


def test_signal_shuffled_rows(tmp_path):
    p = _write(tmp_path, "y.csv", "node,value\n2,3.0\n0,1.0\n1,2.0\n")
    np.testing.assert_array_equal(read_signal(p), [1.0, 2.0, 3.0])


def test_signal_errors(tmp_path):
    with pytest.raises(DimensionMismatch):
        read_signal(_write(tmp_path, "a.csv", "node,value\n0,1\n2,1\n"))
    with pytest.raises(DimensionMismatch):
        read_signal(_write(tmp_path, "b.csv", "node,value\n0,1\n1,1\n"), n=3)
    with pytest.raises(ParseError) as exc:
        read_signal(_write(tmp_path, "c.csv", "node,value\n0,1\n1,abc\n"))
    assert exc.value.lineno == 3
    with pytest.raises(ParseError):
        read_signal(_write(tmp_path, "d.csv", "id,value\n0,1\n"))
    with pytest.raises(ParseError):
        read_signal(_write(tmp_path, "e.csv", "node,value\n0,nan\n"))


def test_labels_round_trip(tmp_path):
    p = str(tmp_path / "l.csv")
    write_labels(p, [2, 0], nodes=[7, 3])
    nodes, cls = read_labels(p)
    assert nodes.tolist() == [7, 3] and cls.tolist() == [2, 0]
    with pytest.raises(ParseError):
        read_labels(_write(tmp_path, "d.csv", "node,class\n1,0\n1,1\n"))
    with pytest.raises(ParseError):
        read_labels(_write(tmp_path, "n.csv", "node,class\n1,-1\n"))


def test_features(tmp_path):
    X = read_features(_write(tmp_path, "f.csv", "a,b\n1,2\n3,4.5\n"))
    np.testing.assert_array_equal(X, [[1, 2], [3, 4.5]])
    assert read_features(_write(tmp_path, "g.csv", "1,2\n")).shape == (1, 2)
    with pytest.raises(ParseError) as exc:
        read_features(_write(tmp_path, "h.csv", "1,2\n3\n"))
    assert exc.value.lineno == 2


def test_format_float():
    assert format_float(0.1) == "0.1"
    assert float(format_float(1 / 3)) == 1 / 3
    assert format_float(float("inf")) == "inf"
    assert format_float(float("-inf")) == "-inf"


def test_write_json_sorted(tmp_path):
    p = str(tmp_path / "m.json")
    write_json(p, {"b": 1, "a": [1, 2]})
    text = open(p).read()
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [1, 2], "b": 1}
