import json

import numpy as np
import pytest

from blockdiff.datasets import generate_dataset
from blockdiff.graph import GraphError, LabeledGraph
from blockdiff.io import graph_from_record, graph_to_record, read_graphs, write_graphs


def test_round_trip(tmp_path):
    gs = generate_dataset("community", 5, np.random.default_rng(0))
    labeled = LabeledGraph.from_edges(3, [(0, 1, 2), (1, 2, 1)], node_labels=np.array([0, 3, 1]), k_v=4, k_e=3)
    write_graphs(tmp_path / "a.jsonl", gs)
    write_graphs(tmp_path / "b.jsonl", [labeled])
    assert read_graphs(tmp_path / "a.jsonl") == gs
    assert read_graphs(tmp_path / "b.jsonl") == [labeled]


def test_record_shape():
    g = LabeledGraph.from_edges(3, [(0, 2)])
    assert graph_to_record(g) == {"n": 3, "nodes": [0, 0, 0], "edges": [[0, 2, 1]]}


def test_vocabulary_inferred_file_wide(tmp_path):
    path = tmp_path / "g.jsonl"
    path.write_text('{"n": 2, "edges": [[0, 1]]}\n{"n": 2, "edges": [[0, 1, 3]]}\n')
    a, b = read_graphs(path)
    assert a.k_e == b.k_e == 4


@pytest.mark.parametrize("rec,msg", [
    ({"nodes": [0]}, "malformed"),
    ({"n": 2, "nodes": [0]}, "node labels"),
    ({"n": 2, "edges": [[1, 0]]}, "0 <= i < j"),
    ({"n": 2, "edges": [[0, 5]]}, "0 <= i < j"),
])
def test_malformed_records(rec, msg):
    with pytest.raises(GraphError, match=msg):
        graph_from_record(rec)


def test_bad_json_reports_line(tmp_path):
    path = tmp_path / "g.jsonl"
    path.write_text(json.dumps({"n": 1}) + "\n{oops\n")
    with pytest.raises(GraphError, match=":2:"):
        read_graphs(path)
