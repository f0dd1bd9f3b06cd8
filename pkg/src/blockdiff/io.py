"""Graph JSONL: one ``{"n", "nodes", "edges": [[i, j, label], ...]}`` object per line."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .graph import GraphError, LabeledGraph


def graph_to_record(g: LabeledGraph) -> dict:
    return {"n": g.n, "nodes": [int(x) for x in g.node_labels], "edges": [list(e) for e in g.edge_list()]}


def graph_from_record(rec: dict, k_v: int | None = None, k_e: int | None = None) -> LabeledGraph:
    try:
        n = int(rec["n"])
        nodes = rec.get("nodes") or [0] * n
        edges = rec.get("edges", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphError(f"malformed graph record: {exc}") from exc
    if len(nodes) != n:
        raise GraphError(f"record says n={n} but lists {len(nodes)} node labels")
    for e in edges:
        if len(e) not in (2, 3) or not (0 <= e[0] < e[1] < n):
            raise GraphError(f"edge {e} must be [i, j, label] with 0 <= i < j < n")
    k_v = k_v if k_v is not None else rec.get("k_v", max(nodes, default=0) + 1)
    k_e = k_e if k_e is not None else rec.get("k_e", max([e[2] if len(e) > 2 else 1 for e in edges], default=1) + 1)
    return LabeledGraph.from_edges(n, edges, node_labels=np.asarray(nodes), k_v=k_v, k_e=k_e)


def read_graphs(path: str | Path) -> list[LabeledGraph]:
    """Read a JSONL file; vocabularies are the largest seen over the whole file."""
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise GraphError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
    k_v = max((max(r.get("nodes") or [0]) + 1 for r in records), default=1)
    k_e = max((max([e[2] if len(e) > 2 else 1 for e in r.get("edges", [])], default=1) + 1 for r in records), default=2)
    out = []
    for lineno, rec in enumerate(records, 1):
        try:
            out.append(graph_from_record(rec, k_v=rec.get("k_v", k_v), k_e=rec.get("k_e", k_e)))
        except GraphError as exc:
            raise GraphError(f"{path}: graph {lineno}: {exc}") from exc
    return out


def write_graphs(path: str | Path, graphs) -> None:
    with open(path, "w") as fh:
        for g in graphs:
            fh.write(json.dumps(graph_to_record(g)) + "\n")
