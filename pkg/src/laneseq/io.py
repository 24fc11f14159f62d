"""File formats: graph JSON, token lines, prompt lines, probability tables.

All writers emit deterministic bytes (sorted keys, compact separators,
LF endings) so identical inputs always produce identical files.
"""

from __future__ import annotations

import json

import numpy as np

from .graph import Centerline, DagEdge, KeyPointDag, LaneGraph, Point3

TOKPROB_MAGIC = "TOKPROB v1"


def lanegraph_to_json(g: LaneGraph) -> dict:
    lanes = []
    for i, lane in enumerate(g.lanes):
        entry: dict = {"points": [[p.x, p.y, p.z] for p in lane.points]}
        if g.scores is not None:
            entry["score"] = g.scores[i]
        lanes.append(entry)
    out: dict = {"lanes": lanes}
    values = set(np.unique(g.adjacency)) if len(g.lanes) else set()
    if values <= {0.0, 1.0}:
        pairs = np.argwhere(g.adjacency == 1.0)
        out["adjacency"] = [[int(i), int(j)] for i, j in pairs]
    else:
        out["adjacency_dense"] = [[float(v) for v in row] for row in g.adjacency]
    return out


def lanegraph_from_json(obj: dict) -> LaneGraph:
    if not isinstance(obj, dict) or "lanes" not in obj:
        raise ValueError("lane-graph object needs a 'lanes' key")
    has_sparse = "adjacency" in obj
    has_dense = "adjacency_dense" in obj
    if has_sparse == has_dense:
        raise ValueError("exactly one of 'adjacency' or 'adjacency_dense' required")
    lanes = []
    scores = []
    for entry in obj["lanes"]:
        lanes.append(Centerline([Point3(*map(float, p)) for p in entry["points"]]))
        scores.append(entry.get("score"))
    m = len(lanes)
    if has_dense:
        adjacency = np.asarray(obj["adjacency_dense"], dtype=float).reshape(m, m)
    else:
        adjacency = np.zeros((m, m))
        for i, j in obj["adjacency"]:
            adjacency[int(i), int(j)] = 1.0
    if any(s is not None for s in scores):
        scores = tuple(1.0 if s is None else float(s) for s in scores)
    else:
        scores = None
    return LaneGraph(lanes, adjacency, scores)


def dag_to_json(d: KeyPointDag) -> dict:
    edges = []
    for e in d.edges:
        entry: dict = {"src": e.src, "dst": e.dst,
                       "control": [e.control[0], e.control[1]]}
        if e.score is not None:
            entry["score"] = e.score
        edges.append(entry)
    return {"keypoints": [[p.x, p.y, p.z] for p in d.keypoints], "edges": edges}


def dag_from_json(obj: dict) -> KeyPointDag:
    if not isinstance(obj, dict) or "keypoints" not in obj:
        raise ValueError("DAG object needs a 'keypoints' key")
    keypoints = [Point3(*map(float, p)) for p in obj["keypoints"]]
    edges = [
        DagEdge(int(e["src"]), int(e["dst"]),
                (float(e["control"][0]), float(e["control"][1])),
                float(e["score"]) if "score" in e else None)
        for e in obj.get("edges", [])
    ]
    return KeyPointDag(keypoints, edges)


def is_dag_json(obj: dict) -> bool:
    return isinstance(obj, dict) and "keypoints" in obj


def dumps(obj: dict) -> str:
    """One-line deterministic JSON."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def read_json_objects(text: str) -> list[dict]:
    """Whole-file JSON (object or array) or one JSON object per line."""
    stripped = text.strip()
    if not stripped:
        return []
    try:
        whole = json.loads(stripped)
    except json.JSONDecodeError:
        return [json.loads(line) for line in stripped.splitlines() if line.strip()]
    return whole if isinstance(whole, list) else [whole]


def format_tokens(tokens) -> str:
    return " ".join(str(int(t)) for t in tokens)


def parse_token_line(line: str) -> list[int]:
    return [int(t) for t in line.split()]


def format_prompt(points) -> str:
    return " ".join(f"{p.xb},{p.yb}" for p in points)


def parse_prompt_line(line: str) -> list[tuple[int, int]]:
    out = []
    for pair in line.split():
        a, b = pair.split(",")
        out.append((int(a), int(b)))
    return out


def write_tokprob(path, table) -> None:
    """Text header 'TOKPROB v1 <rows> <cols>' + row-major little-endian f32."""
    arr = np.ascontiguousarray(np.asarray(table, dtype="<f4"))
    if arr.ndim != 2:
        raise ValueError("probability table must be 2-D")
    with open(path, "wb") as fh:
        fh.write(f"{TOKPROB_MAGIC} {arr.shape[0]} {arr.shape[1]}\n".encode("ascii"))
        fh.write(arr.tobytes(order="C"))


def read_tokprob(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").strip()
        parts = header.split()
        if len(parts) != 4 or " ".join(parts[:2]) != TOKPROB_MAGIC:
            raise ValueError(f"not a {TOKPROB_MAGIC} file: header {header!r}")
        rows, cols = int(parts[2]), int(parts[3])
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != rows * cols:
        raise ValueError(
            f"table payload has {data.size} floats, header promises {rows * cols}"
        )
    return data.reshape(rows, cols).astype(float)
