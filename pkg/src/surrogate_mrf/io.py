"""Plain-text formats for models, observations and sample sets.

Model file::

    N m E
    s t            (E lines)
    theta_s(0) ... theta_s(m-1)          (N lines)
    theta_st(0,0) ... theta_st(m-1,m-1)  (E lines, row-major)

Floats are written with 17 significant digits so a round trip is exact.
Observation file: a header ``N alpha`` followed by one value per line.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .graph import Graph
from .params import ExponentialParams


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_model(params: ExponentialParams) -> str:
    g = params.graph
    lines = [f"{g.num_nodes} {params.num_states} {g.num_edges}"]
    lines += [f"{s} {t}" for s, t in g.edges]
    lines += [" ".join(_fmt(v) for v in row) for row in params.node]
    lines += [" ".join(_fmt(v) for v in tab.ravel()) for tab in params.edge]
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> ExponentialParams:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        N, m, E = (int(v) for v in rows[0])
        edges = tuple((int(a), int(b)) for a, b in rows[1:1 + E])
        node = np.array([[float(v) for v in r] for r in rows[1 + E:1 + E + N]])
        edge = np.array([[float(v) for v in r] for r in rows[1 + E + N:1 + E + N + E]])
    except (ValueError, IndexError) as exc:
        raise ValueError(f"malformed model file: {exc}") from exc
    if node.shape != (N, m) or edge.shape not in ((E, m * m), (0,)):
        raise ValueError("model tables do not match the header")
    graph = Graph(N, edges).detect_grid()
    return ExponentialParams(graph, node, edge.reshape(E, m, m))


def write_model(params: ExponentialParams, path) -> None:
    Path(path).write_text(format_model(params))


def read_model(path) -> ExponentialParams:
    return parse_model(Path(path).read_text())


def write_observations(y: np.ndarray, alpha: float, path) -> None:
    lines = [f"{len(y)} {_fmt(alpha)}"] + [_fmt(v) for v in y]
    Path(path).write_text("\n".join(lines) + "\n")


def read_observations(path) -> tuple[np.ndarray, float]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    head = lines[0].split()
    n, alpha = int(head[0]), float(head[1])
    y = np.array([float(v) for v in lines[1:]])
    if y.shape != (n,):
        raise ValueError("observation count does not match header")
    return y, alpha


def write_samples(X: np.ndarray, path) -> None:
    Path(path).write_text("".join(" ".join(str(int(v)) for v in row) + "\n" for row in X))


def read_samples(path) -> np.ndarray:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    return np.array([[int(v) for v in r] for r in rows], dtype=np.intp)
