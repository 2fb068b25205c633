"""Metric graphs and their Schroedinger operators.

Edges are meshed with piecewise-linear finite elements and a lumped (diagonal)
mass. Kirchhoff conditions at shared vertices come out of the assembly; no
special stencil rows are needed. Dirichlet vertices are removed from the
unknowns, delta-type strengths go on the vertex diagonal, an electric
potential enters through lumped quadrature and a magnetic potential through a
phase factor per subinterval (midpoint rule), which keeps the matrix Hermitian.

Infinite graphs have to be truncated by the caller.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import CapacityError, ConnectivityError, DimensionError, DomainError, ValidationError
from .linalg import MAX_SIZE
from .space import SampledSpace

GRAPH_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["vertices", "edges"],
    "additionalProperties": False,
    "properties": {
        "vertices": {"type": "array", "items": {"type": ["string", "integer"]}, "minItems": 1},
        "edges": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["u", "v", "length"],
                "additionalProperties": False,
                "properties": {
                    "u": {"type": ["string", "integer"]},
                    "v": {"type": ["string", "integer"]},
                    "length": {"type": "number"},
                    "q_samples": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                    "b_samples": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                },
            },
        },
        "dirichlet": {"type": "array", "items": {"type": ["string", "integer"]}},
        "delta": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}


@dataclass
class Edge:
    u: str
    v: str
    length: float
    q_samples: np.ndarray | None = None
    b_samples: np.ndarray | None = None

    def sample(self, which: str, pos: np.ndarray) -> np.ndarray:
        """Linear interpolation of uniformly spaced samples at offsets ``pos`` from ``u``."""
        vals = self.q_samples if which == "q" else self.b_samples
        if vals is None:
            return np.zeros_like(pos, dtype=float)
        if len(vals) == 1:
            return np.full_like(pos, float(vals[0]), dtype=float)
        grid = np.linspace(0.0, self.length, len(vals))
        return np.interp(pos, grid, vals)


@dataclass
class MetricGraph:
    vertices: list[str]
    edges: list[Edge]
    dirichlet: set[str] = field(default_factory=set)
    delta: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = [str(v) for v in self.vertices]
        self.dirichlet = {str(v) for v in self.dirichlet}
        self.delta = {str(k): float(s) for k, s in self.delta.items()}
        self.validate()

    def validate(self) -> None:
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            raise ValidationError("duplicate vertex identifiers")
        if not self.edges:
            raise ValidationError("graph needs at least one edge")
        for k, e in enumerate(self.edges):
            e.u, e.v = str(e.u), str(e.v)
            if e.u not in vs or e.v not in vs:
                raise ValidationError(f"edge {k} references an unknown vertex")
            if not (e.length > 0 and math.isfinite(e.length)):
                raise ValidationError(f"edge {k} has non-positive length {e.length}")
            for name in ("q_samples", "b_samples"):
                vals = getattr(e, name)
                if vals is None:
                    continue
                arr = np.asarray(vals)
                if np.iscomplexobj(arr):
                    raise ValidationError(f"edge {k}: only real {name[0]} potentials are supported")
                arr = arr.astype(float)
                if not np.all(np.isfinite(arr)):
                    raise ValidationError(f"edge {k}: {name} must be finite")
                setattr(e, name, arr)
        if not self.dirichlet <= vs:
            raise ValidationError("Dirichlet set contains unknown vertices")
        for v, s in self.delta.items():
            if v not in vs:
                raise ValidationError(f"delta strength given for unknown vertex {v!r}")
            if v in self.dirichlet:
                raise ValidationError(f"vertex {v!r} cannot be both Dirichlet and delta-type")
            if not math.isfinite(s):
                raise ValidationError(f"delta strength at {v!r} must be finite")
        idx = {v: i for i, v in enumerate(self.vertices)}
        rows = [idx[e.u] for e in self.edges]
        cols = [idx[e.v] for e in self.edges]
        adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(vs), len(vs)))
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp != 1:
            raise ConnectivityError(f"graph has {ncomp} connected components")

    @property
    def magnetic(self) -> bool:
        return any(e.b_samples is not None and np.any(e.b_samples != 0) for e in self.edges)

    def incident(self, v: str) -> list[tuple[int, bool]]:
        """(edge index, True if ``v`` is the ``u`` end) for each edge end at ``v``; loops appear twice."""
        out = []
        for k, e in enumerate(self.edges):
            if e.u == v:
                out.append((k, True))
            if e.v == v:
                out.append((k, False))
        return out

    def vertex_distances(self) -> np.ndarray:
        idx = {v: i for i, v in enumerate(self.vertices)}
        n = len(self.vertices)
        w: dict[tuple[int, int], float] = {}
        for e in self.edges:
            a, b = idx[e.u], idx[e.v]
            if a == b:
                continue
            key = (min(a, b), max(a, b))
            w[key] = min(w.get(key, math.inf), e.length)
        rows = [k[0] for k in w]
        cols = [k[1] for k in w]
        mat = csr_matrix((list(w.values()), (rows, cols)), shape=(n, n))
        return dijkstra(mat, directed=False)

    # Graph description file: {vertices:[id], edges:[{u,v,length,q_samples?,b_samples?}],
    # dirichlet:[id], delta:{id: sigma}}
    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> MetricGraph:
        try:
            jsonschema.validate(doc, GRAPH_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ValidationError(f"graph description invalid at {where}: {exc.message}") from None
        edges = [
            Edge(
                str(e["u"]),
                str(e["v"]),
                float(e["length"]),
                None if "q_samples" not in e else np.asarray(e["q_samples"], dtype=float),
                None if "b_samples" not in e else np.asarray(e["b_samples"], dtype=float),
            )
            for e in doc["edges"]
        ]
        return cls(
            [str(v) for v in doc["vertices"]],
            edges,
            {str(v) for v in doc.get("dirichlet", [])},
            {str(k): float(s) for k, s in doc.get("delta", {}).items()},
        )

    @classmethod
    def load(cls, path: str | Path) -> MetricGraph:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict[str, Any]:
        edges = []
        for e in self.edges:
            entry: dict[str, Any] = {"u": e.u, "v": e.v, "length": e.length}
            if e.q_samples is not None:
                entry["q_samples"] = [float(x) for x in e.q_samples]
            if e.b_samples is not None:
                entry["b_samples"] = [float(x) for x in e.b_samples]
            edges.append(entry)
        doc: dict[str, Any] = {"vertices": list(self.vertices), "edges": edges}
        if self.dirichlet:
            doc["dirichlet"] = sorted(self.dirichlet)
        if self.delta:
            doc["delta"] = dict(sorted(self.delta.items()))
        return doc


def interval(length: float = 1.0, dirichlet: bool = True) -> MetricGraph:
    return MetricGraph(["a", "b"], [Edge("a", "b", length)], {"a", "b"} if dirichlet else set())


def star(arms: int = 3, length: float = 1.0, dirichlet_leaves: bool = True) -> MetricGraph:
    leaves = [f"leaf{k}" for k in range(arms)]
    edges = [Edge("center", leaf, length) for leaf in leaves]
    return MetricGraph(["center", *leaves], edges, set(leaves) if dirichlet_leaves else set())


@dataclass
class GraphMesh:
    """Node layout of a meshed graph.

    Nodes ``0 .. len(vertices)-1`` are the graph vertices, interior nodes
    follow edge by edge. ``reduced[i]`` is the unknown index of node ``i`` or
    -1 for eliminated (Dirichlet) nodes.
    """

    node_edge: np.ndarray
    node_offset: np.ndarray
    edge_nodes: list[np.ndarray]
    edge_spacing: np.ndarray
    reduced: np.ndarray
    vertex_node: dict[str, int]

    @property
    def kept(self) -> np.ndarray:
        return np.nonzero(self.reduced >= 0)[0]

    def full_values(self, f: np.ndarray) -> np.ndarray:
        out = np.zeros(self.reduced.size, dtype=np.asarray(f).dtype)
        out[self.kept] = f
        return out


@dataclass
class OperatorDiscretization:
    """Weak-form discretization of a generator on a sampled space.

    The generator is ``-W^{-1} K`` where ``K`` is ``stiffness`` (plus
    ``1j * stiffness_imag`` in the magnetic case) and ``W = diag(mass_weights)``.
    """

    stiffness: np.ndarray
    mass_weights: np.ndarray
    stiffness_imag: np.ndarray | None = None
    sign: str = "negative"
    self_adjoint: bool = True
    morrey_order_k: int = 1
    mesh: GraphMesh | None = None
    label: str = ""

    def __post_init__(self):
        k = self.stiffness
        if k.shape[0] != k.shape[1] or k.shape[0] != self.mass_weights.size:
            raise DimensionError("stiffness and mass weights do not match")
        if np.any(self.mass_weights <= 0):
            raise ValidationError("mass weights must be strictly positive")

    @property
    def size(self) -> int:
        return self.mass_weights.size

    @property
    def hermitian(self) -> np.ndarray:
        if self.stiffness_imag is None:
            return self.stiffness
        return self.stiffness + 1j * self.stiffness_imag

    @property
    def generator(self) -> np.ndarray:
        return -self.hermitian / self.mass_weights[:, None]


def _mesh(g: MetricGraph, h: float) -> GraphMesh:
    nv = len(g.vertices)
    vidx = {v: i for i, v in enumerate(g.vertices)}
    node_edge = [-1] * nv
    node_offset = [0.0] * nv
    edge_nodes = []
    spacing = []
    nxt = nv
    for k, e in enumerate(g.edges):
        n_e = max(1, math.ceil(e.length / h - 1e-12))
        he = e.length / n_e
        interior = list(range(nxt, nxt + n_e - 1))
        nxt += n_e - 1
        node_edge += [k] * (n_e - 1)
        node_offset += [he * j for j in range(1, n_e)]
        edge_nodes.append(np.array([vidx[e.u], *interior, vidx[e.v]], dtype=int))
        spacing.append(he)
    # vertex nodes get the offset along their first incident edge
    for v, i in vidx.items():
        inc = g.incident(v)
        k, at_u = inc[0]
        node_edge[i] = k
        node_offset[i] = 0.0 if at_u else g.edges[k].length
    reduced = np.full(nxt, -1, dtype=int)
    dirichlet_nodes = {vidx[v] for v in g.dirichlet}
    keep = [i for i in range(nxt) if i not in dirichlet_nodes]
    reduced[keep] = np.arange(len(keep))
    return GraphMesh(
        np.array(node_edge, dtype=int),
        np.array(node_offset, dtype=float),
        edge_nodes,
        np.array(spacing),
        reduced,
        dict(vidx),
    )


def discretize_graph(g: MetricGraph, h: float) -> tuple[OperatorDiscretization, SampledSpace]:
    """Mesh every edge with ``ceil(length / h)`` elements and assemble the form.

    Returns the discretized operator and the sampled space of retained nodes
    (shortest-path distances, lumped-mass weights).
    """
    if not h > 0:
        raise ValidationError("mesh size must be positive")
    mesh = _mesh(g, h)
    n_full = mesh.reduced.size
    if n_full > MAX_SIZE:
        raise CapacityError(f"mesh has {n_full} nodes, cap is {MAX_SIZE}")
    kr = np.zeros((n_full, n_full))
    ki = np.zeros((n_full, n_full))
    mass = np.zeros(n_full)
    # element contributions reduced in edge order
    for k, e in enumerate(g.edges):
        nodes = mesh.edge_nodes[k]
        he = mesh.edge_spacing[k]
        pos = he * np.arange(nodes.size)
        q = e.sample("q", pos)
        mid = 0.5 * (pos[:-1] + pos[1:])
        phase = e.sample("b", mid) * he
        a, b = nodes[:-1], nodes[1:]
        np.add.at(mass, a, 0.5 * he)
        np.add.at(mass, b, 0.5 * he)
        np.add.at(kr, (a, a), 1.0 / he + 0.5 * he * q[:-1])
        np.add.at(kr, (b, b), 1.0 / he + 0.5 * he * q[1:])
        # |u_b - e^{i phase} u_a|^2 / he
        c, s = np.cos(phase), np.sin(phase)
        np.add.at(kr, (a, b), -c / he)
        np.add.at(kr, (b, a), -c / he)
        np.add.at(ki, (b, a), -s / he)
        np.add.at(ki, (a, b), s / he)
    for v, sigma in g.delta.items():
        i = mesh.vertex_node[v]
        kr[i, i] += sigma
    keep = mesh.kept
    kr = kr[np.ix_(keep, keep)]
    ki = ki[np.ix_(keep, keep)]
    magnetic = bool(np.any(ki != 0))
    op = OperatorDiscretization(
        stiffness=kr,
        mass_weights=mass[keep],
        stiffness_imag=ki if magnetic else None,
        self_adjoint=True,
        morrey_order_k=1,
        mesh=mesh,
        label="metric-graph",
    )
    points = [(int(mesh.node_edge[i]), float(mesh.node_offset[i])) for i in keep]
    ids = [_node_id(g, mesh, i) for i in keep]
    space = SampledSpace(ids, graph_metric(g, points), mass[keep])
    return op, space


def _node_id(g: MetricGraph, mesh: GraphMesh, i: int) -> str:
    nv = len(g.vertices)
    if i < nv:
        return g.vertices[i]
    k = int(mesh.node_edge[i])
    j = int(np.nonzero(mesh.edge_nodes[k] == i)[0][0])
    return f"e{k}:{j}"


def graph_metric(g: MetricGraph, points: Sequence[tuple[int, float] | str]) -> np.ndarray:
    """Exact shortest-path distances between points on the graph.

    A point is either a vertex id or ``(edge index, offset from the edge's u end)``.
    """
    vd = g.vertex_distances()
    vidx = {v: i for i, v in enumerate(g.vertices)}
    m = len(points)
    ea = np.zeros(m, dtype=int)
    eb = np.zeros(m, dtype=int)
    da = np.zeros(m)
    db = np.zeros(m)
    edge_of = np.full(m, -1, dtype=int)
    off = np.zeros(m)
    for i, p in enumerate(points):
        if isinstance(p, str):
            ea[i] = eb[i] = vidx[p]
            continue
        k, s = p
        e = g.edges[k]
        if not -1e-12 <= s <= e.length + 1e-12:
            raise DomainError(f"offset {s} outside edge {k} of length {e.length}")
        ea[i], eb[i] = vidx[e.u], vidx[e.v]
        da[i], db[i] = s, e.length - s
        edge_of[i], off[i] = k, s
    best = np.full((m, m), np.inf)
    for ends_x, dx in ((ea, da), (eb, db)):
        for ends_y, dy in ((ea, da), (eb, db)):
            cand = dx[:, None] + vd[np.ix_(ends_x, ends_y)] + dy[None, :]
            np.minimum(best, cand, out=best)
    same = (edge_of[:, None] == edge_of[None, :]) & (edge_of[:, None] >= 0)
    direct = np.abs(off[:, None] - off[None, :])
    best = np.where(same, np.minimum(best, direct), best)
    np.fill_diagonal(best, 0.0)
    return best


@dataclass
class KirchhoffDefect:
    flux_sum: float
    one_sided_derivatives: list[float]


def kirchhoff_defect(g: MetricGraph, d: OperatorDiscretization, f, v: str) -> KirchhoffDefect:
    """Vertex-condition residual of ``f`` at vertex ``v``.

    ``one_sided_derivatives`` are outward normal derivatives (pointing from the
    edge into the vertex) estimated with one-sided second-order differences;
    ``flux_sum`` is their sum plus ``sigma_v f(v)``, which vanishes for
    functions in the operator domain.
    """
    v = str(v)
    if v in g.dirichlet:
        raise DomainError(f"vertex {v!r} is Dirichlet; no flux condition there")
    mesh = d.mesh
    if mesh is None:
        raise DomainError("discretization carries no graph mesh")
    full = mesh.full_values(np.asarray(f))
    derivs = []
    for k, at_u in g.incident(v):
        nodes = mesh.edge_nodes[k]
        if not at_u:
            nodes = nodes[::-1]
        he = mesh.edge_spacing[k]
        f0, f1 = full[nodes[0]], full[nodes[1]]
        if nodes.size >= 3:
            inward = (-3.0 * f0 + 4.0 * f1 - full[nodes[2]]) / (2.0 * he)
        else:
            inward = (f1 - f0) / he
        derivs.append(float(-inward))
    value = full[mesh.vertex_node[v]]
    flux = float(sum(derivs) + g.delta.get(v, 0.0) * value)
    return KirchhoffDefect(flux, derivs)
