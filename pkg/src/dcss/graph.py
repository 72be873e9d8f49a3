"""Network topologies of secondary users and their Laplacians.

A topology is an undirected, connected graph over ``n`` nodes.  Dynamic
networks are modelled by independent per-link failures that are resampled
at every consensus step.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable

import numpy as np


BUILTIN_TOPOLOGIES = ("topo6", "topo10", "topo20")


class TopologyError(ValueError):
    """Raised for malformed or disconnected topologies."""


def _is_connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    if n <= 1:
        return True
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in nbrs[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


@dataclass(frozen=True)
class Topology:
    """Undirected graph of SUs with edges stored as sorted ``(i, j)``, ``i < j``.

    Connectivity is not enforced here because sampled dynamic topologies may
    be disconnected for a single step; :func:`build_laplacian` and
    :func:`load_topology` check it.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise TopologyError("topology needs at least one node")
        norm = []
        seen = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise TopologyError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise TopologyError(f"edge ({i}, {j}) out of range for n={self.n}")
            e = (min(i, j), max(i, j))
            if e in seen:
                raise TopologyError(f"duplicate edge {e}")
            seen.add(e)
            norm.append(e)
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    @property
    def adjacency(self) -> np.ndarray:
        g = np.zeros((self.n, self.n), dtype=np.int64)
        for i, j in self.edges:
            g[i, j] = g[j, i] = 1
        return g

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def degree_matrix(self) -> np.ndarray:
        return np.diag(self.degrees)

    def neighbors(self, i: int) -> list[int]:
        return [b if a == i else a for a, b in self.edges if i in (a, b)]

    def is_connected(self) -> bool:
        return _is_connected(self.n, self.edges)

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.edges:
            return np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp)
        e = np.asarray(self.edges, dtype=np.intp)
        return e[:, 0].copy(), e[:, 1].copy()

    @classmethod
    def from_adjacency(cls, g, name: str = "custom") -> "Topology":
        g = np.asarray(g)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise TopologyError("adjacency must be square")
        if not np.array_equal(g, g.T):
            raise TopologyError("adjacency must be symmetric")
        if np.any(np.diag(g) != 0):
            raise TopologyError("adjacency must have a zero diagonal")
        n = g.shape[0]
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if g[i, j]]
        return cls(n, tuple(edges), name=name)

    @classmethod
    def complete(cls, n: int) -> "Topology":
        return cls(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)), name=f"K{n}")


@dataclass(frozen=True)
class LinkFailureModel:
    """Independent Bernoulli link survival with probability ``pr_connection``."""

    pr_connection: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.pr_connection <= 1.0:
            raise ValueError(f"pr_connection must lie in [0, 1], got {self.pr_connection}")

    @classmethod
    def from_pr_fail(cls, pr_fail: float) -> "LinkFailureModel":
        if not 0.0 <= pr_fail <= 1.0:
            raise ValueError(f"pr_fail must lie in [0, 1], got {pr_fail}")
        return cls(1.0 - pr_fail)

    @property
    def pr_fail(self) -> float:
        return 1.0 - self.pr_connection

    @property
    def is_fixed(self) -> bool:
        return self.pr_connection == 1.0


FIXED = LinkFailureModel(1.0)


def _laplacian_unchecked(topology: Topology) -> np.ndarray:
    g = topology.adjacency.astype(float)
    return np.diag(g.sum(axis=1)) - g


def build_laplacian(topology: Topology) -> np.ndarray:
    """Return ``L = N - G`` for a connected topology.

    Raises:
        TopologyError: if the topology is disconnected.
    """
    if not topology.is_connected():
        raise TopologyError(
            f"topology '{topology.name}' with n={topology.n} is disconnected; "
            "consensus requires a connected base graph"
        )
    return _laplacian_unchecked(topology)


def sample_edge_mask(topology: Topology, model: LinkFailureModel, rng: np.random.Generator,
                     size=None) -> np.ndarray:
    """Boolean survival mask over ``topology.edges``; leading dims from ``size``."""
    m = len(topology.edges)
    shape = (m,) if size is None else tuple(np.atleast_1d(size)) + (m,)
    if model.pr_connection >= 1.0:
        return np.ones(shape, dtype=bool)
    if model.pr_connection <= 0.0:
        return np.zeros(shape, dtype=bool)
    return rng.random(shape) < model.pr_connection


def sample_dynamic_topology(base: Topology, model: LinkFailureModel,
                            rng: np.random.Generator) -> Topology:
    """Keep each edge of ``base`` independently with probability ``pr_connection``.

    The result may be disconnected; only the base graph must be connected.
    """
    if model.is_fixed:
        return base
    mask = sample_edge_mask(base, model, rng)
    kept = tuple(e for e, keep in zip(base.edges, mask) if keep)
    return Topology(base.n, kept, name=f"{base.name}@sample")


def expected_laplacian(base: Topology, model: LinkFailureModel) -> np.ndarray:
    return model.pr_connection * build_laplacian(base)


def parse_topology(text: str, name: str = "custom") -> Topology:
    """Parse the edge-list format: node count, then ``i j`` lines, ``#`` comments."""
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((lineno, line))
    if not lines:
        raise TopologyError(f"{name}: empty topology file")
    lineno, first = lines[0]
    try:
        n = int(first)
    except ValueError:
        raise TopologyError(f"{name}:{lineno}: expected node count, got {first!r}") from None
    edges = []
    for lineno, line in lines[1:]:
        parts = line.split()
        if len(parts) != 2:
            raise TopologyError(f"{name}:{lineno}: expected 'i j', got {line!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise TopologyError(f"{name}:{lineno}: non-integer node index in {line!r}") from None
        if i == j:
            raise TopologyError(f"{name}:{lineno}: self-loop at node {i}")
        if not (0 <= i < n and 0 <= j < n):
            raise TopologyError(f"{name}:{lineno}: node index out of range for n={n}")
        if i > j:
            raise TopologyError(f"{name}:{lineno}: edges must be written with i < j")
        edges.append((i, j))
    if len(set(edges)) != len(edges):
        dup = next(e for e in edges if edges.count(e) > 1)
        raise TopologyError(f"{name}: duplicate edge {dup}")
    topo = Topology(n, tuple(edges), name=name)
    if not topo.is_connected():
        raise TopologyError(f"{name}: topology is disconnected")
    return topo


def load_topology(source: str | os.PathLike) -> Topology:
    """Load a topology from a file path or a built-in name (``topo6``, ``topo10``, ``topo20``)."""
    s = os.fspath(source)
    if s in BUILTIN_TOPOLOGIES:
        text = resources.files("dcss.data").joinpath(f"{s}.txt").read_text()
        return parse_topology(text, name=s)
    try:
        with open(s) as fh:
            text = fh.read()
    except OSError as exc:
        raise TopologyError(f"cannot read topology {s!r}: {exc.strerror}") from None
    return parse_topology(text, name=os.path.basename(s))


def default_topology_for(n_su: int) -> Topology:
    name = f"topo{n_su}"
    if name not in BUILTIN_TOPOLOGIES:
        raise TopologyError(f"no built-in topology with {n_su} SUs; pass a topology file")
    return load_topology(name)
