"""Directed acyclic graphs, d-separation and separating sets."""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import (
    AdjacentPair,
    CycleDetected,
    DuplicateNode,
    InvalidQuery,
    UnknownEndpoint,
    UnknownNode,
)

Edge = tuple[str, str]


class Dag:
    """Immutable DAG over string node ids.

    Node insertion order is preserved and drives every tie-break, so
    iteration over nodes, edges, parents and topological order is
    deterministic. Construct through :func:`new_dag`.
    """

    __slots__ = ("_nodes", "_edges", "_index", "_parents", "_children", "_order", "_position")

    def __init__(self, nodes: Sequence[str], edges: Iterable[Edge]):
        nodes = tuple(nodes)
        index: dict[str, int] = {}
        for node in nodes:
            if node in index:
                raise DuplicateNode(f"duplicate node {node!r}")
            index[node] = len(index)

        seen: set[Edge] = set()
        edge_list: list[Edge] = []
        parents: dict[str, list[str]] = {n: [] for n in nodes}
        children: dict[str, list[str]] = {n: [] for n in nodes}
        for edge in edges:
            u, v = edge
            for end in (u, v):
                if end not in index:
                    raise UnknownEndpoint(f"edge {u!r}->{v!r} references unknown node {end!r}")
            if u == v:
                raise CycleDetected(f"self-loop on {u!r}")
            if (u, v) in seen:
                continue
            seen.add((u, v))
            edge_list.append((u, v))
            parents[v].append(u)
            children[u].append(v)

        self._nodes = nodes
        self._edges = tuple(edge_list)
        self._index = index
        self._parents = {n: tuple(sorted(ps, key=index.__getitem__)) for n, ps in parents.items()}
        self._children = {n: tuple(sorted(cs, key=index.__getitem__)) for n, cs in children.items()}
        self._order = self._toposort()
        self._position = {n: i for i, n in enumerate(self._order)}

    def _toposort(self) -> tuple[str, ...]:
        indegree = {n: len(self._parents[n]) for n in self._nodes}
        heap = [self._index[n] for n in self._nodes if indegree[n] == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            node = self._nodes[heapq.heappop(heap)]
            order.append(node)
            for child in self._children[node]:
                indegree[child] -= 1
                if indegree[child] == 0:
                    heapq.heappush(heap, self._index[child])
        if len(order) != len(self._nodes):
            stuck = [n for n in self._nodes if indegree[n] > 0]
            raise CycleDetected(f"edge set is cyclic among {stuck}")
        return tuple(order)

    @property
    def nodes(self) -> tuple[str, ...]:
        return self._nodes

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    def __contains__(self, node: object) -> bool:
        return node in self._index

    def __len__(self) -> int:
        return len(self._nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dag):
            return NotImplemented
        return self._nodes == other._nodes and set(self._edges) == set(other._edges)

    def __hash__(self) -> int:
        return hash((self._nodes, frozenset(self._edges)))

    def __repr__(self) -> str:
        edges = ", ".join(f"{u}->{v}" for u, v in self._edges)
        return f"Dag(nodes={list(self._nodes)}, edges=[{edges}])"

    def parents(self, node: str) -> tuple[str, ...]:
        self._check(node)
        return self._parents[node]

    def children(self, node: str) -> tuple[str, ...]:
        self._check(node)
        return self._children[node]

    def degree(self, node: str) -> int:
        return len(self.parents(node)) + len(self._children[node])

    def has_edge(self, u: str, v: str) -> bool:
        return u in self._parents.get(v, ())

    def adjacent(self, u: str, v: str) -> bool:
        return self.has_edge(u, v) or self.has_edge(v, u)

    def sort_ids(self, ids: Iterable[str]) -> list[str]:
        """Order ``ids`` by node insertion order."""
        return sorted(ids, key=self._index.__getitem__)

    def position(self, node: str) -> int:
        """Index of ``node`` in :func:`topological_order`."""
        self._check(node)
        return self._position[node]

    def ancestors(self, nodes: Iterable[str]) -> set[str]:
        """``nodes`` together with all their ancestors."""
        out: set[str] = set()
        stack = list(nodes)
        while stack:
            n = stack.pop()
            if n in out:
                continue
            out.add(n)
            stack.extend(self._parents[n])
        return out

    def with_edges(self, edges: Iterable[Edge]) -> Dag:
        return Dag(self._nodes, edges)

    def _check(self, node: str) -> None:
        if node not in self._index:
            raise UnknownNode(f"unknown node {node!r}")


def new_dag(nodes: Sequence[str], edges: Iterable[Edge] = ()) -> Dag:
    """Build and validate a DAG.

    Raises CycleDetected, UnknownEndpoint or DuplicateNode.
    """
    return Dag(nodes, [tuple(e) for e in edges])


def topological_order(dag: Dag) -> tuple[str, ...]:
    return dag._order


@dataclass(frozen=True)
class SeparationQuery:
    x: str
    y: str
    z: frozenset[str] = frozenset()

    def validate(self, dag: Dag) -> None:
        if self.x == self.y:
            raise InvalidQuery("x and y must differ")
        if self.x in self.z or self.y in self.z:
            raise InvalidQuery("conditioning set must exclude x and y")
        for node in (self.x, self.y, *self.z):
            if node not in dag:
                raise InvalidQuery(f"unknown node {node!r}")


def d_separated(dag: Dag, query: SeparationQuery) -> bool:
    """True iff ``query.z`` blocks every path between ``query.x`` and ``query.y``.

    Reachability ("Bayes ball") over (node, direction) states: a trail may
    pass a collider only if the collider has a descendant in z, i.e. the
    collider is in the ancestral closure of z.
    """
    query.validate(dag)
    z = query.z
    anc_z = dag.ancestors(z)
    parents, children = dag._parents, dag._children

    # direction True: arrived from a child (moving up); False: from a parent
    start = (query.x, True)
    visited = {start}
    queue = deque([start])
    while queue:
        node, up = queue.popleft()
        if node == query.y and node not in z:
            return False
        if up:
            if node in z:
                continue
            nxt = [(p, True) for p in parents[node]] + [(c, False) for c in children[node]]
        else:
            nxt = []
            if node not in z:
                nxt.extend((c, False) for c in children[node])
            if node in anc_z:
                nxt.extend((p, True) for p in parents[node])
        for state in nxt:
            if state not in visited:
                visited.add(state)
                queue.append(state)
    return True


def separator_for_pair(dag: Dag, x: str, y: str) -> frozenset[str]:
    """Parents of whichever of x, y comes later in topological order.

    By the local Markov property this set d-separates a non-adjacent pair.
    """
    if x == y:
        raise InvalidQuery("x and y must differ")
    if dag.adjacent(x, y):
        raise AdjacentPair(f"{x!r} and {y!r} are adjacent")
    later = x if dag.position(x) > dag.position(y) else y
    return frozenset(dag.parents(later))
