"""Network graph and the ``connect`` predicate guarding every send."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

NodeId = int

MAX_NODES = 16


class ConnectivityMode(Enum):
    LOCAL_ONLY = "local"
    GLOBAL_INJECT = "global"


class TopologyError(ValueError):
    pass


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Topology:
    """Fixed node set plus a (possibly asymmetric) boolean send relation.

    ``matrix[i][j]`` is true when ``i`` can transmit to ``j``. Honest
    topologies are symmetric; :func:`with_attacker_reach` may break that.
    ``malicious_links`` are the attacker's fabricated links; they never
    influence ``connect``.
    """

    node_count: int
    matrix: tuple[tuple[bool, ...], ...]
    malicious_links: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self) -> None:
        n = self.node_count
        if not 1 <= n <= MAX_NODES:
            raise TopologyError(f"node_count must be in 1..{MAX_NODES}, got {n}")
        if len(self.matrix) != n or any(len(row) != n for row in self.matrix):
            raise TopologyError("connect matrix must be node_count x node_count")
        for i in range(n):
            if self.matrix[i][i]:
                raise TopologyError(f"self-loop on node {i}")
        for a, b in self.malicious_links:
            if not (0 <= a < n and 0 <= b < n) or a == b:
                raise TopologyError(f"bad malicious link {a}-{b}")

    @classmethod
    def from_edges(
        cls,
        node_count: int,
        edges: Iterable[tuple[int, int]],
        malicious: Iterable[tuple[int, int]] = (),
    ) -> "Topology":
        rows = [[False] * node_count for _ in range(node_count)]
        for a, b in edges:
            if not (0 <= a < node_count and 0 <= b < node_count):
                raise TopologyError(f"edge {a}-{b} references unknown node")
            if a == b:
                raise TopologyError(f"self-loop on node {a}")
            rows[a][b] = rows[b][a] = True
        return cls(
            node_count,
            tuple(tuple(r) for r in rows),
            frozenset(_pair(a, b) for a, b in malicious),
        )

    @classmethod
    def full_mesh(cls, node_count: int) -> "Topology":
        edges = [(a, b) for a in range(node_count) for b in range(a + 1, node_count)]
        return cls.from_edges(node_count, edges)

    @property
    def nodes(self) -> range:
        return range(self.node_count)

    def connect(self, sender: NodeId, receiver: NodeId) -> bool:
        return self.matrix[sender][receiver]

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges where both directions are connected."""
        n = self.node_count
        return [
            (a, b)
            for a in range(n)
            for b in range(a + 1, n)
            if self.matrix[a][b] and self.matrix[b][a]
        ]

    def is_symmetric(self) -> bool:
        n = self.node_count
        return all(self.matrix[a][b] == self.matrix[b][a] for a in range(n) for b in range(n))


def neighbors(t: Topology, n: NodeId) -> frozenset[NodeId]:
    if not 0 <= n < t.node_count:
        raise TopologyError(f"node {n} not in topology of {t.node_count} nodes")
    return frozenset(m for m in t.nodes if t.matrix[n][m])


def with_attacker_reach(t: Topology, attacker: NodeId, mode: ConnectivityMode) -> Topology:
    """Extend ``connect`` so the attacker can reach every node (``GLOBAL_INJECT``).

    Only the attacker's outgoing row changes, so the result is generally
    asymmetric.
    """
    if not 0 <= attacker < t.node_count:
        raise TopologyError(f"attacker {attacker} not in topology of {t.node_count} nodes")
    if mode is ConnectivityMode.LOCAL_ONLY:
        return t
    rows = [list(r) for r in t.matrix]
    for m in t.nodes:
        if m != attacker:
            rows[attacker][m] = True
    return Topology(t.node_count, tuple(tuple(r) for r in rows), t.malicious_links)
