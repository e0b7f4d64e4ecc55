"""Link-state databases, the taint predicate, and hop-count routing over them."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

from .topology import NodeId

SEQ_MAX = 7


class InstallOutcome(Enum):
    NEWER = "newer"
    DUPLICATE = "duplicate"
    OLDER = "older"


@dataclass(frozen=True, slots=True)
class LsaEntry:
    origin: NodeId
    links: frozenset[NodeId]
    seq: int = 0
    malicious: bool = False

    def __post_init__(self) -> None:
        if self.origin in self.links:
            raise ValueError(f"LSA of node {self.origin} lists itself")
        if not 0 <= self.seq <= SEQ_MAX:
            raise ValueError(f"seq {self.seq} outside 0..{SEQ_MAX}")

    @property
    def header(self) -> tuple[NodeId, int]:
        return (self.origin, self.seq)


def entry(origin: NodeId, links: Iterable[NodeId], seq: int = 0, malicious: bool = False) -> LsaEntry:
    return LsaEntry(origin, frozenset(links), seq, malicious)


@dataclass(frozen=True, slots=True)
class Lsdb:
    """At most one entry per originator; ``entries[o]`` is None when nothing is known about ``o``."""

    entries: tuple[Optional[LsaEntry], ...]

    @classmethod
    def empty(cls, node_count: int) -> "Lsdb":
        return cls((None,) * node_count)

    @classmethod
    def of(cls, node_count: int, items: Iterable[LsaEntry]) -> "Lsdb":
        slots: list[Optional[LsaEntry]] = [None] * node_count
        for e in items:
            if slots[e.origin] is not None:
                raise ValueError(f"two entries for origin {e.origin}")
            slots[e.origin] = e
        return cls(tuple(slots))

    def get(self, origin: NodeId) -> Optional[LsaEntry]:
        return self.entries[origin]

    def __contains__(self, origin: NodeId) -> bool:
        return self.entries[origin] is not None

    def __iter__(self):
        return (e for e in self.entries if e is not None)

    def __len__(self) -> int:
        return sum(e is not None for e in self.entries)

    def origins(self) -> frozenset[NodeId]:
        return frozenset(e.origin for e in self)

    def headers(self) -> tuple[tuple[NodeId, int], ...]:
        return tuple(e.header for e in self)

    def put(self, e: LsaEntry) -> "Lsdb":
        """Overwrite unconditionally (self-origination path)."""
        slots = list(self.entries)
        slots[e.origin] = e
        return Lsdb(tuple(slots))

    def is_newer(self, e: LsaEntry) -> bool:
        cur = self.entries[e.origin]
        return cur is None or e.seq > cur.seq


def install(db: Lsdb, e: LsaEntry) -> tuple[Lsdb, InstallOutcome]:
    cur = db.entries[e.origin]
    if cur is None or e.seq > cur.seq:
        return db.put(e), InstallOutcome.NEWER
    if e.seq == cur.seq and e.links == cur.links:
        return db, InstallOutcome.DUPLICATE
    return db, InstallOutcome.OLDER


def lsdb_sync(a: Lsdb, b: Lsdb) -> bool:
    """Same originators, and per originator the same links and seq (taint ignored)."""
    if len(a.entries) != len(b.entries):
        return False
    for x, y in zip(a.entries, b.entries):
        if (x is None) != (y is None):
            return False
        if x is not None and (x.seq != y.seq or x.links != y.links):
            return False
    return True


def malicious_holds(db: Lsdb, targets: Iterable[NodeId]) -> bool:
    for dip in targets:
        e = db.entries[dip]
        if e is None or not e.malicious:
            return False
    return True


def advertised_graph(db: Lsdb) -> list[set[NodeId]]:
    """Adjacency sets where u-v is usable if either endpoint advertises it."""
    n = len(db.entries)
    adj: list[set[NodeId]] = [set() for _ in range(n)]
    for e in db:
        for v in e.links:
            if 0 <= v < n:
                adj[e.origin].add(v)
                adj[v].add(e.origin)
    return adj


def _hop_distances(adj: Sequence[set[NodeId]], root: NodeId) -> list[Optional[int]]:
    dist: list[Optional[int]] = [None] * len(adj)
    dist[root] = 0
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if dist[v] is None:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def shortest_route(db: Lsdb, src: NodeId, dst: NodeId) -> Optional[list[NodeId]]:
    """Lexicographically smallest minimum-hop path from ``src`` to ``dst``, or None."""
    if src == dst:
        raise ValueError("src and dst must differ")
    adj = advertised_graph(db)
    to_dst = _hop_distances(adj, dst)
    if to_dst[src] is None:
        return None
    path = [src]
    cur = src
    while cur != dst:
        want = to_dst[cur] - 1
        cur = min(v for v in adj[cur] if to_dst[v] == want)
        path.append(cur)
    return path


class RouteKind(Enum):
    DELIVERED = "delivered"
    DROPPED = "dropped"
    LOOP = "loop"


@dataclass(frozen=True)
class RouteOutcome:
    kind: RouteKind
    path: tuple[NodeId, ...]

    @property
    def hops(self) -> int:
        return len(self.path) - 1


def realized_path(
    dbs: Sequence[Lsdb],
    src: NodeId,
    dst: NodeId,
    hop_limit: int,
    blackhole: Optional[NodeId] = None,
) -> RouteOutcome:
    """Forward hop by hop, each router consulting only its own database.

    The blackhole node swallows anything it is asked to forward. The path in
    the outcome ends at the node where delivery stopped.
    """
    if hop_limit < 1:
        raise ValueError("hop_limit must be >= 1")
    path = [src]
    cur = src
    while cur != dst:
        if cur == blackhole:
            return RouteOutcome(RouteKind.DROPPED, tuple(path))
        route = shortest_route(dbs[cur], cur, dst)
        if route is None:
            return RouteOutcome(RouteKind.DROPPED, tuple(path))
        nxt = route[1]
        if nxt in path or len(path) > hop_limit:
            return RouteOutcome(RouteKind.LOOP, tuple(path + [nxt]))
        path.append(nxt)
        cur = nxt
    return RouteOutcome(RouteKind.DELIVERED, tuple(path))


def truthful_entry(e: Optional[LsaEntry], true_links: frozenset[NodeId]) -> bool:
    return e is not None and not e.malicious and e.links == true_links

