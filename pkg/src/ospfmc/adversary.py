"""Attacker capability bundles and the injections they make possible.

The attacker never touches honest state itself. It only offers packets;
the protocol model decides what receiving them does.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import combinations
from typing import Iterable, Iterator, Optional, Sequence

from .lsdb import SEQ_MAX, LsaEntry, Lsdb
from .protocol import (
    ALL_KINDS,
    DD_SEQ_MAX,
    AdjMessage,
    MessageKind,
    accepted_dd_seqs,
)
from .topology import ConnectivityMode, NodeId, Topology, with_attacker_reach


class StartTime(Enum):
    AT_INIT = "init"
    AT_STEADY_STATE = "steady"


class ContentFreedom(Enum):
    FAKE_TOPOLOGY_ONLY = "fake"
    ARBITRARY = "arbitrary"


# Single-vector restrictions used by the adjacency teardown experiments.
VECTORS = {
    "hello_no_peer": MessageKind.HELLO,
    "lsr_absent": MessageKind.LSR,
    "dbd_bad_seq": MessageKind.DBD,
    "dbd_bad_master": MessageKind.DBD,
    "dbd_init": MessageKind.DBD,
}


@dataclass(frozen=True)
class AttackerConfig:
    node: NodeId
    connectivity: ConnectivityMode = ConnectivityMode.LOCAL_ONLY
    start: StartTime = StartTime.AT_INIT
    alphabet: frozenset[MessageKind] = frozenset()
    spoofing: bool = False
    content: ContentFreedom = ContentFreedom.FAKE_TOPOLOGY_ONLY
    budget: Optional[int] = None
    vectors: Optional[frozenset[str]] = None

    def __post_init__(self) -> None:
        if not self.alphabet <= ALL_KINDS:
            raise ValueError(f"unknown message kinds in {self.alphabet}")
        if self.budget is not None and self.budget < 0:
            raise ValueError("budget must be non-negative")
        if self.vectors is not None:
            unknown = set(self.vectors) - set(VECTORS)
            if unknown:
                raise ValueError(f"unknown attack vectors {sorted(unknown)}")
            needed = {VECTORS[v] for v in self.vectors}
            if not needed <= self.alphabet:
                raise ValueError("vector requires a message kind outside the alphabet")

    @classmethod
    def all_mighty(cls, node: NodeId, **kw) -> "AttackerConfig":
        preset = dict(alphabet=ALL_KINDS, spoofing=True, content=ContentFreedom.ARBITRARY, budget=None)
        preset.update(kw)
        return cls(node=node, **preset)


@dataclass(frozen=True, slots=True)
class AttackerRuntime:
    """Attacker part of the composite state. ``config`` and ``fake_db`` are static."""

    config: AttackerConfig = field(compare=False)
    fake_db: Lsdb = field(compare=False)
    active: bool = False
    injections_used: int = 0
    exhausted: bool = False

    @property
    def can_inject(self) -> bool:
        if not self.active or self.exhausted:
            return False
        budget = self.config.budget
        return budget is None or self.injections_used < budget

    def spend(self) -> "AttackerRuntime":
        if self.config.budget is None:
            return self
        return replace(self, injections_used=self.injections_used + 1)

    def exhaust(self) -> "AttackerRuntime":
        return replace(self, exhausted=True)


@dataclass(frozen=True)
class Injection:
    recipient: NodeId
    message: AdjMessage

    def label(self) -> str:
        return f"Inject(to={self.recipient},{self.message.label()})"


def new_runtime(config: AttackerConfig, fake_db: Lsdb) -> AttackerRuntime:
    return AttackerRuntime(config, fake_db, active=config.start is StartTime.AT_INIT)


def activate_on(rt: AttackerRuntime, steady: bool) -> AttackerRuntime:
    """Latch activation once the start condition holds.

    ``steady`` says whether the protocol state is converged; it only matters
    for attackers that wait for steady state.
    """
    if rt.active or rt.exhausted:
        return rt
    if rt.config.start is StartTime.AT_INIT or steady:
        return replace(rt, active=True)
    return rt


def _subsets(items: Sequence[int]) -> Iterator[frozenset[int]]:
    for k in range(len(items) + 1):
        for combo in combinations(items, k):
            yield frozenset(combo)


def _recipients(rt: AttackerRuntime, topology: Topology, candidates: Iterable[NodeId]) -> list[NodeId]:
    reach = with_attacker_reach(topology, rt.config.node, rt.config.connectivity)
    a = rt.config.node
    return [m for m in candidates if m != a and reach.connect(a, m)]


def _stamped(entry: LsaEntry, db: Lsdb) -> Optional[LsaEntry]:
    """The fake entry with a sequence number just above the recipient's copy."""
    cur = db.get(entry.origin)
    if cur is not None and cur.seq >= SEQ_MAX:
        return None
    seq = 0 if cur is None else cur.seq + 1
    return LsaEntry(entry.origin, entry.links, seq, True)


def _lsu_entries(rt: AttackerRuntime, db: Lsdb, node_count: int) -> Iterator[LsaEntry]:
    if rt.config.content is ContentFreedom.FAKE_TOPOLOGY_ONLY:
        for fake in rt.fake_db:
            e = _stamped(fake, db)
            if e is not None:
                yield e
        return
    ids = list(range(node_count))
    for origin in ids:
        others = [i for i in ids if i != origin]
        for links in _subsets(others):
            for seq in range(SEQ_MAX + 1):
                yield LsaEntry(origin, links, seq, True)


def net_injections(rt: AttackerRuntime, dbs: Sequence[Lsdb], topology: Topology) -> list[Injection]:
    """Raw injections against the whole-network model (LSU and Hello only)."""
    if not rt.can_inject:
        return []
    cfg = rt.config
    n = topology.node_count
    out: list[Injection] = []
    for m in _recipients(rt, topology, range(n)):
        if MessageKind.LSU in cfg.alphabet:
            for e in _lsu_entries(rt, dbs[m], n):
                out.append(Injection(m, AdjMessage.lsu(cfg.node, (e,))))
        if MessageKind.HELLO in cfg.alphabet:
            senders = [s for s in range(n) if s != cfg.node] if cfg.spoofing else [cfg.node]
            for s in senders:
                for claims in _subsets([i for i in range(n) if i != s]):
                    out.append(Injection(m, AdjMessage.hello(s, claims)))
    return out


def _dbd_candidates(vectors, peer_is_master: bool, accepted: frozenset[int]) -> Iterator[tuple]:
    if vectors is None:
        for seq in range(DD_SEQ_MAX + 1):
            for ms in (False, True):
                for init in (False, True):
                    for more in (False, True):
                        yield seq, ms, init, more
        return
    if "dbd_bad_seq" in vectors:
        for seq in range(DD_SEQ_MAX + 1):
            if seq not in accepted:
                yield seq, peer_is_master, False, False
    if "dbd_bad_master" in vectors:
        for seq in sorted(accepted):
            yield seq, not peer_is_master, False, False
    if "dbd_init" in vectors:
        yield 0, True, True, True


def adjacency_injections(rt: AttackerRuntime, pair: Sequence, topology: Topology) -> list[Injection]:
    """Raw injections against a two-node adjacency.

    ``pair`` holds the two node states (anything with ``me``, ``peer``,
    ``nstate``, ``is_master``, ``dd_seq`` and ``db``).
    """
    if not rt.can_inject:
        return []
    cfg = rt.config
    vectors = cfg.vectors
    by_id = {p.me: p for p in pair}
    pair_ids = sorted(by_id)
    out: list[Injection] = []
    for r_id in _recipients(rt, topology, pair_ids):
        r = by_id[r_id]
        senders = pair_ids if cfg.spoofing else [cfg.node]
        if vectors is not None:
            # vectors model impersonation of the recipient's peer
            senders = [r.peer] if cfg.spoofing else []
        for s in senders:
            kinds = cfg.alphabet
            if MessageKind.HELLO in kinds and (vectors is None or "hello_no_peer" in vectors):
                for claims in _subsets([i for i in pair_ids if i != s]):
                    if vectors is not None and r.me in claims:
                        continue
                    out.append(Injection(r_id, AdjMessage.hello(s, claims)))
            if MessageKind.DBD in kinds:
                dbd_vectors = None if vectors is None else vectors & {
                    "dbd_bad_seq", "dbd_bad_master", "dbd_init"}
                if dbd_vectors is None or dbd_vectors:
                    accepted = accepted_dd_seqs(r.nstate, r.is_master, r.dd_seq)
                    for seq, ms, init, more in _dbd_candidates(dbd_vectors, s > r.me, accepted):
                        out.append(Injection(r_id, AdjMessage.dbd(s, seq, ms, init, more)))
            if MessageKind.LSR in kinds and (vectors is None or "lsr_absent" in vectors):
                for origin in range(topology.node_count):
                    if vectors is not None and origin in r.db:
                        continue
                    out.append(Injection(r_id, AdjMessage.lsr(s, (origin,))))
            if vectors is not None:
                continue
            if MessageKind.LSU in kinds:
                for e in _lsu_entries(rt, r.db, topology.node_count):
                    out.append(Injection(r_id, AdjMessage.lsu(s, (e,))))
            if MessageKind.LSACK in kinds:
                for origin in range(topology.node_count):
                    for seq in range(SEQ_MAX + 1):
                        out.append(Injection(r_id, AdjMessage.lsack(s, ((origin, seq),))))
    return out


def attacker_enabled(rt: Optional[AttackerRuntime], state, topology: Topology) -> list[Injection]:
    """Injections the attacker may perform in ``state`` (a NetState or AdjState)."""
    if rt is None:
        return []
    if hasattr(state, "dbs"):
        return net_injections(rt, state.dbs, topology)
    return adjacency_injections(rt, state.nodes, topology)
