"""Whole-network model: shared per-node arrays, direct LSDB transfer, bounded tick.

There are no message queues. A flooding step copies every strictly newer
entry from one node's database into a neighbour's, and Hello discovery
updates the ``heard``/``two_way`` arrays in place of Hello packets.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .adversary import AttackerRuntime, Injection, activate_on, net_injections
from .lsdb import SEQ_MAX, LsaEntry, Lsdb, install, lsdb_sync, truthful_entry
from .protocol import Action, MessageKind
from .topology import NodeId, Topology, neighbors

HELLO_INTERVAL = 1
TICK_MAX = HELLO_INTERVAL


@dataclass(frozen=True, slots=True)
class NetState:
    dbs: tuple[Lsdb, ...]
    heard: tuple[frozenset[NodeId], ...]
    two_way: tuple[frozenset[NodeId], ...]
    now: int
    next_hello: tuple[int, ...]
    attacker: Optional[AttackerRuntime] = None

    @property
    def node_count(self) -> int:
        return len(self.dbs)


def initial_net_state(
    node_count: int,
    dbs: Optional[Sequence[Lsdb]] = None,
    attacker: Optional[AttackerRuntime] = None,
) -> NetState:
    if dbs is None:
        dbs = [Lsdb.empty(node_count)] * node_count
    if len(dbs) != node_count:
        raise ValueError("need exactly one database per node")
    first = HELLO_INTERVAL % (TICK_MAX + 1)
    empty = (frozenset(),) * node_count
    return NetState(tuple(dbs), empty, empty, 0, (first,) * node_count, attacker)


def _set(seq: tuple, i: int, value) -> tuple:
    return seq[:i] + (value,) + seq[i + 1:]


def frozen_node(s: NetState) -> Optional[NodeId]:
    """The attacker's node once it has taken over; its database no longer changes."""
    rt = s.attacker
    if rt is not None and rt.active:
        return rt.config.node
    return None


def apply_hello(s: NetState, t: Topology, sender: NodeId) -> NetState:
    heard = list(s.heard)
    two_way = list(s.two_way)
    for m in t.nodes:
        if m == sender or not t.connect(sender, m):
            continue
        heard[m] = heard[m] | {sender}
        if m in s.heard[sender]:
            two_way[m] = two_way[m] | {sender}
    nxt = (s.next_hello[sender] + HELLO_INTERVAL) % (TICK_MAX + 1)
    return replace(
        s, heard=tuple(heard), two_way=tuple(two_way), next_hello=_set(s.next_hello, sender, nxt))


def _hello_effective(s: NetState, t: Topology, sender: NodeId) -> bool:
    for m in t.nodes:
        if m == sender or not t.connect(sender, m):
            continue
        if sender not in s.heard[m]:
            return True
        if m in s.heard[sender] and sender not in s.two_way[m]:
            return True
    return False


def _newer_entries(src: Lsdb, dst: Lsdb) -> list[LsaEntry]:
    return [e for e in src if dst.is_newer(e)]


def apply_lsa_transfer(s: NetState, src: NodeId, dst: NodeId) -> NetState:
    db = s.dbs[dst]
    for e in _newer_entries(s.dbs[src], db):
        db, _ = install(db, e)
    return replace(s, dbs=_set(s.dbs, dst, db))


def _needs_origination(s: NetState, n: NodeId) -> bool:
    own = s.dbs[n].get(n)
    if own is None:
        return True
    # a tainted copy of our own entry is answered with a fresh truthful one
    return own.links != s.two_way[n] or own.malicious


def originate_own_lsa(s: NetState, n: NodeId) -> NetState:
    own = s.dbs[n].get(n)
    seq = 0 if own is None else min(own.seq + 1, SEQ_MAX)
    fresh = LsaEntry(n, s.two_way[n], seq, False)
    return replace(s, dbs=_set(s.dbs, n, s.dbs[n].put(fresh)))


def apply_injection(s: NetState, inj: Injection) -> NetState:
    """Effect of an attacker packet, routed through the honest receive logic."""
    m = inj.recipient
    msg = inj.message
    if msg.kind is MessageKind.LSU:
        db = s.dbs[m]
        for e in msg.payload:
            db, _ = install(db, e)
        return replace(s, dbs=_set(s.dbs, m, db))
    if msg.kind is MessageKind.HELLO:
        heard = _set(s.heard, m, s.heard[m] | {msg.sender})
        two_way = s.two_way
        if m in msg.claimed_neighbors:
            two_way = _set(two_way, m, two_way[m] | {msg.sender})
        return replace(s, heard=heard, two_way=two_way)
    return s


def real_neighbors(t: Topology) -> list[frozenset[NodeId]]:
    return [neighbors(t, n) for n in t.nodes]


def net_steady(s: NetState, t: Topology, nodes: Optional[Sequence[NodeId]] = None) -> bool:
    """All listed nodes see their real neighbours two-way, agree on the LSDB, and advertise it."""
    nodes = list(t.nodes) if nodes is None else list(nodes)
    real = real_neighbors(t)
    for n in nodes:
        if s.two_way[n] != real[n]:
            return False
        own = s.dbs[n].get(n)
        if own is None or own.links != s.two_way[n]:
            return False
    first = s.dbs[nodes[0]] if nodes else None
    return all(lsdb_sync(first, s.dbs[n]) for n in nodes[1:])


def honest_nodes(t: Topology, attacker: Optional[NodeId]) -> list[NodeId]:
    return [n for n in t.nodes if n != attacker]


def all_truthful(s: NetState, t: Topology, attacker: Optional[NodeId] = None) -> bool:
    """Every honest node holds an untainted, accurate entry for every honest origin."""
    real = real_neighbors(t)
    honest = honest_nodes(t, attacker)
    return all(truthful_entry(s.dbs[obs].get(o), real[o]) for obs in honest for o in honest)


def any_tainted(s: NetState) -> bool:
    return any(e.malicious for db in s.dbs for e in db)


class NetModel:
    """Transition system over :class:`NetState`.

    Scheduling: self-origination is urgent and pre-empts everything else
    (unless ``urgent_origination`` is off, in which case it merely interleaves).
    Otherwise Hellos that are due, LSA transfers and attacker injections
    interleave freely, and time advances only once no Hello is due and no
    transfer or origination is pending.
    """

    kind = "net"

    def __init__(
        self,
        topology: Topology,
        attacker: Optional[AttackerRuntime] = None,
        initial_dbs: Optional[Sequence[Lsdb]] = None,
        suppress_saturated_hellos: bool = True,
        urgent_origination: bool = True,
    ) -> None:
        self.topology = topology
        self.suppress_saturated_hellos = suppress_saturated_hellos
        self.urgent_origination = urgent_origination
        init = initial_net_state(topology.node_count, initial_dbs, attacker)
        self._initial = self._settle(init)

    def initial(self) -> NetState:
        return self._initial

    def with_initial(self, state: NetState) -> "NetModel":
        clone = object.__new__(NetModel)
        clone.topology = self.topology
        clone.suppress_saturated_hellos = self.suppress_saturated_hellos
        clone.urgent_origination = self.urgent_origination
        clone._initial = state
        return clone

    def _settle(self, s: NetState) -> NetState:
        rt = s.attacker
        if rt is None or rt.active or rt.exhausted:
            return s
        rt2 = activate_on(rt, net_steady(s, self.topology))
        return s if rt2 is rt else replace(s, attacker=rt2)

    def _hello_due(self, s: NetState, n: NodeId) -> bool:
        if s.next_hello[n] != s.now:
            return False
        return not self.suppress_saturated_hellos or _hello_effective(s, self.topology, n)

    def _transfers(self, s: NetState) -> list[tuple[NodeId, NodeId]]:
        t = self.topology
        frozen = frozen_node(s)
        out = []
        for src in t.nodes:
            if src == frozen:
                continue
            for dst in sorted(s.two_way[src]):
                if dst == frozen or not t.connect(src, dst):
                    continue
                if _newer_entries(s.dbs[src], s.dbs[dst]):
                    out.append((src, dst))
        return out

    def _tick(self, s: NetState) -> NetState:
        now = (s.now + 1) % (TICK_MAX + 1)
        nxt = list(s.next_hello)
        for n in self.topology.nodes:
            # a suppressed Hello still consumes its slot
            if nxt[n] == s.now:
                nxt[n] = (nxt[n] + HELLO_INTERVAL) % (TICK_MAX + 1)
        return replace(s, now=now, next_hello=tuple(nxt))

    def enabled(self, s: NetState) -> list[tuple[Action, NetState]]:
        t = self.topology
        frozen = frozen_node(s)
        pending = [n for n in t.nodes if n != frozen and _needs_origination(s, n)]
        out: list[tuple[Action, NetState]] = [
            (Action("Originate", (n,)), originate_own_lsa(s, n)) for n in pending]
        if pending and self.urgent_origination:
            return out
        due = [n for n in t.nodes if self._hello_due(s, n)]
        for n in due:
            out.append((Action("HelloBroadcast", (n,)), apply_hello(s, t, n)))
        transfers = self._transfers(s)
        for src, dst in transfers:
            out.append((Action("LsaTransfer", (src, dst)), apply_lsa_transfer(s, src, dst)))
        if s.attacker is not None:
            for inj in net_injections(s.attacker, s.dbs, t):
                nxt = apply_injection(s, inj)
                if nxt == s:
                    continue
                act = Action("Inject", (inj.recipient, inj.message.label()), inj)
                out.append((act, replace(nxt, attacker=s.attacker.spend())))
        if not due and not transfers and not pending:
            out.append((Action("TickAdvance"), self._tick(s)))
        return out

    def successors(self, s: NetState) -> list[tuple[Action, NetState]]:
        return [(a, self._settle(n)) for a, n in self.enabled(s)]


def enabled_net_actions(s: NetState, t: Topology, **options) -> list[Action]:
    """Enabled actions of ``s``; ``options`` are :class:`NetModel` toggles."""
    model = NetModel(t, **options).with_initial(s)
    return [a for a, _ in model.enabled(s)]
