"""Two-node adjacency building: Down through Full, DBD exchange, LSR/LSU/LSAck.

Every receive handler is a pure function ``(node, message) -> (node', replies)``.
Replies are queued on the receiver's outbox by :func:`process`; they are
delivered later by a separate rendezvous action, so an attacker can
interleave between any two honest packets.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .adversary import AttackerRuntime, activate_on, adjacency_injections
from .lsdb import Lsdb, install, InstallOutcome, lsdb_sync
from .protocol import (
    DD_SEQ_MAX,
    INIT_DD_SEQ,
    Action,
    AdjMessage,
    MessageKind,
    NeighbourState,
    accepted_dd_seqs,
)
from .topology import NodeId, Topology

Down = NeighbourState.DOWN
Init = NeighbourState.INIT
ExStart = NeighbourState.EXSTART
Exchange = NeighbourState.EXCHANGE
Loading = NeighbourState.LOADING
Full = NeighbourState.FULL

Replies = tuple[AdjMessage, ...]

# Honest exchanges never queue more than two packets per node; the cap only
# bites when injected requests pile up replies, and keeps the state space finite.
OUTBOX_MAX = 3


@dataclass(frozen=True, slots=True)
class AdjNodeState:
    me: NodeId
    peer: NodeId
    db: Lsdb
    nstate: NeighbourState = Down
    is_master: bool = False
    dd_seq: int = INIT_DD_SEQ
    request_list: frozenset[NodeId] = frozenset()
    headers_to_send: tuple[tuple[NodeId, int], ...] = ()
    last_sent_more: bool = False
    pending_acks: frozenset[tuple[NodeId, int]] = frozenset()
    outbox: tuple[AdjMessage, ...] = ()
    inbox: Optional[AdjMessage] = None

    @property
    def committed(self) -> bool:
        # a received packet is being dispatched; nothing else may interleave
        return self.inbox is not None


def initial_node(me: NodeId, peer: NodeId, db: Lsdb) -> AdjNodeState:
    return AdjNodeState(me=me, peer=peer, db=db)


def full_node(me: NodeId, peer: NodeId, db: Lsdb, dd_seq: int = INIT_DD_SEQ + 1) -> AdjNodeState:
    """A node that finished adjacency building with ``peer`` over database ``db``."""
    return AdjNodeState(me=me, peer=peer, db=db, nstate=Full, is_master=me > peer, dd_seq=dd_seq)


def _init_dbd(n: AdjNodeState) -> AdjMessage:
    return AdjMessage.dbd(n.me, n.dd_seq, master=True, init=True, more=True)


def enter_exstart(n: AdjNodeState) -> tuple[AdjNodeState, Replies]:
    """(Re)start negotiation: fresh bookkeeping and an init DBD claiming mastership."""
    n = replace(
        n,
        nstate=ExStart,
        is_master=n.me > n.peer,
        dd_seq=INIT_DD_SEQ,
        request_list=frozenset(),
        headers_to_send=n.db.headers(),
        last_sent_more=True,
        pending_acks=frozenset(),
        outbox=(),
    )
    return n, (_init_dbd(n),)


def revert_to_init(n: AdjNodeState) -> AdjNodeState:
    return replace(
        n,
        nstate=Init,
        is_master=False,
        dd_seq=INIT_DD_SEQ,
        request_list=frozenset(),
        headers_to_send=(),
        last_sent_more=False,
        pending_acks=frozenset(),
        outbox=(),
    )


def honest_hello(n: AdjNodeState) -> AdjMessage:
    claims = (n.peer,) if n.nstate >= Init else ()
    return AdjMessage.hello(n.me, claims)


def recv_hello(n: AdjNodeState, m: AdjMessage) -> tuple[AdjNodeState, Replies]:
    if m.sender != n.peer:
        return n, ()
    listed = n.me in m.claimed_neighbors
    if n.nstate == Down:
        n = replace(n, nstate=Init)
    if n.nstate == Init:
        return enter_exstart(n) if listed else (n, ())
    if not listed:
        # peer no longer reports us: two-way contact lost
        return revert_to_init(n), ()
    return n, ()


def _note_headers(n: AdjNodeState, headers) -> AdjNodeState:
    wanted = set(n.request_list)
    for origin, seq in headers:
        cur = n.db.get(origin)
        if cur is None or cur.seq < seq:
            wanted.add(origin)
    if wanted == n.request_list:
        return n
    return replace(n, request_list=frozenset(wanted))


def _pop_header(n: AdjNodeState) -> tuple[AdjNodeState, tuple, bool]:
    hdrs = n.headers_to_send
    head, rest = hdrs[:1], hdrs[1:]
    return replace(n, headers_to_send=rest), head, bool(rest)


def finish_exchange(n: AdjNodeState) -> tuple[AdjNodeState, Replies]:
    if n.request_list:
        n = replace(n, nstate=Loading)
        return n, (AdjMessage.lsr(n.me, sorted(n.request_list)),)
    return replace(n, nstate=Full), ()


def _slave_step(n: AdjNodeState, m: AdjMessage) -> tuple[AdjNodeState, Replies]:
    n = _note_headers(replace(n, dd_seq=m.dd_seq), m.headers)
    n, head, more = _pop_header(n)
    reply = AdjMessage.dbd(n.me, n.dd_seq, master=False, more=more, headers=head)
    if not m.more and not more:
        n, tail = finish_exchange(n)
        return n, (reply,) + tail
    return n, (reply,)


def _master_step(n: AdjNodeState, m: AdjMessage) -> tuple[AdjNodeState, Replies]:
    n = _note_headers(n, m.headers)
    if not n.last_sent_more and not m.more:
        return finish_exchange(n)
    n = replace(n, dd_seq=min(n.dd_seq + 1, DD_SEQ_MAX))
    n, head, more = _pop_header(n)
    n = replace(n, last_sent_more=more)
    return n, (AdjMessage.dbd(n.me, n.dd_seq, master=True, more=more, headers=head),)


def recv_dbd(n: AdjNodeState, m: AdjMessage) -> tuple[AdjNodeState, Replies]:
    if m.sender != n.peer or n.nstate <= Init:
        return n, ()
    peer_is_master = n.peer > n.me

    if n.nstate == ExStart:
        if m.init_flag and m.master_flag and not m.headers:
            if peer_is_master:
                n = replace(n, nstate=Exchange, outbox=tuple(
                    p for p in n.outbox if not (p.kind is MessageKind.DBD and p.init_flag)))
                return _slave_step(n, m)
            # slave still claims mastership; answer with our own init unless one is queued
            if any(p.kind is MessageKind.DBD and p.init_flag for p in n.outbox):
                return n, ()
            return n, (_init_dbd(n),)
        if n.is_master and not m.init_flag and not m.master_flag and m.dd_seq == n.dd_seq:
            return _master_step(replace(n, nstate=Exchange), m)
        return n, ()

    anomalous = (
        m.init_flag
        or m.master_flag != peer_is_master
        or m.dd_seq not in accepted_dd_seqs(n.nstate, n.is_master, n.dd_seq)
    )
    if anomalous:
        return enter_exstart(n)
    if n.nstate != Exchange:
        return n, ()  # duplicate of the last exchanged DBD
    if n.is_master:
        return _master_step(n, m)
    if m.dd_seq == n.dd_seq:
        return n, ()
    return _slave_step(n, m)


def recv_lsr(n: AdjNodeState, m: AdjMessage) -> tuple[AdjNodeState, Replies]:
    if m.sender != n.peer or n.nstate <= ExStart:
        return n, ()
    if all(o in n.db for o in m.requests):
        payload = tuple(n.db.get(o) for o in m.requests)
        n = replace(n, pending_acks=n.pending_acks | {e.header for e in payload})
        return n, (AdjMessage.lsu(n.me, payload),)
    return enter_exstart(n)


def can_accept_lsu(n: AdjNodeState) -> bool:
    return n.nstate in (Exchange, Loading, Full)


def recv_lsu(n: AdjNodeState, m: AdjMessage) -> tuple[AdjNodeState, Replies]:
    if m.sender != n.peer or not can_accept_lsu(n):
        return n, ()
    db = n.db
    requests = set(n.request_list)
    acks = []
    for e in m.payload:
        db, outcome = install(db, e)
        if outcome is InstallOutcome.NEWER:
            requests.discard(e.origin)
            acks.append(e.header)
        elif outcome is InstallOutcome.OLDER and db.get(e.origin).seq > e.seq:
            acks.append(db.get(e.origin).header)
        # equal seq: duplicate or conflicting copy, dropped silently
    n = replace(n, db=db, request_list=frozenset(requests))
    if n.nstate == Loading and not n.request_list:
        n = replace(n, nstate=Full)
    return n, ((AdjMessage.lsack(n.me, acks),) if acks else ())


def recv_lsack(n: AdjNodeState, m: AdjMessage) -> AdjNodeState:
    if m.sender != n.peer or n.nstate < Exchange:
        return n
    left = n.pending_acks - set(m.acked)
    return n if left == n.pending_acks else replace(n, pending_acks=left)


def receive(n: AdjNodeState, m: AdjMessage) -> tuple[AdjNodeState, Replies]:
    k = m.kind
    if k is MessageKind.HELLO:
        return recv_hello(n, m)
    if k is MessageKind.DBD:
        return recv_dbd(n, m)
    if k is MessageKind.LSR:
        return recv_lsr(n, m)
    if k is MessageKind.LSU:
        return recv_lsu(n, m)
    return recv_lsack(n, m), ()


def process(n: AdjNodeState) -> AdjNodeState:
    """Dispatch the packet held in the committed inbox and queue any replies."""
    msg = n.inbox
    n, replies = receive(replace(n, inbox=None), msg)
    if not replies:
        return n
    return replace(n, outbox=(n.outbox + replies)[:OUTBOX_MAX])


def deliver(n: AdjNodeState, m: AdjMessage) -> AdjNodeState:
    return replace(n, inbox=m)


def both_full(a: AdjNodeState, b: AdjNodeState) -> bool:
    return a.nstate == Full and b.nstate == Full


@dataclass(frozen=True, slots=True)
class AdjState:
    nodes: tuple[AdjNodeState, AdjNodeState]
    attacker: Optional[AttackerRuntime] = None

    def node(self, node_id: NodeId) -> AdjNodeState:
        for n in self.nodes:
            if n.me == node_id:
                return n
        raise KeyError(node_id)

    def db_of(self, node_id: NodeId) -> Lsdb:
        return self.node(node_id).db

    def nstate_of(self, node_id: NodeId) -> NeighbourState:
        return self.node(node_id).nstate


def adjacency_steady(s: AdjState) -> bool:
    a, b = s.nodes
    return both_full(a, b) and lsdb_sync(a.db, b.db)


def adj_enabled_actions(a: AdjNodeState, b: AdjNodeState) -> list[Action]:
    """Honest actions of the pair, ignoring any attacker."""
    return [act for act, _ in _honest_successors(a, b)]


def _honest_successors(a: AdjNodeState, b: AdjNodeState) -> list[tuple[Action, tuple]]:
    pair = (a, b)
    committed = [i for i, n in enumerate(pair) if n.committed]
    if committed:
        out = []
        for i in committed:
            n = pair[i]
            nodes = list(pair)
            nodes[i] = process(n)
            out.append((Action("Process", (n.me, n.inbox.label())), tuple(nodes)))
        return out
    out = []
    mutual_full = both_full(a, b)
    for i, n in enumerate(pair):
        j = 1 - i
        peer = pair[j]
        if n.outbox:
            msg = n.outbox[0]
            nodes = [None, None]
            nodes[i] = replace(n, outbox=n.outbox[1:])
            nodes[j] = deliver(peer, msg)
            out.append((Action("Send", (f"{n.me}->{peer.me}", msg.label())), tuple(nodes)))
    for i, n in enumerate(pair):
        j = 1 - i
        peer = pair[j]
        hello = honest_hello(n)
        # a Hello that changes nothing is only sent as a keepalive between Full peers
        if mutual_full or process(deliver(peer, hello)) != peer:
            nodes = [None, None]
            nodes[i] = n
            nodes[j] = deliver(peer, hello)
            out.append((Action("Hello", (f"{n.me}->{peer.me}",)), tuple(nodes)))
    return out


class AdjacencyModel:
    """Transition system for two adjacency FSMs plus an optional attacker."""

    kind = "adjacency"

    def __init__(
        self,
        topology: Topology,
        initial_nodes: tuple[AdjNodeState, AdjNodeState],
        attacker: Optional[AttackerRuntime] = None,
    ) -> None:
        self.topology = topology
        self._initial = AdjState(tuple(initial_nodes), attacker)
        if attacker is not None:
            self._initial = replace(
                self._initial, attacker=activate_on(attacker, adjacency_steady(self._initial)))

    def initial(self) -> AdjState:
        return self._initial

    def with_initial(self, state: AdjState) -> "AdjacencyModel":
        clone = object.__new__(AdjacencyModel)
        clone.topology = self.topology
        clone._initial = state
        return clone

    def _settle(self, s: AdjState) -> AdjState:
        rt = s.attacker
        if rt is None or rt.active:
            return s
        rt2 = activate_on(rt, adjacency_steady(s))
        return s if rt2 is rt else replace(s, attacker=rt2)

    def successors(self, s: AdjState) -> list[tuple[Action, AdjState]]:
        a, b = s.nodes
        out = [
            (act, self._settle(AdjState(nodes, s.attacker)))
            for act, nodes in _honest_successors(a, b)
        ]
        if a.committed or b.committed or s.attacker is None:
            return out
        rt = s.attacker
        for inj in adjacency_injections(rt, s.nodes, self.topology):
            idx = 0 if s.nodes[0].me == inj.recipient else 1
            target = s.nodes[idx]
            hit = deliver(target, inj.message)
            if process(hit) == target:
                continue  # stutter: the packet would be ignored
            nodes = list(s.nodes)
            nodes[idx] = hit
            act = Action("Inject", (inj.recipient, inj.message.label()), inj)
            out.append((act, self._settle(AdjState(tuple(nodes), rt.spend()))))
        return out
