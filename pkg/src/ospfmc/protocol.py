"""Message vocabulary shared by the adjacency FSM and the attacker models."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum

from .lsdb import LsaEntry
from .topology import NodeId

DD_SEQ_MAX = 15
INIT_DD_SEQ = 0


class MessageKind(Enum):
    HELLO = "hello"
    DBD = "dbd"
    LSR = "lsr"
    LSU = "lsu"
    LSACK = "lsack"


ALL_KINDS = frozenset(MessageKind)


class NeighbourState(IntEnum):
    DOWN = 0
    INIT = 1
    EXSTART = 2
    EXCHANGE = 3
    LOADING = 4
    FULL = 5


@dataclass(frozen=True, slots=True)
class AdjMessage:
    """One OSPF packet. Only the fields of ``kind`` carry meaning; the rest stay at defaults."""

    kind: MessageKind
    sender: NodeId
    claimed_neighbors: frozenset[NodeId] = frozenset()
    dd_seq: int = 0
    master_flag: bool = False
    init_flag: bool = False
    more: bool = False
    headers: tuple[tuple[NodeId, int], ...] = ()
    requests: tuple[NodeId, ...] = ()
    payload: tuple[LsaEntry, ...] = ()
    acked: tuple[tuple[NodeId, int], ...] = ()

    def __post_init__(self) -> None:
        k = self.kind
        if k is not MessageKind.HELLO and self.claimed_neighbors:
            raise ValueError("claimed_neighbors only valid on Hello")
        if k is not MessageKind.DBD and (
            self.dd_seq or self.master_flag or self.init_flag or self.more or self.headers
        ):
            raise ValueError("DBD fields set on non-DBD message")
        if not 0 <= self.dd_seq <= DD_SEQ_MAX:
            raise ValueError(f"dd_seq {self.dd_seq} outside 0..{DD_SEQ_MAX}")
        if k is not MessageKind.LSR and self.requests:
            raise ValueError("requests only valid on LSR")
        if k is not MessageKind.LSU and self.payload:
            raise ValueError("payload only valid on LSU")
        if k is not MessageKind.LSACK and self.acked:
            raise ValueError("acked only valid on LSAck")

    @classmethod
    def hello(cls, sender: NodeId, claimed=()) -> "AdjMessage":
        return cls(MessageKind.HELLO, sender, claimed_neighbors=frozenset(claimed))

    @classmethod
    def dbd(
        cls,
        sender: NodeId,
        dd_seq: int,
        master: bool,
        init: bool = False,
        more: bool = False,
        headers=(),
    ) -> "AdjMessage":
        return cls(
            MessageKind.DBD,
            sender,
            dd_seq=dd_seq,
            master_flag=master,
            init_flag=init,
            more=more,
            headers=tuple(headers),
        )

    @classmethod
    def lsr(cls, sender: NodeId, requests) -> "AdjMessage":
        return cls(MessageKind.LSR, sender, requests=tuple(requests))

    @classmethod
    def lsu(cls, sender: NodeId, payload) -> "AdjMessage":
        return cls(MessageKind.LSU, sender, payload=tuple(payload))

    @classmethod
    def lsack(cls, sender: NodeId, acked) -> "AdjMessage":
        return cls(MessageKind.LSACK, sender, acked=tuple(acked))

    def label(self) -> str:
        k = self.kind
        if k is MessageKind.HELLO:
            claims = ",".join(map(str, sorted(self.claimed_neighbors)))
            return f"Hello(from={self.sender},claims=[{claims}])"
        if k is MessageKind.DBD:
            hdrs = ",".join(f"{o}@{s}" for o, s in self.headers)
            return (
                f"Dbd(from={self.sender},seq={self.dd_seq},ms={int(self.master_flag)},"
                f"i={int(self.init_flag)},m={int(self.more)},hdr=[{hdrs}])"
            )
        if k is MessageKind.LSR:
            return f"Lsr(from={self.sender},req=[{','.join(map(str, self.requests))}])"
        if k is MessageKind.LSU:
            body = ",".join(
                f"{e.origin}@{e.seq}{{{'.'.join(map(str, sorted(e.links)))}}}{'*' if e.malicious else ''}"
                for e in self.payload
            )
            return f"Lsu(from={self.sender},[{body}])"
        acks = ",".join(f"{o}@{s}" for o, s in self.acked)
        return f"LsAck(from={self.sender},[{acks}])"


def accepted_dd_seqs(nstate: NeighbourState, is_master: bool, dd_seq: int) -> frozenset[int]:
    """DBD sequence numbers a node past ExStart treats as in-order or duplicate."""
    if nstate == NeighbourState.EXCHANGE and not is_master:
        return frozenset({dd_seq, min(dd_seq + 1, DD_SEQ_MAX)})
    return frozenset({dd_seq})


@dataclass(frozen=True, slots=True)
class Action:
    """A transition label. ``payload`` carries data the label only summarises."""

    name: str
    args: tuple = ()
    payload: object = None

    @property
    def label(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({','.join(map(str, self.args))})"

    def __str__(self) -> str:
        return self.label
