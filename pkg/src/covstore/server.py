"""Replica server automata.

A :class:`ReplicaServer` hosts, for every (object, configuration) pair it is a
member of, one register replica (ABD or EC tag list), one ``nextC`` cell and
one single-decree consensus acceptor. Handlers run to completion, one message
at a time, and are deterministic functions of (state, message).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import erasure
from .erasure import CodedElement
from .faults import NO_FAULTS, Faults
from .types import INITIAL, T0, ConfigEntry, Configuration, DapKind, Status, Tag, TaggedValue
from .wire import (
    Accept, Accepted, Ack, Ballot, ListReply, Message, NextReply, Prepare, Promise, PutData,
    QueryList, QueryTag, ReadNext, TagReply, WriteNext,
)


class ProtocolViolation(Exception):
    """A server observed something only a broken protocol (or consensus breach) can cause."""


class DuplicateTagError(ProtocolViolation):
    pass


@dataclass
class AbdServerState:
    tagged: TaggedValue = INITIAL

    def read(self) -> TaggedValue:
        return self.tagged

    def write(self, tv: TaggedValue) -> None:
        if self.tagged.tag < tv.tag:
            self.tagged = tv


@dataclass
class EcServerState:
    """Tag list of one EC replica.

    ``classic`` keeps ``(t_min, None)`` tombstones for trimmed tags; the
    optimized variant drops the entry entirely. ``trim_bound`` overrides the
    ``delta + 1`` bound (used only to build deliberately broken servers).
    """

    delta: int
    initial: CodedElement
    classic: bool = False
    trim_bound: int | None = None
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.entries:
            self.entries[T0] = self.initial

    @property
    def bound(self) -> int:
        return self.delta + 1 if self.trim_bound is None else self.trim_bound

    def valued(self) -> list[Tag]:
        return [t for t, e in self.entries.items() if e is not None]

    def query(self, tg_b: Tag | None) -> tuple:
        items = sorted(self.entries.items(), key=lambda kv: kv[0])
        if tg_b is None:
            return tuple(items)
        out = []
        for t, e in items:
            if t > tg_b:
                out.append((t, e))
            elif t == tg_b:
                out.append((t, None))
        return tuple(out)

    def put(self, tag: Tag, elem: CodedElement) -> None:
        prev = self.entries.get(tag, ...)
        if prev is not ... and prev is not None and prev != elem:
            raise DuplicateTagError(f"tag {tag!r} re-written with a different element")
        if prev is None:
            # already garbage-collected down to a tombstone
            return
        self.entries[tag] = elem
        while len(self.valued()) > self.bound:
            t_min = min(self.valued())
            if self.classic:
                self.entries[t_min] = None
            else:
                del self.entries[t_min]


@dataclass
class NextConfigCell:
    entry: ConfigEntry | None = None

    def read(self) -> ConfigEntry | None:
        return self.entry

    def write(self, proposal: ConfigEntry) -> None:
        cur = self.entry
        if cur is not None and cur.config_id != proposal.config_id:
            raise ProtocolViolation(
                f"nextC already holds {cur.config_id}, refusing {proposal.config_id}")
        if cur is not None and cur.status is Status.F:
            return
        self.entry = proposal


@dataclass
class AcceptorState:
    promised: Ballot | None = None
    accepted_ballot: Ballot | None = None
    accepted_value: str | None = None

    def prepare(self, b: Ballot) -> tuple[bool, Ballot]:
        if self.promised is None or b > self.promised:
            self.promised = b
            return True, b
        return False, self.promised

    def accept(self, b: Ballot, value: str) -> tuple[bool, Ballot]:
        if self.promised is None or b >= self.promised:
            self.promised = b
            self.accepted_ballot = b
            self.accepted_value = value
            return True, b
        return False, self.promised


class ReplicaServer:
    def __init__(self, name: str, directory: dict[str, Configuration], faults: Faults = NO_FAULTS):
        self.name = name
        self.directory = directory
        self.faults = faults
        self.registers: dict[tuple[str, str], object] = {}
        self.next_cells: dict[tuple[str, str], NextConfigCell] = {}
        self.acceptors: dict[tuple[str, str], AcceptorState] = {}

    def _config(self, msg: Message) -> Configuration:
        try:
            c = self.directory[msg.config_id]
        except KeyError:
            raise ProtocolViolation(f"{self.name}: unknown configuration {msg.config_id!r}") from None
        if self.name not in c.servers:
            raise ProtocolViolation(f"{self.name} is not a member of {c.id}")
        return c

    def register(self, obj: str, c: Configuration):
        key = (obj, c.id)
        reg = self.registers.get(key)
        if reg is None:
            if c.dap_kind is DapKind.ABD:
                reg = AbdServerState()
            else:
                idx = c.index_of(self.name)
                trim = max(c.delta - 1, 1) if self.faults.ec_trim_below_delta else None
                reg = EcServerState(c.delta, erasure.encode(INITIAL.value, c.n, c.k)[idx],
                                    classic=c.dap_kind is DapKind.EC_CLASSIC, trim_bound=trim)
            self.registers[key] = reg
        return reg

    def handle(self, msg: Message) -> Message | None:
        c = self._config(msg)
        key = (msg.obj, c.id)
        head = dict(config_id=msg.config_id, obj=msg.obj, op_uuid=msg.op_uuid, sender=self.name)
        if isinstance(msg, (QueryTag, QueryList, PutData)):
            reg = self.register(msg.obj, c)
            if isinstance(msg, QueryTag):
                if isinstance(reg, AbdServerState):
                    return TagReply(tag=reg.tagged.tag, **head)
                return TagReply(tag=max(reg.entries), **head)
            if isinstance(msg, QueryList):
                if isinstance(reg, AbdServerState):
                    return ListReply(entries=((reg.tagged.tag, reg.tagged.value),), **head)
                return ListReply(entries=reg.query(msg.tag), **head)
            if isinstance(reg, AbdServerState):
                reg.write(TaggedValue(msg.tag, msg.payload))
            else:
                if not isinstance(msg.payload, CodedElement):
                    raise ProtocolViolation("EC put-data without a coded element")
                reg.put(msg.tag, msg.payload)
            return Ack(**head)
        if isinstance(msg, ReadNext):
            cell = self.next_cells.get(key)
            return NextReply(entry=cell.read() if cell else None, **head)
        if isinstance(msg, WriteNext):
            self.next_cells.setdefault(key, NextConfigCell()).write(msg.entry)
            return Ack(**head)
        if isinstance(msg, Prepare):
            acc = self.acceptors.setdefault(key, AcceptorState())
            ok, b = acc.prepare(msg.ballot)
            return Promise(ok=ok, ballot=b, accepted_ballot=acc.accepted_ballot,
                           accepted_value=acc.accepted_value, **head)
        if isinstance(msg, Accept):
            acc = self.acceptors.setdefault(key, AcceptorState())
            ok, b = acc.accept(msg.ballot, msg.value)
            return Accepted(ok=ok, ballot=b, **head)
        raise ProtocolViolation(f"{self.name}: unexpected message {msg.name}")
