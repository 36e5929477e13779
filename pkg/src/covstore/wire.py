"""Message types exchanged between clients and replica servers, and their binary framing.

Every frame is ``u32 length | u8 verb | header | body``. The header carries
``config_id``, ``obj`` (object key), ``op_uuid`` (16 bytes) and ``sender``.
Tags use the canonical 24-byte encoding, coded elements use
``u16 index | u64 orig_len | payload``.

The simulator never materializes frames; it charges ``wire_size(msg)``,
which sums the same chunks ``encode`` would join.
"""

from __future__ import annotations

import enum
import struct
import uuid
from dataclasses import dataclass
from typing import Union

from .erasure import CodedElement
from .types import TAG_SIZE, ConfigEntry, Status, Tag


class Verb(enum.IntEnum):
    QUERY_TAG = 1
    TAG = 2
    QUERY_LIST = 3
    LIST = 4
    PUT_DATA = 5
    ACK = 6
    READ_NEXT = 7
    NEXT = 8
    WRITE_NEXT = 9
    PREPARE = 10
    PROMISE = 11
    ACCEPT = 12
    ACCEPTED = 13


WIRE_NAMES = {
    Verb.QUERY_TAG: "QUERY-TAG", Verb.TAG: "TAG", Verb.QUERY_LIST: "QUERY-LIST",
    Verb.LIST: "LIST", Verb.PUT_DATA: "PUT-DATA", Verb.ACK: "ACK",
    Verb.READ_NEXT: "READ-NEXT", Verb.NEXT: "NEXT", Verb.WRITE_NEXT: "WRITE-NEXT",
    Verb.PREPARE: "CONSENSUS-PREPARE", Verb.PROMISE: "CONSENSUS-PROMISE",
    Verb.ACCEPT: "CONSENSUS-ACCEPT", Verb.ACCEPTED: "CONSENSUS-ACCEPTED",
}

NIL_UUID = bytes(16)

# payload of a list entry / put: None is the bottom marker
Payload = Union[None, CodedElement, bytes]


class WireError(Exception):
    pass


@dataclass(frozen=True, order=True)
class Ballot:
    counter: int
    client: str

    def next(self, client: str) -> Ballot:
        return Ballot(self.counter + 1, client)


ZERO_BALLOT = Ballot(0, "")


@dataclass(frozen=True, kw_only=True)
class Message:
    config_id: str = ""
    obj: str = ""
    op_uuid: bytes = NIL_UUID
    sender: str = ""

    verb = None

    @property
    def name(self) -> str:
        return WIRE_NAMES[self.verb]


@dataclass(frozen=True, kw_only=True)
class QueryTag(Message):
    verb = Verb.QUERY_TAG


@dataclass(frozen=True, kw_only=True)
class TagReply(Message):
    tag: Tag
    verb = Verb.TAG


@dataclass(frozen=True, kw_only=True)
class QueryList(Message):
    # None asks for the full list (classic EC / ABD); otherwise the requester's cached tag
    tag: Tag | None = None
    verb = Verb.QUERY_LIST


@dataclass(frozen=True, kw_only=True)
class ListReply(Message):
    entries: tuple = ()
    verb = Verb.LIST


@dataclass(frozen=True, kw_only=True)
class PutData(Message):
    tag: Tag
    payload: Payload
    verb = Verb.PUT_DATA


@dataclass(frozen=True, kw_only=True)
class Ack(Message):
    verb = Verb.ACK


@dataclass(frozen=True, kw_only=True)
class ReadNext(Message):
    verb = Verb.READ_NEXT


@dataclass(frozen=True, kw_only=True)
class NextReply(Message):
    entry: ConfigEntry | None = None
    verb = Verb.NEXT


@dataclass(frozen=True, kw_only=True)
class WriteNext(Message):
    entry: ConfigEntry
    verb = Verb.WRITE_NEXT


@dataclass(frozen=True, kw_only=True)
class Prepare(Message):
    ballot: Ballot
    verb = Verb.PREPARE


@dataclass(frozen=True, kw_only=True)
class Promise(Message):
    ok: bool
    ballot: Ballot
    accepted_ballot: Ballot | None = None
    accepted_value: str | None = None
    verb = Verb.PROMISE


@dataclass(frozen=True, kw_only=True)
class Accept(Message):
    ballot: Ballot
    value: str
    verb = Verb.ACCEPT


@dataclass(frozen=True, kw_only=True)
class Accepted(Message):
    ok: bool
    ballot: Ballot
    verb = Verb.ACCEPTED


_CLASSES = {cls.verb: cls for cls in (QueryTag, TagReply, QueryList, ListReply, PutData, Ack,
                                       ReadNext, NextReply, WriteNext, Prepare, Promise,
                                       Accept, Accepted)}


def new_uuid(label: str) -> bytes:
    return uuid.uuid5(uuid.NAMESPACE_OID, label).bytes


# -- encoding -----------------------------------------------------------------------------

def _str(s: str) -> bytes:
    raw = s.encode()
    return struct.pack(">H", len(raw)) + raw


def _ballot(b: Ballot) -> bytes:
    return struct.pack(">Q", b.counter) + _str(b.client)


def _payload(p: Payload) -> list:
    if p is None:
        return [b"\x00"]
    if isinstance(p, CodedElement):
        return [struct.pack(">BIHQ", 1, len(p.payload) + 10, p.index, p.orig_len), p.payload]
    return [struct.pack(">BI", 2, len(p)), p]


def _entry(e: ConfigEntry | None) -> bytes:
    if e is None:
        return b"\x00"
    return b"\x01" + _str(e.config_id) + e.status.value.encode()


def chunks(msg: Message) -> list:
    head = [b"", struct.pack(">B", msg.verb), _str(msg.config_id), _str(msg.obj),
            msg.op_uuid, _str(msg.sender)]
    v = msg.verb
    if v == Verb.TAG:
        body = [msg.tag.encode()]
    elif v == Verb.QUERY_LIST:
        body = [b"\x00"] if msg.tag is None else [b"\x01", msg.tag.encode()]
    elif v == Verb.LIST:
        body = [struct.pack(">I", len(msg.entries))]
        for tag, payload in msg.entries:
            body.append(tag.encode())
            body.extend(_payload(payload))
    elif v == Verb.PUT_DATA:
        body = [msg.tag.encode(), *_payload(msg.payload)]
    elif v == Verb.NEXT:
        body = [_entry(msg.entry)]
    elif v == Verb.WRITE_NEXT:
        body = [_entry(msg.entry)]
    elif v == Verb.PREPARE:
        body = [_ballot(msg.ballot)]
    elif v == Verb.PROMISE:
        body = [struct.pack(">B", msg.ok), _ballot(msg.ballot)]
        if msg.accepted_ballot is None:
            body.append(b"\x00")
        else:
            body += [b"\x01", _ballot(msg.accepted_ballot), _str(msg.accepted_value)]
    elif v == Verb.ACCEPT:
        body = [_ballot(msg.ballot), _str(msg.value)]
    elif v == Verb.ACCEPTED:
        body = [struct.pack(">B", msg.ok), _ballot(msg.ballot)]
    else:
        body = []
    parts = head + body
    parts[0] = struct.pack(">I", sum(len(p) for p in parts[1:]))
    return parts


def encode(msg: Message) -> bytes:
    return b"".join(chunks(msg))


def wire_size(msg: Message) -> int:
    return sum(len(p) for p in chunks(msg))


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = memoryview(raw)
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise WireError("truncated frame")
        out = bytes(self.raw[self.pos:self.pos + n])
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(s))

    def str(self) -> str:
        (n,) = self.unpack(">H")
        return self.take(n).decode()

    def tag(self) -> Tag:
        return Tag.decode(self.take(TAG_SIZE))

    def ballot(self) -> Ballot:
        (c,) = self.unpack(">Q")
        return Ballot(c, self.str())

    def payload(self) -> Payload:
        (kind,) = self.unpack(">B")
        if kind == 0:
            return None
        (n,) = self.unpack(">I")
        raw = self.take(n)
        if kind == 1:
            return CodedElement.decode(raw)
        if kind == 2:
            return raw
        raise WireError(f"unknown payload kind {kind}")

    def entry(self) -> ConfigEntry | None:
        (has,) = self.unpack(">B")
        if not has:
            return None
        cid = self.str()
        return ConfigEntry(cid, Status(self.take(1).decode()))


def decode(frame: bytes) -> Message:
    r = _Reader(frame)
    (length,) = r.unpack(">I")
    if length != len(frame) - 4:
        raise WireError(f"frame length {length} does not match {len(frame) - 4}")
    (verb,) = r.unpack(">B")
    try:
        cls = _CLASSES[Verb(verb)]
    except ValueError:
        raise WireError(f"unknown verb {verb}") from None
    head = dict(config_id=r.str(), obj=r.str(), op_uuid=r.take(16), sender=r.str())
    v = cls.verb
    if v == Verb.TAG:
        body = dict(tag=r.tag())
    elif v == Verb.QUERY_LIST:
        (has,) = r.unpack(">B")
        body = dict(tag=r.tag() if has else None)
    elif v == Verb.LIST:
        (count,) = r.unpack(">I")
        body = dict(entries=tuple((r.tag(), r.payload()) for _ in range(count)))
    elif v == Verb.PUT_DATA:
        body = dict(tag=r.tag(), payload=r.payload())
    elif v in (Verb.NEXT, Verb.WRITE_NEXT):
        body = dict(entry=r.entry())
    elif v == Verb.PREPARE:
        body = dict(ballot=r.ballot())
    elif v == Verb.PROMISE:
        (ok,) = r.unpack(">B")
        ballot = r.ballot()
        (has,) = r.unpack(">B")
        acc = (r.ballot(), r.str()) if has else (None, None)
        body = dict(ok=bool(ok), ballot=ballot, accepted_ballot=acc[0], accepted_value=acc[1])
    elif v == Verb.ACCEPT:
        body = dict(ballot=r.ballot(), value=r.str())
    elif v == Verb.ACCEPTED:
        (ok,) = r.unpack(">B")
        body = dict(ok=bool(ok), ballot=r.ballot())
    else:
        body = {}
    if r.pos != len(frame):
        raise WireError("trailing bytes in frame")
    return cls(**head, **body)
