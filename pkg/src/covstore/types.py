"""Shared value types: tags, configurations, block identities, write outcomes."""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from functools import total_ordering

WID_BYTES = 16
BOTTOM_WID = bytes(WID_BYTES)

_TAG = struct.Struct(">Q16s")


def writer_token(name: str | bytes) -> bytes:
    """Fixed-width writer id for a node name (right-padded with zero bytes)."""
    raw = name.encode() if isinstance(name, str) else bytes(name)
    if len(raw) > WID_BYTES:
        raise ValueError(f"writer name longer than {WID_BYTES} bytes: {name!r}")
    if raw.strip(b"\0") == b"":
        raise ValueError("writer token may not be the all-zero bottom token")
    return raw.ljust(WID_BYTES, b"\0")


@total_ordering
@dataclass(frozen=True, slots=True)
class Tag:
    ts: int
    wid: bytes = BOTTOM_WID

    def __post_init__(self):
        if self.ts < 0:
            raise ValueError("timestamp must be non-negative")
        if len(self.wid) != WID_BYTES:
            raise ValueError(f"writer id must be {WID_BYTES} bytes")

    def __lt__(self, other: Tag) -> bool:
        if not isinstance(other, Tag):
            return NotImplemented
        return (self.ts, self.wid) < (other.ts, other.wid)

    def next(self, wid: bytes) -> Tag:
        return Tag(self.ts + 1, wid)

    def encode(self) -> bytes:
        return _TAG.pack(self.ts, self.wid)

    @classmethod
    def decode(cls, raw: bytes) -> Tag:
        ts, wid = _TAG.unpack(raw)
        return cls(ts, wid)

    def to_json(self) -> list:
        return [self.ts, self.wid.hex()]

    @classmethod
    def from_json(cls, obj) -> Tag:
        return cls(int(obj[0]), bytes.fromhex(obj[1]))

    @property
    def writer(self) -> str:
        return self.wid.rstrip(b"\0").decode(errors="replace") or "⊥"

    def __repr__(self) -> str:
        return f"Tag({self.ts}, {self.writer})"


TAG_SIZE = _TAG.size
T0 = Tag(0, BOTTOM_WID)


def compare_tags(a: Tag, b: Tag) -> int:
    """-1, 0 or 1 under the lexicographic (ts, wid) order."""
    if a < b:
        return -1
    return 1 if b < a else 0


@dataclass(frozen=True, slots=True)
class TaggedValue:
    tag: Tag
    value: bytes

    def __lt__(self, other: TaggedValue) -> bool:
        return self.tag < other.tag


V0 = b""
INITIAL = TaggedValue(T0, V0)


def max_tagged(a: TaggedValue | None, b: TaggedValue | None) -> TaggedValue | None:
    if a is None:
        return b
    if b is None:
        return a
    return b if a.tag < b.tag else a


class DapKind(str, enum.Enum):
    ABD = "ABD"
    EC_CLASSIC = "EC_CLASSIC"
    EC_OPT = "EC_OPT"

    @property
    def erasure_coded(self) -> bool:
        return self is not DapKind.ABD


class Status(str, enum.Enum):
    P = "P"
    F = "F"


@dataclass(frozen=True)
class Configuration:
    id: str
    servers: tuple[str, ...]
    dap_kind: DapKind = DapKind.ABD
    k: int = 1
    delta: int = 1

    def __post_init__(self):
        object.__setattr__(self, "servers", tuple(self.servers))
        object.__setattr__(self, "dap_kind", DapKind(self.dap_kind))
        n = len(self.servers)
        if n == 0:
            raise ValueError("configuration needs at least one server")
        if len(set(self.servers)) != n:
            raise ValueError("duplicate server in configuration")
        if self.dap_kind.erasure_coded:
            if n > 255:
                raise ValueError("erasure-coded configurations support at most 255 servers")
            if not 1 <= self.k <= n:
                raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={n}")
            if 3 * self.k <= n:
                raise ValueError(f"need k > n/3 for liveness, got k={self.k}, n={n}")
            if self.delta < 1:
                raise ValueError("delta must be >= 1")

    @property
    def n(self) -> int:
        return len(self.servers)

    @property
    def parity(self) -> int:
        return self.n - self.k if self.dap_kind.erasure_coded else 0

    def index_of(self, server: str) -> int:
        return self.servers.index(server)

    def to_json(self) -> dict:
        return {"id": self.id, "servers": list(self.servers), "dap": self.dap_kind.value,
                "k": self.k, "delta": self.delta}

    @classmethod
    def from_json(cls, obj: dict) -> Configuration:
        return cls(obj["id"], tuple(obj["servers"]), DapKind(obj["dap"]), obj["k"], obj["delta"])


def quorum_size(c: Configuration) -> int:
    if c.dap_kind.erasure_coded:
        return math.ceil((c.n + c.k) / 2)
    return c.n // 2 + 1


def majority(n: int) -> int:
    return n // 2 + 1


def fault_bound(c: Configuration) -> int:
    """Number of server crashes the configuration's DAP tolerates."""
    if c.dap_kind.erasure_coded:
        return (c.n - c.k) // 2
    return (c.n - 1) // 2


@dataclass(frozen=True, slots=True)
class ConfigEntry:
    config_id: str
    status: Status

    def to_json(self) -> list:
        return [self.config_id, self.status.value]


@dataclass(frozen=True, slots=True)
class BlockId:
    fid: str
    clid: bytes
    clseq: int

    @classmethod
    def genesis(cls, fid: str) -> BlockId:
        return cls(fid, BOTTOM_WID, 0)

    @property
    def is_genesis(self) -> bool:
        return self.clid == BOTTOM_WID and self.clseq == 0

    def key(self) -> str:
        """Object key used by servers and history logs."""
        return f"{self.fid}/{self.clid.rstrip(bytes(1)).decode(errors='replace') or '_'}/{self.clseq}"

    def encode(self) -> bytes:
        fid = self.fid.encode()
        return struct.pack(">H", len(fid)) + fid + self.clid + struct.pack(">Q", self.clseq)

    @classmethod
    def decode_from(cls, raw: bytes, offset: int = 0) -> tuple[BlockId, int]:
        (flen,) = struct.unpack_from(">H", raw, offset)
        offset += 2
        fid = bytes(raw[offset:offset + flen]).decode()
        offset += flen
        clid = bytes(raw[offset:offset + WID_BYTES])
        offset += WID_BYTES
        (clseq,) = struct.unpack_from(">Q", raw, offset)
        return cls(fid, clid, clseq), offset + 8


@dataclass(frozen=True)
class Block:
    id: BlockId
    data: bytes
    ptr: BlockId | None
    version: Tag = T0


class Flag(str, enum.Enum):
    CHG = "chg"
    UNCHG = "unchg"


@dataclass(frozen=True)
class WriteOutcome:
    tagged: TaggedValue
    flag: Flag
    # version the write was submitted against (the writer's local version)
    prev_version: Tag = field(default=T0)

    @property
    def changed(self) -> bool:
        return self.flag is Flag.CHG
