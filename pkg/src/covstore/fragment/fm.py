"""Files as linked lists of coverable block objects.

Each block value is ``u8 has_ptr | [next BlockId] | data``. The genesis block
of a file has a well-known id and carries JSON metadata instead of file bytes.
Blocks are never removed: a deletion writes empty data and the block stays in
the chain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from ..coverable import CoverableClient
from ..faults import NO_FAULTS, Faults
from ..netsim.history import digest
from ..reconfig import recon
from ..types import T0, Block, BlockId, Configuration, Flag, writer_token
from .chunker import ChunkerParams, block_hash, chunk
from .diff import DiffStatus, diff_hashes


class IntegrityError(RuntimeError):
    """A block chain that the protocol should never produce (dangling pointer or cycle)."""


def encode_block(ptr: BlockId | None, data: bytes) -> bytes:
    if ptr is None:
        return b"\x00" + data
    return b"\x01" + ptr.encode() + data


def decode_block(raw: bytes) -> tuple[BlockId | None, bytes]:
    if not raw or raw[0] == 0:
        return None, bytes(raw[1:])
    ptr, offset = BlockId.decode_from(raw, 1)
    return ptr, bytes(raw[offset:])


@dataclass(frozen=True)
class UpdateSummary:
    # (block key, flag, role) in the order the writes were issued
    writes: list = field(default_factory=list)

    @property
    def changed(self) -> bool:
        return all(flag is Flag.CHG for _, flag, _ in self.writes)

    @property
    def lost_races(self) -> list:
        return [key for key, flag, _ in self.writes if flag is Flag.UNCHG]


class FragmentClient:
    """One client's handle on one fragmented file."""

    def __init__(self, proc, fid: str, directory: dict[str, Configuration], c0_id: str,
                 params: ChunkerParams = ChunkerParams(), faults: Faults = NO_FAULTS,
                 static: bool = False):
        self.proc = proc
        self.fid = fid
        self.directory = directory
        self.c0_id = c0_id
        self.params = params
        self.faults = faults
        self.static = static
        self.genesis = BlockId.genesis(fid)
        self.wid = writer_token(proc.name)
        self.chain: list[Block] | None = None
        self.stale = True
        self._clients: dict[BlockId, CoverableClient] = {}
        self._clseq = 0

    def block_client(self, bid: BlockId) -> CoverableClient:
        client = self._clients.get(bid)
        if client is None:
            # every block starts life in the initial configuration
            client = CoverableClient(self.proc, bid.key(), self.directory, self.c0_id,
                                     self.faults, self.static)
            self._clients[bid] = client
        return client

    def _new_id(self) -> BlockId:
        self._clseq += 1
        return BlockId(self.fid, self.wid, self._clseq)

    def _metadata(self, blocks: int) -> bytes:
        meta = {"file": self.fid, "blocks": blocks, "chunker": self.params.to_json()}
        return json.dumps(meta, sort_keys=True).encode()

    # -- read -----------------------------------------------------------------------------

    def fm_read(self):
        """Read the whole chain from genesis; returns ``(blocks, content)``."""
        op_id = self.proc.begin("fm-read", file=self.fid)
        blocks: list[Block] = []
        seen = set()
        bid = self.genesis
        while bid is not None:
            if bid in seen:
                raise IntegrityError(f"{self.fid}: pointer cycle at {bid.key()}")
            seen.add(bid)
            tv = yield from self.block_client(bid).cvr_read()
            if tv.tag == T0 and not bid.is_genesis:
                raise IntegrityError(f"{self.fid}: {bid.key()} is linked but was never written")
            ptr, data = decode_block(tv.value)
            blocks.append(Block(bid, data, ptr, tv.tag))
            bid = ptr
        content = b"".join(b.data for b in blocks[1:])
        self.chain = blocks
        self.stale = False
        chain = [[b.id.key(), b.ptr.key() if b.ptr else None] for b in blocks]
        self.proc.end(op_id, "fm-read", file=self.fid, chain=chain, digest=digest(content))
        return blocks, content

    # -- update ---------------------------------------------------------------------------

    def _write(self, summary: UpdateSummary, bid: BlockId, ptr, data: bytes, role: str):
        outcome = yield from self.block_client(bid).cvr_write(encode_block(ptr, data))
        summary.writes.append((bid.key(), outcome.flag, role))
        if not outcome.changed:
            self.stale = True
        return outcome

    def fm_update(self, content: bytes):
        op_id = self.proc.begin("update", file=self.fid)
        if self.chain is None or self.stale:
            yield from self.fm_read()
        chain = self.chain
        live = [i for i in range(1, len(chain)) if chain[i].data]
        pieces = chunk(content, self.params)
        by_hash = {h: data for data, h in pieces}
        ops = diff_hashes([block_hash(chain[i].data) for i in live], [h for _, h in pieces])

        rewrite: dict[int, bytes] = {}
        inserts: dict[int, list[bytes]] = {}
        for op in ops:
            if op.status is DiffStatus.MODIFIED:
                rewrite[live[op.position]] = by_hash[op.new_hashes[0]]
            elif op.status is DiffStatus.DELETED:
                rewrite[live[op.position]] = b""
            elif op.status is DiffStatus.INSERTED:
                anchor = 0 if op.position < 0 else live[op.position]
                inserts[anchor] = [by_hash[h] for h in op.new_hashes]

        summary = UpdateSummary()
        new_chain: list[Block] = []
        for idx, block in enumerate(chain):
            if idx in inserts:
                # last new block first, so every pointer ever published leads to a written block
                succ = block.ptr
                created = []
                for data in reversed(inserts[idx]):
                    bid = self._new_id()
                    out = yield from self._write(summary, bid, succ, data, "insert")
                    created.append(Block(bid, data, succ, out.tagged.tag))
                    succ = bid
                data = self._metadata(len(pieces)) if idx == 0 else rewrite.get(idx, block.data)
                out = yield from self._write(summary, block.id, succ, data, "anchor")
                new_chain.append(Block(block.id, data, succ, out.tagged.tag))
                new_chain.extend(reversed(created))
            elif idx in rewrite:
                data = rewrite[idx]
                role = "modify" if data else "delete"
                out = yield from self._write(summary, block.id, block.ptr, data, role)
                new_chain.append(replace(block, data=data, version=out.tagged.tag))
            else:
                new_chain.append(block)
        self.chain = new_chain
        self.proc.end(op_id, "update", file=self.fid,
                      writes=[[key, flag.value, role] for key, flag, role in summary.writes],
                      digest=digest(content))
        return summary

    # -- reconfiguration ------------------------------------------------------------------

    def fm_reconfig(self, target: Configuration):
        """Reconfigure every block of the file, walking the chain from genesis."""
        op_id = self.proc.begin("fm-reconfig", file=self.fid, config=target.id)
        order = []
        bid = self.genesis
        seen = set()
        while bid is not None and bid not in seen:
            seen.add(bid)
            _, transferred = yield from recon(self.block_client(bid).view, target)
            order.append(bid.key())
            bid, _ = decode_block(transferred.value)
        self.proc.end(op_id, "fm-reconfig", file=self.fid, config=target.id, blocks=order)
        return order
