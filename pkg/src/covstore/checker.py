"""Offline verifiers over recorded histories.

All checks are pure functions of a :class:`HistoryLog`. Operation precedence
is log order: ``a`` precedes ``b`` when ``a``'s respond record comes before
``b``'s invoke record. Tags are handled in their JSON form ``[ts, wid_hex]``
as ``(ts, wid_hex)`` tuples, which order the same way as :class:`Tag`.
"""

from __future__ import annotations

import bisect
import itertools
from collections import defaultdict
from dataclasses import dataclass, field

from .netsim.history import HistoryLog, LogFormatError, digest
from .types import T0, writer_token

T0_KEY = (T0.ts, T0.wid.hex())
V0_DIGEST = digest(b"")
DEFAULT_OP_CAP = 10_000
BRUTE_FORCE_LIMIT = 12

DAP_OPS = ("get-tag", "get-data", "put-data")
PROPERTIES = ("dap", "coverability", "linearizable", "connectivity", "cseq")


class CheckLimitError(RuntimeError):
    """A per-block history exceeds the configured operation cap."""


@dataclass(frozen=True)
class Violation:
    prop: str
    kind: str
    message: str
    ops: tuple = ()

    def to_json(self) -> dict:
        return {"property": self.prop, "kind": self.kind, "message": self.message,
                "ops": list(self.ops)}


@dataclass
class Op:
    op_id: str
    node: str
    kind: str
    inv: int
    inv_rec: dict
    resp: int | None = None
    resp_rec: dict | None = None

    @property
    def complete(self) -> bool:
        return self.resp is not None

    def get(self, key, default=None):
        if self.resp_rec is not None and key in self.resp_rec:
            return self.resp_rec[key]
        return self.inv_rec.get(key, default)

    @property
    def tag(self):
        raw = self.get("tag")
        return None if raw is None else (int(raw[0]), str(raw[1]))


def _line(rec: dict, index: int) -> int:
    return rec.get("_line", index + 1)


def collect_ops(log: HistoryLog) -> list[Op]:
    ops: dict[str, Op] = {}
    for i, rec in enumerate(log.records):
        event = rec["event"]
        if event not in ("invoke", "respond"):
            continue
        op_id = rec.get("op_id")
        if op_id is None or "op" not in rec:
            raise LogFormatError(_line(rec, i), f"{event} record without op/op_id")
        if event == "invoke":
            if op_id in ops:
                raise LogFormatError(_line(rec, i), f"duplicate invoke for {op_id}")
            ops[op_id] = Op(op_id, rec["node"], rec["op"], i, rec)
        else:
            op = ops.get(op_id)
            if op is None:
                raise LogFormatError(_line(rec, i), f"respond for unknown operation {op_id}")
            if op.resp is not None:
                raise LogFormatError(_line(rec, i), f"second respond for {op_id}")
            op.resp, op.resp_rec = i, rec
    return list(ops.values())


def _as_log(log) -> HistoryLog:
    if isinstance(log, HistoryLog):
        return log
    if isinstance(log, list):
        return HistoryLog(log)
    return HistoryLog.parse(log)


class _PrefixMax:
    """Max of ``value`` over items whose response index is below a query point."""

    def __init__(self, items):
        items = sorted(items, key=lambda it: it[0])
        self.ends = [end for end, _, _ in items]
        self.best = []
        cur = None
        for _, value, payload in items:
            if cur is None or value > cur[0]:
                cur = (value, payload)
            self.best.append(cur)

    def before(self, index: int):
        k = bisect.bisect_left(self.ends, index)
        return self.best[k - 1] if k else None


def _fmt(tag) -> str:
    return f"({tag[0]}, {bytes.fromhex(tag[1]).rstrip(bytes(1)).decode(errors='replace') or '⊥'})"


# -- DAP properties ------------------------------------------------------------------------

def check_dap_properties(log) -> list[Violation]:
    """Monotone tags after completed put-data (C1) and no invented tags (C2), per configuration."""
    ops = collect_ops(_as_log(log))
    groups = defaultdict(list)
    for op in ops:
        if op.kind in DAP_OPS:
            groups[(op.get("block"), op.get("config"))].append(op)
    out = []
    for (block, config), group in sorted(groups.items(), key=lambda kv: (str(kv[0][0]), str(kv[0][1]))):
        puts = [op for op in group if op.kind == "put-data"]
        done = _PrefixMax((op.resp, op.tag, op.op_id) for op in puts if op.complete)
        invoked = sorted(((op.inv, (op.tag, op.get("digest"))) for op in puts), key=lambda x: x[0])
        for op in group:
            if op.kind == "put-data" or not op.complete:
                continue
            prior = done.before(op.inv)
            if prior is not None and op.tag < prior[0]:
                out.append(Violation(
                    "dap", "C1", f"{op.kind} {op.op_id} on {block}@{config} returned {_fmt(op.tag)} "
                    f"after put-data {prior[1]} completed with {_fmt(prior[0])}", (prior[1], op.op_id)))
            if op.kind == "get-data":
                pair = (op.tag, op.get("digest"))
                if pair == (T0_KEY, V0_DIGEST):
                    continue
                if not any(p == pair for inv, p in invoked if inv < op.resp):
                    out.append(Violation(
                        "dap", "C2", f"get-data {op.op_id} on {block}@{config} returned {_fmt(op.tag)} "
                        "which no earlier put-data wrote", (op.op_id,)))
    return out


# -- coverability -----------------------------------------------------------------------------

def _known_tags(ops: list[Op]) -> dict:
    """Tags created by writers, including writes that never responded, per block."""
    token_of = {}
    known = defaultdict(set)
    for op in ops:
        if op.kind == "write" and op.complete and op.get("flag") == "chg":
            known[op.get("block")].add(op.tag)
        elif op.kind == "put-data":
            node = op.node
            if node not in token_of:
                try:
                    token_of[node] = writer_token(node).hex()
                except ValueError:
                    token_of[node] = None
            if op.tag[1] == token_of[node]:
                known[op.get("block")].add(op.tag)
    return known


def check_coverability(log) -> list[Violation]:
    ops = collect_ops(_as_log(log))
    known = _known_tags(ops)
    writes = defaultdict(list)
    for op in ops:
        if op.kind == "write" and op.complete and op.get("flag") == "chg":
            writes[op.get("block")].append(op)
    out = []
    for block in sorted(writes, key=str):
        chg = writes[block]
        seen = {}
        for op in sorted(chg, key=lambda o: o.inv):
            tag = op.tag
            prev = tuple(op.get("prev_version", list(T0_KEY)))
            prev = (int(prev[0]), str(prev[1]))
            if tag in seen:
                out.append(Violation("coverability", "uniqueness",
                                     f"{block}: writes {seen[tag]} and {op.op_id} both produced {_fmt(tag)}",
                                     (seen[tag], op.op_id)))
            seen.setdefault(tag, op.op_id)
            if not tag > prev:
                out.append(Violation("coverability", "increment",
                                     f"{block}: {op.op_id} produced {_fmt(tag)} not above its version {_fmt(prev)}",
                                     (op.op_id,)))
            if prev != T0_KEY and prev not in known[block]:
                out.append(Violation("coverability", "continuity",
                                     f"{block}: {op.op_id} was based on {_fmt(prev)}, which no write produced",
                                     (op.op_id,)))
            if tag[0] != prev[0] + 1:
                out.append(Violation("coverability", "evolution",
                                     f"{block}: {op.op_id} jumped from ts {prev[0]} to {tag[0]}", (op.op_id,)))
        done = _PrefixMax((op.resp, op.tag, op.op_id) for op in chg)
        for op in chg:
            prior = done.before(op.inv)
            prev = op.get("prev_version", list(T0_KEY))
            prev = (int(prev[0]), str(prev[1]))
            if prior is not None and prev < prior[0]:
                out.append(Violation(
                    "coverability", "consolidation",
                    f"{block}: {op.op_id} succeeded on version {_fmt(prev)} although {prior[1]} "
                    f"had already produced {_fmt(prior[0])}", (prior[1], op.op_id)))
    return out


# -- linearizability --------------------------------------------------------------------------

@dataclass
class LinearizabilityResult:
    ok: bool
    witness: list = field(default_factory=list)
    violation: tuple = ()
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _register_ops(ops: list[Op], block) -> list[Op]:
    return [op for op in ops if op.kind in ("write", "read") and op.get("block") == block]


def _is_write(op: Op) -> bool:
    return op.kind == "write" and op.complete and op.get("flag") == "chg"


def check_linearizable(log, block, op_cap: int = DEFAULT_OP_CAP) -> LinearizabilityResult:
    """Tag-ordered linearizability of one block's read/write history.

    Writes that returned ``unchg`` behave as reads. Writes that never responded
    are accounted for through the tags readers return.
    """
    ops = _register_ops(collect_ops(_as_log(log)), block)
    if len(ops) > op_cap:
        raise CheckLimitError(f"{block}: {len(ops)} operations exceed the cap of {op_cap}")
    writes = {}
    pending_writers = defaultdict(int)
    for op in ops:
        if _is_write(op):
            if op.tag in writes:
                return LinearizabilityResult(False, violation=(writes[op.tag].op_id, op.op_id),
                                             reason=f"two writes produced {_fmt(op.tag)}")
            writes[op.tag] = op
        elif op.kind == "write" and not op.complete:
            pending_writers[op.node] += 1
    pending_tokens = set()
    for node in pending_writers:
        try:
            pending_tokens.add(writer_token(node).hex())
        except ValueError:
            pass

    done = [op for op in ops if op.complete]
    keyed = []
    for op in done:
        tag = op.tag
        if _is_write(op):
            keyed.append((op, (tag, 0)))
            continue
        if tag == T0_KEY:
            if op.get("digest") != V0_DIGEST:
                return LinearizabilityResult(False, violation=(op.op_id,),
                                             reason="initial tag returned with a non-initial value")
        elif tag in writes:
            if writes[tag].get("digest") != op.get("digest"):
                return LinearizabilityResult(False, violation=(writes[tag].op_id, op.op_id),
                                             reason=f"value for {_fmt(tag)} differs from the one written")
        elif tag[1] not in pending_tokens:
            return LinearizabilityResult(False, violation=(op.op_id,),
                                         reason=f"{op.op_id} returned {_fmt(tag)} which no write produced")
        keyed.append((op, (tag, 1)))

    # every operation must order after everything that finished before it started
    finished = _PrefixMax((op.resp, key, op.op_id) for op, key in keyed)
    for op, key in keyed:
        prior = finished.before(op.inv)
        if prior is not None and key < prior[0]:
            return LinearizabilityResult(False, violation=(prior[1], op.op_id),
                                         reason=f"{op.op_id} is ordered before {prior[1]} "
                                                f"which finished before it started")
    witness = [op.op_id for op, key in sorted(keyed, key=lambda x: (x[1], x[0].inv))]
    return LinearizabilityResult(True, witness=witness)


def brute_force_linearizable(log, block, limit: int = BRUTE_FORCE_LIMIT) -> LinearizabilityResult:
    """Exhaustive Wing & Gong search over a small register history.

    Register values are (tag, digest) pairs. Writes that did not respond may be
    placed anywhere after their invocation or left out.
    """
    ops = _register_ops(collect_ops(_as_log(log)), block)
    if len(ops) > limit:
        raise CheckLimitError(f"{block}: {len(ops)} operations exceed brute-force limit {limit}")
    pending_write_values = _pending_write_values(ops)
    entries = [op for op in ops if op.complete or op.kind == "write"]
    n = len(entries)
    end = [op.resp if op.complete else float("inf") for op in entries]
    required = frozenset(i for i, op in enumerate(entries) if op.complete)

    def options(i):
        op = entries[i]
        if _is_write(op):
            return [("w", (op.tag, op.get("digest")))]
        if op.kind == "write" and not op.complete:
            return [("w", v) for v in pending_write_values.get(op.node, [])] + [("skip", None)]
        return [("r", (op.tag, op.get("digest")))]

    memo = set()
    order: list[str] = []

    def search(done: frozenset, value) -> bool:
        if required <= done:
            return True
        state = (done, value)
        if state in memo:
            return False
        memo.add(state)
        remaining = [i for i in range(n) if i not in done]
        horizon = min(end[i] for i in remaining)
        for i in remaining:
            if entries[i].inv > horizon:
                continue
            for kind, v in options(i):
                if kind == "r" and v != value:
                    continue
                order.append(entries[i].op_id)
                if search(done | {i}, v if kind == "w" else value):
                    return True
                order.pop()
        return False

    if search(frozenset(), (T0_KEY, V0_DIGEST)):
        return LinearizabilityResult(True, witness=list(order))
    return LinearizabilityResult(False, reason="no sequential order matches the history")


def _pending_write_values(ops: list[Op]) -> dict:
    values = defaultdict(list)
    tokens = {}
    pending = {op.node for op in ops if op.kind == "write" and not op.complete}
    for node in pending:
        try:
            tokens[writer_token(node).hex()] = node
        except ValueError:
            pass
    written = {op.tag for op in ops if _is_write(op)}
    for op in ops:
        if op.complete and op.tag not in written and op.tag[1] in tokens:
            pair = (op.tag, op.get("digest"))
            node = tokens[op.tag[1]]
            if pair not in values[node]:
                values[node].append(pair)
    return values


def check_all_blocks_linearizable(log, op_cap: int = DEFAULT_OP_CAP) -> list[Violation]:
    log = _as_log(log)
    blocks = {op.get("block") for op in collect_ops(log) if op.kind in ("write", "read")}
    out = []
    for block in sorted(blocks, key=str):
        result = check_linearizable(log, block, op_cap)
        if not result:
            out.append(Violation("linearizable", "order", f"{block}: {result.reason}", result.violation))
    return out


# -- fragmented connectivity ------------------------------------------------------------------

def _is_subsequence(short: list, long: list) -> bool:
    it = iter(long)
    return all(any(x == y for y in it) for x in short)


def check_connectivity(log) -> list[Violation]:
    ops = collect_ops(_as_log(log))
    reads = defaultdict(list)
    for op in ops:
        if op.kind == "fm-read" and op.complete:
            reads[op.get("file")].append(op)
    out = []
    for fid in sorted(reads, key=str):
        genesis = f"{fid}/_/0"
        seqs = []
        for op in sorted(reads[fid], key=lambda o: o.resp):
            chain = op.get("chain") or []
            keys = [k for k, _ in chain]
            problem = None
            if not chain or keys[0] != genesis:
                problem = "chain does not start at the genesis block"
            elif len(set(keys)) != len(keys):
                problem = "chain visits a block twice"
            elif chain[-1][1] is not None:
                problem = "chain is not terminated by an empty pointer"
            else:
                for (key, ptr), (nxt, _) in zip(chain, chain[1:]):
                    if ptr != nxt:
                        problem = f"{key} points to {ptr} but the next block read is {nxt}"
                        break
            if problem:
                out.append(Violation("connectivity", "chain", f"{fid}: {op.op_id}: {problem}", (op.op_id,)))
            seqs.append((op, keys))
        for (a, ka), (b, kb) in itertools.combinations(seqs, 2):
            first, later = (a, ka), (b, kb)
            if b.resp < a.inv:
                first, later = (b, kb), (a, ka)
            elif not a.resp < b.inv:
                continue
            if not _is_subsequence(first[1], later[1]):
                out.append(Violation("connectivity", "supersequence",
                                     f"{fid}: {later[0].op_id} lost blocks seen by {first[0].op_id}",
                                     (first[0].op_id, later[0].op_id)))
    return out


# -- configuration sequences ------------------------------------------------------------------

def _last_finalized(snapshot: list) -> int:
    idx = 0
    for i, (_, status) in enumerate(snapshot):
        if status == "F":
            idx = i
    return idx


def check_cseq_properties(log) -> list[Violation]:
    ops = collect_ops(_as_log(log))
    by_block = defaultdict(list)
    recons = defaultdict(list)
    chg = defaultdict(list)
    for op in ops:
        if not op.complete:
            continue
        if op.resp_rec.get("cseq") is not None:
            by_block[op.get("block")].append(op)
        if op.kind == "recon":
            recons[op.get("block")].append(op)
        elif op.kind == "write" and op.get("flag") == "chg":
            chg[op.get("block")].append(op)
    out = []
    for block in sorted(by_block, key=str):
        snaps = by_block[block]
        owner: dict[int, tuple] = {}
        for op in sorted(snaps, key=lambda o: o.resp):
            snap = op.resp_rec["cseq"]
            if not snap or snap[0][1] != "F":
                out.append(Violation("cseq", "genesis", f"{block}: {op.op_id} has no finalized first entry",
                                     (op.op_id,)))
            ids = [cid for cid, _ in snap]
            if len(set(ids)) != len(ids):
                out.append(Violation("cseq", "uniqueness",
                                     f"{block}: {op.op_id} lists a configuration twice", (op.op_id,)))
            for i, cid in enumerate(ids):
                seen = owner.setdefault(i, (cid, op.op_id))
                if seen[0] != cid:
                    out.append(Violation("cseq", "uniqueness",
                                         f"{block}: index {i} is {seen[0]} for {seen[1]} but {cid} for {op.op_id}",
                                         (seen[1], op.op_id)))
        progress = _PrefixMax((op.resp, _last_finalized(op.resp_rec["cseq"]), op.op_id) for op in snaps)
        for op in snaps:
            prior = progress.before(op.inv)
            mine = _last_finalized(op.resp_rec["cseq"])
            if prior is not None and mine < prior[0]:
                out.append(Violation("cseq", "progress",
                                     f"{block}: {op.op_id} sees finalized index {mine} after {prior[1]} saw {prior[0]}",
                                     (prior[1], op.op_id)))
    for block in sorted(recons, key=str):
        written = _PrefixMax((op.resp, op.tag, op.op_id) for op in chg.get(block, []))
        for op in recons[block]:
            prior = written.before(op.inv)
            if prior is not None and op.tag < prior[0]:
                out.append(Violation("cseq", "survivability",
                                     f"{block}: {op.op_id} moved {_fmt(op.tag)} but {prior[1]} had completed "
                                     f"with {_fmt(prior[0])}", (prior[1], op.op_id)))
    return out


CHECKS = {
    "dap": check_dap_properties,
    "coverability": check_coverability,
    "linearizable": check_all_blocks_linearizable,
    "connectivity": check_connectivity,
    "cseq": check_cseq_properties,
}


def check_all(log, properties=PROPERTIES) -> dict[str, list[Violation]]:
    log = _as_log(log)
    return {name: CHECKS[name](log) for name in properties}
