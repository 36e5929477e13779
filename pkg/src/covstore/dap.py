"""Client-side data access primitives (get-tag, get-data, put-data) for one configuration.

All primitives are generators driven by the runtime (simulator or socket driver):
they ``yield`` :class:`~covstore.netsim.Call` effects and receive the quorum's
replies back.
"""

from __future__ import annotations

from collections import defaultdict

from . import erasure
from .faults import NO_FAULTS, Faults
from .netsim.history import digest
from .netsim.sim import Call, Halt
from .types import T0, V0, Configuration, DapKind, TaggedValue, majority, quorum_size
from .wire import PutData, QueryList, QueryTag


def dap_quorum(c: Configuration, faults: Faults = NO_FAULTS) -> int:
    if faults.ec_majority_quorum and c.dap_kind.erasure_coded:
        return majority(c.n)
    return quorum_size(c)


class DapClient:
    """Per-(client, object, configuration) DAP state.

    ``tag_cache``/``value_cache`` are the last pair this client installed with a
    completed put-data in this configuration; only the optimized EC variant
    consults them.
    """

    def __init__(self, proc, obj: str, config: Configuration, faults: Faults = NO_FAULTS):
        self.proc = proc
        self.obj = obj
        self.config = config
        self.faults = faults
        self.tag_cache = T0
        self.value_cache = V0
        self.decodes = 0
        self.messages_sent = 0

    @property
    def quorum(self) -> int:
        return dap_quorum(self.config, self.faults)

    def _head(self) -> dict:
        return {"config_id": self.config.id, "obj": self.obj}

    def _call(self, make):
        requests = {s: make(i, s) for i, s in enumerate(self.config.servers)}
        self.messages_sent += len(requests)
        replies = yield Call(requests, self.quorum)
        return replies

    def _begin(self, op: str, **fields) -> str:
        return self.proc.begin(op, block=self.obj, config=self.config.id, **fields)

    def _end(self, op_id: str, op: str, tv: TaggedValue | None = None, **fields):
        if tv is not None:
            fields.update(tag=tv.tag.to_json(), digest=digest(tv.value))
        self.proc.end(op_id, op, block=self.obj, config=self.config.id, **fields)

    # -- get-tag --------------------------------------------------------------------------

    def get_tag(self):
        op_id = self._begin("get-tag")
        replies = yield from self._call(lambda i, s: QueryTag(**self._head()))
        tag = max(r.tag for r in replies.values())
        self.proc.end(op_id, "get-tag", block=self.obj, config=self.config.id, tag=tag.to_json())
        return tag

    # -- get-data -------------------------------------------------------------------------

    def get_data(self):
        op_id = self._begin("get-data")
        kind = self.config.dap_kind
        if kind is DapKind.ABD:
            tv = yield from self._abd_get()
        elif kind is DapKind.EC_OPT:
            tv = yield from self._ec_opt_get()
        else:
            tv = yield from self._ec_classic_get()
        self._end(op_id, "get-data", tv)
        return tv

    def _abd_get(self):
        replies = yield from self._call(lambda i, s: QueryList(**self._head()))
        best = None
        for r in replies.values():
            for tag, value in r.entries:
                if best is None or best.tag < tag:
                    best = TaggedValue(tag, value)
        return best

    def _decode(self, tag, elements) -> TaggedValue:
        self.decodes += 1
        return TaggedValue(tag, erasure.decode(elements, self.config.n, self.config.k))

    def _ec_opt_get(self):
        cached = self.tag_cache
        replies = yield from self._call(lambda i, s: QueryList(tag=cached, **self._head()))
        valued = defaultdict(list)
        cached_hits = 0
        for r in replies.values():
            for tag, elem in r.entries:
                if elem is not None:
                    valued[tag].append(elem)
                elif tag == cached:
                    cached_hits += 1
        k = self.config.k
        decodable = [t for t, elems in valued.items() if len(elems) >= k]
        if cached_hits >= k:
            decodable.append(cached)
        if not decodable:
            yield Halt(f"get-data: no decodable tag among {len(replies)} lists")
        t_max = max(decodable)
        if t_max == cached:
            return TaggedValue(cached, self.value_cache)
        return self._decode(t_max, valued[t_max])

    def _ec_classic_get(self):
        replies = yield from self._call(lambda i, s: QueryList(**self._head()))
        seen = defaultdict(int)
        valued = defaultdict(list)
        for r in replies.values():
            for tag, elem in r.entries:
                seen[tag] += 1
                if elem is not None:
                    valued[tag].append(elem)
        k = self.config.k
        t_star = max((t for t, c in seen.items() if c >= k), default=None)
        t_dec = max((t for t, e in valued.items() if len(e) >= k), default=None)
        if t_dec is None or t_dec != t_star:
            yield Halt(f"get-data: highest tag seen in {k} lists is not decodable")
        return self._decode(t_dec, valued[t_dec])

    # -- put-data -------------------------------------------------------------------------

    def put_data(self, tv: TaggedValue):
        op_id = self._begin("put-data", tag=tv.tag.to_json(), digest=digest(tv.value))
        kind = self.config.dap_kind
        sent = 0
        if kind is DapKind.ABD:
            yield from self._call(lambda i, s: PutData(tag=tv.tag, payload=tv.value, **self._head()))
            sent = self.config.n
        elif kind is DapKind.EC_CLASSIC or tv.tag > self.tag_cache:
            elements = erasure.encode(tv.value, self.config.n, self.config.k)
            yield from self._call(lambda i, s: PutData(tag=tv.tag, payload=elements[i], **self._head()))
            sent = self.config.n
            if tv.tag > self.tag_cache:
                self.tag_cache, self.value_cache = tv.tag, tv.value
        self.proc.end(op_id, "put-data", block=self.obj, config=self.config.id,
                      tag=tv.tag.to_json(), digest=digest(tv.value), sent=sent)

