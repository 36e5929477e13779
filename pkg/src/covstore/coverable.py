"""Coverable (versioned) read and write over an object's configuration sequence.

A write only installs its value when the writer's local ``version`` equals the
newest tag it discovers; otherwise it degrades to a read and reports
``unchg``. With ``static=True`` the client never consults the sequence and
uses the initial configuration alone (the fixed-membership variant).
"""

from __future__ import annotations

from .faults import NO_FAULTS, Faults
from .netsim.history import digest
from .reconfig import ObjectView, read_config
from .types import T0, Configuration, Flag, TaggedValue, WriteOutcome, max_tagged, writer_token


class CoverableClient:
    def __init__(self, proc, obj: str, directory: dict[str, Configuration], c0_id: str,
                 faults: Faults = NO_FAULTS, static: bool = False):
        self.proc = proc
        self.view = ObjectView(proc, obj, directory, c0_id, faults)
        self.faults = faults
        self.static = static
        self.version = T0
        self.wid = writer_token(proc.name)

    @property
    def obj(self) -> str:
        return self.view.obj

    @property
    def cseq(self):
        return self.view.cseq

    def _discover(self):
        if not self.static:
            yield from read_config(self.view)
        best = None
        for i in range(self.cseq.last_finalized(), self.cseq.last_index + 1):
            tv = yield from self.view.dap(i).get_data()
            best = max_tagged(best, tv)
        return best

    def _propagate(self, tv: TaggedValue):
        """put-data into the last configuration until no newer configuration shows up."""
        targets = []
        while True:
            nu = self.cseq.last_index
            targets.append(self.cseq[nu].config_id)
            yield from self.view.dap(nu).put_data(tv)
            if self.static:
                return targets
            yield from read_config(self.view)
            if self.cseq.last_index == nu:
                return targets

    def cvr_write(self, value: bytes):
        op_id = self.proc.begin("write", block=self.obj)
        found = yield from self._discover()
        prev = self.version
        if prev == found.tag or self.faults.skip_version_check:
            tv, flag = TaggedValue(found.tag.next(self.wid), value), Flag.CHG
        else:
            tv, flag = found, Flag.UNCHG
        self.version = tv.tag
        targets = yield from self._propagate(tv)
        self.proc.end(op_id, "write", block=self.obj, tag=tv.tag.to_json(), digest=digest(tv.value),
                      flag=flag.value, prev_version=prev.to_json(),
                      discovered=found.tag.to_json(), configs=targets)
        return WriteOutcome(tv, flag, prev)

    def cvr_read(self):
        op_id = self.proc.begin("read", block=self.obj)
        found = yield from self._discover()
        self.version = found.tag
        targets = yield from self._propagate(found)
        self.proc.end(op_id, "read", block=self.obj, tag=found.tag.to_json(),
                      digest=digest(found.value), configs=targets)
        return found
