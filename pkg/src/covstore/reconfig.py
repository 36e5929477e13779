"""Configuration sequences: discovery, consensus on the successor, and the recon operation.

Every object (block) has its own configuration sequence. The ``nextC`` cell
and consensus acceptor for "the configuration after c" live on c's servers,
keyed by (object, c.id). Configuration ids travel on the wire; the
:class:`Configuration` values are looked up in a directory shared by all
nodes, the way a deployment would resolve an id to a membership list.
"""

from __future__ import annotations

from .dap import DapClient
from .faults import NO_FAULTS, Faults
from .netsim.history import digest
from .netsim.sim import Call, Sleep
from .types import ConfigEntry, Configuration, Status, TaggedValue, majority, max_tagged, quorum_size
from .wire import Accept, Ballot, Prepare, ReadNext, WriteNext

# consensus retry backoff, drawn uniformly per attempt
BACKOFF_NS = (200_000, 2_000_000)


class LocalCseq:
    """A client's view of one object's configuration sequence."""

    def __init__(self, c0_id: str):
        self.entries: list[ConfigEntry] = [ConfigEntry(c0_id, Status.F)]

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> ConfigEntry:
        return self.entries[i]

    @property
    def last_index(self) -> int:
        return len(self.entries) - 1

    def last_finalized(self) -> int:
        for i in range(len(self.entries) - 1, -1, -1):
            if self.entries[i].status is Status.F:
                return i
        return 0

    def put(self, i: int, entry: ConfigEntry) -> None:
        if i == len(self.entries):
            self.entries.append(entry)
            return
        cur = self.entries[i]
        if cur.config_id != entry.config_id:
            raise RuntimeError(f"index {i} holds {cur.config_id}, discovered {entry.config_id}")
        if entry.status is Status.F:
            self.entries[i] = entry

    def snapshot(self) -> list:
        return [e.to_json() for e in self.entries]


class ObjectView:
    """Everything one client knows about one object: its cseq and per-configuration DAP state."""

    def __init__(self, proc, obj: str, directory: dict[str, Configuration], c0_id: str,
                 faults: Faults = NO_FAULTS):
        self.proc = proc
        self.obj = obj
        self.directory = directory
        self.faults = faults
        self.cseq = LocalCseq(c0_id)
        self._daps: dict[str, DapClient] = {}

    def config(self, i: int) -> Configuration:
        return self.directory[self.cseq[i].config_id]

    def dap(self, i: int) -> DapClient:
        cid = self.cseq[i].config_id
        client = self._daps.get(cid)
        if client is None:
            client = self._daps[cid] = DapClient(self.proc, self.obj, self.directory[cid], self.faults)
        return client

    def _head(self, c: Configuration) -> dict:
        return {"config_id": c.id, "obj": self.obj}


def get_next_config(view: ObjectView, c: Configuration):
    replies = yield Call({s: ReadNext(**view._head(c)) for s in c.servers}, quorum_size(c))
    found = [r.entry for r in replies.values() if r.entry is not None]
    for entry in found:
        if entry.status is Status.F:
            return entry
    return found[0] if found else None


def put_config(view: ObjectView, c: Configuration, entry: ConfigEntry):
    yield Call({s: WriteNext(entry=entry, **view._head(c)) for s in c.servers}, quorum_size(c))


def read_config(view: ObjectView):
    """Extend ``view.cseq`` by walking nextC cells from the last finalized entry."""
    op_id = view.proc.begin("read-config", block=view.obj)
    cseq = view.cseq
    i = cseq.last_finalized()
    while True:
        c = view.config(i)
        entry = yield from get_next_config(view, c)
        if entry is None:
            break
        cseq.put(i + 1, entry)
        yield from put_config(view, c, entry)
        i += 1
    view.proc.end(op_id, "read-config", block=view.obj, cseq=cseq.snapshot())
    return cseq


def propose(view: ObjectView, c: Configuration, value: str):
    """Single-decree Paxos among c's servers; returns the decided configuration id."""
    proc = view.proc
    op_id = proc.begin("consensus", block=view.obj, config=c.id, proposed=value)
    need = majority(c.n)
    counter = 0
    while True:
        ballot = Ballot(counter + 1, proc.name)
        promises = yield Call({s: Prepare(ballot=ballot, **view._head(c)) for s in c.servers}, need)
        if all(p.ok for p in promises.values()):
            prior = [p for p in promises.values() if p.accepted_ballot is not None]
            chosen = max(prior, key=lambda p: p.accepted_ballot).accepted_value if prior else value
            acks = yield Call({s: Accept(ballot=ballot, value=chosen, **view._head(c))
                               for s in c.servers}, need)
            if all(a.ok for a in acks.values()):
                proc.end(op_id, "consensus", block=view.obj, config=c.id, decided=chosen)
                return chosen
            replies = acks
        else:
            replies = promises
        counter = max(counter + 1, max(r.ballot.counter for r in replies.values()))
        yield Sleep(proc.rng.randint(*BACKOFF_NS))


def update_config(view: ObjectView):
    """Move the newest (tag, value) from the finalized prefix into the last configuration."""
    cseq = view.cseq
    nu = cseq.last_index
    op_id = view.proc.begin("update-config", block=view.obj, config=cseq[nu].config_id)
    best = None
    for i in range(cseq.last_finalized(), nu + 1):
        tv = yield from view.dap(i).get_data()
        best = max_tagged(best, tv)
    yield from view.dap(nu).put_data(best)
    view.proc.end(op_id, "update-config", block=view.obj, config=cseq[nu].config_id,
                  tag=best.tag.to_json(), digest=digest(best.value))
    return best


def recon(view: ObjectView, target: Configuration):
    """Append a successor configuration to the object's sequence and migrate its data.

    Returns ``(decided_id, transferred)``; the decided configuration may differ
    from ``target`` when a concurrent reconfigurer won consensus.
    """
    proc = view.proc
    op_id = proc.begin("recon", block=view.obj, proposed=target.id)
    view.directory.setdefault(target.id, target)
    yield from read_config(view)
    cseq = view.cseq
    last = cseq.last_index
    prev = view.config(last)
    decided = yield from propose(view, prev, target.id)
    cseq.put(last + 1, ConfigEntry(decided, Status.P))
    yield from put_config(view, prev, cseq[last + 1])
    transferred: TaggedValue = yield from update_config(view)
    final = ConfigEntry(decided, Status.F)
    cseq.put(last + 1, final)
    yield from put_config(view, prev, final)
    proc.end(op_id, "recon", block=view.obj, config=decided, tag=transferred.tag.to_json(),
             digest=digest(transferred.value), cseq=cseq.snapshot())
    return decided, transferred
