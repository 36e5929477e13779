"""Deterministic discrete-event simulator for message-passing client/server programs.

Client programs are generators that yield effects (:class:`Call`, :class:`Sleep`)
and are resumed by the event loop; servers are handler objects with a
``handle(msg) -> reply`` method. Channels are reliable and FIFO per
(sender, receiver) pair. Virtual time is in integer nanoseconds.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Generator

from .. import wire
from ..wire import Message
from .history import HistoryLog

MS = 1_000_000
SECOND = 1_000_000_000


@dataclass(frozen=True)
class Call:
    """Send ``requests[dest]`` to every dest; resume with the first ``need`` replies."""

    requests: dict
    need: int


@dataclass(frozen=True)
class Sleep:
    duration: int


@dataclass(frozen=True)
class Halt:
    """Block forever; the run ends with this process listed in the stall report."""

    reason: str


@dataclass(frozen=True)
class DelayModel:
    """Per-message link delay: uniform over [lo, hi], plus ``spike`` with probability ``spike_prob``."""

    lo: int = MS
    hi: int | None = None
    spike_prob: float = 0.0
    spike: int = 0

    @classmethod
    def fixed(cls, d: int) -> DelayModel:
        return cls(d, None)

    @classmethod
    def uniform(cls, lo: int, hi: int) -> DelayModel:
        return cls(lo, hi)

    def sample(self, rng: random.Random) -> int:
        d = self.lo if self.hi is None or self.hi == self.lo else rng.randint(self.lo, self.hi)
        if self.spike_prob and rng.random() < self.spike_prob:
            d += self.spike
        return d


@dataclass
class SimConfig:
    seed: int = 0
    delay: DelayModel = field(default_factory=DelayModel)
    crash_schedule: list = field(default_factory=list)
    byte_cost: float = 0.0
    horizon: int | None = None
    trace_messages: bool = True


@dataclass
class _Pending:
    call_id: bytes
    need: int
    replies: dict = field(default_factory=dict)
    verb: str = ""
    config: str = ""
    obj: str = ""


class ClientProcess:
    """Runtime handle handed to client code (the ``proc`` argument everywhere)."""

    def __init__(self, sim: Simulator, name: str, program: Callable):
        self.sim = sim
        self.name = name
        self.rng = random.Random(f"{sim.config.seed}/client/{name}")
        self.program = program
        self.gen: Generator | None = None
        self.done = False
        self.waiting: _Pending | None = None
        self.ops: list[list] = []
        self._op_counter = 0
        self._call_counter = 0

    @property
    def now(self) -> int:
        return self.sim.now

    def log(self, event: str, **fields) -> dict:
        return self.sim.history.append(self.sim.now, self.name, event, **fields)

    def begin(self, op: str, **fields) -> str:
        self._op_counter += 1
        op_id = f"{self.name}:{self._op_counter}"
        self.ops.append([op_id, 0, op])
        self.log("invoke", op=op, op_id=op_id, **fields)
        return op_id

    def end(self, op_id: str, op: str, **fields) -> dict:
        for i in range(len(self.ops) - 1, -1, -1):
            if self.ops[i][0] == op_id:
                _, nbytes, _ = self.ops.pop(i)
                break
        else:
            raise RuntimeError(f"{self.name}: ending unknown op {op_id}")
        return self.log("respond", op=op, op_id=op_id, bytes=nbytes, **fields)

    def charge(self, nbytes: int) -> None:
        for entry in self.ops:
            entry[1] += nbytes

    def next_call_id(self) -> bytes:
        self._call_counter += 1
        return wire.new_uuid(f"{self.sim.config.seed}/{self.name}/{self._call_counter}")


@dataclass
class SimResult:
    history: HistoryLog
    stalls: list
    end_time: int
    messages: int
    bytes: int

    @property
    def stalled(self) -> bool:
        return bool(self.stalls)


class Simulator:
    def __init__(self, config: SimConfig | None = None):
        self.config = config or SimConfig()
        self.now = 0
        self.history = HistoryLog()
        self.servers: dict[str, object] = {}
        self.clients: dict[str, ClientProcess] = {}
        self.crashed: set[str] = set()
        self._queue: list = []
        self._seq = 0
        self._net_rng = random.Random(f"{self.config.seed}/net")
        self._last_arrival: dict[tuple[str, str], int] = {}
        self.messages = 0
        self.bytes = 0
        for at, server in self.config.crash_schedule:
            self.inject_crash(server, at)

    def _push(self, at: int, kind: str, *payload) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (at, self._seq, kind, payload))

    def add_server(self, name: str, server) -> None:
        self.servers[name] = server

    def add_client(self, name: str, program: Callable, start: int = 0) -> ClientProcess:
        proc = ClientProcess(self, name, program)
        self.clients[name] = proc
        self._push(start, "start", name)
        return proc

    def inject_crash(self, server: str, at: int) -> None:
        self._push(at, "crash", server)

    # -- messaging ------------------------------------------------------------------------

    def _send(self, src: str, dst: str, msg: Message, charge: ClientProcess | None = None) -> None:
        size = wire.wire_size(msg)
        self.messages += 1
        self.bytes += size
        if charge is not None:
            charge.charge(size)
        if self.config.trace_messages:
            self.history.append(self.now, src, "send", op=msg.name, to=dst, config=msg.config_id,
                                block=msg.obj, msg=msg.op_uuid.hex(), bytes=size)
        delay = self.config.delay.sample(self._net_rng) + int(self.config.byte_cost * size)
        at = max(self.now + delay, self._last_arrival.get((src, dst), 0))
        self._last_arrival[(src, dst)] = at
        self._push(at, "deliver", src, dst, msg, size)

    def _deliver(self, src: str, dst: str, msg: Message, size: int) -> None:
        if dst in self.crashed:
            return
        if self.config.trace_messages:
            self.history.append(self.now, dst, "recv", op=msg.name, frm=src, config=msg.config_id,
                                block=msg.obj, msg=msg.op_uuid.hex(), bytes=size)
        server = self.servers.get(dst)
        if server is not None:
            reply = server.handle(msg)
            if reply is not None:
                self._send(dst, src, reply)
            return
        proc = self.clients[dst]
        if proc.ops:
            proc.charge(size)
        pend = proc.waiting
        if pend is None or pend.call_id != msg.op_uuid or src in pend.replies:
            return
        pend.replies[src] = msg
        if len(pend.replies) >= pend.need:
            proc.waiting = None
            self._advance(proc, pend.replies)

    # -- client driving -------------------------------------------------------------------

    def _advance(self, proc: ClientProcess, value) -> None:
        while True:
            try:
                effect = proc.gen.send(value)
            except StopIteration:
                proc.done = True
                return
            if isinstance(effect, Sleep):
                self._push(self.now + max(0, effect.duration), "wake", proc.name)
                return
            if isinstance(effect, Halt):
                proc.waiting = _Pending(b"", 1, verb=effect.reason)
                return
            if not isinstance(effect, Call):
                raise TypeError(f"{proc.name} yielded unsupported effect {effect!r}")
            call_id = proc.next_call_id()
            first = next(iter(effect.requests.values()), None)
            for dst, msg in effect.requests.items():
                stamped = replace(msg, op_uuid=call_id, sender=proc.name)
                self._send(proc.name, dst, stamped, charge=proc if proc.ops else None)
            if effect.need <= 0:
                value = {}
                continue
            proc.waiting = _Pending(call_id, effect.need,
                                    verb=first.name if first else "",
                                    config=first.config_id if first else "",
                                    obj=first.obj if first else "")
            return

    def run(self) -> SimResult:
        horizon = self.config.horizon
        while self._queue:
            at, _, kind, payload = self._queue[0]
            if horizon is not None and at > horizon:
                break
            heapq.heappop(self._queue)
            self.now = at
            if kind == "deliver":
                self._deliver(*payload)
            elif kind == "wake":
                proc = self.clients[payload[0]]
                self._advance(proc, None)
            elif kind == "start":
                proc = self.clients[payload[0]]
                proc.gen = proc.program(proc)
                self._advance(proc, None)
            elif kind == "crash":
                server = payload[0]
                if server not in self.crashed:
                    self.crashed.add(server)
                    if server in self.servers:
                        # fail-stop: state is lost for good
                        self.servers[server] = None
                        del self.servers[server]
                    self.history.append(self.now, server, "crash")
        return SimResult(self.history, self._stall_report(), self.now, self.messages, self.bytes)

    def _stall_report(self) -> list:
        stalls = []
        for proc in self.clients.values():
            if proc.done:
                continue
            info = {"node": proc.name, "pending_ops": [[op_id, kind] for op_id, _, kind in proc.ops]}
            if proc.waiting is not None:
                w = proc.waiting
                info.update(waiting_for=w.verb, config=w.config, block=w.obj,
                            replies=len(w.replies), need=w.need)
            stalls.append(info)
        return stalls


def run(sim_config: SimConfig, topology, workload) -> SimResult:
    """Build a simulator from ``topology`` (name -> server) and ``workload`` (name -> program)."""
    sim = Simulator(sim_config)
    for name, server in topology.items():
        sim.add_server(name, server)
    for name, program in workload.items():
        sim.add_client(name, program)
    return sim.run()
