"""Real TCP transport for the same client programs and server automata.

Frames are the ``wire.encode`` byte strings (u32 length prefix included).
Histories use wall-clock nanoseconds, so runs are not reproducible; this path
exists to show the protocol code is not tied to the simulator.
"""

from __future__ import annotations

import asyncio
import random
import time
from dataclasses import replace

from .. import wire
from .history import HistoryLog
from .sim import Call, Halt, Sleep


class HaltedError(RuntimeError):
    pass


async def read_frame(reader: asyncio.StreamReader) -> bytes:
    head = await reader.readexactly(4)
    body = await reader.readexactly(int.from_bytes(head, "big"))
    return head + body


async def serve(server, host: str = "127.0.0.1", port: int = 0) -> asyncio.base_events.Server:
    """Expose a replica server's ``handle`` over TCP; returns the listening asyncio server."""

    async def on_client(reader, writer):
        try:
            while True:
                msg = wire.decode(await read_frame(reader))
                reply = server.handle(msg)
                if reply is not None:
                    writer.write(wire.encode(reply))
                    await writer.drain()
        except asyncio.IncompleteReadError:
            pass
        finally:
            writer.close()

    return await asyncio.start_server(on_client, host, port)


class SocketProcess:
    """Counterpart of the simulator's client handle, backed by real connections."""

    def __init__(self, name: str, addresses: dict[str, tuple[str, int]], history: HistoryLog,
                 seed: int = 0):
        self.name = name
        self.addresses = addresses
        self.history = history
        self.rng = random.Random(f"{seed}/client/{name}")
        self.ops: list[list] = []
        self._op_counter = 0
        self._call_counter = 0
        self._conns: dict[str, tuple] = {}
        self._waiters: dict[bytes, tuple] = {}
        self._t0 = time.monotonic_ns()

    @property
    def now(self) -> int:
        return time.monotonic_ns() - self._t0

    def log(self, event: str, **fields) -> dict:
        return self.history.append(self.now, self.name, event, **fields)

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
                return self.log("respond", op=op, op_id=op_id, bytes=nbytes, **fields)
        raise RuntimeError(f"{self.name}: ending unknown op {op_id}")

    def charge(self, nbytes: int) -> None:
        for entry in self.ops:
            entry[1] += nbytes

    async def _conn(self, dest: str):
        conn = self._conns.get(dest)
        if conn is None:
            reader, writer = await asyncio.open_connection(*self.addresses[dest])
            task = asyncio.create_task(self._pump(dest, reader))
            conn = self._conns[dest] = (writer, task)
        return conn[0]

    async def _pump(self, dest: str, reader) -> None:
        try:
            while True:
                frame = await read_frame(reader)
                self.charge(len(frame))
                msg = wire.decode(frame)
                waiter = self._waiters.get(msg.op_uuid)
                if waiter is None:
                    continue
                replies, need, done = waiter
                replies.setdefault(dest, msg)
                if len(replies) >= need and not done.done():
                    done.set_result(dict(replies))
        except (asyncio.IncompleteReadError, ConnectionError):
            pass

    async def call(self, effect: Call) -> dict:
        self._call_counter += 1
        call_id = wire.new_uuid(f"{self.name}/{self._call_counter}/{self._t0}")
        done = asyncio.get_running_loop().create_future()
        self._waiters[call_id] = ({}, effect.need, done)
        for dest, msg in effect.requests.items():
            frame = wire.encode(replace(msg, op_uuid=call_id, sender=self.name))
            self.charge(len(frame))
            writer = await self._conn(dest)
            writer.write(frame)
            await writer.drain()
        try:
            return await done
        finally:
            del self._waiters[call_id]

    async def drive(self, program):
        """Run a client program (a generator function taking this handle) to completion."""
        gen = program(self)
        value = None
        while True:
            try:
                effect = gen.send(value)
            except StopIteration as stop:
                return stop.value
            if isinstance(effect, Sleep):
                await asyncio.sleep(effect.duration / 1e9)
                value = None
            elif isinstance(effect, Call):
                value = await self.call(effect)
            elif isinstance(effect, Halt):
                raise HaltedError(effect.reason)
            else:
                raise TypeError(f"unsupported effect {effect!r}")

    async def close(self) -> None:
        for writer, task in self._conns.values():
            writer.close()
            task.cancel()
        self._conns.clear()
