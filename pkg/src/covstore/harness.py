"""Scenario runner: builds a topology and stochastic workload, simulates, checks and measures."""

from __future__ import annotations

import csv
import json
import random
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import checker
from .coverable import CoverableClient
from .faults import NO_FAULTS, Faults
from .fragment import ChunkerParams, FragmentClient
from .netsim import MS, SECOND, DelayModel, SimConfig, Simulator, Sleep
from .reconfig import recon
from .server import ReplicaServer
from .types import Configuration, DapKind, fault_bound

SCENARIOS = ("file-sizes", "scalability", "block-sizes", "recon-same", "recon-random", "recon-servers")
SERVER_CHOICES = (3, 5, 7, 9, 11)
# parity used for each server count when the count is drawn at random
PARITY_FOR = {3: 1, 5: 2, 7: 3, 9: 4, 11: 5}
DAP_NAMES = {"abd": DapKind.ABD, "ec": DapKind.EC_OPT, "ec-classic": DapKind.EC_CLASSIC}
FILE_ID = "f"


@dataclass(frozen=True)
class Algorithm:
    name: str
    dap: DapKind
    fragmented: bool
    static: bool = False


ALGORITHMS = {a.name: a for a in (
    Algorithm("CoABD", DapKind.ABD, False, static=True),
    Algorithm("CoABD-F", DapKind.ABD, True, static=True),
    Algorithm("CoARES-ABD", DapKind.ABD, False),
    Algorithm("CoARES-ABD-F", DapKind.ABD, True),
    Algorithm("CoARES-EC", DapKind.EC_OPT, False),
    Algorithm("CoARES-EC-F", DapKind.EC_OPT, True),
    Algorithm("CoARES-ECC", DapKind.EC_CLASSIC, False),
    Algorithm("CoARES-ECC-F", DapKind.EC_CLASSIC, True),
)}
DEFAULT_ALGOS = ("CoABD", "CoABD-F", "CoARES-ABD", "CoARES-ABD-F", "CoARES-EC", "CoARES-EC-F")


def ares_name(dap: DapKind, fragmented: bool) -> str:
    base = {DapKind.ABD: "CoARES-ABD", DapKind.EC_OPT: "CoARES-EC", DapKind.EC_CLASSIC: "CoARES-ECC"}[dap]
    return base + ("-F" if fragmented else "")


@dataclass
class ScenarioParams:
    seed: int = 0
    servers: int = 5
    writers: int = 2
    readers: int = 2
    dap: str = "ec"
    parity: int | None = None
    delta: int | None = None
    block_min: int = 512 * 1024
    block_avg: int = 512 * 1024
    block_max: int = 1024 * 1024
    file_size: int = 1024 * 1024
    ops: int = 5
    edit_size: int = 1024
    edit_mode: str = "mixed"
    r_int: int = 3
    w_int: int = 3
    time_unit: int = SECOND
    recon_period: int = 15
    recons: int = 5
    delay_lo: int = MS
    delay_hi: int = 3 * MS
    byte_cost: float = 1.0
    crashes: list = field(default_factory=list)
    trace_messages: bool = True
    algorithms: tuple | None = None
    file_sizes: tuple = tuple(1 << s for s in range(20, 27))
    server_counts: tuple = SERVER_CHOICES
    block_settings: tuple = ((256 << 10, 256 << 10, 512 << 10), (512 << 10, 512 << 10, 1 << 20))
    faults: Faults = NO_FAULTS

    @property
    def chunker(self) -> ChunkerParams:
        return ChunkerParams(self.block_min, self.block_avg, self.block_max)

    def effective_delta(self) -> int:
        return self.delta if self.delta is not None else max(1, self.writers)

    def k_for(self, n: int, dap: DapKind) -> int:
        if not dap.erasure_coded:
            return 1
        m = self.parity if self.parity is not None else PARITY_FOR.get(n, (n - 1) // 2)
        return n - m


@dataclass
class RunResult:
    algorithm: str
    label: str
    history: object
    stalls: list
    violations: dict
    metrics: dict
    end_time: int

    @property
    def ok(self) -> bool:
        return not self.stalls and not any(self.violations.values())


def stochastic_gaps(rng: random.Random, interval: int, count: int, unit: int) -> list[int]:
    """Waits before each of ``count`` operations, uniform over 1..interval units."""
    return [rng.randint(1, interval) * unit for _ in range(count)]


def initial_content(seed: int, size: int) -> bytes:
    return random.Random(f"{seed}/file").randbytes(size)


def edit(content: bytes, rng: random.Random, size: int, mode: str) -> bytes:
    """Apply one constant-size edit at a random offset."""
    kind = rng.choice(("overwrite", "insert", "delete")) if mode == "mixed" else mode
    patch = rng.randbytes(size)
    if not content:
        return patch
    if kind == "delete" and len(content) > 2 * size:
        at = rng.randrange(len(content) - size)
        return content[:at] + content[at + size:]
    if kind == "insert":
        at = rng.randrange(len(content) + 1)
        return content[:at] + patch + content[at:]
    at = rng.randrange(max(1, len(content) - size + 1))
    return content[:at] + patch + content[at + size:]


class _Run:
    """One simulation of one algorithm under one parameter point."""

    def __init__(self, params: ScenarioParams, algo: Algorithm, recon_mode: str | None):
        self.params = params
        self.algo = algo
        self.recon_mode = recon_mode
        n = params.servers
        pool = max(n, max(SERVER_CHOICES)) if recon_mode == "servers" else n
        self.pool = [f"s{i}" for i in range(pool)]
        dap = algo.dap
        self.c0 = Configuration("c0", self.pool[:n], dap, params.k_for(n, dap), params.effective_delta())
        self.directory = {"c0": self.c0}
        self.sim = Simulator(SimConfig(
            seed=params.seed,
            delay=DelayModel.uniform(params.delay_lo, params.delay_hi),
            crash_schedule=list(params.crashes),
            byte_cost=params.byte_cost,
            trace_messages=params.trace_messages,
        ))
        for s in self.pool:
            self.sim.add_server(s, ReplicaServer(s, self.directory, params.faults))

    # -- client programs ------------------------------------------------------------------

    def _client(self, proc):
        p = self.params
        if self.algo.fragmented:
            return FragmentClient(proc, FILE_ID, self.directory, "c0", p.chunker, p.faults, self.algo.static)
        return CoverableClient(proc, FILE_ID, self.directory, "c0", p.faults, self.algo.static)

    def _read(self, client):
        if self.algo.fragmented:
            _, content = yield from client.fm_read()
            return content
        tv = yield from client.cvr_read()
        return tv.value

    def _update(self, client, content: bytes):
        """Write ``content``; returns the file content this client now considers current."""
        if self.algo.fragmented:
            yield from client.fm_update(content)
            return b"".join(b.data for b in client.chain[1:])
        outcome = yield from client.cvr_write(content)
        return outcome.tagged.value

    def setup(self, proc):
        client = self._client(proc)
        yield from self._update(client, initial_content(self.params.seed, self.params.file_size))
        self._spawn(proc.now)

    def writer(self, proc):
        p = self.params
        client = self._client(proc)
        content = yield from self._read(client)
        for gap in stochastic_gaps(proc.rng, p.w_int, p.ops, p.time_unit):
            yield Sleep(gap)
            if self.algo.fragmented and client.stale:
                content = yield from self._read(client)
            content = yield from self._update(client, edit(content, proc.rng, p.edit_size, p.edit_mode))

    def reader(self, proc):
        p = self.params
        client = self._client(proc)
        for gap in stochastic_gaps(proc.rng, p.r_int, p.ops, p.time_unit):
            yield Sleep(gap)
            yield from self._read(client)

    def reconfigurer(self, proc):
        p = self.params
        rng = random.Random(f"{p.seed}/recon")
        client = self._client(proc)
        dap = self.c0.dap_kind
        ec_kind = dap if dap.erasure_coded else DapKind.EC_OPT
        for i in range(1, p.recons + 1):
            yield Sleep(p.recon_period * p.time_unit)
            servers = self.c0.servers
            if self.recon_mode == "random":
                dap = rng.choice((DapKind.ABD, ec_kind))
            elif self.recon_mode == "servers":
                dap = ec_kind if dap is DapKind.ABD else DapKind.ABD
                n = rng.choice(SERVER_CHOICES)
                servers = tuple(sorted(rng.sample(self.pool, n), key=self.pool.index))
            target = Configuration(f"c{i}", servers, dap, p.k_for(len(servers), dap), p.effective_delta())
            if self.algo.fragmented:
                yield from client.fm_reconfig(target)
            else:
                yield from recon(client.view, target)

    def _spawn(self, now: int) -> None:
        p = self.params
        for i in range(p.writers):
            self.sim.add_client(f"w{i}", self.writer, start=now)
        for i in range(p.readers):
            self.sim.add_client(f"r{i}", self.reader, start=now)
        if self.recon_mode is not None and not self.algo.static:
            self.sim.add_client("g0", self.reconfigurer, start=now)

    def run(self, label: str) -> RunResult:
        self.sim.add_client("init", self.setup)
        result = self.sim.run()
        violations = checker.check_all(result.history)
        metrics = collect_metrics(result.history)
        return RunResult(self.algo.name, label, result.history, result.stalls, violations,
                         metrics, result.end_time)


def _counts(node: str, op: str) -> bool:
    # updates are measured at writers, reads at readers
    if op in ("update", "write"):
        return node.startswith("w")
    return node.startswith("r")


def collect_metrics(history) -> dict:
    """Latency and byte totals of the workload's top-level operations."""
    top = {"update", "fm-read"}
    plain = {"write", "read"}
    fragmented = any(r.get("op") in top for r in history.records if r["event"] == "invoke")
    kinds = top if fragmented else plain
    inv = {}
    stats = {"update": [], "read": []}
    changed = 0
    blocks = None
    depth = {}
    for rec in history.records:
        if rec["event"] not in ("invoke", "respond"):
            continue
        node = rec["node"]
        if rec["event"] == "invoke":
            depth[node] = depth.get(node, 0) + 1
            if depth[node] == 1 and rec["op"] in kinds and _counts(node, rec["op"]):
                inv[rec["op_id"]] = rec["vtime"]
            continue
        depth[node] -= 1
        start = inv.pop(rec["op_id"], None)
        if start is None:
            continue
        kind = "update" if rec["op"] in ("update", "write") else "read"
        stats[kind].append((rec["vtime"] - start, rec.get("bytes", 0)))
        if kind == "update":
            flags = [w[1] for w in rec.get("writes", [])] if fragmented else [rec.get("flag")]
            changed += all(f == "chg" for f in flags)
        elif fragmented:
            blocks = len(rec.get("chain", []))
    out = {}
    for kind, rows in stats.items():
        out[f"{kind}_count"] = len(rows)
        out[f"{kind}_latency_mean"] = sum(r[0] for r in rows) / len(rows) if rows else 0.0
        out[f"{kind}_bytes"] = sum(r[1] for r in rows)
    out["successful_updates"] = changed
    if blocks is not None:
        out["blocks"] = blocks
    return out


# -- scenarios ----------------------------------------------------------------------------

def _points(name: str, params: ScenarioParams):
    """(label, params, recon mode) for each parameter point of a scenario."""
    if name == "file-sizes":
        return [(f"file_size={s}", replace(params, file_size=s), None) for s in params.file_sizes]
    if name == "scalability":
        return [(f"servers={n}", replace(params, servers=n, parity=PARITY_FOR.get(n)), None)
                for n in params.server_counts]
    if name == "block-sizes":
        return [(f"blocks={lo}/{avg}/{hi}", replace(params, block_min=lo, block_avg=avg, block_max=hi), None)
                for lo, avg, hi in params.block_settings]
    mode = {"recon-same": "same", "recon-random": "random", "recon-servers": "servers"}[name]
    return [(f"recon={mode}", params, mode)]


def _algorithms(name: str, params: ScenarioParams) -> list[Algorithm]:
    if params.algorithms:
        return [ALGORITHMS[a] for a in params.algorithms]
    dap = DAP_NAMES[params.dap]
    if name == "block-sizes":
        return [ALGORITHMS[ares_name(dap, True)], ALGORITHMS["CoABD-F"]]
    if name.startswith("recon"):
        return [ALGORITHMS[ares_name(dap, True)]]
    return [ALGORITHMS[a] for a in DEFAULT_ALGOS]


def simulate(params: ScenarioParams, algorithm: str, recon_mode: str | None = None,
             label: str = "") -> RunResult:
    return _Run(params, ALGORITHMS[algorithm], recon_mode).run(label)


def run_scenario(name: str, params: ScenarioParams) -> list[RunResult]:
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    results = []
    for label, point, mode in _points(name, params):
        for algo in _algorithms(name, params):
            results.append(_Run(point, algo, mode).run(label))
    return results


def metrics_rows(results: list[RunResult]) -> list[tuple]:
    rows = []
    for r in results:
        for metric, value in r.metrics.items():
            rows.append((r.algorithm, r.label, metric, value))
    return rows


def write_outputs(results: list[RunResult], out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("algo", "scenario-param", "metric", "value"))
        w.writerows(metrics_rows(results))
    problems = []
    for r in results:
        stem = f"{r.algorithm}_{r.label}".replace("/", "-").replace("=", "-")
        r.history.write(out / f"{stem}.jsonl")
        for prop, vs in r.violations.items():
            problems.extend({"run": stem, **v.to_json()} for v in vs)
        problems.extend({"run": stem, "property": "liveness", "stall": s} for s in r.stalls)
    if problems:
        (out / "violations.json").write_text(json.dumps(problems, indent=2))
    return out


def compare_dap_variants(params: ScenarioParams, fragmented: bool = True) -> dict:
    """Run one workload under optimized and classic EC with the same seed; report ratios."""
    runs = {}
    for dap in (DapKind.EC_OPT, DapKind.EC_CLASSIC):
        runs[dap] = simulate(params, ares_name(dap, fragmented), label="compare")
    opt, classic = runs[DapKind.EC_OPT].metrics, runs[DapKind.EC_CLASSIC].metrics
    report = {"optimized": opt, "classic": classic, "ok": all(r.ok for r in runs.values())}
    for key in ("read_bytes", "update_bytes", "read_latency_mean", "update_latency_mean"):
        report[f"{key}_ratio"] = opt[key] / classic[key] if classic[key] else None
    return report


def params_dict(params: ScenarioParams) -> dict:
    d = asdict(params)
    d["faults"] = asdict(params.faults)
    return d


# -- randomized property runs -------------------------------------------------------------

PROPERTY_SERVER_COUNTS = (3, 5, 7, 11)


def property_run(seed: int, faults: Faults = NO_FAULTS, dap: DapKind | None = None,
                 n: int | None = None, trace_messages: bool = False) -> RunResult:
    """One small randomized run on a single object: crashes within the fault bound,
    at most ``delta`` writers, and (in crash-free runs) occasional reconfigurations."""
    rng = random.Random(f"{seed}/property")
    n = n or rng.choice(PROPERTY_SERVER_COUNTS)
    dap = dap or rng.choice(list(DapKind))
    writers = rng.randint(1, 3)
    readers = rng.randint(1, 2)
    k = 1
    if dap.erasure_coded:
        k = rng.randint(n // 3 + 1, n)
    pool = [f"s{i}" for i in range(max(n, 7))]
    c0 = Configuration("c0", pool[:n], dap, k, writers)
    directory = {"c0": c0}
    crashes = []
    bound = fault_bound(c0)
    if rng.random() < 0.5 and bound:
        victims = rng.sample(c0.servers, rng.randint(1, bound))
        crashes = [(rng.randint(0, 20 * MS), s) for s in victims]
    # wide delay spreads let late messages overtake whole operations
    delay = DelayModel(MS, rng.choice((3, 10, 30)) * MS, spike_prob=rng.choice((0.0, 0.1)), spike=50 * MS)
    sim = Simulator(SimConfig(seed=seed, delay=delay,
                              crash_schedule=crashes, byte_cost=1.0, trace_messages=trace_messages))
    for s in pool:
        sim.add_server(s, ReplicaServer(s, directory, faults))
    ops = 3

    def writer(proc):
        client = CoverableClient(proc, "x", directory, "c0", faults)
        for _ in range(ops):
            yield Sleep(proc.rng.randint(0, 4) * MS)
            yield from client.cvr_write(proc.rng.randbytes(proc.rng.randint(0, 300)))

    def reader(proc):
        client = CoverableClient(proc, "x", directory, "c0", faults)
        for _ in range(ops):
            yield Sleep(proc.rng.randint(0, 4) * MS)
            yield from client.cvr_read()

    def reconfigurer(proc):
        client = CoverableClient(proc, "x", directory, "c0", faults)
        for i in range(1, proc.rng.randint(1, 2) + 1):
            yield Sleep(proc.rng.randint(1, 6) * MS)
            kind = proc.rng.choice(list(DapKind))
            size = proc.rng.choice([m for m in PROPERTY_SERVER_COUNTS if m <= len(pool)])
            servers = tuple(sorted(proc.rng.sample(pool, size), key=pool.index))
            kk = proc.rng.randint(size // 3 + 1, size) if kind.erasure_coded else 1
            yield from recon(client.view, Configuration(f"c{i}", servers, kind, kk, writers))

    for i in range(writers):
        sim.add_client(f"w{i}", writer)
    for i in range(readers):
        sim.add_client(f"r{i}", reader)
    if not crashes and rng.random() < 0.3:
        sim.add_client("g0", reconfigurer)
    result = sim.run()
    label = f"seed={seed} n={n} k={k} dap={dap.value} writers={writers} crashes={len(crashes)}"
    return RunResult(f"property-{dap.value}", label, result.history, result.stalls,
                     checker.check_all(result.history), {}, result.end_time)
