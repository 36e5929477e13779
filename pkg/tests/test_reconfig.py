import pytest

from covstore.coverable import CoverableClient
from covstore.netsim import MS, DelayModel, Sleep
from covstore.reconfig import LocalCseq, ObjectView, propose, read_config, recon, update_config
from covstore.types import T0, V0, ConfigEntry, DapKind, Status, TaggedValue

from simkit import cluster, config, records, run_one

F, P = Status.F, Status.P


class TestLocalCseq:
    def test_initial(self):
        cs = LocalCseq("c0")
        assert cs.snapshot() == [["c0", "F"]]
        assert cs.last_finalized() == 0

    def test_upgrade_and_conflict(self):
        cs = LocalCseq("c0")
        cs.put(1, ConfigEntry("c1", P))
        assert cs.last_finalized() == 0
        cs.put(1, ConfigEntry("c1", F))
        cs.put(1, ConfigEntry("c1", P))
        assert cs.snapshot() == [["c0", "F"], ["c1", "F"]]
        with pytest.raises(Exception):
            cs.put(1, ConfigEntry("c2", P))


def test_read_config_without_recons():
    c0 = config("c0", 3)
    sim, directory = cluster(c0)

    def prog(p):
        cs = yield from read_config(ObjectView(p, "x", directory, "c0"))
        return cs.snapshot()
    snap, _ = run_one(sim, prog)
    assert snap == [["c0", "F"]]


def test_single_recon_is_finalized_and_visible():
    c0, c1 = config("c0", 3), config("c1", 3)
    sim, directory = cluster(c0, c1)

    def prog(p):
        decided, transferred = yield from recon(ObjectView(p, "x", directory, "c0"), c1)
        cs = yield from read_config(ObjectView(p, "x", directory, "c0"))
        return decided, transferred, cs.snapshot()
    (decided, transferred, snap), _ = run_one(sim, prog, name="g0")
    assert decided == "c1"
    assert transferred == TaggedValue(T0, V0)
    assert snap == [["c0", "F"], ["c1", "F"]]


def test_recon_to_same_servers_preserves_data():
    c0 = config("c0", 5, DapKind.EC_OPT, k=3)
    c1 = config("c1", 5, DapKind.EC_OPT, k=3)
    sim, directory = cluster(c0, c1)

    def prog(p):
        w = CoverableClient(p, "x", directory, "c0")
        out = yield from w.cvr_write(b"keep me")
        _, transferred = yield from recon(ObjectView(p, "x", directory, "c0"), c1)
        r = CoverableClient(p, "x", directory, "c0")
        got = yield from r.cvr_read()
        return out.tagged, transferred, got, r.cseq.snapshot()
    (written, transferred, got, snap), _ = run_one(sim, prog)
    assert transferred == written
    assert got == written
    assert len(snap) == 2


def test_abd_to_ec_migration_is_decodable():
    c0 = config("c0", 3)
    c1 = config("c1", 5, DapKind.EC_OPT, k=3, prefix="e")
    sim, directory = cluster(c0, c1)
    value = bytes(range(256)) * 9

    def prog(p):
        yield from CoverableClient(p, "x", directory, "c0").cvr_write(value)
        view = ObjectView(p, "x", directory, "c0")
        yield from recon(view, c1)
        # fresh DAP state on c1 only: no cache, must decode from the new servers
        return (yield from ObjectView(p, "x", directory, "c1").dap(0).get_data())
    tv, result = run_one(sim, prog)
    assert tv.value == value
    puts = [r for r in records(result.history, event="recv") if r["op"] == "PUT-DATA" and r["config"] == "c1"]
    assert {r["node"] for r in puts} == {f"e{i}" for i in range(5)}


def test_concurrent_recons_agree():
    for seed in range(10):
        c0, ca, cb = config("c0", 5), config("ca", 3, prefix="a"), config("cb", 3, prefix="b")
        sim, directory = cluster(c0, ca, cb, seed=seed, delay=DelayModel.uniform(MS, 5 * MS))
        decided = {}

        def reconfigurer(target):
            def prog(p):
                d, _ = yield from recon(ObjectView(p, "x", directory, "c0"), target)
                decided[p.name] = d
            return prog
        sim.add_client("g0", reconfigurer(ca))
        sim.add_client("g1", reconfigurer(cb))
        result = sim.run()
        assert not result.stalled
        assert decided["g0"] == decided["g1"]
        # the loser appended its own entry after the winner's
        snaps = [r["cseq"] for r in records(result.history, event="respond", op="recon")]
        assert all(s[1] == snaps[0][1] for s in snaps)


def test_consensus_adopts_previously_accepted_value():
    c0 = config("c0", 3)
    sim, directory = cluster(c0)

    def prog(p):
        first = yield from propose(ObjectView(p, "x", directory, "c0"), c0, "c7")
        second = yield from propose(ObjectView(p, "x", directory, "c0"), c0, "c8")
        return first, second
    (first, second), _ = run_one(sim, prog)
    assert first == second == "c7"


def test_update_config_without_writes_transfers_initial_value():
    c0 = config("c0", 3)
    sim, directory = cluster(c0)

    def prog(p):
        return (yield from update_config(ObjectView(p, "x", directory, "c0")))
    tv, _ = run_one(sim, prog)
    assert tv == TaggedValue(T0, V0)


def test_transferred_tag_covers_prior_write():
    c0, c1 = config("c0", 3), config("c1", 3, prefix="t")
    sim, directory = cluster(c0, c1)

    def prog(p):
        out = yield from CoverableClient(p, "x", directory, "c0").cvr_write(b"v1")
        _, transferred = yield from recon(ObjectView(p, "x", directory, "c0"), c1)
        return out.tagged.tag, transferred.tag
    (written, moved), _ = run_one(sim, prog)
    assert moved >= written


def test_read_survives_chain_of_three_recons():
    cfgs = [config("c0", 3)] + [config(f"c{i}", 3 + 2 * (i % 2), prefix=f"n{i}") for i in range(1, 4)]
    sim, directory = cluster(*cfgs, delay=DelayModel.uniform(MS, 3 * MS))
    written = {}
    read = {}

    def writer(p):
        out = yield from CoverableClient(p, "x", directory, "c0").cvr_write(b"survivor")
        written["tag"] = out.tagged.tag

    def reconfigurer(p):
        yield Sleep(20 * MS)
        view = ObjectView(p, "x", directory, "c0")
        for c in cfgs[1:]:
            yield from recon(view, c)

    def reader(p):
        yield Sleep(25 * MS)
        read["tv"] = yield from CoverableClient(p, "x", directory, "c0").cvr_read()
    sim.add_client("w1", writer)
    sim.add_client("g0", reconfigurer)
    sim.add_client("r1", reader)
    result = sim.run()
    assert not result.stalled
    assert read["tv"].tag == written["tag"]
    assert read["tv"].value == b"survivor"
