import json

import pytest

from covstore import checker
from covstore.fragment import (
    ChunkerParams, FragmentClient, IntegrityError, chunk, decode_block, encode_block,
)
from covstore.netsim import MS, DelayModel, Sleep
from covstore.types import BlockId, DapKind, Flag, writer_token

from simkit import cluster, config, records, run_one

# 128 zero bytes never hit the content mask, so they always form exactly one max-size chunk
PARAMS = ChunkerParams(64, 64, 128)
ZEROS = bytes(128)


def make(directory, p, fid="f"):
    return FragmentClient(p, fid, directory, "c0", PARAMS)


def test_block_encoding():
    ptr = BlockId("f", writer_token("w1"), 3)
    assert decode_block(encode_block(ptr, b"data")) == (ptr, b"data")
    assert decode_block(encode_block(None, b"tail")) == (None, b"tail")
    assert decode_block(b"") == (None, b"")


def test_fresh_file_reads_genesis_only():
    sim, directory = cluster(config("c0", 3))
    (blocks, content), _ = run_one(sim, lambda p: make(directory, p).fm_read())
    assert [b.id for b in blocks] == [BlockId.genesis("f")]
    assert content == b""


def test_first_update_writes_blocks_before_genesis():
    content = ZEROS * 3
    assert len(chunk(content, PARAMS)) == 3
    sim, directory = cluster(config("c0", 3))

    def prog(p):
        fm = make(directory, p)
        summary = yield from fm.fm_update(content)
        blocks, got = yield from make(directory, p).fm_read()
        return summary, blocks, got
    (summary, blocks, got), result = run_one(sim, prog, name="w1")
    assert [(k, role) for k, _, role in summary.writes] == [
        ("f/w1/1", "insert"), ("f/w1/2", "insert"), ("f/w1/3", "insert"), ("f/_/0", "anchor")]
    assert summary.changed
    assert len(blocks) == 4
    assert got == content
    meta = json.loads(blocks[0].data)
    assert meta == {"file": "f", "blocks": 3, "chunker": [64, 64, 128]}
    assert checker.check_connectivity(result.history) == []


def test_append_writes_new_block_then_old_tail():
    sim, directory = cluster(config("c0", 3))

    def prog(p):
        fm = make(directory, p)
        yield from fm.fm_update(ZEROS)
        return (yield from fm.fm_update(ZEROS + b"appended"))
    summary, _ = run_one(sim, prog, name="w1")
    assert summary.writes == [("f/w1/2", Flag.CHG, "insert"), ("f/w1/1", Flag.CHG, "anchor")]


def test_identical_content_issues_no_writes():
    sim, directory = cluster(config("c0", 3))

    def prog(p):
        fm = make(directory, p)
        yield from fm.fm_update(ZEROS * 2)
        return (yield from fm.fm_update(ZEROS * 2))
    summary, result = run_one(sim, prog)
    assert summary.writes == []
    assert len(records(result.history, event="invoke", op="write")) == 3


def test_deleted_block_stays_in_chain_with_empty_data():
    sim, directory = cluster(config("c0", 3))
    ones = b"\x01" * 128

    def prog(p):
        fm = make(directory, p)
        yield from fm.fm_update(ZEROS + ones)
        summary = yield from fm.fm_update(ones)
        blocks, content = yield from make(directory, p).fm_read()
        return summary, blocks, content
    (summary, blocks, content), _ = run_one(sim, prog)
    assert [role for _, _, role in summary.writes] == ["delete"]
    assert len(blocks) == 3 and blocks[1].data == b""
    assert content == ones


def test_concurrent_disjoint_updates_both_succeed():
    for dap, k in [(DapKind.ABD, 1), (DapKind.EC_OPT, 2)]:
        sim, directory = cluster(config("c0", 3, dap, k=k, delta=2), delay=DelayModel.uniform(MS, 4 * MS))
        a, b = ZEROS, b"\x01" * 128

        def setup(p):
            yield from make(directory, p).fm_update(a + b)

        results = {}

        def editor(new):
            def prog(p):
                yield Sleep(100 * MS)
                results[p.name] = yield from make(directory, p).fm_update(new)
            return prog
        sim.add_client("init", setup)
        sim.add_client("w1", editor(b"\x02" * 128 + b))
        sim.add_client("w2", editor(a + b"\x03" * 128))
        result = sim.run()
        assert not result.stalled
        assert results["w1"].writes == [("f/init/2", Flag.CHG, "modify")]
        assert results["w2"].writes == [("f/init/1", Flag.CHG, "modify")]
        assert checker.check_all(result.history, ("coverability", "linearizable", "dap")) == {
            "coverability": [], "linearizable": [], "dap": []}


def test_fm_reconfig_visits_every_block_genesis_first():
    c0, c1 = config("c0", 3), config("c1", 5, DapKind.EC_OPT, k=3, prefix="e")
    sim, directory = cluster(c0, c1)

    def prog(p):
        yield from make(directory, p).fm_update(ZEROS * 3)
        order = yield from make(directory, p).fm_reconfig(c1)
        _, content = yield from make(directory, p).fm_read()
        return order, content
    (order, content), result = run_one(sim, prog, name="w1")
    assert order == ["f/_/0", "f/w1/3", "f/w1/2", "f/w1/1"]
    assert len(records(result.history, event="respond", op="recon")) == 4
    assert content == ZEROS * 3


def test_fm_reconfig_of_empty_file_is_one_recon():
    c0, c1 = config("c0", 3), config("c1", 3, prefix="e")
    sim, directory = cluster(c0, c1)
    order, _ = run_one(sim, lambda p: make(directory, p).fm_reconfig(c1))
    assert order == ["f/_/0"]


def test_block_created_during_fm_reconfig_stays_readable():
    for seed in range(5):
        c0, c1 = config("c0", 3), config("c1", 3, prefix="e")
        sim, directory = cluster(c0, c1, seed=seed, delay=DelayModel.uniform(MS, 3 * MS))
        final = {}

        def writer(p):
            fm = make(directory, p)
            yield from fm.fm_update(ZEROS)
            yield from fm.fm_update(ZEROS + b"\x05" * 100)

        def reconfigurer(p):
            yield Sleep(15 * MS)
            yield from make(directory, p).fm_reconfig(c1)

        def reader(p):
            yield Sleep(400 * MS)
            final["content"] = (yield from make(directory, p).fm_read())[1]
        sim.add_client("w1", writer)
        sim.add_client("g0", reconfigurer)
        sim.add_client("r1", reader)
        result = sim.run()
        assert not result.stalled
        assert final["content"] == ZEROS + b"\x05" * 100
        assert checker.check_connectivity(result.history) == []
        assert checker.check_cseq_properties(result.history) == []


def test_dangling_pointer_is_an_integrity_error():
    c0 = config("c0", 3)
    sim, directory = cluster(c0)

    def prog(p):
        fm = make(directory, p)
        ghost = BlockId("f", writer_token("zz"), 9)
        yield from fm.block_client(fm.genesis).cvr_write(encode_block(ghost, b"{}"))
        yield from make(directory, p).fm_read()
    sim.add_client("w1", prog)
    with pytest.raises(IntegrityError):
        sim.run()
