import copy
import random

import pytest

from covstore import checker
from covstore.harness import property_run
from covstore.netsim import HistoryLog, LogFormatError, digest
from covstore.types import writer_token


def tag(ts, name=None):
    return [ts, writer_token(name).hex() if name else "00" * 16]


class Log:
    """Hand-built history: ``inv``/``resp`` append records in the order called."""

    def __init__(self):
        self.history = HistoryLog()
        self.t = 0
        self.n = 0

    def inv(self, node, op, **fields):
        self.n += 1
        self.t += 1
        op_id = f"{node}:{self.n}"
        self.history.append(self.t, node, "invoke", op=op, op_id=op_id, **fields)
        return op_id

    def resp(self, node, op_id, op, **fields):
        self.t += 1
        self.history.append(self.t, node, "respond", op=op, op_id=op_id, **fields)

    def write(self, node, value, ts, prev, flag="chg", block="x"):
        op_id = self.inv(node, "write", block=block)
        self.resp(node, op_id, "write", block=block, tag=tag(ts, node) if flag == "chg" else prev,
                  digest=digest(value), flag=flag, prev_version=prev)
        return op_id

    def read(self, node, value, t, block="x"):
        op_id = self.inv(node, "read", block=block)
        self.resp(node, op_id, "read", block=block, tag=t, digest=digest(value))
        return op_id


# -- DAP ---------------------------------------------------------------------------------

def test_sequential_single_writer_has_no_violations():
    log = Log()
    prev = tag(0)
    for i in range(1, 4):
        log.write("w1", f"v{i}".encode(), i, prev)
        prev = tag(i, "w1")
        log.read("r1", f"v{i}".encode(), prev)
    assert checker.check_all(log.history) == {p: [] for p in checker.PROPERTIES}


def test_get_data_of_never_written_tag_is_c2():
    log = Log()
    op = log.inv("r1", "get-data", block="x", config="c0")
    log.resp("r1", op, "get-data", block="x", config="c0", tag=tag(7, "ghost"), digest=digest(b"?"))
    violations = checker.check_dap_properties(log.history)
    assert [(v.prop, v.kind) for v in violations] == [("dap", "C2")]


def test_get_tag_below_completed_put_is_c1():
    log = Log()
    put = log.inv("w1", "put-data", block="x", config="c0", tag=tag(2, "w1"), digest=digest(b"a"))
    log.resp("w1", put, "put-data", block="x", config="c0", tag=tag(2, "w1"), digest=digest(b"a"))
    get = log.inv("r1", "get-tag", block="x", config="c0")
    log.resp("r1", get, "get-tag", block="x", config="c0", tag=tag(1, "w1"))
    assert [v.kind for v in checker.check_dap_properties(log.history)] == ["C1"]


def test_c1_is_per_configuration():
    log = Log()
    put = log.inv("w1", "put-data", block="x", config="c0", tag=tag(2, "w1"), digest=digest(b"a"))
    log.resp("w1", put, "put-data", block="x", config="c0", tag=tag(2, "w1"), digest=digest(b"a"))
    get = log.inv("r1", "get-tag", block="x", config="c1")
    log.resp("r1", get, "get-tag", block="x", config="c1", tag=tag(0))
    assert checker.check_dap_properties(log.history) == []


# -- coverability ------------------------------------------------------------------------

def test_two_chg_writes_with_equal_tags():
    log = Log()
    log.write("w1", b"a", 1, tag(0))
    log.history.records[-1]["tag"] = tag(1, "w1")
    log.write("w1", b"b", 1, tag(0))
    kinds = [v.kind for v in checker.check_coverability(log.history)]
    assert "uniqueness" in kinds
    assert "consolidation" in kinds


def test_single_writer_chain_is_clean():
    log = Log()
    prev = tag(0)
    for i in range(1, 6):
        log.write("w1", b"%d" % i, i, prev)
        prev = tag(i, "w1")
    assert checker.check_coverability(log.history) == []


def test_version_from_nowhere_is_continuity_and_jump_is_evolution():
    log = Log()
    log.write("w1", b"a", 9, tag(4, "zz"))
    kinds = sorted(v.kind for v in checker.check_coverability(log.history))
    assert kinds == ["continuity", "evolution"]


def test_unchg_writes_are_not_checked_as_writes():
    log = Log()
    log.write("w1", b"a", 1, tag(0))
    log.write("w2", b"a", 1, tag(1, "w1"), flag="unchg")
    assert checker.check_coverability(log.history) == []


# -- linearizability ---------------------------------------------------------------------

def test_empty_history_is_linearizable():
    assert checker.check_linearizable(HistoryLog(), "x")
    assert checker.brute_force_linearizable(HistoryLog(), "x")


def test_read_of_write_that_started_later_is_not_linearizable():
    log = Log()
    log.read("r1", b"v", tag(1, "w1"))
    log.write("w1", b"v", 1, tag(0))
    assert not checker.check_linearizable(log.history, "x")
    assert not checker.brute_force_linearizable(log.history, "x")


def test_stale_read_after_newer_read():
    log = Log()
    log.write("w1", b"a", 1, tag(0))
    log.write("w1", b"b", 2, tag(1, "w1"))
    log.read("r1", b"b", tag(2, "w1"))
    log.read("r2", b"a", tag(1, "w1"))
    result = checker.check_linearizable(log.history, "x")
    assert not result
    assert "finished before it started" in result.reason


def test_read_of_pending_write_is_accepted():
    log = Log()
    log.inv("w1", "write", block="x")
    log.read("r1", b"p", tag(1, "w1"))
    assert checker.check_linearizable(log.history, "x")
    assert checker.brute_force_linearizable(log.history, "x")


def test_witness_is_tag_order():
    log = Log()
    w = log.write("w1", b"a", 1, tag(0))
    r = log.read("r1", b"a", tag(1, "w1"))
    r0 = log.read("r2", b"a", tag(1, "w1"))
    assert checker.check_linearizable(log.history, "x").witness == [w, r, r0]


def test_op_cap():
    log = Log()
    for _ in range(5):
        log.read("r1", b"", tag(0))
    with pytest.raises(checker.CheckLimitError):
        checker.check_linearizable(log.history, "x", op_cap=4)
    with pytest.raises(checker.CheckLimitError):
        checker.brute_force_linearizable(log.history, "x", limit=4)


def _small_runs(count):
    for seed in range(count):
        run = property_run(seed)
        ops = [o for o in checker.collect_ops(run.history) if o.kind in ("write", "read")]
        if len(ops) <= checker.BRUTE_FORCE_LIMIT:
            yield seed, run, ops


def test_pruned_agrees_with_brute_force_on_protocol_histories():
    checked = 0
    for _, run, _ in _small_runs(80):
        assert bool(checker.check_linearizable(run.history, "x")) == \
            bool(checker.brute_force_linearizable(run.history, "x"))
        checked += 1
    assert checked >= 50


def test_pruned_is_never_more_lenient_on_corrupted_histories():
    negatives = 0
    for seed, run, ops in _small_runs(120):
        writes = [o for o in ops if o.complete and o.kind == "write" and o.get("flag") == "chg"]
        reads = [o for o in ops if o.complete and o not in writes]
        if not writes or not reads:
            continue
        rng = random.Random(seed)
        records = copy.deepcopy(run.history.records)
        victim, source = rng.choice(reads), rng.choice(writes)
        records[victim.resp].update(tag=source.get("tag"), digest=source.get("digest"))
        corrupted = HistoryLog(records)
        pruned = checker.check_linearizable(corrupted, "x")
        brute = checker.brute_force_linearizable(corrupted, "x")
        if pruned:
            assert brute
        negatives += not brute
    assert negatives >= 10


# -- connectivity ------------------------------------------------------------------------

def _fm_read(log, chain, file="f"):
    op = log.inv("r1", "fm-read", file=file)
    log.resp("r1", op, "fm-read", file=file, chain=chain, digest=digest(b""))


def test_broken_pointer():
    log = Log()
    _fm_read(log, [["f/_/0", "f/w/1"], ["f/w/2", None]])
    assert [v.kind for v in checker.check_connectivity(log.history)] == ["chain"]


@pytest.mark.parametrize("chain", [
    [["f/w/1", None]],
    [["f/_/0", "f/w/1"], ["f/w/1", "f/_/0"], ["f/_/0", None]],
    [["f/_/0", "f/w/1"], ["f/w/1", "f/w/2"]],
])
def test_malformed_chains(chain):
    log = Log()
    _fm_read(log, chain)
    assert len(checker.check_connectivity(log.history)) == 1


def test_later_read_must_keep_earlier_blocks():
    log = Log()
    _fm_read(log, [["f/_/0", "f/w/1"], ["f/w/1", None]])
    _fm_read(log, [["f/_/0", None]])
    assert [v.kind for v in checker.check_connectivity(log.history)] == ["supersequence"]


# -- configuration sequences -------------------------------------------------------------

def _cseq_op(log, node, snap, block="x"):
    op = log.inv(node, "read-config", block=block)
    log.resp(node, op, "read-config", block=block, cseq=snap)


def test_conflicting_snapshots_violate_uniqueness():
    log = Log()
    _cseq_op(log, "a", [["c0", "F"], ["c1", "P"]])
    _cseq_op(log, "b", [["c0", "F"], ["c2", "P"]])
    assert [v.kind for v in checker.check_cseq_properties(log.history)] == ["uniqueness"]


def test_finalized_index_must_not_regress():
    log = Log()
    _cseq_op(log, "a", [["c0", "F"], ["c1", "F"]])
    _cseq_op(log, "b", [["c0", "F"]])
    assert [v.kind for v in checker.check_cseq_properties(log.history)] == ["progress"]


def test_recon_must_carry_completed_writes():
    log = Log()
    log.write("w1", b"a", 1, tag(0))
    op = log.inv("g0", "recon", block="x")
    log.resp("g0", op, "recon", block="x", tag=tag(0), cseq=[["c0", "F"], ["c1", "F"]])
    assert [v.kind for v in checker.check_cseq_properties(log.history)] == ["survivability"]


# -- log handling ------------------------------------------------------------------------

def test_respond_without_invoke_reports_line():
    text = '{"vtime":0,"node":"a","event":"invoke","op":"read","op_id":"a:1"}\n' \
           '{"vtime":1,"node":"a","event":"respond","op":"read","op_id":"a:2"}\n'
    with pytest.raises(LogFormatError) as info:
        checker.check_all(HistoryLog.parse(text))
    assert info.value.line == 2


def test_checks_are_deterministic():
    run = property_run(3)
    first = checker.check_all(run.history)
    assert checker.check_all(HistoryLog.parse(run.history.to_jsonl())) == first
