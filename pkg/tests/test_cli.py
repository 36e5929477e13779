import json

from covstore.cli import main
from covstore.harness import property_run
from covstore.faults import Faults

SMALL = ["--seed", "3", "--file-size", "32768", "--block-min", "4096", "--block-avg", "8192",
         "--block-max", "16384", "--ops", "2", "--time-unit-ms", "1"]


def test_run_writes_metrics_and_exits_zero(tmp_path, capsys):
    code = main(["run", "--scenario", "recon-same", "--out", str(tmp_path), *SMALL])
    assert code == 0
    assert (tmp_path / "metrics.csv").exists()
    assert "ok" in capsys.readouterr().out


def test_check_clean_log(tmp_path, capsys):
    main(["run", "--scenario", "recon-random", "--out", str(tmp_path), *SMALL])
    capsys.readouterr()
    (log,) = tmp_path.glob("*.jsonl")
    assert main(["check", str(log)]) == 0
    assert capsys.readouterr().out == ""


def test_check_reports_violations(tmp_path, capsys):
    for seed in range(50):
        run = property_run(seed, Faults(skip_version_check=True))
        if run.violations["coverability"]:
            break
    path = tmp_path / "bad.jsonl"
    run.history.write(path)
    assert main(["check", str(path), "--property", "coverability"]) == 1
    lines = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert lines and all(v["property"] == "coverability" for v in lines)


def test_check_malformed_log(tmp_path, capsys):
    path = tmp_path / "broken.jsonl"
    path.write_text('{"vtime":0,"node":"a","event":"invoke","op":"read","op_id":"a:1"}\nnot json\n')
    assert main(["check", str(path)]) == 2
    assert json.loads(capsys.readouterr().out)["line"] == 2


def test_compare(capsys):
    assert main(["compare", *SMALL]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["read_bytes_ratio"] < 1


def test_ops_cap():
    try:
        main(["run", "--scenario", "recon-same", "--ops", "21"])
    except SystemExit as exc:
        assert "20" in str(exc.code)
    else:
        raise AssertionError("expected SystemExit")


def test_desk_scale_caps():
    for argv in (["--servers", "12"], ["--file-size", str((64 << 20) + 1)], ["--file-sizes", "1024,99999999999"]):
        try:
            main(["run", "--scenario", "file-sizes", *argv])
        except SystemExit as exc:
            assert isinstance(exc.code, str)
        else:
            raise AssertionError(argv)
