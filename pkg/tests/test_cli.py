from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest

from qcausal.cirel import parse_relation
from qcausal.cli import main
from qcausal.distributions import format_table, parse_table
from qcausal.graph import parse_dag
from qcausal.scenarios import bell_scenario

DATA = Path(__file__).resolve().parent.parent / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_dsep_collider_dag(capsys):
    code, out, _ = run(capsys, "dsep", DATA / "collider.dag", "W _||_ Y | V")
    assert code == 0 and out.strip() == "SEPARATED"


def test_dsep_explain_names_blockers(capsys):
    code, out, _ = run(capsys, "dsep", DATA / "collider.dag", "W _||_ Y | V", "--explain")
    assert code == 0
    assert out.count("blocked") == 2


def test_qsep_bell(capsys):
    code, out, _ = run(capsys, "qsep", DATA / "bell.dag", "A _||_ B | lambda")
    assert code == 0 and out.strip() == "CONNECTED"


def test_qsep_jsonl(capsys):
    code, out, _ = run(capsys, "--format", "jsonl", "qsep", DATA / "bell.dag", "A _||_ T | S", "--explain")
    rec = json.loads(out)
    assert code == 0 and rec["verdict"] == "SEPARATED" and rec["rule"] == "q"
    assert all(p["blocked_by"] for p in rec["paths"])


def test_validate_reports_the_bad_setting(capsys):
    code, out, err = run(capsys, "validate", DATA / "bad.dag")
    assert code == 2
    assert "'U'" in err and "line 3" in err


def test_validate_good(capsys):
    code, out, _ = run(capsys, "validate", DATA / "bell_qcm.dag", "--dims")
    assert code == 0 and "valid" in out


def test_ci_list_round_trips(capsys):
    code, out, _ = run(capsys, "--format", "jsonl", "ci-list", DATA / "collider.dag", "--rule", "causal")
    names = parse_dag((DATA / "collider.dag").read_text()).names
    rels = [parse_relation(json.loads(line)["relation"], names) for line in out.splitlines()]
    assert code == 0 and rels


def test_ci_list_closed_contains_list(capsys):
    _, plain, _ = run(capsys, "ci-list", DATA / "collider.dag", "--rule", "causal")
    _, closed, _ = run(capsys, "ci-list", DATA / "collider.dag", "--rule", "causal", "--closed")
    assert set(plain.splitlines()) <= set(closed.splitlines())


def test_ci_list_d_matches_closed_causal_list(capsys):
    _, d, _ = run(capsys, "ci-list", DATA / "collider.dag", "--rule", "d")
    _, c, _ = run(capsys, "ci-list", DATA / "collider.dag", "--rule", "causal", "--closed")
    assert sorted(d.splitlines()) == sorted(c.splitlines())


def test_closure_and_compare(capsys, tmp_path):
    code, out, _ = run(capsys, "closure", DATA / "relations.txt")
    assert code == 0 and "X _||_ Y | Z" in out.splitlines()
    other = tmp_path / "other.txt"
    other.write_text("vars X Y Z W\n" + out)
    code, out, _ = run(capsys, "closure", DATA / "relations.txt", "--compare", other)
    assert code == 0 and out.strip() == "equal"


def test_simulate_writes_a_readable_table(capsys, tmp_path):
    dest = tmp_path / "bell.tab"
    code, _, _ = run(capsys, "simulate", DATA / "bell_qcm.dag", DATA / "bell_qcm.params", "--out", dest)
    assert code == 0
    p = parse_table(dest.read_text(), source=str(dest))
    assert p.names == ("lambda", "S", "T", "A", "B")
    _, ref = bell_scenario()
    assert np.allclose(p.table, ref.table, atol=1e-12)


def test_check_map_on_simulated_table(capsys, tmp_path):
    dest = tmp_path / "bell.tab"
    run(capsys, "simulate", DATA / "bell_qcm.dag", DATA / "bell_qcm.params", "--out", dest)
    code, out, _ = run(capsys, "--format", "jsonl", "check-map", DATA / "bell.dag", dest, "--rule", "q")
    assert code == 0 and json.loads(out)["imap"] is True


def test_bell_report(capsys):
    code, out, _ = run(capsys, "scenario", "bell")
    assert code == 0
    assert f"chsh {2 * math.sqrt(2):.7f}" in out
    assert "no_signalling true" in out


def test_prbox_report(capsys):
    code, out, _ = run(capsys, "scenario", "prbox")
    assert code == 0 and "chsh 4.0000000" in out


def test_finetune_report(capsys):
    code, out, _ = run(capsys, "--format", "jsonl", "scenario", "finetune")
    rec = json.loads(out)
    assert code == 0 and rec["imap"] and not rec["perfect"]
    assert rec["witness"] == "Y _||_ X | Z"


def test_parse_error_names_file_and_line(capsys, tmp_path):
    bad = tmp_path / "broken.dag"
    bad.write_text("node A\nedge A -> Q\n")
    code, _, err = run(capsys, "dsep", bad, "A _||_ A")
    assert code == 2
    assert f"{bad}:2:" in err


def test_bad_query(capsys):
    code, _, err = run(capsys, "dsep", DATA / "collider.dag", "W _||_ Q")
    assert code == 2 and "Q" in err


def test_cap_overflow(capsys, tmp_path):
    big = tmp_path / "big.dag"
    big.write_text("".join(f"node X{i}\n" for i in range(7)))
    code, _, err = run(capsys, "ci-list", big)
    assert code == 3 and "cap" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "validate", tmp_path / "nope.dag")
    assert code == 2 and "nope.dag" in err


def test_probe_needs_a_seed(capsys):
    code, _, err = run(capsys, "scenario", "prbox-probe", "--draws", "5")
    assert code == 2 and "--seed" in err


def test_probe_is_byte_reproducible(capsys, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for dest in (a, b):
        code, _, _ = run(capsys, "scenario", "prbox-probe", "--draws", "20", "--seed", "11", "--out", dest)
        assert code == 0
    assert a.read_bytes() == b.read_bytes()


def test_scenario_table_output(capsys, tmp_path):
    dest = tmp_path / "pr.tab"
    run(capsys, "scenario", "prbox", "--out", dest)
    assert parse_table(dest.read_text()).names == ("A", "B", "S", "T")
    assert format_table(parse_table(dest.read_text())) == dest.read_text()
