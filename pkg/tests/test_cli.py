import json

import pytest

import oracles as O
from relcollapse import cli
from relcollapse.linalg import StateVector
from relcollapse.relativistic import DIMS
from relcollapse.trace import RunTrace, state_digest


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_t2_singlet_single_trial(capsys):
    code, out, _ = run(capsys, "t2", "--seed", "1", "--param", "input=singlet")
    assert code == 0
    assert json.loads(out)["classification"] == "Singlet"


def test_relativistic_forced_digest(capsys, tmp_path):
    dest = tmp_path / "r.jsonl"
    code, out, _ = run(capsys, "relativistic-t2", "--forced", "0,0,0", "--output", str(dest))
    assert code == 0
    expected = state_digest(StateVector(O.FINAL_000, DIMS))
    assert json.loads(out)["final_digest"] == expected
    assert RunTrace.read_jsonl(dest).records[-1].state_digest == expected


def test_relativistic_amplitude_dump(capsys):
    code, out, _ = run(capsys, "relativistic-t2", "--forced", "1,0,0", "--param", "dump_amplitudes=true",
                       "--output", "-")
    assert code == 0
    rows = [json.loads(l) for l in out.splitlines()]
    assert all(len(r["amplitudes"]) == 2916 for r in rows if r["kind"] == "record")


def test_literal_variant_exits_nonzero(capsys):
    code, _, err = run(capsys, "relativistic-t2", "--forced", "0,0,0", "--param", "variant=literal")
    assert code == 1
    assert "invariant failed" in err


def test_tz_summary_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for dest in (a, b):
        assert run(capsys, "tz", "--seed", "3", "--trials", "100000", "--param", "input=[1, 2, 0.5, 1]",
                   "--summary", str(dest))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_trace_replay_bit_exact(capsys, tmp_path):
    paths = [tmp_path / "a.jsonl", tmp_path / "b.jsonl"]
    for p in paths:
        run(capsys, "t2", "--seed", "9", "--trials", "50", "--param", "input=upup", "--output", str(p))
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_different_seeds_differ(capsys, tmp_path):
    paths = [tmp_path / "a.jsonl", tmp_path / "b.jsonl"]
    for seed, p in zip(("1", "2"), paths):
        run(capsys, "t2", "--seed", seed, "--trials", "50", "--param", "input=upup", "--output", str(p))
    assert paths[0].read_bytes() != paths[1].read_bytes()


def test_seed_required(capsys):
    code, _, err = run(capsys, "tz", "--trials", "5")
    assert code == 2 and "seed" in err


def test_unknown_param(capsys):
    code, _, err = run(capsys, "t2", "--seed", "1", "--param", "nope=1")
    assert code == 2 and "params.nope" in err


def test_bad_param_value(capsys):
    code, _, err = run(capsys, "t2", "--seed", "1", "--param", "input=sideways")
    assert code == 2 and "sideways" in err


def test_bad_forced(capsys):
    assert run(capsys, "relativistic-t2", "--forced", "0,0")[0] == 2
    assert run(capsys, "relativistic-t2", "--forced", "0,5,0")[0] == 2
    assert run(capsys, "relativistic-t2", "--forced", "a,b,c")[0] == 2


def test_scenario_file(capsys, tmp_path):
    f = tmp_path / "s.toml"
    f.write_text('scenario = "toy-two"\nseed = 4\ntrials = 200\n\n[params]\ng_b = 0\n')
    code, out, _ = run(capsys, "run", str(f))
    assert code == 0
    summary = json.loads(out)
    assert summary["counts"]["B"] == {"1": 0, "-1": 0}


def test_scenario_file_parse_error_names_line(capsys, tmp_path):
    f = tmp_path / "bad.toml"
    f.write_text('scenario = "t2"\nseed = 1\ntrials = \n')
    code, _, err = run(capsys, "run", str(f))
    assert code == 2 and "line 3" in err


def test_scenario_file_unknown_scenario(capsys, tmp_path):
    f = tmp_path / "bad.toml"
    f.write_text('scenario = "t9"\nseed = 1\n')
    code, _, err = run(capsys, "run", str(f))
    assert code == 2
    for name in cli.SCENARIOS:
        assert name in err


def test_scenario_file_bad_field(capsys, tmp_path):
    f = tmp_path / "bad.toml"
    f.write_text('scenario = "t2"\nseed = 1\ntrials = -4\n')
    code, _, err = run(capsys, "run", str(f))
    assert code == 2 and "trials" in err


def test_missing_file(capsys, tmp_path):
    assert run(capsys, "run", str(tmp_path / "none.toml"))[0] == 2


def test_counterfactual_without_seed(capsys):
    code, out, _ = run(capsys, "counterfactual")
    assert code == 0
    assert json.loads(out)["verdicts"] == {"actual": "Legitimate", "spacelike_toggle": "Illegitimate",
                                           "timelike_toggle": "Legitimate"}


def test_toy_stats_table(capsys):
    code, out, _ = run(capsys, "toy-stats", "--seed", "2", "--trials", "2000")
    assert code == 0
    table = json.loads(out)["table"]
    assert len(table) == 8


def test_signaling_summary(capsys):
    code, out, _ = run(capsys, "signaling", "--seed", "2", "--trials", "20000")
    assert code == 0
    modes = json.loads(out)["modes"]
    assert set(modes) == {"none", "Tz", "T2"}
    assert modes["T2"]["expected"]["basis"] == "closed-form"


@pytest.mark.parametrize("argv", [
    ("grw", "--seed", "1", "--trials", "300"),
    ("csl", "--seed", "1", "--trials", "500", "--param", "total_time=2.0"),
    ("toy-one", "--seed", "1", "--trials", "100", "--param", "alpha=[0.6, 0.0]"),
])
def test_other_scenarios_run(capsys, argv):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    assert json.loads(out)["ok"] is True


def test_every_summary_tags_expectations(capsys):
    for argv in (("tz", "--seed", "1"), ("t2", "--seed", "1"), ("toy-two", "--seed", "1"),
                 ("relativistic-t2", "--seed", "1")):
        _, out, _ = run(capsys, *argv)
        assert "basis" in json.loads(out)["expected"]


def test_empty_trace_summary():
    assert cli.emit_summary(RunTrace("t2", 1)) == {}
