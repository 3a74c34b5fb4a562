import json

import pytest

from sampledconley.cli import (CONFIG_HEADER, PipelineConfig, VerificationFailed, emit_epsilon_certificate,
                               main, run_pipeline, verify_report)
from sampledconley.conley import ConleyIndex
from sampledconley.dynamics import build_weak_index_pair
from sampledconley.grid import CubicalSet, GridGeometry
from sampledconley.homology import index_map
from sampledconley.mvmap import TableMap

CUBIC = ["--map", "cubic", "--dim", "1", "--count", "2000", "--delta", "0.015625", "--seed-region", "morse"]


def cubic_config(out):
    return PipelineConfig(map="cubic", dim=1, count=2000, delta=0.015625, seed_region="morse", out=str(out))


# configuration -------------------------------------------------------------------

def test_config_roundtrip():
    cfg = PipelineConfig(map="delayed-henon", dim=3, delta=0.035258, seed_region="periodic:3@0.03")
    text = cfg.dumps()
    assert text.startswith(CONFIG_HEADER)
    assert PipelineConfig.loads(text) == cfg


@pytest.mark.parametrize("text", ["delta = 1\n", CONFIG_HEADER + "\nnonsense = 1\n", CONFIG_HEADER + "\ndelta\n"])
def test_config_rejects_bad_files(text):
    with pytest.raises(ValueError):
        PipelineConfig.loads(text)


@pytest.mark.parametrize("kw", [dict(delta=0.0), dict(dim=4), dict(eps_level=0), dict(check="slow"),
                                dict(map="csv")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        PipelineConfig(**kw).validate()


@pytest.mark.parametrize("flags", [["--delta", "0"], ["--eps-level", "0"], ["--dim", "5"]])
def test_invalid_flags_exit_2(flags, tmp_path, capsys):
    assert main(["all"] + CUBIC + flags + ["--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_config_file_with_flag_override(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(cubic_config(tmp_path / "a").dumps())
    assert main(["enclose", "--config", str(path), "--out", str(tmp_path / "b")]) == 0
    rep = json.loads((tmp_path / "b" / "report.json").read_text())
    assert rep["config"]["map"] == "cubic" and "block" not in rep


# end to end ----------------------------------------------------------------------

def test_cubic_run_and_report_verification(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["all"] + CUBIC + ["--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["ok"] and rep["block"]["components"] == 3
    assert (out / "transitions.dot").exists() and (out / "cubes" / "N_2.txt").exists()
    assert main(["verify-report", str(out / "report.json")]) == 0
    assert "report verified" in capsys.readouterr().out


def test_tampered_report_is_caught(tmp_path):
    rep = run_pipeline(cubic_config(tmp_path), write=False)
    assert verify_report(rep) == []
    rep["transition_matrix"][0][1] = 1
    assert "transition matrix" in verify_report(rep)
    rep["schema"] = "other"
    assert verify_report(rep) != []


def test_pipeline_is_deterministic(tmp_path):
    a = run_pipeline(cubic_config(tmp_path / "a"))
    b = run_pipeline(cubic_config(tmp_path / "b"))
    for r in (a, b):
        r.pop("timings")
        r["config"].pop("out")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_stages_stop_early(tmp_path):
    rep = run_pipeline(cubic_config(tmp_path), until="isolate", write=False)
    assert "block" in rep and "index_map" not in rep
    rep = run_pipeline(cubic_config(tmp_path), until="embed", write=False)
    assert rep["samples"] == 2000 and "domain" not in rep


def test_stage_errors_are_labelled(tmp_path, capsys):
    assert main(["all", "--map", "txt", "--input", str(tmp_path / "missing.txt"), "--dim", "1",
                 "--out", str(tmp_path)]) == 1
    assert "[generate]" in capsys.readouterr().err


# epsilon certificate -------------------------------------------------------------

def toy_attractor():
    vals = {(i,): [(4,)] for i in range(10)}
    vals[(1,)] = vals[(8,)] = [(3,), (4,), (5,)]
    F = TableMap(GridGeometry(1, 1.0), vals)
    return F, CubicalSet.from_tops([(i,) for i in range(1, 9)], 1)


def test_epsilon_certificate_for_a_toy_attractor():
    F, N = toy_attractor()
    pair = build_weak_index_pair(F, N)
    ref = ConleyIndex.of(index_map(F, pair.N, pair.P1, pair.P2)[0])
    cert = emit_epsilon_certificate(F, pair.N, pair.P1, pair.P2, 1, ref)
    assert cert["block_horizontal"] and cert["block_double"]
    assert all(cert["pair"].values())
    assert cert["eps"] == 0.5


def test_epsilon_level_zero_is_rejected():
    F, N = toy_attractor()
    pair = build_weak_index_pair(F, N)
    with pytest.raises(VerificationFailed):
        emit_epsilon_certificate(F, pair.N, pair.P1, pair.P2, 0)
