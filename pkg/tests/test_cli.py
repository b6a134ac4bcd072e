"""CLI command tests (no server binding; serve is covered by the service tests)."""
from __future__ import annotations

import json
from pathlib import Path

import pytest

from werewolf9.cli import main

from helpers import paper_log_lines


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_data_then_replay_verifies(tmp_path, capsys):
    code, out, _ = run(capsys, "gen-data", "--n", "3", "--seed", "5",
                       "--out", str(tmp_path / "data"))
    assert code == 0 and "3 replay logs" in out
    logs = sorted((tmp_path / "data").glob("*.jsonl"))
    assert len(logs) == 3
    code, out, _ = run(capsys, "replay", "--log", str(logs[0]))
    assert code == 0 and out.startswith("verified")


def test_replay_rejects_tampered_log(tmp_path, capsys):
    path = tmp_path / "game.jsonl"
    lines = paper_log_lines().splitlines()
    # forge a death announcement the engine would never produce
    for i, line in enumerate(lines):
        if '"kind": "death_announce"' in line and '"seats": [1, 2]' in line:
            lines[i] = line.replace('"seats": [1, 2]', '"seats": [1, 3]', 1)
            break
    path.write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, "replay", "--log", str(path))
    assert code == 1 and "mismatch" in err


def test_score_on_reference_fixture(tmp_path, capsys):
    path = tmp_path / "paper.jsonl"
    path.write_text(paper_log_lines())
    code, out, _ = run(capsys, "score", "--log", str(path))
    assert code == 0
    witch_line = next(ln for ln in out.splitlines() if "witch" in ln)
    assert "poison_good:-1.0" in witch_line
    seer_line = next(ln for ln in out.splitlines() if "seer" in ln)
    assert "werewolf_exiled_day_one:+0.5" in seer_line


def test_eval_smoke_with_random_seats(capsys):
    code, out, _ = run(capsys, "eval", "--n-games", "10", "--seed", "3",
                       "--seats", "random*9")
    assert code == 0
    report = json.loads(out.strip().splitlines()[-1])
    assert report["games"] == 10
    assert 0.0 <= report["win_rate"] <= 1.0
    assert report["half_width"] > 0.0


def test_eval_faction_match(capsys):
    code, out, _ = run(capsys, "eval", "--n-games", "8", "--seed", "4",
                       "--good", "scripted", "--wolf", "random")
    assert code == 0
    report = json.loads(out.strip().splitlines()[-1])
    assert report["games"] == 8


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run(capsys, "eval", "--nonsense")
    assert code != 0
    assert "usage" in err.lower() or "unrecognized" in err.lower()


def test_missing_files_fail_before_side_effects(tmp_path, capsys):
    code, _, err = run(capsys, "replay", "--log", str(tmp_path / "absent.jsonl"))
    assert code == 2 and "not found" in err
    code, _, err = run(capsys, "train", "--config", str(tmp_path / "absent.json"),
                       "--out", str(tmp_path / "out"))
    assert code == 2 and "not found" in err
    assert not (tmp_path / "out").exists()


def test_train_smoke(tmp_path, capsys):
    cfg = {
        "population_size": 1, "batch_size": 48, "bc_batch_size": 32,
        "episodes_per_iter": 2, "good_steps_per_iter": 1, "wolf_good_ratio": 1,
        "bc_episode_prob": 0.0, "checkpoint_every": 2, "seed": 1,
        "net": {"row_hidden": 8, "row_out": 6, "player_hidden": 10,
                "player_out": 8, "global_hidden": 10, "global_out": 8,
                "head_hidden": 6, "instr_hidden": 8, "seed": 0},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out_dir = tmp_path / "run"
    code, out, _ = run(capsys, "train", "--config", str(cfg_path),
                       "--out", str(out_dir), "--iterations", "2")
    assert code == 0
    assert (out_dir / "metrics.jsonl").exists()
    ckpts = sorted(out_dir.glob("*.npz"))
    assert len(ckpts) == 2  # one per faction
    metrics = [json.loads(ln) for ln in (out_dir / "metrics.jsonl").read_text().splitlines()]
    assert all("alpha" in m and "loss_bc" in m for m in metrics)
    # checkpoints load back
    code, out, _ = run(capsys, "eval", "--n-games", "2", "--seed", "9",
                       "--seats", f"thinker:{ckpts[0]}*2,random*7")
    assert code == 0
