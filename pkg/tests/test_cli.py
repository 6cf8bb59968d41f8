import json
from pathlib import Path

import pytest

from vrp_rpd.cli import main
from vrp_rpd.config import default_config, load_config, params_from_config
from vrp_rpd.instance import Instance
from vrp_rpd.schedule import Solution, evaluate

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture
def instance_file(tmp_path):
    rc = main(["variants", str(DATA / "desk" / "rd10a.tsp"),
               "--kinds", "base", "--seed", "3", "--out", str(tmp_path)])
    assert rc == 0
    return next(tmp_path.glob("*.json"))


def test_variants_writes_all_kinds(tmp_path):
    rc = main(["variants", str(DATA / "desk" / "rd10a.tsp"),
               "--kinds", "base,2x,1r10", "--seed", "3", "--replicates", "2",
               "--out", str(tmp_path)])
    assert rc == 0
    files = sorted(f.name for f in tmp_path.glob("*.json"))
    assert files == ["rd10a-1R10-s3-r0.json", "rd10a-1R10-s3-r1.json",
                     "rd10a-2x-s3.json", "rd10a-base-s3.json"]


def test_solve_and_verify(tmp_path, instance_file, capsys):
    out = tmp_path / "sol.json"
    rc = main(["solve", str(instance_file), "--method", "heuristics",
               "--seed", "1", "--out", str(out)])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "makespan:" in printed
    sol = Solution.load(out)
    inst = Instance.load(instance_file)
    z = evaluate(inst, sol).makespan
    assert f"makespan: {z}" in printed

    rc = main(["verify", str(instance_file), str(out)])
    assert rc == 0
    assert "constraint report" in capsys.readouterr().out


def test_oracle_command(tmp_path, capsys):
    inst = Instance(n=2, d=((0, 10, 12), (10, 0, 5), (12, 5, 0)),
                    p=(0, 20, 20), fleet=__import__("vrp_rpd.instance",
                    fromlist=["FleetConfig"]).FleetConfig(1, 2), label="toy")
    path = tmp_path / "toy.json"
    inst.save(path)
    rc = main(["oracle", str(path), "--out", str(tmp_path / "opt.json")])
    assert rc == 0
    assert "optimal makespan: 47.0" in capsys.readouterr().out
    assert evaluate(inst, Solution.load(tmp_path / "opt.json")).makespan == 47.0


def test_export_milp_command(tmp_path, instance_file):
    out = tmp_path / "model.lp"
    rc = main(["export-milp", str(instance_file), "--out", str(out)])
    assert rc == 0
    text = out.read_text()
    assert text.startswith("\\")
    assert "Minimize" in text and "End" in text


def test_bench_and_stats_commands(tmp_path, capsys):
    cfg = {
        "instances": [str(DATA / "desk" / "rd10a.tsp")],
        "kinds": ["base", "5x"],
        "methods": ["heuristics"],
        "seed": 3,
    }
    cfg_path = tmp_path / "bench.json"
    cfg_path.write_text(json.dumps(cfg))
    out_dir = tmp_path / "out"
    rc = main(["bench", "--config", str(cfg_path), "--out", str(out_dir)])
    assert rc == 0
    assert (out_dir / "results.csv").exists()
    capsys.readouterr()
    rc = main(["stats", "--rows", str(out_dir / "results.csv")])
    assert rc == 0
    assert "Heuristics" in capsys.readouterr().out


def test_config_defaults_round_trip(tmp_path):
    cfg = default_config()
    assert cfg["alns"]["t0"] == 0.30
    assert cfg["alns"]["alpha"] == 0.9998
    assert cfg["alns"]["stagnation_threshold"] == 2000
    assert cfg["brkga"]["population"] == 30000
    assert cfg["brkga"]["generations"] == 20000
    assert cfg["brkga"]["elite_bias"] == 0.7
    path = tmp_path / "conf.json"
    path.write_text(json.dumps({"alns": {"max_iter": 123}, "pool_size": 2}))
    merged = load_config(path)
    alns_params, brkga_params, pool = params_from_config(merged)
    assert alns_params.max_iter == 123
    assert alns_params.alpha == 0.9998
    assert brkga_params.elite_fraction == 0.15
    assert pool == 2
