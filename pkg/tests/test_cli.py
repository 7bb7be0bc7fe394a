import json
import os
import subprocess
import sys

import pytest

from ergomix import cli
from ergomix.errors import ConfigurationError

SMALL = {
    "instance": {"name": "translation"},
    "truncation": {"J": 12},
    "experiments": [{"kind": "invariance", "n_samples": 120, "t_list": [0.0, 0.7]},
                    {"kind": "mixing", "n_samples": 120, "t_grid": [0, 4, 9], "n_boot": 20}],
    "seed": 11,
}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def reports(out):
    return {p: json.loads((out / p).read_text()) for p in sorted(os.listdir(out)) if p.endswith(".json")}


def test_list_instances(capsys):
    assert cli.main(["list-instances"]) == 0
    text = capsys.readouterr().out
    assert "translation" in text and "black_scholes" in text
    assert cli.main(["list-instances", "--json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert {r["id"] for r in rows} >= {"translation", "birth_death", "death_model",
                                       "black_scholes", "rudnicki_translation"}


def test_run_pass_writes_reports(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", write_cfg(tmp_path, SMALL), "--output", str(out)]) == 0
    reps = reports(out)
    assert set(reps) == {"invariance-translation-11.json", "mixing-translation-11.json"}
    assert all(r["passed"] and r["schema"] for r in reps.values())
    assert (out / "mixing-translation-11.csv").read_text().startswith("t,estimate,lo,hi")
    embedded = reps["mixing-translation-11.json"]["config"]
    assert "workers" not in embedded and embedded["seed"] == 11


def test_workers_do_not_change_results(tmp_path):
    outs = []
    for w in (1, 2):
        out = tmp_path / f"w{w}"
        assert cli.main(["run", write_cfg(tmp_path, SMALL), "--output", str(out),
                         "--workers", str(w)]) == 0
        outs.append({k: {f: v for f, v in r.items() if f != "wall_clock"}
                     for k, r in reports(out).items()})
    assert outs[0] == outs[1]


def test_fail_exit_code(tmp_path):
    cfg = {"instance": {"name": "rudnicki_translation"},
           "experiments": [{"kind": "eigen-residuals", "tol": 1e-14}]}
    out = tmp_path / "out"
    assert cli.main(["run", write_cfg(tmp_path, cfg), "--output", str(out)]) == 2
    (rep,) = reports(out).values()
    assert not rep["passed"]


@pytest.mark.parametrize("cfg, fragment", [
    ({"instance": {"name": "translation"}, "experiments": [{"kind": "mixing"}], "extra": 1},
     "config error at /"),
    ({"instance": {"name": "translation"}, "experiments": [{"kind": "nope"}]},
     "/experiments/0/kind"),
    ({"instance": {"name": "translation"}, "experiments": [{"kind": "mixing", "speed": 3}]},
     "unknown knob"),
    ({"instance": {"name": "flatland"}, "experiments": [{"kind": "mixing"}]}, "unknown instance"),
    ({"instance": {"name": "birth_death", "params": {"a": 1, "b": 1, "d": 1}},
      "experiments": [{"kind": "criterion-audit"}]}, "0<|b|<|d|"),
])
def test_error_exit_code(tmp_path, capsys, cfg, fragment):
    assert cli.main(["run", write_cfg(tmp_path, cfg), "--output", str(tmp_path / "o")]) == 1
    assert fragment in capsys.readouterr().err


def test_validate_config_raises():
    with pytest.raises(ConfigurationError):
        cli.validate_config({"instance": {"name": "translation"}, "experiments": []})


def test_env_overrides_output_only(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    cfg = cli.resolve({**SMALL, "output_dir": "ignored"})
    assert cfg["output_dir"] == str(tmp_path / "env") and cfg["seed"] == 11
    assert cli.resolve(SMALL, output="flag")["output_dir"] == "flag"
    assert cli.resolve(SMALL, seed=5)["seed"] == 5


def test_embedded_config_round_trip(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", write_cfg(tmp_path, SMALL), "--output", str(out)]) == 0
    embedded = reports(out)["invariance-translation-11.json"]["config"]
    cli.validate_config(embedded)
    out2 = tmp_path / "out2"
    assert cli.main(["run", write_cfg(tmp_path, embedded, "again.json"), "--output", str(out2)]) == 0
    a = reports(out)["invariance-translation-11.json"]
    b = reports(out2)["invariance-translation-11.json"]
    assert a["estimates"] == b["estimates"]


def test_ou_check_subprocess(tmp_path):
    res = subprocess.run([sys.executable, "-m", "ergomix.cli", "ou-check", "--paths", "2000",
                          "--output", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert res.stdout.strip().endswith("PASS")


def test_bad_workers():
    assert cli.main(["run", "x.json", "--workers", "0"]) == 1
