import numpy as np
import pytest

from conftest import tiny_config
from cpfabc.cli import main
from cpfabc.config import RunConfig
from cpfabc.errors import ConfigError


def test_defaults_mirror_study_layout():
    cfg = RunConfig()
    assert len(cfg.abc.runs) == 13
    assert cfg.prior_spec().dim == 8
    mc = cfg.method_config(0.025, 4)
    assert mc.epsilon == 0.025 and mc.seed == 4 and len(mc.bounds) == 8


def test_yaml_roundtrip(tmp_path):
    cfg = tiny_config()
    cfg.save(tmp_path / "c.yaml")
    assert RunConfig.load(tmp_path / "c.yaml") == cfg


@pytest.mark.parametrize("data", [
    {"unknown": 1},
    {"abc": {"runs": [{"method": "rej"}]}},
    {"abc": {"runs": [{"method": "uwqrf", "epsilon": 0.1}]}},
    {"abc": {"runs": [{"method": "mcmc", "epsilon": 0.1}]}},
    {"table": {"M": 0}},
    {"abc": {"wqrf_mode": "other"}},
])
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)


def test_bad_yaml(tmp_path):
    (tmp_path / "c.yaml").write_text("seed: [1,\n")
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "c.yaml")
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "missing.yaml")


def test_cli_end_to_end(tmp_path, capsys):
    cfg = tiny_config(output_dir=str(tmp_path / "run"), table={"M": 120, "chunk": 60},
                      abc={"runs": [{"method": "rej", "epsilon": 0.2}, {"method": "rfa", "epsilon": 0.2}]})
    cfg.save(tmp_path / "c.yaml")
    c = str(tmp_path / "c.yaml")
    obs = str(tmp_path / "obs.csv")
    assert main(["simulate", "--config", c, "--observed", obs]) == 0
    assert main(["simulate", "--config", c, "--resume"]) == 0
    assert main(["calibrate", "--config", c, "--observed", obs]) in (0, 3)
    run = tmp_path / "run"
    assert (run / "posterior.csv").exists()
    assert main(["predict", "--config", c, "--result", str(run / "posterior_Rej_20pct.csv"),
                 "--observed", obs, "--output", str(tmp_path / "pred")]) == 0
    assert main(["simstudy", "--config", c, "--output", str(run)]) in (0, 3)
    assert main(["report", "--run-dir", str(run)]) == 0
    assert (run / "summary.md").exists()
    capsys.readouterr()


def test_cli_exit_codes(tmp_path, capsys):
    (tmp_path / "bad.yaml").write_text("workers: 0\n")
    assert main(["simulate", "--config", str(tmp_path / "bad.yaml")]) == 1
    assert main(["calibrate", "--observed", str(tmp_path / "none.csv"), "--output", str(tmp_path)]) == 2
    assert main(["report", "--run-dir", str(tmp_path / "nope")]) == 1
    with pytest.raises(SystemExit):
        main(["bogus"])
    err = capsys.readouterr().err
    assert "configuration error" in err


def test_cli_seed_override(tmp_path):
    cfg = tiny_config(output_dir=str(tmp_path), table={"M": 30, "chunk": 30})
    cfg.save(tmp_path / "c.yaml")
    assert main(["simulate", "--config", str(tmp_path / "c.yaml"), "--seed", "9"]) == 0
    from cpfabc.pipeline import load_table

    t = load_table(tmp_path / "table.csv")
    again = main(["simulate", "--config", str(tmp_path / "c.yaml"), "--seed", "9",
                  "--table", str(tmp_path / "b.csv")])
    assert again == 0 and np.array_equal(load_table(tmp_path / "b.csv").params, t.params)
