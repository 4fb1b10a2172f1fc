import dataclasses

import pytest

from plapshoot.config import (ConfigError, ConfigRejected, OutputSettings, ScanSettings,
                              Tolerances, load_config, parse_config)
from plapshoot.model import CLAUSE_LOG_DERIV

CI1 = """\
params:
  p: 3
  N: 5
  m: 0.5
  l: 3
  alpha: 5.75
"""


def test_minimal_config_gets_defaults():
    cfg = parse_config(CI1)
    assert cfg.params.p == 3.0 and cfg.params.alpha1 == 5.75 and cfg.params.K1 == 1.0
    assert cfg.tolerances == Tolerances()
    assert cfg.scan == ScanSettings()
    assert cfg.output == OutputSettings()
    assert cfg.tolerances.tol == 1e-10 and cfg.tolerances.tol_match == 1e-6


def test_alpha_six_rejected_with_clause():
    with pytest.raises(ConfigRejected) as info:
        parse_config(CI1.replace("5.75", "6"))
    assert CLAUSE_LOG_DERIV in info.value.report.violations
    assert CLAUSE_LOG_DERIV in str(info.value)


def test_unknown_key_named_with_position():
    with pytest.raises(ConfigError, match=r"<config>:7:3: unknown key 'alpha2'"):
        parse_config(CI1 + "  alpha2: 5.0\n")


def test_unknown_block():
    with pytest.raises(ConfigError, match="unknown block 'solver'"):
        parse_config(CI1 + "solver:\n  x: 1\n")


def test_missing_params():
    with pytest.raises(ConfigError, match="missing required block"):
        parse_config("scan:\n  a_lo: 1\n")
    with pytest.raises(ConfigError, match="params missing alpha"):
        parse_config(CI1.replace("  alpha: 5.75\n", ""))


def test_scientific_strings_accepted():
    cfg = parse_config(CI1 + "tolerances:\n  tol: 1e-11\n  tol_a: 5E-9\n  slope_min: null\n")
    assert cfg.tolerances.tol == 1e-11 and cfg.tolerances.tol_a == 5e-9
    assert cfg.tolerances.slope_min is None


@pytest.mark.parametrize("block,line", [
    ("tolerances", "  tol: -1e-10"),
    ("tolerances", "  tol: 0"),
    ("tolerances", "  tol: fast"),
    ("tolerances", "  tol_E: .inf"),
    ("tolerances", "  tol: true"),
    ("scan", "  growth: 1.0"),
    ("scan", "  n_max: 2.5"),
    ("output", "  formats: [csv, xml]"),
    ("output", "  dir: 3"),
])
def test_bad_values_rejected(block, line):
    with pytest.raises(ConfigError):
        parse_config(CI1 + f"{block}:\n{line}\n")


def test_syntax_error_has_line_and_column():
    with pytest.raises(ConfigError, match=r"<config>:\d+:\d+:"):
        parse_config("params: [1,\n")


def test_block_must_be_mapping():
    with pytest.raises(ConfigError, match="must be a mapping"):
        parse_config(CI1 + "scan: 3\n")


def test_top_level_must_be_mapping():
    with pytest.raises(ConfigError):
        parse_config("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        parse_config("")


def test_load_from_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(CI1 + "output:\n  formats: json\n", encoding="utf-8")
    cfg = load_config(path)
    assert cfg.output.formats == ("json",)
    assert cfg.source == str(path)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")


def test_as_dict_roundtrips_through_parse():
    import yaml
    cfg = parse_config(CI1 + "scan:\n  a_hi: 100\n")
    again = parse_config(yaml.safe_dump(cfg.as_dict()))
    assert dataclasses.asdict(again.tolerances) == dataclasses.asdict(cfg.tolerances)
    assert again.scan == cfg.scan and again.params == cfg.params
