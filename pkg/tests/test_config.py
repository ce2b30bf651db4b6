import textwrap

import pytest

from excitable_crawler.config import ConfigError, RunConfig, load_run_config, load_sweep_spec, parse_run_config
from excitable_crawler.integrate import IntegratorConfig
from excitable_crawler.model import REFERENCE_GROUPS, REFERENCE_INITIAL_STATE
from excitable_crawler.scales import groups_from_dimensional

DIMENSIONAL = """
[dimensional]
m = 0.005
l0 = 0.1
k = 0.25
b = 0.235
f_max = 0.125
k_v = 0.25
c = 1e-6
alpha = 10.0
beta = 0.2
gamma = 0.2
eps_f = 2.1276595744680852e-4
n_f = 1.5
"""


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def test_empty_config_is_the_default_run():
    cfg = parse_run_config({})
    assert cfg.groups == REFERENCE_GROUPS
    assert cfg.initial_state == REFERENCE_INITIAL_STATE
    assert cfg.integrator == IntegratorConfig()
    assert (cfg.t0, cfg.t1) == (0.0, 200.0)
    assert cfg == RunConfig()


def test_partial_groups_fill_in_defaults():
    cfg = parse_run_config({"groups": {"n_f": 0.0}})
    assert cfg.groups == REFERENCE_GROUPS.replace(n_f=0.0)


def test_dimensional_source(tmp_path):
    cfg = load_run_config(write(tmp_path, DIMENSIONAL))
    assert cfg.source == "dimensional"
    assert cfg.groups == groups_from_dimensional(cfg.dimensional)
    assert cfg.groups.pi_f == pytest.approx(2.5)


def test_both_sources_rejected(tmp_path):
    with pytest.raises(ConfigError, match="exactly one"):
        load_run_config(write(tmp_path, DIMENSIONAL + "\n[groups]\nzeta = 1.0\n"))


def test_missing_dimensional_key(tmp_path):
    text = DIMENSIONAL.replace("alpha = 10.0\n", "")
    with pytest.raises(ConfigError, match=r"\[dimensional\].*alpha"):
        load_run_config(write(tmp_path, text))


def test_applied_current_rejected(tmp_path):
    with pytest.raises(ConfigError, match="i_ext"):
        load_run_config(write(tmp_path, DIMENSIONAL + "i_ext = 1e-3\n"))


@pytest.mark.parametrize(
    "text, pattern",
    [
        ("[groups]\nzeta = -1.0\n", r"\[groups\].*zeta"),
        ("[groups]\npi_f = \"big\"\n", r"\[groups\]\.pi_f: expected a number"),
        ("[groups]\nfoo = 1.0\n", r"unknown key.*foo"),
        ("[integrator]\nt0 = 5.0\nt1 = 5.0\n", r"\[integrator\]\.t1"),
        ("[integrator]\nrel_tol = 0.0\n", r"\[integrator\]"),
        ("[integrator]\nmax_steps = 1.5\n", r"max_steps: expected an integer"),
        ("[analysis]\nlimit_cycle = 1\n", r"limit_cycle: expected true/false"),
        ("[output]\ntrajectory_stride = 0\n", r"trajectory_stride"),
        ("[plotting]\nx = 1\n", r"unknown section"),
        ("[initial_state]\nw = 1.0\n", r"\[initial_state\]: unknown key"),
    ],
)
def test_field_diagnostics(tmp_path, text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        load_run_config(write(tmp_path, text))


def test_syntax_error_reports_line(tmp_path):
    with pytest.raises(ConfigError, match=r"line 3"):
        load_run_config(write(tmp_path, "[groups]\nzeta = 1.0\npi_f = \n"))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "nope.toml")


def test_output_directory_relative_to_config(tmp_path):
    cfg = load_run_config(write(tmp_path, "[output]\ndirectory = \"results\"\n"))
    assert cfg.output.directory == str(tmp_path / "results")


def test_resolved_config_round_trips_groups():
    cfg = parse_run_config({"groups": {"zeta": 1.0}})
    again = parse_run_config({"groups": cfg.resolved()["groups"]})
    assert again.groups == cfg.groups


SWEEP = """
[integrator]
t1 = 30.0

[sweep]
parallelism = 2

[[sweep.axis]]
name = "pi_f"
min = 1.0
max = 3.0
count = 3

[[sweep.axis]]
name = "n_f"
min = 0.5
max = 1.5
count = 2
"""


def test_sweep_grid_order(tmp_path):
    spec = load_sweep_spec(write(tmp_path, SWEEP))
    assert spec.parallelism == 2
    assert spec.base.t1 == 30.0
    grid = spec.grid()
    assert [(p["pi_f"], p["n_f"]) for p in grid] == [
        (1.0, 0.5), (1.0, 1.5), (2.0, 0.5), (2.0, 1.5), (3.0, 0.5), (3.0, 1.5)
    ]


def test_single_point_axis(tmp_path):
    text = "[sweep]\n[[sweep.axis]]\nname = \"zeta\"\nmin = 4.7\nmax = 4.7\ncount = 1\n"
    assert load_sweep_spec(write(tmp_path, text)).grid() == [{"zeta": 4.7}]


@pytest.mark.parametrize(
    "text, pattern",
    [
        ("[sweep]\n[[sweep.axis]]\nname = \"pi_q\"\nmin = 0.0\nmax = 1.0\ncount = 2\n", "unknown group"),
        ("[sweep]\n[[sweep.axis]]\nname = \"n_f\"\nmin = 0.0\nmax = 1.0\ncount = 0\n", "count"),
        ("[sweep]\n[[sweep.axis]]\nname = \"n_f\"\nmin = 0.0\nmax = 1.0\n", "missing"),
        ("[sweep]\nparallelism = 0\n[[sweep.axis]]\nname = \"n_f\"\nmin = 0.0\nmax = 1.0\ncount = 2\n", "parallelism"),
        ("[sweep]\n", "one or two axes"),
        ("[groups]\nzeta = 1.0\n", "missing \\[sweep\\]"),
    ],
)
def test_sweep_validation(tmp_path, text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        load_sweep_spec(write(tmp_path, text))
