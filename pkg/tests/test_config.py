import math
from dataclasses import replace
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemotaxis_dsm.config import (
    ConfigError,
    ExperimentConfig,
    load_config,
    parse_config,
    serialize_config,
    set_path,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
PRESETS = sorted(CONFIGS.glob("*.ini"))

MINIMAL = """
[grid]
dim = 1
nx = 32
lx = 2.0
[motility]
family = power
k = 0.5
[time]
t_end = 1.0
"""


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.grid.nx == 32 and cfg.grid.lx == 2.0
    assert cfg.motility_spec().params == {"k": 0.5}
    assert cfg.build_params().tau == 1.0
    assert cfg.build_grid().size == 32


def test_presets_exist_and_parse():
    names = {p.stem for p in PRESETS}
    assert {"subcritical-2d", "supercritical-2d", "stabilization-k-half", "power-law-boundedness-k15-1d", "science-stripes"} <= names
    for p in PRESETS:
        cfg = load_config(p)
        assert cfg.output.scenario == p.stem
        assert parse_config(serialize_config(cfg)) == cfg


def test_critical_fraction_sets_total_mass():
    cfg = load_config(CONFIGS / "subcritical-2d.ini")
    g = cfg.build_grid()
    assert cfg.total_mass(g) == pytest.approx(0.5 * 4 * math.pi)
    ini = cfg.build_initial(g)
    assert ini.bump_mass + ini.u * g.measure == pytest.approx(2 * math.pi, rel=1e-14)
    assert ini.v == pytest.approx(2 * math.pi / g.measure / 9.0, rel=1e-14)
    assert ini.bump_center == pytest.approx((g.lengths[0] / 2, 0.0))


def test_physical_section_rescales():
    text = MINIMAL + """
[physical]
D_v = 2.0
D_n = 4.0
alpha = 1.0
beta = 3.0
k_s = 1.0
K_n = 1.0
theta = 0.5
"""
    cfg = parse_config(text)
    p = cfg.build_params()
    assert p.tau == 2.0 and p.beta == 3.0
    assert cfg.model is None
    assert parse_config(serialize_config(cfg)) == cfg


def test_physical_conflicts_with_model():
    with pytest.raises(ConfigError, match="cannot be combined"):
        parse_config(MINIMAL + "[model]\ntau = 1\n[physical]\nD_v = 1\n")


def test_errors_are_line_numbered_and_collected():
    text = """[grid]
dim = 2
nx = ten
ny = 8
[motility]
family = power
k = -1
[time]
t_end = 1
dt = 0
bogus = 3
"""
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    errs = info.value.errors
    assert len(errs) >= 3
    assert any(e.startswith("line 3:") for e in errs)
    assert any(e.startswith("line 11:") and "bogus" in e for e in errs)
    assert any(e.startswith("line 10:") for e in errs)


def test_negative_exponent_message():
    text = MINIMAL.replace("k = 0.5", "k = -2")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert any("k must be > 0" in e and e.startswith("line 8:") for e in info.value.errors)


@pytest.mark.parametrize(
    "snippet,fragment",
    [
        ("[grid]\ndim = 1\n[motility]\n", "missing section [time]"),
        (MINIMAL + "[grid]\nnx = 4\n", "duplicate"),
        (MINIMAL + "[nonsense]\n", "unknown section"),
        (MINIMAL + "just words\n", "line 11"),
        (MINIMAL.replace("family = power", "family = banana"), "banana"),
        (MINIMAL.replace("k = 0.5", "chi = 1.0"), "line"),
        (MINIMAL + "[initial]\nu = -1\n", "line"),
        (MINIMAL + "[initial]\nv = sometimes\n", "line"),
    ],
)
def test_invalid_configs(snippet, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(snippet)
    assert any(fragment in e for e in info.value.errors), info.value.errors


def test_initial_mass_below_background_is_rejected():
    text = MINIMAL + "[initial]\nu = 5\nperturbation = bump\ntotal_mass = 1.0\n"
    with pytest.raises(ConfigError, match="below the background"):
        parse_config(text)


def test_comments_and_quotes():
    text = "# heading\n" + MINIMAL.replace("lx = 2.0", "lx = 2.0   ; trailing") + '[output]\nscenario = "demo"\n'
    cfg = parse_config(text)
    assert cfg.grid.lx == 2.0 and cfg.output.scenario == "demo"


def test_set_path():
    cfg = parse_config(MINIMAL)
    assert set_path(cfg, "motility.k", 0.75).motility_spec().params["k"] == 0.75
    assert set_path(cfg, "grid.nx", 64.0).grid.nx == 64
    assert set_path(cfg, "time.t_end", 3).time.t_end == 3.0
    for bad in ("grid", "grid.zz", "nope.k", "grid.nx.y"):
        with pytest.raises(ConfigError):
            set_path(cfg, bad, 1.0)
    with pytest.raises(ConfigError):
        set_path(cfg, "grid.nx", 10.5)
    with pytest.raises(ConfigError):
        set_path(cfg, "output.scenario", 1.0)


def test_with_seed_and_output_dir():
    cfg = parse_config(MINIMAL)
    assert cfg.with_seed(9).initial.seed == 9
    assert cfg.with_output_dir("x/y").output.dir == "x/y"
    assert isinstance(cfg, ExperimentConfig)


finite = st.floats(0.01, 100, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(
    nx=st.integers(4, 64),
    lx=finite,
    k=st.floats(0.05, 5),
    tau=finite,
    beta=finite,
    t_end=finite,
    u=st.floats(0.01, 10),
    amplitude=st.floats(0, 1),
    seed=st.integers(0, 2**31),
    adapt=st.booleans(),
    family=st.sampled_from(["monod", "hill2", "zero", "linear"]),
)
def test_round_trip(nx, lx, k, tau, beta, t_end, u, amplitude, seed, adapt, family):
    base = parse_config(MINIMAL)
    params = {"monod": (("K", 1.5),), "hill2": (("K_n", 0.3),), "zero": (), "linear": (("c", 2.0),)}[family]
    cfg = replace(
        base,
        grid=replace(base.grid, nx=nx, lx=lx),
        model=replace(base.model, tau=tau, beta=beta),
        motility=replace(base.motility, params=(("k", k),)),
        consumption=replace(base.consumption, family=family, params=params),
        time=replace(base.time, t_end=t_end, adapt=adapt),
        initial=replace(base.initial, u=u, perturbation="noise", amplitude=amplitude, seed=seed),
    )
    text = serialize_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert serialize_config(again) == text
