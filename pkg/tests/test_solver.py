import math

import numpy as np
import pytest

from chemotaxis_dsm.grid import build_grid, integrate, mean
from chemotaxis_dsm.kinetics import ConsumptionSpec, ModelParams, MotilitySpec
from chemotaxis_dsm.solver import (
    InitialSpec,
    State,
    StepControls,
    StepFailure,
    init_state,
    run,
    stable_dt,
    step,
    with_dt,
)
from oracles import homogeneous_ode


def _params(k=1.0, cons="monod", tau=1.0, beta=1.0):
    c = ConsumptionSpec(cons, {"monod": {"K": 1.0}, "hill2": {"K_n": 1.0}, "zero": {}}[cons])
    return ModelParams(tau, beta, MotilitySpec("power", {"k": k}), c)


def _noisy(g, seed=3, n=0.5):
    return init_state(g, InitialSpec(u=1.0, v=1.0, n=n, perturbation="noise", amplitude=0.3, seed=seed))


def test_controls_validation():
    with pytest.raises(ValueError):
        StepControls(dt=0.0)
    with pytest.raises(ValueError):
        StepControls(dt_min=1.0, dt_max=0.1)
    c = with_dt(StepControls(dt=0.01, dt_min=1e-3, dt_max=0.1), 1e-4)
    assert c.dt == 1e-4 and c.dt_min == 1e-4


def test_init_state_validation_and_determinism():
    g = build_grid(2, [16, 16], [1.0, 1.0])
    a, b = _noisy(g, seed=11), _noisy(g, seed=11)
    assert np.array_equal(a.u, b.u)
    assert not np.array_equal(a.u, _noisy(g, seed=12).u)
    with pytest.raises(ValueError):
        init_state(g, InitialSpec(v=0.0))
    with pytest.raises(ValueError):
        init_state(g, InitialSpec(u=-1.0))
    with pytest.raises(ValueError):
        init_state(g, InitialSpec(perturbation="wave"))
    with pytest.raises(ValueError):
        init_state(g, InitialSpec(perturbation="noise", amplitude=2.0))


def test_bump_adds_requested_mass():
    g = build_grid(2, [32, 32], [2.0, 2.0])
    s = init_state(g, InitialSpec(u=0.1, perturbation="bump", bump_mass=3.0, bump_width=0.2, bump_center=(0.5, 1.5)))
    assert integrate(g, s.u) == pytest.approx(0.1 * 4 + 3.0, rel=1e-13)
    j, i = np.unravel_index(np.argmax(s.u), g.shape)
    x, y = g.mesh()
    assert abs(x[j, i] - 0.5) < 0.1 and abs(y[j, i] - 1.5) < 0.1


@pytest.mark.parametrize("cons", ["monod", "hill2", "zero"])
def test_positivity_and_conservation(cons):
    g = build_grid(2, [24, 24], [2.0, 2.0])
    params = _params(k=1.0, cons=cons)
    s = _noisy(g)
    total0 = integrate(g, s.u + s.n)
    controls = StepControls(dt=0.05)
    for _ in range(40):
        prev = s
        s, _ = step(g, s, params, controls)
        assert np.min(s.u) >= 0 and np.min(s.n) >= 0 and np.min(s.v) > 0
        assert integrate(g, s.u) >= integrate(g, prev.u) * (1 - 1e-13)
        assert np.max(s.n) <= np.max(prev.n) * (1 + 1e-12)
    assert abs(integrate(g, s.u + s.n) - total0) <= 1e-12 * total0


def test_homogeneous_steady_state_is_fixed():
    g = build_grid(2, [16, 16], [1.0, 1.0])
    params = _params(k=0.5, cons="monod", beta=2.0)
    s = State(g.full(3.0), g.full(1.5), g.zeros())
    new, _ = step(g, s, params, StepControls(dt=0.1))
    np.testing.assert_allclose(new.u, 3.0, rtol=1e-13)
    np.testing.assert_allclose(new.v, 1.5, rtol=1e-13)
    assert not np.any(new.n)


def _ode_error(dt, tau=1.0, beta=1.0, cons="monod", t_end=4.0):
    g = build_grid(1, [8], [1.0])
    params = _params(cons=cons, tau=tau, beta=beta)
    s = State(g.full(0.5), g.full(1.0), g.full(2.0))
    times, us, vs, ns = [0.0], [0.5], [1.0], [2.0]
    res = run(g, s, params, StepControls(dt=dt, dt_max=dt), t_end, every=1,
              on_output=lambda p, c, d, k: (c.t, float(c.u[0]), float(c.v[0]), float(c.n[0])) if k else None)
    for t, u, v, n in res.records:
        times.append(t), us.append(u), vs.append(v), ns.append(n)
    ref = homogeneous_ode(tau, beta, params.consumption.f, 0.5, 1.0, 2.0, np.array(times))
    return max(np.max(np.abs(np.array(a) - r)) for a, r in zip((us, vs, ns), ref))


@pytest.mark.parametrize("tau,beta,cons", [(1.0, 1.0, "monod"), (2.0, 0.5, "hill2")])
def test_homogeneous_ode_first_order(tau, beta, cons):
    e1 = _ode_error(0.02, tau, beta, cons)
    e2 = _ode_error(0.01, tau, beta, cons)
    assert e1 / e2 == pytest.approx(2.0, rel=0.15)


def test_homogeneous_stays_homogeneous():
    g = build_grid(2, [12, 10], [1.0, 1.0])
    s = State(g.full(0.5), g.full(1.0), g.full(2.0))
    for _ in range(10):
        s, _ = step(g, s, _params(), StepControls(dt=0.1))
    for f in (s.u, s.v, s.n):
        assert np.ptp(f) <= 1e-13 * np.max(f)


def test_reflection_symmetry_preserved():
    g = build_grid(2, [20, 20], [1.0, 1.0])
    s = _noisy(g, seed=5)
    u = 0.5 * (s.u + np.flip(s.u, axis=1))
    s = State(u, s.v, s.n)
    params = _params(k=0.5)
    for _ in range(10):
        s, _ = step(g, s, params, StepControls(dt=0.02))
    np.testing.assert_allclose(s.u, np.flip(s.u, axis=1), rtol=1e-9)


def test_one_d_decay_to_mean():
    g = build_grid(1, [64], [2.0])
    s = init_state(g, InitialSpec(u=1.0, v=1.0, n=0.0, perturbation="noise", amplitude=0.5, seed=1))
    m = mean(g, s.u)
    res = run(g, s, _params(k=0.5, cons="zero"), StepControls(dt=0.05, dt_max=0.05), 40.0, every=100)
    assert res.failure is None
    assert np.max(np.abs(res.state.u - m)) < 1e-4


def test_run_callbacks_and_records():
    g = build_grid(1, [16], [1.0])
    s = _noisy(g)
    seen = []
    res = run(g, s, _params(), StepControls(dt=0.1), 1.0, every=3,
              on_step=lambda p, c, d: seen.append(d), on_output=lambda p, c, d, k: k)
    assert res.steps == 10 == len(seen)
    assert res.records == [0, 3, 6, 9, 10]
    assert res.state.t == pytest.approx(1.0, abs=1e-12)


def test_run_hits_t_end_exactly_with_uneven_dt():
    g = build_grid(1, [16], [1.0])
    res = run(g, _noisy(g), _params(), StepControls(dt=0.3, dt_max=0.3), 1.0)
    assert res.state.t == pytest.approx(1.0, abs=1e-12)
    assert res.steps == 4


def test_run_argument_checks():
    g = build_grid(1, [8], [1.0])
    s = _noisy(g)
    with pytest.raises(ValueError):
        run(g, s, _params(), StepControls(), -1.0)
    with pytest.raises(ValueError):
        run(g, s, _params(), StepControls(), 1.0, every=0)
    assert run(g, s, _params(), StepControls(), 0.0).steps == 0


def test_adaptive_step_halves_on_large_change():
    g = build_grid(1, [32], [1.0])
    s = init_state(g, InitialSpec(u=0.01, v=1.0, perturbation="bump", bump_mass=1.0, bump_width=0.05))
    controls = StepControls(dt=1.0, dt_min=1e-6, dt_max=1.0, adapt=True, max_rel_change=0.05)
    _, used = step(g, s, _params(), controls)
    assert used < 1.0


def test_step_failure_when_dt_min_reached():
    g = build_grid(1, [32], [1.0])
    s = init_state(g, InitialSpec(u=0.01, v=1.0, perturbation="bump", bump_mass=1.0, bump_width=0.05))
    controls = StepControls(dt=0.5, dt_min=0.2, dt_max=1.0, adapt=True, max_rel_change=1e-6)
    with pytest.raises(StepFailure) as info:
        step(g, s, _params(), controls)
    assert info.value.state is s
    res = run(g, s, _params(), controls, 1.0, on_output=lambda p, c, d, k: (k, c.t))
    assert res.failure and "dt_min" in res.failure
    assert res.steps == 0 and res.records == [(0, 0.0)]


def test_stable_dt_bounds():
    g = build_grid(2, [16, 16], [1.0, 1.0])
    c = StepControls(dt=0.01, dt_min=1e-5, dt_max=0.5)
    steady = State(g.full(1.0), g.full(1.0), g.zeros())
    assert stable_dt(g, steady, _params(cons="zero"), c) == 0.5
    rough = _noisy(g)
    dt = stable_dt(g, rough, _params(), c)
    assert c.dt_min <= dt < 0.5


def test_exponential_motility_large_signal():
    g = build_grid(1, [32], [1.0])
    params = ModelParams(1.0, 1.0, MotilitySpec("exponential", {"chi": 1.0}))
    s = State(g.full(1.0), g.full(500.0) + 10 * np.cos(math.pi * g.centers(0)), g.zeros())
    new, _ = step(g, s, params, StepControls(dt=0.01))
    assert np.all(np.isfinite(new.u)) and np.min(new.u) >= 0


def _smooth_run(n, dt, t_end=0.2):
    g = build_grid(1, [n], [1.0])
    x = g.centers(0)
    s = State(1.0 + 0.4 * np.cos(math.pi * x), 1.0 + 0.2 * np.cos(2 * math.pi * x), 0.5 + 0.3 * np.cos(math.pi * x))
    return run(g, s, _params(k=0.5), StepControls(dt=dt, dt_max=dt), t_end).state


def _restrict(fine):
    return 0.5 * (fine[0::2] + fine[1::2])


def test_second_order_in_space():
    # same dt on every grid, so differences between grids are spatial
    a, b, c = (_smooth_run(n, 0.01).u for n in (32, 64, 128))
    e1 = np.max(np.abs(a - _restrict(b)))
    e2 = np.max(np.abs(b - _restrict(c)))
    assert e1 / e2 == pytest.approx(4.0, rel=0.25)


def test_first_order_in_time():
    a, b, c = (_smooth_run(32, dt).u for dt in (0.02, 0.01, 0.005))
    assert np.max(np.abs(a - b)) / np.max(np.abs(b - c)) == pytest.approx(2.0, rel=0.25)
