"""Semi-implicit time stepping for the cell / signal / nutrient system.

One step of length ``dt`` from ``(u, v, n)``:

1. nutrient: ``(1/dt + a - Δ) n⁺ = n/dt`` with ``a = u f(n)/n >= 0``;
2. cells, in the unknown ``p = γ(v) u⁺``:
   ``σ p - Δp = u/dt + a n⁺`` with ``σ = 1/(γ(v) dt)``, then ``u⁺ = p/γ(v)``;
3. signal: ``(τ/dt + β - Δ) v⁺ = τ v/dt + u⁺``.

Both positivity-carrying solves are M-matrix systems with non-negative data,
so ``u⁺, n⁺ >= 0`` without any clipping.  The cell source ``a n⁺`` is exactly
the nutrient sink, so ``∫(u + n)`` is conserved; the small constant that the
iterative solver leaves in the mean of its residual is folded back into the
solution (one scalar per solve) so conservation holds to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .elliptic import EllipticSolveOptions, helmholtz_solve, weighted_helmholtz_solve
from .grid import Grid, integrate, laplacian
from .kinetics import ModelParams


class StepFailure(RuntimeError):
    """No admissible step; ``state`` is the last accepted state."""

    def __init__(self, message, state=None, dt=None):
        super().__init__(message)
        self.state = state
        self.dt = dt


@dataclass(frozen=True)
class State:
    u: np.ndarray
    v: np.ndarray
    n: np.ndarray
    t: float = 0.0

    def copy(self) -> "State":
        return State(self.u.copy(), self.v.copy(), self.n.copy(), self.t)


@dataclass(frozen=True)
class InitialSpec:
    """Constant fields plus an optional perturbation of ``u``.

    ``perturbation``: ``"none"``; ``"noise"`` (``u = u0 (1 + amplitude ξ)``
    with ``ξ`` uniform on [-1, 1] from a seeded PCG64 stream); or ``"bump"``
    (``u = u0 + `` a Gaussian of width ``bump_width`` centred at
    ``bump_center``, normalised on the grid to carry mass ``bump_mass``).
    """

    u: float = 1.0
    v: float = 1.0
    n: float = 0.0
    perturbation: str = "none"
    amplitude: float = 0.0
    seed: int = 0
    bump_mass: float = 1.0
    bump_width: float = 0.1
    bump_center: tuple[float, ...] | None = None


@dataclass(frozen=True)
class StepControls:
    dt: float = 1e-2
    dt_min: float = 1e-8
    dt_max: float = 1e-1
    adapt: bool = False
    max_rel_change: float = 0.1
    solver_tol: float = 1e-12

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt <= dt_max")
        if not self.max_rel_change > 0:
            raise ValueError("max_rel_change must be > 0")


def init_state(grid: Grid, initial: InitialSpec) -> State:
    if not initial.v > 0:
        raise ValueError("initial signal must be strictly positive")
    if initial.u < 0 or initial.n < 0:
        raise ValueError("initial cell density and nutrient must be non-negative")
    u = grid.full(initial.u)
    kind = initial.perturbation
    if kind == "noise":
        if not 0 <= initial.amplitude <= 1:
            raise ValueError("noise amplitude must lie in [0, 1] to keep u >= 0")
        rng = np.random.Generator(np.random.PCG64(initial.seed))
        u = u * (1.0 + initial.amplitude * rng.uniform(-1.0, 1.0, size=grid.shape))
    elif kind == "bump":
        if not (initial.bump_mass >= 0 and initial.bump_width > 0):
            raise ValueError("bump needs mass >= 0 and width > 0")
        center = initial.bump_center or tuple(L / 2 for L in grid.lengths)
        coords = grid.mesh()
        r2 = sum((c - x0) ** 2 for c, x0 in zip(coords, center))
        bump = np.exp(-r2 / (2 * initial.bump_width**2))
        u = u + initial.bump_mass * bump / integrate(grid, bump)
    elif kind != "none":
        raise ValueError(f"unknown perturbation {kind!r}")
    if not np.any(u > 0):
        raise ValueError("initial cell density must not vanish identically")
    return State(u, grid.full(initial.v), grid.full(initial.n), 0.0)


def _conserving_weighted_solve(grid, sigma, rhs, opts, x0=None):
    """Weighted solve, then shift by the constant that zeroes the residual's mean.

    Adding ``c`` changes ``σ p - Δp`` by ``c σ`` only, so ``Σ σ p`` becomes
    ``Σ rhs`` up to rounding.
    """
    p = weighted_helmholtz_solve(grid, sigma, rhs, opts, x0=x0)
    r = rhs - (sigma * p - laplacian(grid, p))
    return p + math.fsum(r.ravel()) / math.fsum(sigma.ravel())


def _advance(grid: Grid, state: State, params: ModelParams, dt: float, opts) -> State:
    u, v, n = state.u, state.v, state.n
    gam = params.motility.gamma(v)
    if params.consumption.is_zero or not np.any(n > 0):
        n_new = n.copy()
        source = np.zeros_like(u)
    else:
        a = u * params.consumption.f_over_s(n)
        n_new = _conserving_weighted_solve(grid, 1.0 / dt + a, n / dt, opts, x0=n)
        source = a * n_new
    sigma = 1.0 / (gam * dt)
    p = _conserving_weighted_solve(grid, sigma, u / dt + source, opts, x0=gam * u)
    u_new = p / gam
    v_new = helmholtz_solve(grid, params.tau * v / dt + u_new, params.beta + params.tau / dt, opts)
    return State(u_new, v_new, n_new, state.t + dt)


def _rel_change(old, new):
    scale = max(float(np.max(np.abs(old))), float(np.max(np.abs(new))))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(new - old))) / scale


def step(grid: Grid, state: State, params: ModelParams, controls: StepControls, dt: float | None = None):
    """Advance one accepted step; returns ``(new_state, dt_used)``.

    With ``controls.adapt`` the step is retried with ``dt/2`` while any field
    changes by more than ``max_rel_change`` (relative, max norm); falling
    below ``dt_min`` raises :class:`StepFailure`.
    """
    dt = controls.dt if dt is None else dt
    opts = EllipticSolveOptions(rel_tolerance=controls.solver_tol)
    while True:
        try:
            new = _advance(grid, state, params, dt, opts)
            finite = all(np.all(np.isfinite(x)) for x in (new.u, new.v, new.n))
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            if not controls.adapt:
                raise StepFailure(f"step failed at t={state.t:.6g}: {exc}", state, dt) from exc
            new, finite = None, False
        if new is not None and finite and not controls.adapt:
            return new, dt
        if new is not None and finite:
            change = max(_rel_change(state.u, new.u), _rel_change(state.v, new.v), _rel_change(state.n, new.n))
            if change <= controls.max_rel_change:
                return new, dt
        elif not controls.adapt:
            raise StepFailure(f"non-finite values at t={state.t:.6g}", state, dt)
        dt *= 0.5
        if dt < controls.dt_min:
            raise StepFailure(
                f"time step collapsed below dt_min={controls.dt_min:g} at t={state.t:.6g}", state, dt
            )


def stable_dt(grid: Grid, state: State, params: ModelParams, controls: StepControls) -> float:
    """Step size keeping the explicit reaction and the relative drift below ``max_rel_change``."""
    u, v, n = state.u, state.v, state.n
    rates = [float(np.max(params.consumption.f(n)))]
    umax = float(np.max(u))
    if umax > 0:
        rates.append(float(np.max(np.abs(laplacian(grid, u * params.motility.gamma(v))))) / umax)
    vmax = float(np.max(v))
    rates.append(float(np.max(np.abs(laplacian(grid, v) - params.beta * v + u))) / (params.tau * vmax))
    rate = max(rates)
    dt = controls.dt_max if rate <= 0 else controls.max_rel_change / rate
    return float(min(max(dt, controls.dt_min), controls.dt_max))


@dataclass
class RunResult:
    state: State
    records: list = field(default_factory=list)
    steps: int = 0
    failure: str | None = None
    last_dt: float | None = None


def run(
    grid: Grid,
    state: State,
    params: ModelParams,
    controls: StepControls,
    t_end: float,
    every: int = 10,
    on_step=None,
    on_output=None,
) -> RunResult:
    """Integrate to ``t_end``.

    ``on_step(prev, new, dt)`` is called after every accepted step and
    ``on_output(prev, new, dt, step_index)`` at step 0 (with ``prev=None``),
    every ``every`` steps and at the final time; whatever ``on_output``
    returns (if not None) is appended to ``records``.  A solver failure ends
    the run early with ``failure`` set and the last good state returned.
    """
    if t_end < state.t:
        raise ValueError("t_end precedes the current time")
    if every < 1:
        raise ValueError("output cadence must be >= 1")
    result = RunResult(state)
    if t_end == state.t:
        return result

    def emit(prev, cur, dt, k):
        if on_output is not None:
            rec = on_output(prev, cur, dt, k)
            if rec is not None:
                result.records.append(rec)

    emit(None, state, 0.0, 0)
    dt = controls.dt
    accepted_since_growth = 0
    k = 0
    eps_t = 1e-12 * max(1.0, abs(t_end))
    cur = state
    last_emitted = 0
    while t_end - cur.t > eps_t:
        trial = min(dt, t_end - cur.t)
        try:
            new, used = step(grid, cur, params, controls, trial)
        except StepFailure as exc:
            result.failure = str(exc)
            result.last_dt = exc.dt
            break
        k += 1
        if on_step is not None:
            on_step(cur, new, used)
        if controls.adapt:
            if used < trial:
                dt, accepted_since_growth = used, 0
            else:
                accepted_since_growth += 1
                if accepted_since_growth >= 5:
                    dt = min(dt * 1.2, controls.dt_max)
                    accepted_since_growth = 0
        final = t_end - new.t <= eps_t
        if k % every == 0 or final:
            emit(cur, new, used, k)
            last_emitted = k
        cur = new
        result.last_dt = used
    if result.failure is not None and last_emitted != k and k > 0:
        emit(None, cur, 0.0, k)
    result.state = cur
    result.steps = k
    return result


def with_dt(controls: StepControls, dt: float) -> StepControls:
    return replace(controls, dt=dt, dt_min=min(controls.dt_min, dt), dt_max=max(controls.dt_max, dt))
