"""Monitored quantities: auxiliary elliptic fields, the Lyapunov functional, rates.

Notation follows the code elsewhere: ``A = -Δ + β`` with zero-flux
boundaries, ``w = A⁻¹u``, ``S = A⁻¹(u + n)``, ``φ = A⁻¹[uγ(v)]``,
``ψ = A⁻¹[u f(n)]`` and ``U`` the mean-zero solution of ``-ΔU = u - <u>``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .elliptic import EllipticSolveOptions, helmholtz_solve, poisson_meanzero_solve
from .grid import Grid, dirichlet_energy, face_gradients, integrate, mean
from .kinetics import ModelParams
from .solver import State

DIAG_OPTIONS = EllipticSolveOptions(rel_tolerance=1e-12)


@dataclass
class AuxiliaryFields:
    w: np.ndarray
    S: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    U: np.ndarray


def _centred(u: np.ndarray) -> np.ndarray:
    # second pass removes the rounding left at the scale of u, not of u - <u>
    c = u - u.mean()
    return c - c.mean()


def auxiliary_fields(grid: Grid, state: State, params: ModelParams, opts=DIAG_OPTIONS) -> AuxiliaryFields:
    beta = params.beta
    u, v, n = state.u, state.v, state.n
    w = helmholtz_solve(grid, u, beta, opts)
    S = helmholtz_solve(grid, u + n, beta, opts)
    phi = helmholtz_solve(grid, u * params.motility.gamma(v), beta, opts)
    flux = u * params.consumption.f(n)
    psi = helmholtz_solve(grid, flux, beta, opts) if np.any(flux) else np.zeros_like(u)
    centred = _centred(u)
    U = poisson_meanzero_solve(grid, centred, opts) if np.any(centred) else np.zeros_like(u)
    return AuxiliaryFields(w, S, phi, psi, U)


def sandwich_violation(aux: AuxiliaryFields, n_in_max: float, beta: float) -> float:
    """Largest breach of ``w <= S <= w + max(n_in)/β`` (0 when it holds)."""
    low = float(np.max(aux.w - aux.S))
    high = float(np.max(aux.S - aux.w - n_in_max / beta))
    return max(low, high, 0.0)


def key_identity_residual(grid, state_prev, state_next, aux_prev, aux_next, params, dt) -> float:
    """Max-norm defect of ``∂ₜw + uγ(v) = β A⁻¹[uγ(v)] + A⁻¹[u f(n)]``.

    The time derivative is the backward difference over the step; every
    other term is taken at the new level, matching the implicit scheme, so
    the defect is first order in ``dt``.
    """
    un, vn = state_next.u, state_next.v
    res = (aux_next.w - aux_prev.w) / dt + un * params.motility.gamma(vn) - params.beta * aux_next.phi - aux_next.psi
    return float(np.max(np.abs(res)))


@dataclass
class LyapunovReport:
    L: float
    D1: float
    D2: float
    D3: float
    D4: float
    Kstar: float

    @property
    def dissipation(self) -> float:
        return self.D1 + self.D2 + self.D3 + self.D4


def _face_average(f: np.ndarray, axis: int) -> np.ndarray:
    lo = [slice(None)] * f.ndim
    hi = [slice(None)] * f.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (f[tuple(lo)] + f[tuple(hi)])


def gradient_weighted_energy(grid: Grid, coeff: np.ndarray, f: np.ndarray) -> float:
    """``∫ c |∇f|²`` on faces, with ``c`` averaged from the two adjacent cells."""
    total = 0.0
    for ax, grad in enumerate(face_gradients(grid, f)):
        c = _face_average(coeff, f.ndim - 1 - ax)
        total += float(np.sum(c * grad * grad))
    return total * grid.cell_volume


_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)
_GL_X, _GL_W = 0.5 * (_GL_X + 1.0), 0.5 * _GL_W


def _bregman(F, dF, d2F, v: np.ndarray, m: float, rel: float = 1e-3) -> np.ndarray:
    """``F(v) - F(m) - F'(m)(v - m)``.

    Close to ``m`` the closed form is all cancellation, so there the integral
    remainder ``(v-m)² ∫₀¹ (1-θ) F''(m + θ(v-m)) dθ`` is used instead; its sign
    is then that of ``F''`` exactly.
    """
    d = v - m
    out = F(v) - F(m) - dF(m) * d
    near = np.abs(d) <= rel * abs(m)
    if np.any(near):
        dn = d[near]
        acc = sum(w * (1.0 - x) * d2F(m + x * dn) for x, w in zip(_GL_X, _GL_W))
        out[near] = dn * dn * acc
    return out


def lyapunov(grid: Grid, state: State, params: ModelParams, kstar: float, U: np.ndarray | None = None) -> LyapunovReport:
    """Lyapunov functional ``L`` and its four dissipation terms.

    ``L`` is evaluated in the rearranged form

        ‖∇U‖²/2 + K*‖n‖₁ + ∫ [2 B_{Γ₁}(v; m) - m B_{Γ}(v; m)]

    with ``m = <u>`` and ``B_F(v; m) = F(v) - F(m) - F'(m)(v - m)``.  This is
    algebraically identical to the defining expression (the linear terms and
    the constant cancel) but each integrand is non-negative when ``sγ(s)`` is
    non-decreasing, so ``L`` stays non-negative to rounding near equilibrium.
    """
    gam = params.motility
    u, v, n = state.u, state.v, state.n
    m = mean(grid, u)
    if U is None:
        centred = _centred(u)
        U = poisson_meanzero_solve(grid, centred, DIAG_OPTIONS) if np.any(centred) else np.zeros_like(u)
    grad_u2 = dirichlet_energy(grid, U)
    dv = v - m
    breg1 = _bregman(gam.Gamma1, gam.gamma1, gam.gamma1_prime, v, m)
    breg = _bregman(gam.Gamma, gam.gamma, gam.gamma_prime, v, m)
    L = 0.5 * grad_u2 + kstar * integrate(grid, np.abs(n)) + integrate(grid, 2.0 * breg1 - m * breg)
    coeff = 2.0 * gam.gamma1_prime(v) - m * gam.gamma_prime(v)
    D1 = gradient_weighted_energy(grid, coeff, v)
    D2 = integrate(grid, dv * (gam.gamma1(v) - gam.gamma1(m)))
    D3 = integrate(grid, (v - u) ** 2 * gam.gamma(v))
    D4 = integrate(grid, np.abs(u * params.consumption.f(n)))
    return LyapunovReport(float(L), D1, D2, D3, D4, float(kstar))


class KStarTracker:
    """Running-maximum version of ``K* = 1 + U* + u* sup_{[a_*, a^*]} γ₁' + 2Γ(a^*)``.

    ``u*``, ``v*``, ``U*`` are maxima seen so far, ``a_* = min(1, v_*, <u_in>)``
    with ``v_*`` the running minimum of ``v`` and ``a^* = max(u*, v*)``.  The
    returned value never decreases.
    """

    def __init__(self, grid: Grid, params: ModelParams, u_in_mean: float):
        self.params = params
        self.u_in_mean = u_in_mean
        self.u_max = 0.0
        self.v_max = 0.0
        self.v_min = math.inf
        self.U_max = 0.0
        self.value = 1.0

    def update(self, state: State, U: np.ndarray | None = None) -> float:
        self.u_max = max(self.u_max, float(np.max(state.u)))
        self.v_max = max(self.v_max, float(np.max(state.v)))
        self.v_min = min(self.v_min, float(np.min(state.v)))
        if U is not None:
            self.U_max = max(self.U_max, float(np.max(np.abs(U))))
        gam = self.params.motility
        a_lo = min(1.0, self.v_min, self.u_in_mean)
        a_hi = max(self.u_max, self.v_max)
        if a_lo > 0:
            s = np.geomspace(a_lo, max(a_hi, a_lo), 257)
            sup_g1p = float(np.max(gam.gamma1_prime(s)))
        else:
            sup_g1p = 0.0
        value = 1.0 + self.U_max + self.u_max * sup_g1p + 2.0 * float(gam.Gamma(a_hi))
        self.value = max(self.value, value)
        return self.value


def kstar_estimate(tracker: KStarTracker, state: State, aux: AuxiliaryFields) -> float:
    return tracker.update(state, aux.U)


def comparison_ratios(state: State, aux: AuxiliaryFields) -> dict:
    if np.any(aux.w <= 0) or np.any(aux.S <= 0):
        raise ValueError("w and S must be strictly positive")
    return {
        "ratio_upper": float(np.max(state.v / aux.w)),
        "ratio_lower": float(np.min(state.v / aux.S)),
    }


def convergence_metrics(state: State, m: float) -> dict:
    return {
        "linf_u": float(np.max(np.abs(state.u - m))),
        "linf_v": float(np.max(np.abs(state.v - m))),
        "linf_n": float(np.max(np.abs(state.n))),
    }


@dataclass
class ExponentialFit:
    delta: float
    C: float
    r_squared: float
    points: int


def fit_exponential_rate(t, values, window: float = 0.5) -> ExponentialFit:
    """Least-squares fit of ``log value = log C - δ t`` on the trailing ``window`` fraction."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.size < 10:
        raise ValueError("need at least 10 (t, value) pairs")
    if not 0 < window <= 1:
        raise ValueError("window must lie in (0, 1]")
    start = min(int(math.floor((1 - window) * t.size)), t.size - 10)
    t, y = t[start:], y[start:]
    if np.any(~(y > 0)) or np.any(~np.isfinite(y)):
        raise ValueError("values in the fit window must be positive and finite")
    ly = np.log(y)
    slope, intercept = np.polyfit(t, ly, 1)
    resid = ly - (slope * t + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, float(np.sum(ly**2))) else 1.0 - ss_res / ss_tot
    return ExponentialFit(float(-slope), float(math.exp(intercept)), r2, int(t.size))


# one CSV row per output time ------------------------------------------------------


@dataclass
class DiagnosticsRecord:
    t: float
    step: int
    accepted_dt: float
    mass_total: float
    mass_u: float
    mass_n: float
    min_u: float
    max_u: float
    min_v: float
    max_v: float
    min_n: float
    L: float
    D1: float
    D2: float
    D3: float
    D4: float
    Kstar: float
    linf_u_minus_m: float
    linf_v_minus_m: float
    linf_n: float
    ratio_upper: float
    ratio_lower: float
    sandwich_violation: float
    max_S: float
    S_growth: float
    keyid_residual: float

    def as_row(self) -> dict:
        return asdict(self)


RECORD_COLUMNS = tuple(f.name for f in fields(DiagnosticsRecord))


class DiagnosticsCollector:
    """Callable suitable for ``solver.run(on_output=...)``; builds one record per call."""

    def __init__(self, grid: Grid, params: ModelParams, initial: State):
        self.grid = grid
        self.params = params
        self.m = mean(grid, initial.u + initial.n)
        self.n_in_max = float(np.max(initial.n))
        self.tracker = KStarTracker(grid, params, mean(grid, initial.u))
        self.S_in = helmholtz_solve(grid, initial.u + initial.n, params.beta, DIAG_OPTIONS)
        self._last_aux = None
        self._last_state = None

    def observe(self, state: State):
        """Track running maxima for K* from every step, not just output steps."""
        self.tracker.update(state)

    def __call__(self, prev: State | None, state: State, dt: float, k: int) -> DiagnosticsRecord:
        grid, params = self.grid, self.params
        aux = auxiliary_fields(grid, state, params)
        kstar = self.tracker.update(state, aux.U)
        lyap = lyapunov(grid, state, params, kstar, U=aux.U)
        conv = convergence_metrics(state, self.m)
        ratios = comparison_ratios(state, aux)
        if prev is None or dt <= 0:
            keyid = 0.0
        else:
            if self._last_state is prev:
                aux_prev_w = self._last_aux.w
            else:
                aux_prev_w = helmholtz_solve(grid, prev.u, params.beta, DIAG_OPTIONS)
            keyid = key_identity_residual(grid, prev, state, AuxiliaryFields(aux_prev_w, None, None, None, None), aux, params, dt)
        self._last_aux, self._last_state = aux, state
        mass_u = integrate(grid, state.u)
        mass_n = integrate(grid, state.n)
        return DiagnosticsRecord(
            t=state.t,
            step=k,
            accepted_dt=dt,
            mass_total=mass_u + mass_n,
            mass_u=mass_u,
            mass_n=mass_n,
            min_u=float(np.min(state.u)),
            max_u=float(np.max(state.u)),
            min_v=float(np.min(state.v)),
            max_v=float(np.max(state.v)),
            min_n=float(np.min(state.n)),
            L=lyap.L,
            D1=lyap.D1,
            D2=lyap.D2,
            D3=lyap.D3,
            D4=lyap.D4,
            Kstar=kstar,
            linf_u_minus_m=conv["linf_u"],
            linf_v_minus_m=conv["linf_v"],
            linf_n=conv["linf_n"],
            ratio_upper=ratios["ratio_upper"],
            ratio_lower=ratios["ratio_lower"],
            sandwich_violation=sandwich_violation(aux, self.n_in_max, params.beta),
            max_S=float(np.max(aux.S)),
            S_growth=float(np.max(aux.S / self.S_in)),
            keyid_residual=keyid,
        )
