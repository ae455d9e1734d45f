"""Motility and consumption catalogues, their antiderivatives, and hypothesis checks.

A motility ``γ`` comes with the bundle used throughout the diagnostics::

    Γ(s)  = ∫_1^s γ(η) dη          γ₁(s) = s γ(s)
    Γ₁(s) = ∫_1^s η γ(η) dη

Built-in families have closed forms (incomplete gamma functions for the
stretched exponential); ``log_corrected`` falls back to adaptive quadrature
and ``custom`` tables use a monotone cubic interpolant whose antiderivatives
are exact.  Every family supports an amplitude ``scale`` and argument
scaling ``arg_scale``, i.e. ``scale * γ_base(arg_scale * s)``, which is what
the physical-to-dimensionless rescaling produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, interpolate, special

MOTILITY_FAMILIES = (
    "power",
    "shifted_power",
    "exponential",
    "stretched_exponential",
    "log_corrected",
    "sum_of_powers",
    "custom",
)
CONSUMPTION_FAMILIES = ("zero", "hill2", "monod", "linear")

_MOTILITY_PARAMS = {
    "power": ("k",),
    "shifted_power": ("a", "k"),
    "exponential": ("chi",),
    "stretched_exponential": ("beta_s", "theta"),
    "log_corrected": ("a1", "k1", "a2", "k2"),
    "sum_of_powers": ("a1", "k1", "a2", "k2"),
    "custom": (),
}
_CONSUMPTION_PARAMS = {"zero": (), "hill2": ("K_n",), "monod": ("K",), "linear": ("c",)}


class KineticsError(ValueError):
    pass


def _power_integral(x, y, q):
    """∫_y^x t^{-q} dt for x, y > 0, stable as q -> 1."""
    x = np.asarray(x, dtype=float)
    if q == 1.0:
        return np.log(x / y)
    e = 1.0 - q
    return y**e * np.expm1(e * np.log(x / y)) / e


def _lower_gamma_diff(a, x, y):
    """γ_inc(a, x) - γ_inc(a, y) (unregularised), choosing the well-conditioned tail."""
    x = np.asarray(x, dtype=float)
    ga = special.gamma(a)
    use_upper = np.minimum(x, y) > a
    lower = special.gammainc(a, x) - special.gammainc(a, y)
    upper = special.gammaincc(a, y) - special.gammaincc(a, x)
    return ga * np.where(use_upper, upper, lower)


# Each family: base functions (g, dg, G, G1) with G(1) = G1(1) = 0.


def _power(p):
    k = p["k"]
    return (
        lambda s: s ** (-k),
        lambda s: -k * s ** (-k - 1.0),
        lambda s: _power_integral(s, 1.0, k),
        lambda s: _power_integral(s, 1.0, k - 1.0),
    )


def _shifted(a, k):
    return (
        lambda s: (a + s) ** (-k),
        lambda s: -k * (a + s) ** (-k - 1.0),
        lambda s: _power_integral(a + s, a + 1.0, k),
        # η (a+η)^{-k} = (a+η)^{1-k} - a (a+η)^{-k}
        lambda s: _power_integral(a + s, a + 1.0, k - 1.0) - a * _power_integral(a + s, a + 1.0, k),
    )


def _shifted_power(p):
    return _shifted(p["a"], p["k"])


def _exponential(p):
    c = p["chi"]

    def G1(s):
        return math.exp(-c) * (1.0 / c + 1.0 / c**2) - np.exp(-c * s) * (s / c + 1.0 / c**2)

    return (
        lambda s: np.exp(-c * s),
        lambda s: -c * np.exp(-c * s),
        lambda s: (math.exp(-c) - np.exp(-c * s)) / c,
        G1,
    )


def _stretched_exponential(p):
    b, th = p["beta_s"], p["theta"]

    def G(s):
        return b ** (-1.0 / th) / th * _lower_gamma_diff(1.0 / th, b * s**th, b)

    def G1(s):
        return b ** (-2.0 / th) / th * _lower_gamma_diff(2.0 / th, b * s**th, b)

    return (
        lambda s: np.exp(-b * s**th),
        lambda s: -b * th * s ** (th - 1.0) * np.exp(-b * s**th),
        G,
        G1,
    )


def _sum_of_powers(p):
    g1, dg1, G1a, G11 = _shifted(p["a1"], p["k1"])
    g2, dg2, G1b, G12 = _shifted(p["a2"], p["k2"])
    return (
        lambda s: g1(s) + g2(s),
        lambda s: dg1(s) + dg2(s),
        lambda s: G1a(s) + G1b(s),
        lambda s: G11(s) + G12(s),
    )


def _quad_antiderivative(fun: Callable[[float], float]):
    """Vectorised s -> ∫_1^s fun, adaptive quadrature to ~1e-12 relative."""

    def anti(s):
        arr = np.asarray(s, dtype=float)
        flat = arr.ravel()
        order = np.argsort(flat)
        out = np.empty_like(flat)
        # march outward from 1 through the sorted points so each quad call is short
        above = [i for i in order if flat[i] >= 1.0]
        below = [i for i in order[::-1] if flat[i] < 1.0]
        for seq in (above, below):
            prev, acc = 1.0, 0.0
            for i in seq:
                x = flat[i]
                if x != prev:
                    val, _ = integrate.quad(fun, prev, x, epsabs=0.0, epsrel=1e-13, limit=200)
                    acc += val
                    prev = x
                out[i] = acc
        return out.reshape(arr.shape) if arr.ndim else float(out[0])

    return anti


def _log_corrected(p):
    a1, k1, a2, k2 = p["a1"], p["k1"], p["a2"], p["k2"]

    def g(s):
        return (a1 + s) ** (-k1) * np.log(a2 + s) ** (-k2)

    def dg(s):
        lg = np.log(a2 + s)
        return -(a1 + s) ** (-k1) * lg ** (-k2) * (k1 / (a1 + s) + k2 / ((a2 + s) * lg))

    return g, dg, _quad_antiderivative(lambda x: float(g(x))), _quad_antiderivative(lambda x: x * float(g(x)))


def _custom(table):
    s_tab, g_tab = table
    pchip = interpolate.PchipInterpolator(s_tab, g_tab, extrapolate=False)
    A = pchip.antiderivative(1)
    A2 = pchip.antiderivative(2)
    A1, A21 = float(A(1.0)), float(A2(1.0))
    lo, hi = float(s_tab[0]), float(s_tab[-1])

    def guard(s):
        s = np.asarray(s, dtype=float)
        if np.any(s < lo) or np.any(s > hi):
            raise KineticsError(f"custom motility table covers [{lo}, {hi}] only")
        return s

    def G1(s):
        s = guard(s)
        # integration by parts: ∫ η γ = [η A(η)] - ∫ A
        return s * A(s) - A1 - (A2(s) - A21)

    return (
        lambda s: pchip(guard(s)),
        lambda s: pchip.derivative()(guard(s)),
        lambda s: A(guard(s)) - A1,
        G1,
    )


_BUILDERS = {
    "power": _power,
    "shifted_power": _shifted_power,
    "exponential": _exponential,
    "stretched_exponential": _stretched_exponential,
    "log_corrected": _log_corrected,
    "sum_of_powers": _sum_of_powers,
}


def _validate_motility(family, params, table):
    if family not in MOTILITY_FAMILIES:
        raise KineticsError(f"unknown motility family {family!r}")
    need = _MOTILITY_PARAMS[family]
    missing = [k for k in need if k not in params]
    if missing:
        raise KineticsError(f"motility {family} needs parameters {', '.join(missing)}")
    extra = [k for k in params if k not in need]
    if extra:
        raise KineticsError(f"motility {family} does not take {', '.join(extra)}")
    for name, val in params.items():
        if not math.isfinite(val):
            raise KineticsError(f"{name} must be finite")
    for name in ("k", "k1", "k2", "chi", "beta_s"):
        if name in params and not params[name] > 0:
            raise KineticsError(f"{name} must be > 0")
    for name in ("a", "a1"):
        if name in params and params[name] < 0:
            raise KineticsError(f"{name} must be >= 0")
    if family == "sum_of_powers" and params["a2"] < 0:
        raise KineticsError("a2 must be >= 0")
    if family == "log_corrected" and params["a2"] < 1:
        raise KineticsError("a2 must be >= 1 so that log(a2 + s) > 0")
    if family == "stretched_exponential" and not 0 < params["theta"] < 1:
        raise KineticsError("theta must lie in (0, 1)")
    if family == "custom":
        if table is None:
            raise KineticsError("custom motility needs a table")
        s_tab, g_tab = (np.asarray(t, dtype=float) for t in table)
        if s_tab.ndim != 1 or s_tab.shape != g_tab.shape or s_tab.size < 2:
            raise KineticsError("custom table needs matching s and gamma columns")
        if np.any(s_tab <= 0) or np.any(np.diff(s_tab) <= 0):
            raise KineticsError("custom table s values must be positive and increasing")
        if np.any(g_tab <= 0):
            raise KineticsError("custom table gamma values must be positive")


@dataclass(frozen=True)
class MotilityBundle:
    gamma: float
    gamma_prime: float
    Gamma: float
    gamma1: float
    Gamma1: float


@dataclass
class MotilitySpec:
    """``scale * γ_family(arg_scale * s)``."""

    family: str
    params: dict = field(default_factory=dict)
    scale: float = 1.0
    arg_scale: float = 1.0
    table: tuple | None = None

    def __post_init__(self):
        self.params = {k: float(v) for k, v in self.params.items()}
        if self.table is not None:
            self.table = tuple(tuple(float(x) for x in col) for col in self.table)
        _validate_motility(self.family, self.params, self.table)
        if not (self.scale > 0 and self.arg_scale > 0):
            raise KineticsError("scale and arg_scale must be > 0")
        if self.family == "custom":
            self._base = _custom(self.table)
        else:
            self._base = _BUILDERS[self.family](self.params)

    def __eq__(self, other):
        if not isinstance(other, MotilitySpec):
            return NotImplemented
        return (self.family, self.params, self.scale, self.arg_scale, self.table) == (
            other.family,
            other.params,
            other.scale,
            other.arg_scale,
            other.table,
        )

    def __getstate__(self):
        state = self.__dict__.copy()
        state.pop("_base", None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self.__post_init__()

    # vectorised evaluation -------------------------------------------------
    def gamma(self, s):
        return self.scale * self._base[0](self.arg_scale * np.asarray(s, dtype=float))

    def log_gamma(self, s):
        """log γ(s) without underflow for the exponential-type tails."""
        x = self.arg_scale * np.asarray(s, dtype=float)
        fam, p = self.family, self.params
        if fam == "power":
            base = -p["k"] * np.log(x)
        elif fam == "shifted_power":
            base = -p["k"] * np.log(p["a"] + x)
        elif fam == "exponential":
            base = -p["chi"] * x
        elif fam == "stretched_exponential":
            base = -p["beta_s"] * x ** p["theta"]
        elif fam == "log_corrected":
            base = -p["k1"] * np.log(p["a1"] + x) - p["k2"] * np.log(np.log(p["a2"] + x))
        elif fam == "sum_of_powers":
            base = np.logaddexp(-p["k1"] * np.log(p["a1"] + x), -p["k2"] * np.log(p["a2"] + x))
        else:
            base = np.log(self._base[0](x))
        return math.log(self.scale) + base

    def gamma_prime(self, s):
        return self.scale * self.arg_scale * self._base[1](self.arg_scale * np.asarray(s, dtype=float))

    def Gamma(self, s):
        a = self.arg_scale
        G = self._base[2]
        return (self.scale / a) * (G(a * np.asarray(s, dtype=float)) - (G(a) if a != 1.0 else 0.0))

    def gamma1(self, s):
        s = np.asarray(s, dtype=float)
        return s * self.gamma(s)

    def gamma1_prime(self, s):
        s = np.asarray(s, dtype=float)
        return self.gamma(s) + s * self.gamma_prime(s)

    def Gamma1(self, s):
        a = self.arg_scale
        G1 = self._base[3]
        return (self.scale / a**2) * (G1(a * np.asarray(s, dtype=float)) - (G1(a) if a != 1.0 else 0.0))

    def effective(self, name: str) -> float:
        """Parameter of the equivalent unscaled family (argument scaling folded in)."""
        a = self.arg_scale
        if name == "chi":
            return self.params["chi"] * a
        if name == "beta_s":
            return self.params["beta_s"] * a ** self.params["theta"]
        if name in ("a", "a1", "a2"):
            return self.params[name] / a
        return self.params[name]


def motility_bundle(spec: MotilitySpec, s: float) -> MotilityBundle:
    if not s > 0:
        raise KineticsError(f"motility is defined for s > 0, got {s}")
    return MotilityBundle(
        gamma=float(spec.gamma(s)),
        gamma_prime=float(spec.gamma_prime(s)),
        Gamma=float(spec.Gamma(s)),
        gamma1=float(spec.gamma1(s)),
        Gamma1=float(spec.Gamma1(s)),
    )


# consumption ---------------------------------------------------------------


@dataclass
class ConsumptionSpec:
    """``scale * f_family(s)`` with ``f(0) = 0`` and ``f >= 0``."""

    family: str = "zero"
    params: dict = field(default_factory=dict)
    scale: float = 1.0

    def __post_init__(self):
        self.params = {k: float(v) for k, v in self.params.items()}
        if self.family not in CONSUMPTION_FAMILIES:
            raise KineticsError(f"unknown consumption family {self.family!r}")
        need = _CONSUMPTION_PARAMS[self.family]
        missing = [k for k in need if k not in self.params]
        if missing:
            raise KineticsError(f"consumption {self.family} needs {', '.join(missing)}")
        extra = [k for k in self.params if k not in need]
        if extra:
            raise KineticsError(f"consumption {self.family} does not take {', '.join(extra)}")
        for name, val in self.params.items():
            if not (val > 0 and math.isfinite(val)):
                raise KineticsError(f"{name} must be > 0")
        if not (self.scale >= 0 and math.isfinite(self.scale)):
            raise KineticsError("consumption scale must be >= 0")

    @property
    def is_zero(self) -> bool:
        return self.family == "zero" or self.scale == 0.0

    def f(self, s):
        s = np.asarray(s, dtype=float)
        return s * self.f_over_s(s)

    def f_over_s(self, s):
        """f(s)/s, continued at s = 0 by its limit."""
        s = np.asarray(s, dtype=float)
        fam, p = self.family, self.params
        if fam == "zero":
            out = np.zeros_like(s)
        elif fam == "hill2":
            out = s / (s * s + p["K_n"])
        elif fam == "monod":
            out = 1.0 / (p["K"] + s)
        else:
            out = np.full_like(s, p["c"])
        return self.scale * out

    def f_over_s_limit(self) -> float:
        return float(self.f_over_s(0.0))


def consumption_eval(spec: ConsumptionSpec, s: float) -> dict:
    if s < 0:
        raise KineticsError("consumption is evaluated for s >= 0")
    return {"f": float(spec.f(s)), "f_over_s": float(spec.f_over_s(s))}


# parameters and rescaling -------------------------------------------------------


@dataclass
class ModelParams:
    tau: float
    beta: float
    motility: MotilitySpec
    consumption: ConsumptionSpec = field(default_factory=ConsumptionSpec)

    def __post_init__(self):
        if not (self.tau > 0 and self.beta > 0):
            raise KineticsError("tau and beta must be > 0")


def rescale_from_physical(
    D_v: float,
    D_n: float,
    alpha: float,
    beta_phys: float,
    k_s: float,
    K_n: float,
    theta: float,
    gamma_phys: MotilitySpec,
    consumption: str = "hill2",
) -> ModelParams:
    """Map the dimensional stripe model to the two-parameter form.

    ``τ = D_n/D_v``, ``γ̄(s) = γ(α s)/(τ D_v)`` and ``f̄(s) = θ f(k_s s)/τ``;
    ``f`` is the Hill law ``s²/(s² + K_n)`` unless ``consumption`` says
    ``monod`` (``s/(K_n + s)``).  ``θ = 0`` drops the nutrient coupling.
    """
    for name, val in (("D_v", D_v), ("D_n", D_n), ("alpha", alpha), ("beta", beta_phys), ("k_s", k_s), ("K_n", K_n)):
        if not (val > 0 and math.isfinite(val)):
            raise KineticsError(f"{name} must be positive, got {val}")
    if not theta >= 0:
        raise KineticsError(f"theta must be >= 0, got {theta}")
    tau = D_n / D_v
    motility = MotilitySpec(
        gamma_phys.family,
        dict(gamma_phys.params),
        scale=gamma_phys.scale / (tau * D_v),
        arg_scale=gamma_phys.arg_scale * alpha,
        table=gamma_phys.table,
    )
    if theta == 0:
        cons = ConsumptionSpec("zero")
    elif consumption == "hill2":
        # (k s)^2 / ((k s)^2 + K) = s^2 / (s^2 + K / k^2)
        cons = ConsumptionSpec("hill2", {"K_n": K_n / k_s**2}, scale=theta / tau)
    elif consumption == "monod":
        cons = ConsumptionSpec("monod", {"K": K_n / k_s}, scale=theta / tau)
    else:
        raise KineticsError(f"unsupported physical consumption law {consumption!r}")
    return ModelParams(tau=tau, beta=beta_phys, motility=motility, consumption=cons)


# power-tail bounds ----------------------------------------------------------------


def gamma_sandwich(spec: MotilitySpec, s0: float, eps: float, s_values) -> dict:
    """Check ``sγ(s) - γ(s0) <= Γ(s)`` and fit the smallest C with ``Γ(s) <= eps s + C``."""
    s = np.asarray(s_values, dtype=float)
    s = s[s >= s0]
    G = spec.Gamma(s)
    lower_gap = float(np.min(G - (s * spec.gamma(s) - spec.gamma(s0))))
    return {"lower_holds": lower_gap >= -1e-12 * max(1.0, float(np.max(np.abs(G)))), "lower_gap": lower_gap, "C": float(np.max(G - eps * s))}


def power_tail_constants(spec: MotilitySpec):
    """``(l, A_l, B_l)`` with ``B_l = liminf s^l γ``, ``A_l = limsup s^l γ``, or None.

    Only families with exact power-law tails have finite positive constants.
    """
    c, a = spec.scale, spec.arg_scale
    fam, p = spec.family, spec.params
    if fam in ("power", "shifted_power"):
        k = p["k"]
        A = c * a ** (-k)
        return k, A, A
    if fam == "sum_of_powers":
        k = min(p["k1"], p["k2"])
        A = c * a ** (-k) * (2.0 if p["k1"] == p["k2"] else 1.0)
        return k, A, A
    return None


# assumption report ----------------------------------------------------------------

HOLDS, FAILS, INCONCLUSIVE = "holds", "fails", "inconclusive"


@dataclass
class AssumptionVerdict:
    name: str
    verdict: str
    analytic: str | None
    sampled: str
    witness: float
    note: str = ""


@dataclass
class AssumptionReport:
    family: str
    s_range: tuple[float, float]
    samples: int
    entries: dict
    regime: dict

    def __getitem__(self, name):
        return self.entries[name]

    def format(self) -> str:
        lines = [f"assumption report for motility '{self.family}' on s in [{self.s_range[0]:g}, {self.s_range[1]:g}] ({self.samples} samples)"]
        for e in self.entries.values():
            analytic = e.analytic if e.analytic is not None else "n/a"
            note = f"  ({e.note})" if e.note else ""
            lines.append(f"  {e.name:<12} {e.verdict:<13} analytic={analytic:<13} sampled={e.sampled:<13} witness={e.witness:.6g}{note}")
        r = self.regime
        lines.append(f"  high-dimensional regime N={r['N']}: k={r['k']:g}, l={r['l']:g} -> {r['verdict']} ({r['condition']})")
        return "\n".join(lines)


def _tail_liminf_positive(values, tol_ratio=0.5, fail_ratio=1e-3):
    mid, end = values[len(values) // 2], values[-1]
    if not (mid > 0 and math.isfinite(mid)):
        return INCONCLUSIVE
    r = end / mid
    if r >= tol_ratio:
        return HOLDS
    if r <= fail_ratio:
        return FAILS
    return INCONCLUSIVE


def _tail_limsup_finite(values, tol_ratio=2.0, fail_ratio=1e3):
    mid, end = values[len(values) // 2], values[-1]
    if not math.isfinite(end):
        return FAILS
    if mid <= 0:
        return INCONCLUSIVE
    r = end / mid
    if r <= tol_ratio:
        return HOLDS
    if r >= fail_ratio:
        return FAILS
    return INCONCLUSIVE


def _asym_power(spec):
    """(p, log_power) such that γ ~ s^{-p} log^{-q} s at infinity, None for faster decay."""
    fam, p = spec.family, spec.params
    if fam in ("power", "shifted_power"):
        return p["k"], 0.0
    if fam == "sum_of_powers":
        return min(p["k1"], p["k2"]), 0.0
    if fam == "log_corrected":
        return p["k1"], p["k2"]
    return None


def _analytic_a1(spec):
    return HOLDS if spec.family != "custom" else None


def _analytic_g1(spec):
    fam, p = spec.family, spec.params
    if fam in ("power", "shifted_power"):
        # s γ' + γ = (a+s)^{-k-1} (a + (1-k) s)
        return HOLDS if p["k"] <= 1 else FAILS
    if fam in ("exponential", "stretched_exponential"):
        return FAILS
    if fam == "sum_of_powers":
        if max(p["k1"], p["k2"]) <= 1:
            return HOLDS
        if min(p["k1"], p["k2"]) > 1:
            return FAILS
        return None
    if fam == "log_corrected" and p["k1"] > 1:
        return FAILS
    return None


def _analytic_a2(spec, k, l):
    if spec.family in ("exponential", "stretched_exponential"):
        return FAILS
    asym = _asym_power(spec)
    if asym is None:
        return None
    p, q = asym
    liminf_ok = k > p or (k == p and q <= 0)
    limsup_ok = l < p or (l == p and q >= 0)
    return HOLDS if (liminf_ok and limsup_ok) else FAILS


def _analytic_a2e(spec, chi):
    fam = spec.family
    if fam == "exponential":
        return HOLDS if chi >= spec.effective("chi") else FAILS
    if fam == "custom":
        return None
    # algebraic and stretched tails decay slower than any exponential
    return HOLDS


def _analytic_a3(spec, b0):
    asym = _asym_power(spec)
    fam = spec.family
    if fam in ("power", "shifted_power", "sum_of_powers"):
        p = asym[0]
        # s γ ~ C s^{1-p}, Γ ~ C s^{1-p}/(1-p): bounded iff p >= 1 or b0 <= p
        return HOLDS if (p >= 1 or b0 <= p) else FAILS
    if fam == "log_corrected":
        p, q = asym
        if p > 1 or (p == 1 and q >= 0):
            return HOLDS
        return None
    if fam in ("exponential", "stretched_exponential"):
        # s γ(s) -> 0 and Γ is bounded
        return HOLDS
    return None


def check_assumptions(
    spec: MotilitySpec,
    k: float = 1.0,
    l: float = 0.0,
    chi: float = 1.0,
    b0: float = 1.0,
    s_range=(1e-2, 1e3),
    samples: int = 400,
    N: int = 3,
) -> AssumptionReport:
    """Sampled witnesses plus the closed-form verdicts for the built-in families."""
    s_min, s_max = (float(x) for x in s_range)
    if not (0 < s_min < s_max):
        raise KineticsError("empty or non-positive s range")
    if samples < 100:
        raise KineticsError("need at least 100 samples")
    if not 0 < b0 <= 1:
        raise KineticsError("b0 must lie in (0, 1]")
    s = np.geomspace(s_min, s_max, samples)
    g = spec.gamma(s)
    log_g = spec.log_gamma(s)
    dg = spec.gamma_prime(s)
    G = spec.Gamma(s)
    scale = max(1.0, float(np.max(np.abs(g))))
    entries = {}

    def add(name, analytic, sampled, witness, note=""):
        verdict = analytic if analytic is not None else sampled
        entries[name] = AssumptionVerdict(name, verdict, analytic, sampled, float(witness), note)

    tol = 1e-12 * scale
    positive = bool(np.all(np.isfinite(log_g)))
    sampled_a1 = HOLDS if (positive and np.max(dg) <= tol) else FAILS
    add("A1", _analytic_a1(spec), sampled_a1, float(np.min(log_g)), f"witness is min log gamma; max gamma' = {np.max(dg):.3g}")

    g1p = s * dg + g
    sampled_g1 = HOLDS if np.min(g1p) >= -tol else FAILS
    add("g1'", _analytic_g1(spec), sampled_g1, float(np.min(g1p)))

    skg = np.exp(k * np.log(s) + log_g)
    slg = np.exp(l * np.log(s) + log_g)
    samp_a2 = _tail_liminf_positive(skg)
    samp_a2_up = _tail_limsup_finite(slg)
    if FAILS in (samp_a2, samp_a2_up):
        sampled_a2 = FAILS
    elif samp_a2 == samp_a2_up == HOLDS:
        sampled_a2 = HOLDS
    else:
        sampled_a2 = INCONCLUSIVE
    if not k >= l >= 0:
        add("A2", FAILS, FAILS, float(np.min(skg)), "requires k >= l >= 0")
    else:
        add("A2", _analytic_a2(spec, k, l), sampled_a2, float(np.min(skg)), f"max s^l gamma = {np.max(slg):.3g}")

    with np.errstate(over="ignore"):
        eg = np.exp(chi * s + log_g)
    add("A2e_chi", _analytic_a2e(spec, chi), _tail_liminf_positive(eg), float(np.min(eg)))

    a3 = s * g + (b0 - 1.0) * G
    half = len(a3) // 2
    sampled_a3 = HOLDS if a3[-1] <= np.max(a3[:half]) + 1e-9 * abs(np.max(a3)) else INCONCLUSIVE
    add("A3", _analytic_a3(spec, b0), sampled_a3, float(np.max(a3)), f"b0 = {b0:g}; empirical max stands in for K0")

    tail = power_tail_constants(spec)
    if tail is None:
        add("A3_tail", None, INCONCLUSIVE, float("nan"), "no power-law tail constants")
    else:
        lc, A, B = tail
        ok = lc > 0 and 0 < B <= A < math.inf and (1 - lc) * A < B
        add("A3_tail", HOLDS if ok else FAILS, HOLDS if ok else FAILS, (1 - lc) * A - B, f"l={lc:g}, A_l={A:g}, B_l={B:g}")

    if N <= 2:
        condition = "no restriction for N <= 2"
        regime_ok = True
    else:
        kmax, gap = N / (N - 2), 2.0 / (N - 2)
        regime_ok = k < kmax and k - l < gap
        condition = f"k < {kmax:g} and k - l < {gap:g}"
    regime = {"N": N, "k": k, "l": l, "verdict": HOLDS if regime_ok else FAILS, "condition": condition}
    return AssumptionReport(spec.family, (s_min, s_max), samples, entries, regime)
