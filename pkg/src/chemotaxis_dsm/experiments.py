"""Run directories: execution, persistence, verdicts, sweeps and post-hoc analysis.

A run directory holds::

    config.ini          canonical echo of the configuration
    diagnostics.csv     one row per output time (column list in the '#' line)
    snapshot_<f>_initial.txt, snapshot_<f>_final.txt   for f in u, v, n
    summary.txt         key = value lines, including the verdict
    figures/*.png       when output.figures is on

The verdict is always derived from the diagnostics series alone, so
:func:`analyze` reproduces it without rerunning anything.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config, parse_config, serialize_config, set_path
from .diagnostics import RECORD_COLUMNS, DiagnosticsCollector, fit_exponential_rate
from .grid import Grid
from .solver import State, init_state, run

CSV_VERSION = "chemotaxis-dsm diagnostics v1"
SNAPSHOT_VERSION = "field-snapshot v1"
# slack constant in eps_disc = C_DISC (dt + h^2)(1 + |L|)
C_DISC = 1.0

BOUNDED, CONVERGED, AGGREGATING, DT_COLLAPSE, INCONCLUSIVE = (
    "bounded",
    "converged",
    "aggregating",
    "dt-collapse",
    "inconclusive",
)
# ordering used to check that a sweep changes regime monotonically
VERDICT_RANK = {CONVERGED: 0, BOUNDED: 0, INCONCLUSIVE: 1, AGGREGATING: 2, DT_COLLAPSE: 2}


class AnalysisError(ValueError):
    pass


# snapshots -------------------------------------------------------------------


def write_snapshot(path, grid: Grid, name: str, field_values: np.ndarray, t: float):
    nx = grid.cells[0]
    ny = grid.cells[1] if grid.dim == 2 else 1
    rows = np.asarray(field_values, dtype=float).reshape(ny, nx)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{SNAPSHOT_VERSION} name={name} t={t!r} dim={grid.dim} nx={nx} ny={ny}\n")
        for row in rows:
            fh.write(" ".join("%.17g" % x for x in row) + "\n")


def read_snapshot(path):
    """Returns ``(header_dict, values)`` with ``values`` shaped ``(ny, nx)`` (or ``(nx,)`` in 1D)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if " ".join(header[:2]) != SNAPSHOT_VERSION:
            raise AnalysisError(f"{path}: not a {SNAPSHOT_VERSION} file")
        meta = dict(item.split("=", 1) for item in header[2:])
        values = np.array([[float(x) for x in line.split()] for line in fh if line.strip()])
    dim, nx, ny = int(meta["dim"]), int(meta["nx"]), int(meta["ny"])
    if values.shape != (ny, nx):
        raise AnalysisError(f"{path}: expected {ny}x{nx} values, found {values.shape}")
    meta = {"name": meta["name"], "t": float(meta["t"]), "dim": dim, "nx": nx, "ny": ny}
    return meta, (values[0] if dim == 1 else values)


# diagnostics CSV ----------------------------------------------------------------


def write_diagnostics(path, records):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {CSV_VERSION} columns={','.join(RECORD_COLUMNS)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for rec in records:
            row = rec.as_row()
            writer.writerow(repr(int(row[c])) if c == "step" else repr(float(row[c])) for c in RECORD_COLUMNS)


def read_diagnostics(path) -> dict:
    """Column name -> numpy array.  Raises :class:`AnalysisError` on anything malformed."""
    path = Path(path)
    if not path.is_file():
        raise AnalysisError(f"{path} does not exist")
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise AnalysisError(f"{path}: line 1: missing '#' version line")
    if CSV_VERSION not in lines[0]:
        raise AnalysisError(f"{path}: line 1: unsupported version line {lines[0]!r}")
    reader = csv.reader(lines[1:])
    try:
        header = next(reader)
    except StopIteration:
        raise AnalysisError(f"{path}: line 2: missing column header") from None
    missing = [c for c in RECORD_COLUMNS if c not in header]
    if missing:
        raise AnalysisError(f"{path}: line 2: missing columns {', '.join(missing)}")
    cols = {c: [] for c in header}
    for lineno, row in enumerate(reader, start=3):
        if len(row) != len(header):
            raise AnalysisError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
        for name, raw in zip(header, row):
            try:
                cols[name].append(float(raw))
            except ValueError:
                raise AnalysisError(f"{path}: line {lineno}: column {name}: not a number: {raw!r}") from None
    if not cols["t"]:
        raise AnalysisError(f"{path}: no data rows")
    return {k: np.array(v) for k, v in cols.items()}


# verdicts ---------------------------------------------------------------------------


@dataclass
class Verdict:
    label: str
    delta: float = float("nan")
    r_squared: float = float("nan")
    fit_series: str = ""
    growth: float = float("nan")
    trailing_variation: float = float("nan")
    note: str = ""

    def describe(self) -> str:
        if self.label == CONVERGED:
            return f"converged(delta={self.delta:.6g})"
        return self.label


def _fit_series(series):
    """The decay series to fit: the nutrient if it is present, else the u and v distances."""
    if np.max(series["linf_n"]) > 0:
        return "linf_n", series["linf_n"]
    return "linf_u+linf_v", series["linf_u_minus_m"] + series["linf_v_minus_m"]


def decay_fit(series, window: float = 0.5):
    name, values = _fit_series(series)
    t = series["t"]
    try:
        return name, fit_exponential_rate(t, values, window=window)
    except ValueError:
        return name, None


def derive_verdict(series, failed: bool, converge_tol=1e-3, aggregation_factor=10.0, bounded_tol=0.1, fit_window=0.5) -> Verdict:
    """Regime label from a diagnostics series.

    Checked in order: solver failure (``dt-collapse``); ``converged`` when
    the final distance ``‖u-m‖∞ + ‖v-m‖∞ + ‖n‖∞`` is below ``converge_tol``
    and the exponential fit has r² >= 0.9; ``aggregating`` when max u
    exceeds ``aggregation_factor`` times its initial value; ``bounded`` when
    max u over the trailing half of the run varies by less than
    ``bounded_tol`` (relative); otherwise ``inconclusive``.
    """
    t, umax = series["t"], series["max_u"]
    growth = float(np.max(umax) / umax[0]) if umax[0] > 0 else float("inf")
    tail = umax[t >= t[0] + 0.5 * (t[-1] - t[0])]
    variation = float((tail.max() - tail.min()) / tail.max()) if tail.size and tail.max() > 0 else float("nan")
    name, fit = decay_fit(series, fit_window)
    delta = fit.delta if fit else float("nan")
    r2 = fit.r_squared if fit else float("nan")
    base = dict(delta=delta, r_squared=r2, fit_series=name, growth=growth, trailing_variation=variation)
    if failed:
        return Verdict(DT_COLLAPSE, note="time step fell below dt_min; stiff and unbounded growth are not distinguished", **base)
    final = series["linf_u_minus_m"][-1] + series["linf_v_minus_m"][-1] + series["linf_n"][-1]
    if final < converge_tol and fit is not None and r2 >= 0.9:
        return Verdict(CONVERGED, **base)
    if growth > aggregation_factor:
        return Verdict(AGGREGATING, **base)
    if variation < bounded_tol:
        return Verdict(BOUNDED, **base)
    return Verdict(INCONCLUSIVE, **base)


def lyapunov_violations(series, h2: float, c_disc: float = C_DISC) -> tuple[int, float]:
    """Count steps with ``L_{j+1} > L_j + eps_disc``; also return the worst excess.

    ``L`` is re-based to the final (largest) K* first: the functional only
    depends on K* through ``K* ∫n``, so this is the same functional at every
    output time and its monotonicity is what the analysis predicts.
    """
    L = series["L"] + (series["Kstar"][-1] - series["Kstar"]) * series["mass_n"]
    dt = series["accepted_dt"]
    count, worst = 0, 0.0
    for j in range(len(L) - 1):
        eps = c_disc * (dt[j + 1] + h2) * (1.0 + abs(L[j]))
        excess = L[j + 1] - L[j]
        if excess > eps:
            count += 1
        worst = max(worst, excess - eps)
    return count, worst


def dissipation_integral(series) -> float:
    """Left-endpoint sum of ``(D1+D2+D3+D4) dt`` over the output times."""
    t = series["t"]
    diss = series["D1"] + series["D2"] + series["D3"] + series["D4"]
    return float(np.sum(diss[1:] * np.diff(t)))


# running ---------------------------------------------------------------------------------


@dataclass
class RunArtifacts:
    directory: Path
    config_path: Path
    diagnostics_path: Path
    snapshots: dict
    summary_path: Path
    verdict: Verdict
    failure: str | None = None
    figures: list = field(default_factory=list)
    series: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.failure is None


def _output_filter(cfg: ExperimentConfig, collector: DiagnosticsCollector, t_end: float):
    """Wrap the collector so records are produced on the configured cadence."""
    output_dt = cfg.output.output_dt
    if output_dt is None:
        return collector, cfg.output.every
    next_t = [output_dt]
    eps = 1e-12 * max(1.0, t_end)

    def on_output(prev, state, dt, k):
        if prev is None and k == 0:
            return collector(prev, state, dt, k)
        if state.t + eps >= next_t[0] or t_end - state.t <= eps or prev is None:
            while next_t[0] <= state.t + eps:
                next_t[0] += output_dt
            return collector(prev, state, dt, k)
        return None

    return on_output, 1


def run_experiment(cfg: ExperimentConfig, out_dir=None, make_figures: bool | None = None) -> RunArtifacts:
    """Run one configuration and write its artifact directory."""
    out = Path(out_dir if out_dir is not None else cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = cfg.with_output_dir(out)
    grid = cfg.build_grid()
    params = cfg.build_params()
    state0 = init_state(grid, cfg.build_initial(grid, params))
    controls = cfg.build_controls()

    config_path = out / "config.ini"
    config_path.write_text(serialize_config(cfg), encoding="utf-8")

    collector = DiagnosticsCollector(grid, params, state0)
    collector.observe(state0)
    on_output, every = _output_filter(cfg, collector, cfg.time.t_end)

    def on_step(prev, new, dt):
        collector.observe(new)

    result = run(grid, state0, params, controls, cfg.time.t_end, every=every, on_step=on_step, on_output=on_output)

    diag_path = out / "diagnostics.csv"
    write_diagnostics(diag_path, result.records)
    snapshots = {}
    for label, st in (("initial", state0), ("final", result.state)):
        for name in ("u", "v", "n"):
            p = out / f"snapshot_{name}_{label}.txt"
            write_snapshot(p, grid, name, getattr(st, name), st.t)
            snapshots[f"{name}_{label}"] = p

    series = read_diagnostics(diag_path)
    o = cfg.output
    verdict = derive_verdict(series, result.failure is not None, o.converge_tol, o.aggregation_factor, o.bounded_tol, o.fit_window)
    summary_path = out / "summary.txt"
    summary = {
        "scenario": o.scenario,
        "verdict": verdict.describe(),
        "t_final": repr(result.state.t),
        "steps": str(result.steps),
        "last_dt": repr(result.last_dt) if result.last_dt is not None else "nan",
        "max_u_initial": repr(float(series["max_u"][0])),
        "max_u_final": repr(float(series["max_u"][-1])),
        "max_u_growth": repr(verdict.growth),
        "trailing_variation": repr(verdict.trailing_variation),
        "delta_hat": repr(verdict.delta),
        "r_squared": repr(verdict.r_squared),
        "fit_series": verdict.fit_series,
        "failure": result.failure or "none",
    }
    if verdict.note:
        summary["caveat"] = verdict.note
    summary_path.write_text("".join(f"{k} = {v}\n" for k, v in summary.items()), encoding="utf-8")

    figures = []
    if o.figures if make_figures is None else make_figures:
        from .plotting import render_run_figures

        figures = render_run_figures(out, grid, series, result.state)
    return RunArtifacts(out, config_path, diag_path, snapshots, summary_path, verdict, result.failure, figures, series)


def run_from_file(path, out_dir=None, seed=None, make_figures=None) -> RunArtifacts:
    cfg = load_config(path)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    return run_experiment(cfg, out_dir, make_figures)


# sweeps ------------------------------------------------------------------------------------


@dataclass
class SweepRow:
    value: float
    verdict: str
    max_u_final: float
    delta_hat: float
    directory: str
    error: str = ""


def default_jobs() -> int:
    return max(1, (os.cpu_count() or 2) - 1)


def _sweep_worker(args):
    text, value, out_dir, make_figures = args
    try:
        art = run_experiment(parse_config(text), out_dir, make_figures)
    except Exception as exc:  # recorded per row, the sweep carries on
        return SweepRow(value, "error", float("nan"), float("nan"), str(out_dir), f"{type(exc).__name__}: {exc}")
    return SweepRow(
        value, art.verdict.describe(), float(art.series["max_u"][-1]), art.verdict.delta, str(out_dir), art.failure or ""
    )


def _value_label(i, value):
    return f"{i:03d}_{value:.6g}".replace("-", "m")


def sweep(cfg: ExperimentConfig, axis: str, values, jobs: int | None = None, out_dir=None, make_figures=None):
    """Run one experiment per axis value; returns ``(rows, summary_csv_path)``.

    Every point is an independent run directory under ``out_dir`` and rows
    come back in the order of ``values`` whatever the scheduling.
    """
    values = [float(v) for v in values]
    if not values:
        raise ValueError("sweep needs at least one value")
    root = Path(out_dir if out_dir is not None else cfg.output.dir)
    root.mkdir(parents=True, exist_ok=True)
    tasks = []
    for i, value in enumerate(values):
        point = set_path(cfg, axis, value)
        sub = root / _value_label(i, value)
        tasks.append((serialize_config(point.with_output_dir(sub)), value, sub, make_figures))
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    if jobs == 1 or len(tasks) == 1:
        rows = [_sweep_worker(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            rows = list(pool.map(_sweep_worker, tasks))
    summary = root / "sweep_summary.csv"
    with open(summary, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# sweep axis={axis}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["value", "verdict", "max_u_final", "delta_hat", "directory", "error"])
        for r in rows:
            writer.writerow([repr(r.value), r.verdict, repr(r.max_u_final), repr(r.delta_hat), r.directory, r.error])
    return rows, summary


def verdict_label(described: str) -> str:
    return described.split("(", 1)[0]


def is_monotone_transition(rows) -> bool:
    """True when verdict ranks never decrease along the sweep (and all rows ran)."""
    ranks = []
    for r in rows:
        label = verdict_label(r.verdict)
        if label not in VERDICT_RANK:
            return False
        ranks.append(VERDICT_RANK[label])
    return all(a <= b for a, b in zip(ranks, ranks[1:]))


# analysis -------------------------------------------------------------------------------------


@dataclass
class AnalysisReport:
    verdict: Verdict
    lyapunov_violations: int
    lyapunov_worst_excess: float
    lyapunov_applicable: bool
    dissipation_integral: float
    L0: float
    ratio_upper_max: float
    ratio_lower_min: float
    sandwich_max: float
    mass_drift: float
    keyid_max: float
    rows: int
    failure: str
    text: str = ""


def _read_summary(path: Path) -> dict:
    out = {}
    if path.is_file():
        for line in path.read_text(encoding="utf-8").splitlines():
            if "=" in line:
                k, v = line.split("=", 1)
                out[k.strip()] = v.strip()
    return out


def analyze(run_dir) -> AnalysisReport:
    """Re-derive the verdict and the checks from a run directory, without rerunning."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise AnalysisError(f"{run_dir} is not a directory")
    diag = run_dir / "diagnostics.csv"
    if not diag.is_file():
        raise AnalysisError(f"{run_dir} has no diagnostics.csv")
    series = read_diagnostics(diag)
    cfg_path = run_dir / "config.ini"
    cfg = load_config(cfg_path) if cfg_path.is_file() else None
    summary = _read_summary(run_dir / "summary.txt")
    failure = summary.get("failure", "none")
    failed = failure not in ("none", "")
    o = cfg.output if cfg is not None else None
    kw = {}
    if o is not None:
        kw = dict(converge_tol=o.converge_tol, aggregation_factor=o.aggregation_factor, bounded_tol=o.bounded_tol, fit_window=o.fit_window)
    verdict = derive_verdict(series, failed, **kw)

    if cfg is not None:
        grid = cfg.build_grid()
        h2 = max(grid.spacing) ** 2
        params = cfg.build_params()
        from .kinetics import check_assumptions

        g1 = check_assumptions(params.motility)["g1'"].verdict == "holds"
        applicable = g1 and params.consumption.family in ("zero", "monod")
    else:
        h2, applicable = 0.0, False
    count, worst = lyapunov_violations(series, h2)
    t = series["t"]
    late = t >= min(1.0, t[-1])
    mass = series["mass_total"]
    drift = float(np.max(np.abs(mass - mass[0])) / abs(mass[0])) if mass[0] != 0 else float("nan")
    rep = AnalysisReport(
        verdict=verdict,
        lyapunov_violations=count,
        lyapunov_worst_excess=worst,
        lyapunov_applicable=applicable,
        dissipation_integral=dissipation_integral(series),
        L0=float(series["L"][0] + (series["Kstar"][-1] - series["Kstar"][0]) * series["mass_n"][0]),
        ratio_upper_max=float(np.max(series["ratio_upper"][late])),
        ratio_lower_min=float(np.min(series["ratio_lower"][late])),
        sandwich_max=float(np.max(series["sandwich_violation"])),
        mass_drift=drift,
        keyid_max=float(np.max(series["keyid_residual"])),
        rows=int(t.size),
        failure=failure,
    )
    rep.text = format_report(run_dir, rep)
    return rep


def format_report(run_dir, rep: AnalysisReport) -> str:
    v = rep.verdict
    lines = [
        f"run directory      {run_dir}",
        f"rows               {rep.rows}",
        f"verdict            {v.describe()}",
        f"max u growth       {v.growth:.6g}",
        f"trailing variation {v.trailing_variation:.6g}",
        f"decay fit ({v.fit_series})  delta_hat={v.delta:.6g}  r2={v.r_squared:.6g}",
        f"lyapunov           violations={rep.lyapunov_violations} worst_excess={rep.lyapunov_worst_excess:.3e}"
        + ("" if rep.lyapunov_applicable else "  (motility/consumption outside the monotone regime; informational)"),
        f"dissipation        integral={rep.dissipation_integral:.6g}  L(0)={rep.L0:.6g}",
        f"comparison ratios  max v/w={rep.ratio_upper_max:.6g}  min v/S={rep.ratio_lower_min:.6g}  (t >= 1)",
        f"sandwich           max violation={rep.sandwich_max:.3e}",
        f"mass drift         {rep.mass_drift:.3e} (relative)",
        f"key identity       max residual={rep.keyid_max:.3e}",
        f"failure            {rep.failure}",
    ]
    if v.label == DT_COLLAPSE:
        lines.append("caveat             " + v.note)
    return "\n".join(lines)


def final_state(run_dir) -> State:
    fields_ = {}
    t = 0.0
    for name in ("u", "v", "n"):
        meta, vals = read_snapshot(Path(run_dir) / f"snapshot_{name}_final.txt")
        fields_[name] = vals
        t = meta["t"]
    return State(fields_["u"], fields_["v"], fields_["n"], t)


def scenario_mass(cfg: ExperimentConfig) -> float:
    grid = cfg.build_grid()
    state = init_state(grid, cfg.build_initial(grid))
    return float(math.fsum((state.u + state.n).ravel()) * grid.cell_volume)
