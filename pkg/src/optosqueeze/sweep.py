"""
Sweep orchestration: power sweeps (amplitude curves) and effective-detuning
sweeps (quadrature variance curves), with CSV / JSON serialization.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import fock, gaussian
from .effective import (
    DetuningSolveError,
    Pipeline,
    TransformDomainError,
    analytic_variance,
    detuning_point,
    run_pipeline,
)
from .model import ParameterError, PhysicalParams, drive_amplitude, validate_regime
from .steady_state import BranchError, ConvergenceError, solve_steady_amplitudes

SOLVERS = ("gaussian-3mode", "gaussian-2mode", "fock", "analytic")
# Fock oracle is not attempted above this bath occupation (occupations too large
# for modest cutoffs); those rows fall back to the Gaussian solvers.
FOCK_MAX_NTH = 10.0


def parse_solvers(text: str | Sequence[str]) -> tuple[str, ...]:
    items = text.split(",") if isinstance(text, str) else list(text)
    items = [s.strip() for s in items if s.strip()]
    if not items:
        raise ParameterError("solver list is empty")
    out: list[str] = []
    for s in items:
        if s == "all":
            out.extend(x for x in SOLVERS if x not in out)
        elif s in SOLVERS:
            if s not in out:
                out.append(s)
        else:
            raise ParameterError(f"unknown solver {s!r}; choose from {SOLVERS + ('all',)}")
    return tuple(out)


def parse_grid(text: str) -> tuple[float, ...]:
    """``min:max:count`` (inclusive linspace) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ParameterError("grid must be min:max:count")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ParameterError(f"cannot parse grid {text!r}") from None
        if count < 1:
            raise ParameterError("grid count must be >= 1")
        if count == 1:
            return (lo,)
        return tuple(float(v) for v in np.linspace(lo, hi, count))
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ParameterError(f"cannot parse grid {text!r}") from None
    if not values:
        raise ParameterError("grid is empty")
    return values


def parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ParameterError(f"cannot parse number list {text!r}") from None


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    grid: tuple[float, ...]
    solvers: tuple[str, ...] = ("gaussian-2mode",)
    n_th: tuple[float, ...] | None = None
    resolve_amplitudes: bool = True
    cutoffs: tuple[int, int] = (fock.DEFAULT_CUTOFF, fock.DEFAULT_CUTOFF)
    adaptive_cutoffs: bool = False
    warm_start: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.variable not in ("power", "delta_eff"):
            raise ParameterError("sweep variable must be 'power' or 'delta_eff'")
        if not self.grid:
            raise ParameterError("grid must be non-empty")
        if not self.solvers:
            raise ParameterError("solver list must be non-empty")


@dataclass
class SweepRow:
    value: float
    n_th: float
    alpha_abs: float = math.nan
    beta: float = math.nan
    delta_c: float = math.nan
    Delta_a: float = math.nan
    Lambda_prime: float = math.nan
    zeta: float = math.nan
    Delta_eff: float = math.nan
    omega_m_prime: float = math.nan
    variances: dict[str, float | None] = field(default_factory=dict)
    stable_2mode: bool | None = None
    stable_3mode: bool | None = None
    regime_violations: int | None = None
    tail_population: float | None = None
    is_min: bool = False
    notes: list[str] = field(default_factory=list)
    skipped: dict[str, str] = field(default_factory=dict)
    # solver -> violated physicality conditions of its solved state
    audit: dict[str, list[str]] = field(default_factory=dict)

    def skip(self, solver: str, reason: str):
        self.variances[solver] = None
        self.skipped[solver] = reason
        self.notes.append(f"{solver} skipped: {reason}")


# --------------------------------------------------------------------------
# per-point evaluation


def _fill_pipeline(row: SweepRow, pipe: Pipeline):
    amps, lin, eff, t = pipe.amplitudes, pipe.linearized, pipe.effective, pipe.transformed
    row.alpha_abs = abs(amps.alpha)
    row.beta = amps.beta
    row.delta_c = pipe.params.delta_c
    row.Delta_a = lin.Delta_a
    row.Lambda_prime = eff.Lambda_prime
    row.zeta = t.zeta
    row.Delta_eff = eff.Delta_eff
    row.omega_m_prime = t.omega_m_prime
    row.regime_violations = len(validate_regime(pipe.params, amps, lin).violations)
    for w in amps.branch_jumps:
        row.notes.append(f"amplitudes jumped branch at a fold near Omega_d = {w:.6g}")


def evaluate_solvers(
    row: SweepRow,
    pipe: Pipeline,
    solvers: Sequence[str],
    cutoffs=(fock.DEFAULT_CUTOFF, fock.DEFAULT_CUTOFF),
    adaptive: bool = False,
    check=None,
) -> None:
    """Fill per-solver mechanical variances into ``row``.

    ``check`` (optional callable) receives every solved Gaussian / Fock model,
    used by the physicality audits.
    """
    p = pipe.params
    two = gaussian.build_effective_two_mode(pipe.effective, p)
    row.stable_2mode = two.is_stable()
    three = gaussian.build_three_mode(p, pipe.linearized)
    row.stable_3mode = three.is_stable()
    for solver in solvers:
        if solver == "analytic":
            row.variances[solver] = analytic_variance(pipe.transformed, 0.0)
        elif solver in ("gaussian-2mode", "gaussian-3mode"):
            model = two if solver == "gaussian-2mode" else three
            if not model.is_stable():
                worst = max(model.drift_eigenvalues().real)
                row.skip(solver, f"unstable drift (max Re eigenvalue {worst:.4g})")
                continue
            solved = gaussian.solve_lyapunov(model)
            _audit(row, solver, gaussian.check_physical(solved))
            if check is not None:
                check(solved)
            row.variances[solver] = gaussian.mechanical_variance(solved)
        elif solver == "fock":
            if p.n_th > FOCK_MAX_NTH:
                row.skip(solver, f"n_th > {FOCK_MAX_NTH:g} delegated to Gaussian solver")
                continue
            if not two.is_stable():
                row.skip(solver, "unstable effective drift, no steady state")
                continue
            try:
                if adaptive:
                    m = fock.solve_adaptive(pipe.effective, p, cutoffs)
                else:
                    m = fock.solve_steady(fock.build_liouvillian(pipe.effective, p, cutoffs))
            except (fock.DegenerateSteadyStateError, fock.CutoffError) as exc:
                row.skip(solver, str(exc))
                continue
            _audit(row, solver, fock.check_physical(m))
            if check is not None:
                check(m)
            row.tail_population = m.tail_population
            row.notes.extend(m.warnings)
            row.variances[solver] = fock.observables(m).var_x
        else:
            raise ParameterError(f"unknown solver {solver!r}")


def _audit(row: SweepRow, solver: str, problems: list[str]):
    row.audit[solver] = problems
    row.notes.extend(f"{solver}: {msg}" for msg in problems)


_PIPELINE_ERRORS = (
    ConvergenceError,
    BranchError,
    DetuningSolveError,
    TransformDomainError,
    ParameterError,
)


def _failed(row: SweepRow, spec: SweepSpec, exc: Exception) -> SweepRow:
    for solver in spec.solvers:
        row.variances[solver] = None
        row.skipped[solver] = f"pipeline failed: {exc}"
    row.notes.append(f"pipeline failed: {exc}")
    return row


def _detuning_row(args):
    p, target, n_th, spec, amps = args
    row = SweepRow(value=target, n_th=n_th)
    q = p.with_(n_th=n_th)
    try:
        pipe = detuning_point(q, target, spec.resolve_amplitudes, amps)
    except _PIPELINE_ERRORS as exc:
        return _failed(row, spec, exc)
    _fill_pipeline(row, pipe)
    evaluate_solvers(row, pipe, spec.solvers, spec.cutoffs, spec.adaptive_cutoffs)
    return row


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _mark_minima(rows: list[SweepRow], solver: str):
    by_nth: dict[float, list[SweepRow]] = {}
    for r in rows:
        by_nth.setdefault(r.n_th, []).append(r)
    for group in by_nth.values():
        valued = [r for r in group if r.variances.get(solver) is not None]
        if valued:
            min(valued, key=lambda r: r.variances[solver]).is_min = True


def run_detuning_sweep(spec: SweepSpec, p: PhysicalParams) -> list[SweepRow]:
    """Variance versus effective detuning, realized by retuning Delta_c."""
    if spec.variable != "delta_eff":
        raise ParameterError("run_detuning_sweep needs variable='delta_eff'")
    amps = None
    if not spec.resolve_amplitudes:
        amps = solve_steady_amplitudes(p)
    n_list = spec.n_th if spec.n_th else (p.n_th,)
    jobs = [(p, v, n, spec, amps) for n in n_list for v in sorted(spec.grid)]
    rows = _map(_detuning_row, jobs, spec.workers)
    _mark_minima(rows, spec.solvers[0])
    return rows


def _power_row(args):
    p, power, spec, amps = args
    row = SweepRow(value=power, n_th=p.n_th)
    q = p.with_(drive_power=power)
    try:
        if amps is None:
            amps = solve_steady_amplitudes(q)
        pipe = run_pipeline(q, amps)
    except _PIPELINE_ERRORS as exc:
        return _failed(row, spec, exc)
    _fill_pipeline(row, pipe)
    row.notes.append(f"residual {amps.residual_norm:.3e}")
    evaluate_solvers(row, pipe, spec.solvers, spec.cutoffs, spec.adaptive_cutoffs)
    return row


def run_power_sweep(spec: SweepSpec, p: PhysicalParams) -> list[SweepRow]:
    """Amplitudes (and optionally variances) versus drive power in watts."""
    if spec.variable != "power":
        raise ParameterError("run_power_sweep needs variable='power'")
    powers = sorted(spec.grid)
    if any(v < 0 for v in powers):
        raise ParameterError("drive powers must be non-negative")
    n_list = spec.n_th if spec.n_th else (p.n_th,)
    rows = []
    for n in n_list:
        q = p.with_(n_th=n)
        if spec.warm_start:
            # sequential continuation along the grid
            start = None
            for power in powers:
                qq = q.with_(drive_power=power)
                try:
                    amps = solve_steady_amplitudes(qq, start=start)
                    start = (drive_amplitude(qq), amps.beta)
                except _PIPELINE_ERRORS as exc:
                    rows.append(_failed(SweepRow(value=power, n_th=n), spec, exc))
                    start = None
                    continue
                rows.append(_power_row((q, power, spec, amps)))
        else:
            rows.extend(_map(_power_row, [(q, v, spec, None) for v in powers], spec.workers))
    return rows


# --------------------------------------------------------------------------
# serialization

_BASE_COLUMNS = (
    "value",
    "n_th",
    "alpha_abs",
    "beta",
    "delta_c",
    "Delta_a",
    "Lambda_prime",
    "zeta",
    "Delta_eff",
    "omega_m_prime",
)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    return f"{v:.12g}"


def columns(spec: SweepSpec) -> list[str]:
    first = "P_watts" if spec.variable == "power" else "Delta_eff_target"
    cols = [first] + list(_BASE_COLUMNS[1:])
    cols += [f"var_{s}" for s in spec.solvers]
    cols += ["stable_2mode", "stable_3mode", "regime_violations", "tail_population", "is_min", "notes"]
    return cols


def row_values(row: SweepRow, spec: SweepSpec) -> list:
    vals = [getattr(row, c) for c in _BASE_COLUMNS]
    for s in spec.solvers:
        v = row.variances.get(s)
        vals.append("skipped" if v is None else v)
    vals += [row.stable_2mode, row.stable_3mode, row.regime_violations, row.tail_population, row.is_min]
    vals.append("; ".join(row.notes))
    return vals


def rows_to_csv(rows: Sequence[SweepRow], spec: SweepSpec) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns(spec))
    for row in rows:
        writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row_values(row, spec)])
    return buf.getvalue()


def rows_to_json(rows: Sequence[SweepRow], spec: SweepSpec) -> str:
    out = []
    for row in rows:
        record = {}
        for name, v in zip(columns(spec), row_values(row, spec)):
            if isinstance(v, float) and not math.isfinite(v):
                v = None
            elif isinstance(v, float):
                v = float(_fmt(v))
            record[name] = v
        out.append(record)
    return json.dumps(out, indent=1) + "\n"


def amplitudes_csv(points) -> str:
    """``P_watts,alpha_abs,beta,residual`` table from :func:`steady_state.sweep_power`."""
    lines = ["P_watts,alpha_abs,beta,residual"]
    for pt in points:
        lines.append(",".join(_fmt(v) for v in (pt.power, pt.alpha_abs, pt.beta, pt.residual)))
    return "\n".join(lines) + "\n"
