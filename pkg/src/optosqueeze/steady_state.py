"""
Classical steady-state amplitudes and linearized parameters.

The three coupled amplitude equations are reduced to one real equation in the
mechanical displacement ``beta``: the atomic amplitude follows from the cavity
amplitude in closed form, and the cavity amplitude from ``beta``. The scalar
equation is solved by safeguarded Newton with bisection fallback. The root is
the one reached by ramping the drive up slowly from zero: it stays on the branch
of the undriven small-``beta`` solution until that branch folds, then jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import ParameterError, PhysicalParams, drive_amplitude

RESIDUAL_TOL = 1e-10
MAX_NEWTON = 200


class ConvergenceError(RuntimeError):
    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class BranchError(RuntimeError):
    pass


@dataclass(frozen=True)
class SteadyAmplitudes:
    alpha: complex
    beta: float
    xi: complex
    residual_norm: float
    # drive strengths (units of omega_m) at which the tracked branch ended in a
    # fold and the state jumped to the next branch, as under a slow power ramp
    branch_jumps: tuple[float, ...] = ()


@dataclass(frozen=True)
class LinearizedParams:
    Delta_a: float
    omega_m_tilde: float
    Lambda: float
    G: float


def _atomic_response(p: PhysicalParams) -> complex:
    # xi = atomic_response * alpha
    return 1j * p.g0_collective / (1j * p.delta_c - p.gamma_c / 2)


def _alpha_of_beta(p: PhysicalParams, beta: float, omega_d: float) -> complex:
    denom = (
        1j * (p.delta_a + 2 * p.g_single * beta)
        - p.kappa / 2
        - 1j * p.g0_collective * _atomic_response(p)
    )
    return 1j * omega_d / denom



def residuals(p: PhysicalParams, alpha: complex, beta: float, xi: complex) -> tuple[complex, float, complex]:
    """The three steady-state amplitude equations evaluated as written."""
    omega_d = drive_amplitude(p)
    r1 = (1j * (p.delta_a + 2 * p.g_single * beta) - p.kappa / 2) * alpha - 1j * p.g0_collective * xi - 1j * omega_d
    r2 = beta + 3 * p.eta * (4 * beta**2 + 1) - p.g_single * abs(alpha) ** 2
    r3 = (1j * p.delta_c - p.gamma_c / 2) * xi - 1j * p.g0_collective * alpha
    return r1, r2, r3


def undriven_beta(p: PhysicalParams) -> float:
    """Small real root of beta + 3 eta (4 beta^2 + 1) = 0."""
    if p.eta == 0:
        return 0.0
    disc = 1.0 - 144.0 * p.eta**2
    if disc < 0:
        raise BranchError("undriven mechanical equation has no real root (eta too large)")
    # numerically stable form of (-1 + sqrt(disc)) / (24 eta)
    return -6.0 * p.eta / (1.0 + math.sqrt(disc))


def _scalar(p, omega_d):
    c0 = -p.kappa / 2 - 1j * p.g0_collective * _atomic_response(p)
    re0, im0 = c0.real, c0.imag + p.delta_a
    two_g = 2 * p.g_single
    w2 = omega_d * omega_d

    def f(beta):
        im = im0 + two_g * beta
        d2 = re0 * re0 + im * im
        a2 = w2 / d2
        val = beta + 3 * p.eta * (4 * beta * beta + 1) - p.g_single * a2
        # d|alpha|^2/dbeta = -w2 * 2 im two_g / d2^2
        dval = 1 + 24 * p.eta * beta + p.g_single * w2 * 2 * im * two_g / (d2 * d2)
        return val, dval

    return f


def _newton_bracketed(f, lo, hi, x0, tol=1e-13, max_iter=MAX_NEWTON):
    """Root of an increasing f on [lo, hi] with f(lo) <= 0 <= f(hi).

    Damped Newton; steps leaving the bracket fall back to bisection. An
    infinite end is replaced by a finite bracket found by doubling.
    """
    if math.isinf(hi):
        hi = _expand(f, lo, +1)
    if math.isinf(lo):
        lo = _expand(f, hi, -1)
    x = min(max(x0, lo), hi)
    fx, dfx = f(x)
    for _ in range(max_iter):
        if fx == 0:
            return x
        if fx < 0:
            lo = x
        else:
            hi = x
        step = -fx / dfx if dfx != 0 else math.inf
        cand = x + step
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        else:
            # damping: halve the step while the residual grows
            fc, _ = f(cand)
            damp = 0
            while abs(fc) > abs(fx) and damp < 30:
                step *= 0.5
                cand = x + step
                fc, _ = f(cand)
                damp += 1
        x_new = cand
        fx_new, dfx_new = f(x_new)
        if abs(x_new - x) <= 4e-16 * max(1.0, abs(x)) or abs(fx_new) <= tol * max(1.0, abs(x_new)):
            return x_new
        x, fx, dfx = x_new, fx_new, dfx_new
        if hi - lo <= 4e-16 * max(1.0, abs(x)):
            return x
    raise ConvergenceError("Newton iteration did not converge", last_iterate=x, residual=fx)


def _expand(f, anchor, direction):
    width = max(abs(anchor), 1.0)
    for _ in range(200):
        x = anchor + direction * width
        if (f(x)[0] > 0) == (direction > 0):
            return x
        width *= 2
    raise BranchError("no sign change beyond the tracked branch")


def _level_polynomial(p) -> np.ndarray:
    """Coefficients of q with q(beta) = g Omega_d^2 on every solution.

    Clearing the (positive) Lorentzian denominator D from the scalar equation
    gives (12 eta b^2 + b + 3 eta) D(b) = g Omega_d^2. Folds of the solution
    curve are the critical points of q, which do not depend on the drive.
    """
    c0 = -p.kappa / 2 - 1j * p.g0_collective * _atomic_response(p)
    re0, im0 = c0.real, c0.imag + p.delta_a
    two_g = 2 * p.g_single
    den = [two_g**2, 2 * im0 * two_g, re0 * re0 + im0 * im0]
    return np.trim_zeros(np.polymul([12 * p.eta, 1.0, 3 * p.eta], den), "f")


def _critical_points(q: np.ndarray) -> np.ndarray:
    dq = np.polyder(q)
    if len(dq) < 2:
        return np.array([])
    r = np.roots(dq)
    return np.sort(r[np.abs(r.imag) <= 1e-9 * np.maximum(1.0, np.abs(r))].real)


def _track(p, omega_from, beta_from, omega_to):
    """Move the root from drive ``omega_from`` to ``omega_to``.

    Returns ``(beta, jumps)``. The state follows its branch as the drive changes
    slowly; where the branch ends in a fold it jumps to the next root in the
    direction of motion (hysteresis of a power ramp), and the drive at which that
    happens is recorded in ``jumps``.
    """
    if p.g_single < 0:
        raise ParameterError("negative optomechanical coupling is not supported")
    if p.g_single == 0 or omega_from == omega_to:
        return beta_from, []
    q = _level_polynomial(p)
    level = p.g_single * omega_to**2
    f = _scalar(p, omega_to)
    up = omega_to > omega_from
    crit = _critical_points(q)
    # monotone stretches of q, walked away from the start in the direction the
    # root moves (up: increasing beta; down: decreasing beta)
    if up:
        edges = [beta_from] + [c for c in crit if c > beta_from] + [math.inf]
    else:
        edges = [beta_from] + [c for c in crit[::-1] if c < beta_from] + [-math.inf]
    jumps = []
    for a, b in zip(edges, edges[1:]):
        lo, hi = min(a, b), max(a, b)
        if math.isfinite(hi - lo):
            mid = 0.5 * (lo + hi)
        else:
            mid = lo + max(1.0, abs(lo)) if up else hi - max(1.0, abs(hi))
        increasing = np.polyval(np.polyder(q), mid) > 0
        if not increasing:
            continue  # q falls here; the root cannot sit on this stretch
        q_far = np.polyval(q, b) if math.isfinite(b) else np.polyval(q, mid) * math.inf
        reached = q_far >= level if up else q_far <= level
        if reached:
            beta = _newton_bracketed(f, lo, hi, beta_from if lo <= beta_from <= hi else (lo if up else hi))
            return beta, jumps
        # the branch ends at b without meeting the new drive: a fold
        jumps.append(math.sqrt(max(np.polyval(q, b), 0.0) / p.g_single))
    raise BranchError(f"no root at Omega_d = {omega_to:.6g} on the tracked branch")


def _finish(p: PhysicalParams, beta: float, omega_d: float, jumps=()) -> SteadyAmplitudes:
    alpha = _alpha_of_beta(p, beta, omega_d)
    xi = _atomic_response(p) * alpha
    r = residuals(p, alpha, beta, xi)
    res = max(abs(v) for v in r)
    if not res <= RESIDUAL_TOL:
        raise ConvergenceError(
            f"amplitude residual {res:.3e} exceeds {RESIDUAL_TOL:g}",
            last_iterate=beta,
            residual=res,
        )
    return SteadyAmplitudes(alpha=alpha, beta=beta, xi=xi, residual_norm=res, branch_jumps=tuple(jumps))


def solve_steady_amplitudes(p: PhysicalParams, start: tuple[float, float] | None = None) -> SteadyAmplitudes:
    """Solve for (alpha, beta, xi) on the branch connected to the undriven state.

    Parameters
    ----------
    p : PhysicalParams
    start : (omega_d, beta), optional
        Warm start from a known solution at a different drive strength on the
        same branch. By default the continuation starts from zero drive.
    """
    omega_d = drive_amplitude(p)
    if start is None:
        start = (0.0, undriven_beta(p))
    if omega_d == 0 and start[0] == 0:
        beta, jumps = start[1], []
    else:
        beta, jumps = _track(p, start[0], start[1], omega_d)
    return _finish(p, beta, omega_d, jumps)


def linearize(p: PhysicalParams, amps: SteadyAmplitudes) -> LinearizedParams:
    Lambda = 6 * p.eta * amps.beta
    return LinearizedParams(
        Delta_a=p.delta_a + 2 * p.g_single * amps.beta,
        omega_m_tilde=1.0 + 2 * Lambda,
        Lambda=Lambda,
        G=p.g_single * abs(amps.alpha),
    )


@dataclass(frozen=True)
class PowerPoint:
    power: float
    alpha_abs: float
    beta: float
    residual: float
    amplitudes: SteadyAmplitudes


def sweep_power(p: PhysicalParams, powers: Sequence[float], warm_start: bool = True) -> list[PowerPoint]:
    """Steady amplitudes over an ascending list of drive powers (watts)."""
    powers = list(powers)
    if any(b < a for a, b in zip(powers, powers[1:])):
        raise ParameterError("powers must be sorted ascending")
    out = []
    start = None
    for power in powers:
        q = p.with_(drive_power=power)
        try:
            amps = solve_steady_amplitudes(q, start=start if warm_start else None)
        except (ConvergenceError, BranchError) as exc:
            exc.args = (f"P = {power:g} W: {exc.args[0]}",) + exc.args[1:]
            exc.power = power
            raise
        if warm_start:
            start = (drive_amplitude(q), amps.beta)
        out.append(PowerPoint(power, abs(amps.alpha), amps.beta, amps.residual_norm, amps))
    return out
