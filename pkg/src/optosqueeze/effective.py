"""
Adiabatic elimination of the cavity and the squeezed-frame description.

With a strongly damped cavity the cavity fluctuation follows the mechanical
and atomic fluctuations instantaneously. Substituting it back leaves a
two-mode (mechanics + collective atoms) model with shifted frequencies, a
cavity-enhanced atomic damping, and an enhanced two-phonon term. A
single-mode squeezing transformation then maps the mechanics onto a plain
cooling problem whose best-case quadrature variance is ``exp(-2 zeta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import ParameterError, PhysicalParams
from .steady_state import (
    BranchError,
    ConvergenceError,
    LinearizedParams,
    SteadyAmplitudes,
    linearize,
    solve_steady_amplitudes,
)


class TransformDomainError(ValueError):
    """1 + 4 Lambda' / omega_m <= 0: the mechanical potential is inverted."""


@dataclass(frozen=True)
class EffectiveParams:
    omega_m_tilde_prime: float
    G_eff: float
    Delta_eff: float
    gamma_eff: float
    Lambda_prime: float


@dataclass(frozen=True)
class TransformedParams:
    zeta: float
    omega_m_prime: float
    G_prime: float
    n_th_prime: float
    cooling_rates: tuple[float, float, float, float]
    Delta_eff: float
    gamma_eff: float

    @property
    def variance_floor(self) -> float:
        return math.exp(-2 * self.zeta)


def _lorentz_denominator(lin: LinearizedParams, p: PhysicalParams) -> float:
    return lin.Delta_a**2 + (p.kappa / 2) ** 2


def eliminate_cavity(p: PhysicalParams, lin: LinearizedParams) -> EffectiveParams:
    den = _lorentz_denominator(lin, p)
    if not den > 0:
        raise ParameterError("Delta_a^2 + (kappa/2)^2 must be positive")
    G, G0, Da = lin.G, p.g0_collective, lin.Delta_a
    return EffectiveParams(
        omega_m_tilde_prime=lin.omega_m_tilde + 2 * G**2 * Da / den,
        G_eff=abs(G * G0 / complex(Da, p.kappa / 2)),
        Delta_eff=p.delta_c - G0**2 * Da / den,
        gamma_eff=p.gamma_c + G0**2 * p.kappa / den,
        Lambda_prime=lin.Lambda + G**2 * Da / den,
    )


def squeeze_ratio(Lambda_prime: float) -> float:
    """1 + 4 Lambda' / omega_m (omega_m = 1)."""
    return 1.0 + 4.0 * Lambda_prime


def transform_frame(eff: EffectiveParams, p: PhysicalParams) -> TransformedParams:
    """Parameters of the squeezed frame in which the mechanics is simply cooled.

    Raises
    ------
    TransformDomainError
        If ``1 + 4 Lambda'/omega_m <= 0``.
    """
    r = squeeze_ratio(eff.Lambda_prime)
    if not r > 0:
        raise TransformDomainError(f"1 + 4 Lambda'/omega_m = {r:.6g} <= 0")
    zeta = 0.25 * math.log(r)
    ch2 = math.cosh(zeta) ** 2
    sh2 = math.sinh(zeta) ** 2
    n_prime = p.n_th * math.cosh(2 * zeta) + sh2
    gm = p.gamma_m
    rates = (
        gm * (n_prime + 1) * ch2,  # L[b]
        gm * (n_prime + 1) * sh2,  # L[b^dag]
        gm * n_prime * ch2,  # L[b^dag]
        gm * n_prime * sh2,  # L[b]
    )
    return TransformedParams(
        zeta=zeta,
        omega_m_prime=math.sqrt(r),
        G_prime=eff.G_eff * r ** (-0.25),
        n_th_prime=n_prime,
        cooling_rates=rates,
        Delta_eff=eff.Delta_eff,
        gamma_eff=eff.gamma_eff,
    )


def analytic_variance(t: TransformedParams, n_eff_prime: float = 0.0) -> float:
    """(2 n' + 1) exp(-2 zeta), n' the phonon number in the squeezed frame."""
    if n_eff_prime < 0:
        raise ParameterError("n_eff_prime must be non-negative")
    return (2 * n_eff_prime + 1) * math.exp(-2 * t.zeta)


def optimal_detuning(t: TransformedParams) -> float:
    return -t.omega_m_prime


@dataclass(frozen=True)
class Pipeline:
    """One operating point carried through every model tier."""

    params: PhysicalParams
    amplitudes: SteadyAmplitudes
    linearized: LinearizedParams
    effective: EffectiveParams
    transformed: TransformedParams


def run_pipeline(p: PhysicalParams, amps: SteadyAmplitudes | None = None) -> Pipeline:
    """Amplitudes -> linearization -> elimination -> squeezed frame.

    Passing ``amps`` holds the classical amplitudes fixed instead of solving.
    """
    if amps is None:
        amps = solve_steady_amplitudes(p)
    lin = linearize(p, amps)
    eff = eliminate_cavity(p, lin)
    return Pipeline(p, amps, lin, eff, transform_frame(eff, p))


class DetuningSolveError(RuntimeError):
    pass


def solve_for_delta_c(
    p: PhysicalParams,
    target_Delta_eff: float,
    resolve_amplitudes: bool = True,
    amps: SteadyAmplitudes | None = None,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> float:
    """Atomic detuning Delta_c that realizes a given effective detuning.

    With ``resolve_amplitudes`` the classical amplitudes are re-solved at every
    trial Delta_c, since Delta_c feeds back into them through the atomic
    amplitude. Otherwise ``amps`` (default: solved at ``p``) are held fixed and
    the answer is closed-form.
    """
    if not resolve_amplitudes:
        if amps is None:
            amps = solve_steady_amplitudes(p)
        lin = linearize(p, amps)
        return target_Delta_eff + p.g0_collective**2 * lin.Delta_a / _lorentz_denominator(lin, p)
    if p.g0_collective == 0:
        return target_Delta_eff

    def shift(delta_c):
        q = p.with_(delta_c=delta_c)
        lin = linearize(q, solve_steady_amplitudes(q))
        return p.g0_collective**2 * lin.Delta_a / _lorentz_denominator(lin, q)

    def residual(delta_c):
        return delta_c - shift(delta_c) - target_Delta_eff

    # fixed-point iteration, then a bracketed fallback
    x = target_Delta_eff
    history = []
    try:
        for _ in range(max_iter):
            x_new = target_Delta_eff + shift(x)
            history.append(x_new)
            if abs(x_new - x) <= tol * 0.1:
                if abs(residual(x_new)) <= tol:
                    return x_new
            x = x_new
    except (ConvergenceError, BranchError):
        pass

    from scipy.optimize import brentq

    lo, hi = target_Delta_eff - 1.0, target_Delta_eff + 1.0
    width = 1.0
    for _ in range(40):
        try:
            r_lo, r_hi = residual(lo), residual(hi)
        except (ConvergenceError, BranchError):
            r_lo = r_hi = math.nan
        if r_lo * r_hi < 0:
            root = brentq(residual, lo, hi, xtol=tol * 1e-2, rtol=1e-15)
            if abs(residual(root)) <= tol:
                return root
            break
        width *= 1.6
        lo, hi = target_Delta_eff - width, target_Delta_eff + width
    raise DetuningSolveError(
        f"no Delta_c found for Delta_eff = {target_Delta_eff:.6g}; "
        f"fixed-point iterates ended at {history[-3:]}, last bracket [{lo:.4g}, {hi:.4g}]"
    )


def detuning_point(
    p: PhysicalParams,
    target_Delta_eff: float,
    resolve_amplitudes: bool = True,
    amps: SteadyAmplitudes | None = None,
) -> Pipeline:
    """Full pipeline at the Delta_c that realizes ``target_Delta_eff``."""
    if not resolve_amplitudes and amps is None:
        amps = solve_steady_amplitudes(p)
    dc = solve_for_delta_c(p, target_Delta_eff, resolve_amplitudes, amps)
    q = p.with_(delta_c=dc)
    return run_pipeline(q, None if resolve_amplitudes else amps)


def optimal_point(p: PhysicalParams, resolve_amplitudes: bool = True, tol: float = 1e-10) -> Pipeline:
    """Self-consistent operating point with Delta_eff = -omega_m'."""
    if resolve_amplitudes:
        from scipy.optimize import brentq

        def gap(target):
            pipe = detuning_point(p, target, True)
            return target + pipe.transformed.omega_m_prime

        # omega_m' >= 0 so the optimum lies below zero; bracket downward
        lo, hi = -2.0, -0.5
        while gap(hi) <= 0:
            hi *= 0.5
        while gap(lo) >= 0:
            lo *= 2.0
        target = brentq(gap, lo, hi, xtol=tol, rtol=1e-15)
        return detuning_point(p, target, True)
    base = run_pipeline(p)
    return detuning_point(p, optimal_detuning(base.transformed), False, base.amplitudes)
