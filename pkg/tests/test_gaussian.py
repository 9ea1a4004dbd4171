from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from optosqueeze import gaussian as ga
from optosqueeze.effective import EffectiveParams, eliminate_cavity
from optosqueeze.steady_state import LinearizedParams


def _decoupled_lin():
    return LinearizedParams(Delta_a=2.0, omega_m_tilde=1.0, Lambda=0.0, G=0.0)


def test_three_mode_decoupled_vacuum(fig2):
    p = fig2.with_(g0_collective=0.0, n_th=0.0)
    m = ga.solve_lyapunov(ga.build_three_mode(p, _decoupled_lin()))
    assert np.allclose(m.covariance, np.eye(6), atol=1e-10)


def test_three_mode_decoupled_thermal(fig2):
    p = fig2.with_(g0_collective=0.0, n_th=10.0)
    m = ga.solve_lyapunov(ga.build_three_mode(p, _decoupled_lin()))
    assert np.allclose(ga.mode_block(m, "mechanical"), 21 * np.eye(2), rtol=1e-9)


@pytest.mark.parametrize("name", ["fig2_optimum", "fig4_optimum"])
def test_three_mode_unstable_at_presets(request, name):
    """The full linearized model has a growing mode at both presets.

    Eliminating the cavity drops the cavity-induced anti-damping of the
    mechanics, so only the two-mode model has a steady state here.
    """
    pipe = request.getfixturevalue(name)
    m = ga.build_three_mode(pipe.params, pipe.linearized)
    assert not m.is_stable()
    with pytest.raises(ga.InstabilityError) as info:
        ga.solve_lyapunov(m)
    assert np.all(info.value.eigenvalues.real >= -ga.STABILITY_MARGIN)
    assert ga.build_effective_two_mode(pipe.effective, pipe.params).is_stable()


def test_three_mode_matches_two_mode_when_stable(fig2):
    """Deep in the elimination regime with weak optomechanics both models agree."""
    # narrow atomic line far from the cavity resonance: atom-mediated cooling
    # dominates the cavity back-action that the elimination discards
    lin = LinearizedParams(Delta_a=1000.0, omega_m_tilde=1.1, Lambda=0.05, G=10.0)
    p = fig2.with_(kappa=10.0, g0_collective=6.0, gamma_c=0.05, gamma_m=1e-3, delta_c=-1.2289)
    three = ga.build_three_mode(p, lin)
    two = ga.build_effective_two_mode(eliminate_cavity(p, lin), p)
    assert three.is_stable() and two.is_stable()
    v3 = ga.mechanical_variance(ga.solve_lyapunov(three))
    v2 = ga.mechanical_variance(ga.solve_lyapunov(two))
    assert v2 == pytest.approx(v3, rel=0.10)


def test_two_mode_vacuum_when_decoupled(fig2):
    eff = EffectiveParams(omega_m_tilde_prime=1.0, G_eff=0.0, Delta_eff=-1.0, gamma_eff=0.2, Lambda_prime=0.0)
    m = ga.solve_lyapunov(ga.build_effective_two_mode(eff, fig2.with_(n_th=0.0)))
    assert np.allclose(m.covariance, np.eye(4), atol=1e-10)


def test_fig2_preset_point_is_blue_detuned(fig2_pipeline):
    # Delta_eff > 0 at the preset Delta_c: the atoms heat instead of cool
    pipe = fig2_pipeline
    assert pipe.effective.Delta_eff > 0
    assert not ga.build_effective_two_mode(pipe.effective, pipe.params).is_stable()


def test_two_mode_squeezes_at_fig2_optimum(fig2_optimum):
    m = ga.solve_lyapunov(ga.build_effective_two_mode(fig2_optimum.effective, fig2_optimum.params))
    assert ga.mechanical_variance(m) < 1.0
    assert ga.check_physical(m) == []


def test_bare_atomic_noise_option(fig2_optimum):
    eff, p = fig2_optimum.effective, fig2_optimum.params
    full = ga.solve_lyapunov(ga.build_effective_two_mode(eff, p, "effective"))
    bare = ga.solve_lyapunov(ga.build_effective_two_mode(eff, p, "bare"))
    assert np.array_equal(full.drift, bare.drift)
    # less noise into the atoms can only lower the mechanical variance
    assert ga.mechanical_variance(bare) <= ga.mechanical_variance(full)
    with pytest.raises(ValueError):
        ga.build_effective_two_mode(eff, p, "other")


def test_scalar_balance():
    m = ga.GaussianModel(("mechanical",), -0.5 * np.eye(2), np.eye(2))
    assert np.allclose(ga.solve_lyapunov(m).covariance, np.eye(2))


@pytest.mark.parametrize("gamma,n", [(1e-3, 0.0), (0.7, 3.0), (2.0, 100.0)])
def test_single_thermal_mode(gamma, n):
    drift = ga.quadratic_drift(np.array([[1.3]]), np.zeros((1, 1)), [gamma])
    m = ga.solve_lyapunov(ga.GaussianModel(("mechanical",), drift, ga.bath_diffusion([gamma], [n])))
    assert np.allclose(m.covariance, (2 * n + 1) * np.eye(2), rtol=1e-10)


def test_unstable_drift_raises_with_eigenvalues():
    m = ga.GaussianModel(("mechanical",), np.diag([0.1, -1.0]), np.eye(2))
    with pytest.raises(ga.InstabilityError) as info:
        ga.solve_lyapunov(m)
    assert np.allclose(info.value.eigenvalues, [0.1])


def test_readout_requires_covariance():
    m = ga.GaussianModel(("mechanical",), -np.eye(2), np.eye(2))
    with pytest.raises(ga.MissingCovarianceError):
        ga.mechanical_variance(m)


def test_variance_readouts():
    vac = ga.GaussianModel(("mechanical",), -np.eye(2), np.eye(2), covariance=np.eye(2))
    hot = ga.GaussianModel(("mechanical",), -np.eye(2), np.eye(2), covariance=201.0 * np.eye(2))
    assert ga.mechanical_variance(vac) == 1.0
    assert ga.mechanical_variance(hot) == 201.0


def test_non_hermitian_coupling_rejected():
    with pytest.raises(ValueError):
        ga.quadratic_drift(np.array([[0, 1j], [1, 0]]), np.zeros((2, 2)), [1, 1])


def _stable(a):
    # shift the spectrum into the left half-plane
    return a - (np.max(np.linalg.eigvals(a).real) + 0.1) * np.eye(len(a))


@settings(max_examples=50, deadline=None)
@given(
    a=arrays(np.float64, (6, 6), elements=st.floats(-2, 2)),
    b=arrays(np.float64, (6, 6), elements=st.floats(-2, 2)),
)
def test_random_lyapunov_residual(a, b):
    A = _stable(a)
    D = b @ b.T
    m = ga.solve_lyapunov(ga.GaussianModel(("m1", "m2", "m3"), A, D))
    assert ga.lyapunov_residual(m) <= 1e-9 * max(np.linalg.norm(D), 1e-300)
    # independent oracle: scipy's Bartels-Stewart solver
    ref = sla.solve_continuous_lyapunov(A, -D)
    assert np.allclose(m.covariance, ref, atol=1e-8 * max(1.0, np.abs(ref).max()))


@settings(max_examples=60, deadline=None)
@given(
    wm=st.floats(0.5, 3.0),
    lam=st.floats(-0.1, 1.5),
    delta=st.floats(-4.0, 1.0),
    geff=st.floats(0.0, 0.3),
    geff_rate=st.floats(0.05, 2.0),
    n_th=st.floats(0.0, 100.0),
)
def test_two_mode_physicality(fig2, wm, lam, delta, geff, geff_rate, n_th):
    eff = EffectiveParams(wm, geff, delta, geff_rate, lam)
    m = ga.build_effective_two_mode(eff, fig2.with_(n_th=n_th, gamma_m=1e-3))
    if not m.is_stable():
        return
    m = ga.solve_lyapunov(m)
    assert ga.uncertainty_min_eigenvalue(m) >= -1e-9 * max(1.0, np.abs(m.covariance).max())
    vx, vy = ga.mechanical_variances(m)
    assert vx > 0 and vx * vy >= 1 - 1e-9


@pytest.mark.parametrize("name", ["fig2_optimum", "fig4_optimum"])
def test_variance_monotone_in_bath_occupation(request, name):
    pipe = request.getfixturevalue(name)
    values = []
    for n in (1.0, 10.0, 100.0):
        m = ga.build_effective_two_mode(pipe.effective, pipe.params.with_(n_th=n))
        values.append(ga.mechanical_variance(ga.solve_lyapunov(m)))
    assert values[0] <= values[1] <= values[2]


def test_csv_exports(fig2_optimum):
    m = ga.solve_lyapunov(ga.build_effective_two_mode(fig2_optimum.effective, fig2_optimum.params))
    cov = ga.covariance_csv(m).splitlines()
    assert cov[0] == ",X_mechanical,Y_mechanical,X_atomic,Y_atomic"
    assert len(cov) == 5
    eig = ga.eigenvalues_csv(m).splitlines()
    assert eig[0] == "real,imag" and len(eig) == 5
