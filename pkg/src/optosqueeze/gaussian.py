"""
Linearized Gaussian dynamics over mode quadratures.

Quadratures are X = a + a^dag and Y = i(a^dag - a) for every mode, so that
[X, Y] = 2i and the vacuum has unit variance in both. The covariance matrix is
V_jk = <{dr_j, dr_k}>/2 and the steady state solves A V + V A^T + D = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .effective import EffectiveParams
from .model import PhysicalParams
from .steady_state import LinearizedParams

STABILITY_MARGIN = 1e-12


class InstabilityError(RuntimeError):
    def __init__(self, message, eigenvalues=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues


class MissingCovarianceError(RuntimeError):
    pass


@dataclass(frozen=True)
class GaussianModel:
    mode_labels: tuple[str, ...]
    drift: np.ndarray
    diffusion: np.ndarray
    covariance: np.ndarray | None = None

    @property
    def n_modes(self) -> int:
        return len(self.mode_labels)

    def index(self, label: str) -> int:
        return self.mode_labels.index(label)

    def drift_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.drift)

    def is_stable(self) -> bool:
        return bool(np.all(self.drift_eigenvalues().real < -STABILITY_MARGIN))


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _quadrature_transform(n: int) -> np.ndarray:
    # rows: X_j, Y_j ; columns: (a_1..a_n, a_1^dag..a_n^dag)
    T = np.zeros((2 * n, 2 * n), dtype=complex)
    for j in range(n):
        T[2 * j, j] = 1
        T[2 * j, n + j] = 1
        T[2 * j + 1, j] = -1j
        T[2 * j + 1, n + j] = 1j
    return T


def quadratic_drift(P: np.ndarray, Q: np.ndarray, damping: Sequence[float]) -> np.ndarray:
    """Real quadrature drift for H = a^dag P a + (a^dag Q a^dag + h.c.)/2.

    ``P`` is Hermitian, ``Q`` symmetric; each mode j is damped at rate
    ``damping[j]`` (amplitude decay rate damping/2).
    """
    P = np.asarray(P, dtype=complex)
    Q = np.asarray(Q, dtype=complex)
    n = P.shape[0]
    if not np.allclose(P, P.conj().T) or not np.allclose(Q, Q.T):
        raise ValueError("P must be Hermitian and Q symmetric")
    # d/dt (a, a^dag) = -i K (a, a^dag)
    K = np.block([[P, Q], [-Q.conj(), -P.conj()]])
    T = _quadrature_transform(n)
    A = T @ (-1j * K) @ np.linalg.inv(T)
    A = A.real
    A -= np.diag(np.repeat(np.asarray(damping, dtype=float) / 2, 2))
    return A


def bath_diffusion(rates: Sequence[float], occupations: Sequence[float]) -> np.ndarray:
    """Diffusion for independent Markovian baths: rate (2 n + 1) per quadrature."""
    d = [r * (2 * n + 1) for r, n in zip(rates, occupations)]
    return np.diag(np.repeat(d, 2)).astype(float)


def build_three_mode(p: PhysicalParams, lin: LinearizedParams) -> GaussianModel:
    """Cavity, mechanics and collective atoms coupled by the linearized Hamiltonian."""
    a, b, c = 0, 1, 2
    P = np.zeros((3, 3))
    Q = np.zeros((3, 3))
    P[a, a] = -lin.Delta_a
    P[c, c] = -p.delta_c
    P[b, b] = lin.omega_m_tilde
    Q[b, b] = 2 * lin.Lambda
    P[a, c] = P[c, a] = p.g0_collective
    # -G (a + a^dag)(b + b^dag)
    P[a, b] = P[b, a] = -lin.G
    Q[a, b] = Q[b, a] = -lin.G
    drift = quadratic_drift(P, Q, [p.kappa, p.gamma_m, p.gamma_c])
    diffusion = bath_diffusion([p.kappa, p.gamma_m, p.gamma_c], [0.0, p.n_th, 0.0])
    return GaussianModel(("cavity", "mechanical", "atomic"), drift, diffusion)


def build_effective_two_mode(
    eff: EffectiveParams, p: PhysicalParams, atomic_noise: str = "effective"
) -> GaussianModel:
    """Mechanics and atoms after eliminating the cavity.

    ``atomic_noise="effective"`` feeds the atomic mode with vacuum noise at the
    full rate gamma_eff, as the two-mode master equation does. ``"bare"`` keeps
    gamma_eff in the drift but only gamma_c in the noise, which is what the
    eliminated Langevin equations literally carry.
    """
    if atomic_noise not in ("effective", "bare"):
        raise ValueError("atomic_noise must be 'effective' or 'bare'")
    b, c = 0, 1
    P = np.zeros((2, 2))
    Q = np.zeros((2, 2))
    P[b, b] = eff.omega_m_tilde_prime
    Q[b, b] = 2 * eff.Lambda_prime
    P[c, c] = -eff.Delta_eff
    P[b, c] = P[c, b] = -eff.G_eff
    Q[b, c] = Q[c, b] = -eff.G_eff
    drift = quadratic_drift(P, Q, [p.gamma_m, eff.gamma_eff])
    noise_rate = eff.gamma_eff if atomic_noise == "effective" else p.gamma_c
    diffusion = bath_diffusion([p.gamma_m, noise_rate], [p.n_th, 0.0])
    return GaussianModel(("mechanical", "atomic"), drift, diffusion)


def solve_lyapunov(m: GaussianModel) -> GaussianModel:
    """Steady covariance from A V + V A^T + D = 0 (Kronecker-vectorized solve)."""
    eig = m.drift_eigenvalues()
    bad = eig[eig.real >= -STABILITY_MARGIN]
    if bad.size:
        raise InstabilityError(f"drift is not stable; offending eigenvalues {bad}", eigenvalues=bad)
    A = m.drift
    n = A.shape[0]
    I = np.eye(n)
    # row-major vec: vec(A V) = (A kron I) v, vec(V A^T) = (I kron A) v
    L = np.kron(A, I) + np.kron(I, A)
    V = np.linalg.solve(L, -m.diffusion.reshape(-1)).reshape(n, n)
    V = 0.5 * (V + V.T)
    return replace(m, covariance=V)


def lyapunov_residual(m: GaussianModel) -> float:
    V = _cov(m)
    return float(np.linalg.norm(m.drift @ V + V @ m.drift.T + m.diffusion))


def _cov(m: GaussianModel) -> np.ndarray:
    if m.covariance is None:
        raise MissingCovarianceError("model has not been solved")
    return m.covariance


def mode_block(m: GaussianModel, label: str) -> np.ndarray:
    j = 2 * m.index(label)
    return _cov(m)[j : j + 2, j : j + 2]


def mechanical_variance(m: GaussianModel) -> float:
    """<dX^2> of the mechanical mode."""
    return float(mode_block(m, "mechanical")[0, 0])


def mechanical_variances(m: GaussianModel) -> tuple[float, float]:
    blk = mode_block(m, "mechanical")
    return float(blk[0, 0]), float(blk[1, 1])


def uncertainty_min_eigenvalue(m: GaussianModel) -> float:
    """Smallest eigenvalue of V + i Omega; physical states have it >= 0."""
    V = _cov(m)
    return float(np.linalg.eigvalsh(V + 1j * symplectic_form(m.n_modes)).min())


def check_physical(m: GaussianModel, tol: float = 1e-9) -> list[str]:
    """Names of violated physicality conditions (empty when all hold)."""
    V = _cov(m)
    problems = []
    scale = max(1.0, float(np.abs(V).max()))
    if np.abs(V - V.T).max() > tol * scale:
        problems.append("covariance not symmetric")
    D = m.diffusion
    if np.abs(D - D.T).max() > 1e-12 or np.linalg.eigvalsh(0.5 * (D + D.T)).min() < -1e-12:
        problems.append("diffusion not symmetric PSD")
    if not m.is_stable():
        problems.append("drift not stable")
    if lyapunov_residual(m) > 1e-9 * max(np.linalg.norm(D), 1e-300):
        problems.append("Lyapunov residual too large")
    if uncertainty_min_eigenvalue(m) < -tol * scale:
        problems.append("V + i Omega not positive semidefinite")
    for k in range(m.n_modes):
        vx, vy = V[2 * k, 2 * k], V[2 * k + 1, 2 * k + 1]
        if vx <= 0 or vx * vy < 1 - tol:
            problems.append(f"uncertainty product violated for {m.mode_labels[k]}")
    return problems


def covariance_csv(m: GaussianModel) -> str:
    names = [f"{q}_{lbl}" for lbl in m.mode_labels for q in ("X", "Y")]
    V = _cov(m)
    lines = ["," + ",".join(names)]
    for name, row in zip(names, V):
        lines.append(name + "," + ",".join(f"{v:.12g}" for v in row))
    return "\n".join(lines) + "\n"


def eigenvalues_csv(m: GaussianModel) -> str:
    lines = ["real,imag"]
    for ev in sorted(m.drift_eigenvalues(), key=lambda z: (z.real, z.imag)):
        lines.append(f"{ev.real:.12g},{ev.imag:.12g}")
    return "\n".join(lines) + "\n"
