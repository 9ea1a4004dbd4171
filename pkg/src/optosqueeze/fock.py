"""
Truncated Fock-space steady states of the two-mode master equation.

This is the brute-force check on the Gaussian solver: ladder operators are
truncated, lifted to the mechanics (x) atoms product space with Kronecker
products, and the Liouvillian is assembled as a sparse superoperator acting on
column-stacked density matrices. The steady state is the solution of the
Liouvillian system with the trace condition added as a rank-one term.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.linalg.lapack import ztrsyl
from scipy.sparse.linalg import LinearOperator, gmres

from .effective import EffectiveParams, TransformedParams
from .model import PhysicalParams

TAIL_THRESHOLD = 1e-6
DEFAULT_CUTOFF = 12
MAX_CUTOFF = 64
# product-state budget for adaptive cutoffs; solve cost grows as (N_b N_c)^3
MAX_STATES = 1600

OPERATORS = ("b", "bd", "c", "cd")


class CutoffError(ValueError):
    pass


class DegenerateSteadyStateError(RuntimeError):
    pass


class CutoffWarning(UserWarning):
    pass


Monomial = tuple[str, ...]


@dataclass(frozen=True)
class FockModel:
    cutoffs: tuple[int, int]
    hamiltonian_spec: tuple[tuple[complex, Monomial], ...]
    dissipator_spec: tuple[tuple[float, Monomial], ...]
    liouvillian: sp.csc_matrix = field(repr=False)
    steady_rho: np.ndarray | None = field(default=None, repr=False)
    tail_population: float | None = None
    warnings: tuple[str, ...] = ()

    @property
    def dim(self) -> int:
        return self.cutoffs[0] * self.cutoffs[1]


def destroy(n: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n, dtype=float)), 1, shape=(n, n), format="csr")


def mode_operators(cutoffs: Sequence[int]) -> dict[str, sp.csr_matrix]:
    """b, b^dag, c, c^dag on the product space, mechanics first."""
    nb, nc = cutoffs
    b = sp.kron(destroy(nb), sp.identity(nc), format="csr")
    c = sp.kron(sp.identity(nb), destroy(nc), format="csr")
    return {"b": b, "bd": b.T.tocsr(), "c": c, "cd": c.T.tocsr()}


def _product(ops, monomial: Monomial, dim: int):
    out = sp.identity(dim, format="csr", dtype=complex)
    for name in monomial:
        out = out @ ops[name]
    return out


def effective_hamiltonian_spec(eff: EffectiveParams) -> tuple[tuple[complex, Monomial], ...]:
    """Two-mode Hamiltonian after cavity elimination."""
    g = -eff.G_eff
    return (
        (-eff.Delta_eff, ("cd", "c")),
        (eff.omega_m_tilde_prime, ("bd", "b")),
        (g, ("c", "b")),
        (g, ("c", "bd")),
        (g, ("cd", "b")),
        (g, ("cd", "bd")),
        (eff.Lambda_prime, ("bd", "bd")),
        (eff.Lambda_prime, ("b", "b")),
    )


def transformed_hamiltonian_spec(t: TransformedParams) -> tuple[tuple[complex, Monomial], ...]:
    """Squeezed-frame cooling Hamiltonian."""
    g = -t.G_prime
    return (
        (-t.Delta_eff, ("cd", "c")),
        (t.omega_m_prime, ("bd", "b")),
        (g, ("c", "b")),
        (g, ("c", "bd")),
        (g, ("cd", "b")),
        (g, ("cd", "bd")),
    )


def _dissipators(params, p: PhysicalParams):
    if isinstance(params, TransformedParams):
        r = params.cooling_rates
        return (
            (params.gamma_eff, ("c",)),
            (r[0] + r[3], ("b",)),
            (r[1] + r[2], ("bd",)),
        )
    return (
        (params.gamma_eff, ("c",)),
        (p.gamma_m * (p.n_th + 1), ("b",)),
        (p.gamma_m * p.n_th, ("bd",)),
    )


def liouvillian(
    hamiltonian_spec, dissipator_spec, cutoffs: Sequence[int]
) -> sp.csc_matrix:
    """Superoperator on column-stacked rho: vec(A rho B) = (B^T kron A) vec(rho)."""
    ops = mode_operators(cutoffs)
    dim = cutoffs[0] * cutoffs[1]
    eye = sp.identity(dim, format="csr", dtype=complex)
    H = sp.csr_matrix((dim, dim), dtype=complex)
    for coeff, mono in hamiltonian_spec:
        if coeff != 0:
            H = H + coeff * _product(ops, mono, dim)
    L = -1j * (sp.kron(eye, H) - sp.kron(H.T, eye))
    for rate, mono in dissipator_spec:
        if rate == 0:
            continue
        J = _product(ops, mono, dim)
        JdJ = (J.conj().T @ J).tocsr()
        L = L + rate * (
            sp.kron(J.conj(), J) - 0.5 * sp.kron(eye, JdJ) - 0.5 * sp.kron(JdJ.T, eye)
        )
    return L.tocsc()


def _check_cutoffs(cutoffs, hamiltonian_spec):
    if len(cutoffs) != 2 or min(cutoffs) < 2:
        raise CutoffError(f"need two cutoffs >= 2, got {tuple(cutoffs)}")
    for coeff, mono in hamiltonian_spec:
        if coeff == 0:
            continue
        for mode, n in zip("bc", cutoffs):
            # a product of k lowering (or raising) operators vanishes identically below k + 1 levels
            degree = max(mono.count(mode), mono.count(mode + "d"))
            if degree >= n:
                raise CutoffError(
                    f"cutoff {n} for mode {mode} cannot represent term {mono} (degree {degree})"
                )


def build_liouvillian(
    params: EffectiveParams | TransformedParams,
    p: PhysicalParams,
    cutoffs: Sequence[int] = (DEFAULT_CUTOFF, DEFAULT_CUTOFF),
) -> FockModel:
    """Master equation in the lab frame (EffectiveParams) or squeezed frame (TransformedParams)."""
    cutoffs = tuple(int(n) for n in cutoffs)
    if isinstance(params, TransformedParams):
        hspec = transformed_hamiltonian_spec(params)
    else:
        hspec = effective_hamiltonian_spec(params)
    _check_cutoffs(cutoffs, hspec)
    dspec = _dissipators(params, p)
    L = liouvillian(hspec, dspec, cutoffs)
    return FockModel(cutoffs, hspec, dspec, L)


class _SylvesterInverse:
    """Applies the inverse of rho -> K rho + rho K^dag.

    With a well-conditioned eigenbasis of K the solve is elementwise division
    there (matrix products only). Otherwise it falls back to the Schur form
    and LAPACK trsyl, which is robust but several times slower.
    """

    MAX_EIGVEC_COND = 1e6

    def __init__(self, K: np.ndarray):
        lam, V = sla.eig(K)
        if np.all(np.isfinite(V)) and np.linalg.cond(V) <= self.MAX_EIGVEC_COND:
            self.V = V
            self.Vi = np.linalg.inv(V)
            den = lam[:, None] + lam.conj()[None, :]
            # a dark state (e.g. vacuum at zero temperature) gives a zero
            # denominator; perturb it as trsyl would, the outer GMRES fixes up
            floor = np.finfo(float).eps * np.abs(den).max()
            self.den = np.where(np.abs(den) < floor, floor, den)
            self.T = None
        else:
            self.T, self.U = sla.schur(K, output="complex")
            self.Uh = self.U.conj().T

    def __call__(self, R: np.ndarray) -> np.ndarray:
        if self.T is None:
            return self.V @ ((self.Vi @ R @ self.Vi.conj().T) / self.den) @ self.V.conj().T
        Rt = self.Uh @ R @ self.U
        X, scale, info = ztrsyl(self.T, self.T, Rt, trana="N", tranb="C")
        if info < 0:
            raise DegenerateSteadyStateError(f"trsyl failed with info={info}")
        return self.U @ (X / scale) @ self.Uh


def _decays_to_vacuum(m: FockModel) -> bool:
    """Both modes have a lowering jump, so |0,0> is reachable from every state.

    That makes the steady state unique without any spectral check.
    """
    lowered = {mono[0] for rate, mono in m.dissipator_spec if rate > 0 and len(mono) == 1}
    return {"b", "c"} <= lowered


def _steady_state_vector(m: FockModel, rtol: float = 1e-12) -> np.ndarray:
    """Solve L(rho) = 0 with Tr rho = 1.

    The trace condition enters as a rank-one term, L(x) + w Tr(x) = w, which
    is nonsingular whenever the steady state is unique (Tr w != 0 while the
    range of L is traceless). GMRES runs on this system directly, so the
    residual it controls is the Liouvillian residual, right-preconditioned by
    the inverse of the no-jump part rho -> K rho + rho K^dag with
    K = -iH - sum_k J_k^dag J_k / 2.
    """
    dim = m.dim
    ops = mode_operators(m.cutoffs)
    K = np.zeros((dim, dim), dtype=complex)
    for coeff, mono in m.hamiltonian_spec:
        if coeff != 0:
            K -= 1j * coeff * _product(ops, mono, dim).toarray()
    for rate, mono in m.dissipator_spec:
        if rate != 0:
            J = _product(ops, mono, dim)
            K -= 0.5 * rate * (J.conj().T @ J).toarray()
    try:
        s_inv = _SylvesterInverse(K)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise DegenerateSteadyStateError(f"Schur decomposition failed: {exc}") from exc

    L = m.liouvillian
    diag = np.arange(dim) * (dim + 1)
    w = np.zeros(dim * dim, dtype=complex)
    w[0] = max(r for r, _ in m.dissipator_spec)

    def precondition(y):
        return s_inv(y.reshape(dim, dim, order="F")).reshape(-1, order="F")

    def apply(y):
        x = precondition(y)
        return L @ x + w * x[diag].sum()

    op = LinearOperator((dim * dim, dim * dim), matvec=apply, dtype=complex)
    y, info = gmres(op, w, rtol=rtol, atol=0.0, restart=100, maxiter=20)
    if info < 0:
        raise DegenerateSteadyStateError(f"GMRES breakdown (info={info})")
    if info > 0:
        raise DegenerateSteadyStateError(
            f"GMRES did not reach rtol={rtol:g} in {info} iterations; "
            "steady state may not be unique"
        )
    x = precondition(y)
    if not _decays_to_vacuum(m):
        # without a decay channel on every mode the kernel of L may be larger
        # than one; the augmented system is then singular and a generic
        # right-hand side has no solution
        r = np.random.default_rng(0).normal(size=dim * dim).astype(complex)
        _, info = gmres(op, r, rtol=1e-8, atol=0.0, restart=100, maxiter=20)
        if info != 0:
            raise DegenerateSteadyStateError("steady state is not unique (singular Liouvillian kernel)")
    if not np.all(np.isfinite(x)):
        raise DegenerateSteadyStateError("steady-state solve produced non-finite values")
    return x.reshape(dim, dim, order="F")


def tail_population(rho: np.ndarray, cutoffs: Sequence[int]) -> float:
    """Largest reduced population in the top two Fock levels of either mode.

    Two levels, not one: two-phonon terms make squeezed states parity-selective,
    so the topmost level alone can be empty while the one below is not.
    """
    nb, nc = cutoffs
    pops = np.real(np.diag(rho)).reshape(nb, nc)
    pb = pops.sum(axis=1)
    pc = pops.sum(axis=0)
    return float(max(pb[-2:].max(), pc[-2:].max()))


def solve_steady(m: FockModel, tail_threshold: float = TAIL_THRESHOLD) -> FockModel:
    rho = _steady_state_vector(m)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    notes = []
    evals = np.linalg.eigvalsh(rho)
    if evals.min() < -1e-8:
        notes.append(f"steady state has negative eigenvalue {evals.min():.3e}")
    tail = tail_population(rho, m.cutoffs)
    if tail > tail_threshold:
        notes.append(f"tail population {tail:.3e} above {tail_threshold:g}; raise cutoffs")
    return replace(m, steady_rho=rho, tail_population=tail, warnings=tuple(notes))


def liouvillian_residual(m: FockModel) -> float:
    """||L(rho_ss)|| relative to the largest dissipator rate."""
    vec = m.steady_rho.reshape(-1, order="F")
    scale = max(r for r, _ in m.dissipator_spec)
    return float(np.linalg.norm(m.liouvillian @ vec) / scale)


def check_physical(m: FockModel) -> list[str]:
    rho = m.steady_rho
    problems = []
    if np.abs(rho - rho.conj().T).max() > 1e-10:
        problems.append("rho not Hermitian")
    if abs(np.trace(rho) - 1) > 1e-10:
        problems.append("trace not 1")
    if np.linalg.eigvalsh(rho).min() < -1e-8:
        problems.append("rho not positive semidefinite")
    if liouvillian_residual(m) > 1e-8:
        problems.append("Liouvillian residual too large")
    return problems


@dataclass(frozen=True)
class Observables:
    n_b: float
    n_c: float
    mean_x: float
    var_x: float
    var_y: float


def observables(m: FockModel) -> Observables:
    if m.steady_rho is None:
        raise ValueError("model has not been solved")
    rho = m.steady_rho
    ops = mode_operators(m.cutoffs)
    b, bd = ops["b"], ops["bd"]
    X = (b + bd).toarray()
    Y = (1j * (bd - b)).toarray()

    def ev(op):
        return np.trace(rho @ op)

    mx = ev(X).real
    my = ev(Y).real
    return Observables(
        n_b=ev((bd @ b).toarray()).real,
        n_c=ev((ops["cd"] @ ops["c"]).toarray()).real,
        mean_x=mx,
        var_x=ev(X @ X).real - mx**2,
        var_y=ev(Y @ Y).real - my**2,
    )


def populations_csv(m: FockModel) -> str:
    nb, nc = m.cutoffs
    pops = np.real(np.diag(m.steady_rho)).reshape(nb, nc)
    lines = ["n,p_mechanical,p_atomic"]
    for n in range(max(nb, nc)):
        pb = pops.sum(axis=1)[n] if n < nb else 0.0
        pc = pops.sum(axis=0)[n] if n < nc else 0.0
        lines.append(f"{n},{pb:.12g},{pc:.12g}")
    return "\n".join(lines) + "\n"


def solve_adaptive(
    params: EffectiveParams | TransformedParams,
    p: PhysicalParams,
    cutoffs: Sequence[int] = (DEFAULT_CUTOFF, DEFAULT_CUTOFF),
    tail_threshold: float = TAIL_THRESHOLD,
    max_cutoff: int = MAX_CUTOFF,
    max_states: int = MAX_STATES,
) -> FockModel:
    """Grow the cutoff of any mode whose tail population is too large.

    Growth is by doubling, capped at ``max_cutoff`` per mode and ``max_states``
    product states. If the cap is reached first the last model is returned with
    a warning attached.
    """
    nb, nc = (int(n) for n in cutoffs)
    while True:
        m = solve_steady(build_liouvillian(params, p, (nb, nc)), tail_threshold)
        if m.tail_population <= tail_threshold:
            return m
        pops = np.real(np.diag(m.steady_rho)).reshape(nb, nc)
        grow_b = pops.sum(axis=1)[-2:].max() > tail_threshold
        grow_c = pops.sum(axis=0)[-2:].max() > tail_threshold
        new_b = min(2 * nb, max_cutoff) if grow_b else nb
        new_c = min(2 * nc, max_cutoff) if grow_c else nc
        if new_b * new_c > max_states:
            # clamp the growing mode(s) to the state budget
            if grow_b and not grow_c:
                new_b = max_states // new_c
            elif grow_c and not grow_b:
                new_c = max_states // new_b
            else:
                scale = math.sqrt(max_states / (new_b * new_c))
                new_b, new_c = int(new_b * scale), int(new_c * scale)
            new_b, new_c = max(new_b, nb), max(new_c, nc)
        if (new_b, new_c) == (nb, nc):
            msg = (
                f"cutoff cap reached at {(nb, nc)} with tail population "
                f"{m.tail_population:.3e}"
            )
            warnings.warn(msg, CutoffWarning, stacklevel=2)
            return replace(m, warnings=m.warnings + (msg,))
        nb, nc = new_b, new_c


def thermal_variance(n: float) -> float:
    return 2 * n + 1


def squeezed_frame_variance(m: FockModel, t: TransformedParams) -> float:
    """Lab-frame <dX^2> estimate from the squeezed-frame phonon number."""
    return (2 * observables(m).n_b + 1) * math.exp(-2 * t.zeta)
