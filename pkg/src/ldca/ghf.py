"""Generalized Hartree-Fock over Majorana covariance matrices.

A Gaussian state is represented by its real antisymmetric covariance matrix
Gamma[k,l] = (i/2) tr(rho [g_k, g_l]) over extended Majorana indices. Pure
states satisfy Gamma^2 = -I. The mean-field energy of a quartic Hamiltonian
is a closed polynomial in Gamma (Wick's theorem), minimized here by
imaginary-time descent followed by self-consistent fixed-point refinement,
and the optimal state is converted to a quasiparticle transform for circuit
compilation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh, expm, qr, schur

from .errors import ThreeBodyUnsupported
from .fermion_ops import MajoranaHamiltonian

_ATOL = 1e-10


def _antisym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a - a.T)


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Real antisymmetric covariance matrix of a fermionic Gaussian state."""

    num_modes: int
    gamma: np.ndarray

    def __post_init__(self):
        m2 = 2 * self.num_modes
        g = np.array(self.gamma, dtype=float)
        if g.shape != (m2, m2):
            raise ValueError("covariance must be (2M, 2M)")
        if np.abs(g + g.T).max(initial=0.0) > 1e-8:
            raise ValueError("covariance must be antisymmetric")
        g = _antisym(g)
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    def purity_defect(self) -> float:
        """Max deviation of Gamma^2 from -I; zero for pure states."""
        m2 = 2 * self.num_modes
        return float(np.abs(self.gamma @ self.gamma + np.eye(m2)).max())

    def is_pure(self, atol: float = 1e-8) -> bool:
        return self.purity_defect() <= atol

    def to_json_dict(self) -> dict:
        return {
            "num_modes": self.num_modes,
            "gamma": [[float(x) for x in row] for row in self.gamma],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "CovarianceMatrix":
        return cls(int(data["num_modes"]), np.array(data["gamma"], dtype=float))


def vacuum_covariance(num_modes: int) -> CovarianceMatrix:
    """Covariance of the Fock vacuum: Gamma = [[0, I], [-I, 0]]."""
    m = num_modes
    g = np.zeros((2 * m, 2 * m))
    g[:m, m:] = np.eye(m)
    g[m:, :m] = -np.eye(m)
    return CovarianceMatrix(m, g)


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random special orthogonal matrix via QR with det fixed to +1."""
    a = rng.normal(size=(n, n))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_pure_covariance(num_modes: int, rng: np.random.Generator) -> CovarianceMatrix:
    """Random pure even-parity Gaussian state: SO conjugation of the vacuum."""
    o = random_orthogonal(2 * num_modes, rng)
    g = o @ vacuum_covariance(num_modes).gamma @ o.T
    return CovarianceMatrix(num_modes, g)


# ---------------------------------------------------------------------------
# Pfaffian and Wick contractions

def pfaffian(a: np.ndarray) -> float:
    """Pfaffian of a real antisymmetric matrix.

    Parlett-Reid skew tridiagonalization with partial pivoting; the input is
    antisymmetrized internally to absorb roundoff. Odd dimensions are
    rejected.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if n % 2:
        raise ValueError("Pfaffian needs even dimension")
    if n == 0:
        return 1.0
    scale = max(1.0, np.abs(a).max())
    if np.abs(a + a.T).max() > 1e-8 * scale:
        raise ValueError("matrix must be antisymmetric")
    a = _antisym(a)
    pf = 1.0
    for k in range(0, n - 2, 2):
        col = np.abs(a[k + 1 :, k])
        kp = k + 1 + int(np.argmax(col))
        if col[kp - k - 1] == 0.0:
            return 0.0
        if kp != k + 1:
            a[[k + 1, kp], :] = a[[kp, k + 1], :]
            a[:, [k + 1, kp]] = a[:, [kp, k + 1]]
            pf = -pf
        pivot = a[k + 1, k]
        pf *= -pivot  # Pf convention pairs (k, k+1) via a[k, k+1] = -a[k+1, k]
        tau = a[k + 2 :, k] / pivot
        w = a[k + 1, k + 2 :]
        a[k + 2 :, k + 2 :] += np.outer(w, tau) - np.outer(tau, w)
    pf *= a[n - 2, n - 1]
    return float(pf)


def wick_expectation(gamma: CovarianceMatrix, indices: Sequence[int]) -> complex:
    """Trace tr(rho g_{i1} ... g_{i2p}) for strictly increasing indices.

    By Wick's theorem this equals i^{-p} Pf(Gamma restricted to the chosen
    rows and columns). Odd-length monomials vanish on even-parity Gaussian
    states. The result is complex (alternating real/imaginary with p).
    """
    idx = [int(i) for i in indices]
    m2 = 2 * gamma.num_modes
    if any(not 0 <= i < m2 for i in idx):
        raise ValueError("Majorana index out of range")
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise ValueError("indices must be strictly increasing")
    if len(idx) % 2:
        return 0.0 + 0.0j
    p = len(idx) // 2
    if p == 0:
        return 1.0 + 0.0j
    sub = gamma.gamma[np.ix_(idx, idx)]
    return (-1j) ** p * pfaffian(sub)


# ---------------------------------------------------------------------------
# Mean-field energy functional

def _require_mean_field(majh: MajoranaHamiltonian) -> None:
    if majh.has_sextic:
        raise ThreeBodyUnsupported(
            "mean-field routines do not contract sextic Majorana terms"
        )


def ghf_energy(majh: MajoranaHamiltonian, cov: CovarianceMatrix) -> float:
    """Gaussian-state energy: offset + sum T.Gamma + 3 sum trB(V Gamma).Gamma."""
    _require_mean_field(majh)
    g = cov.gamma
    e = majh.offset + float(np.sum(majh.quadratic * g))
    if majh.quartic:
        e += 3.0 * float(np.sum(majh.quartic_trace(g) * g))
    return e


def effective_hamiltonian(
    majh: MajoranaHamiltonian, cov: CovarianceMatrix
) -> np.ndarray:
    """Quadratic mean-field kernel h(Gamma) = T + 6 trB(V Gamma)."""
    _require_mean_field(majh)
    h = majh.quadratic.copy()
    if majh.quartic:
        h = h + 6.0 * majh.quartic_trace(cov.gamma)
    return _antisym(h)


def ghf_residual(majh: MajoranaHamiltonian, cov: CovarianceMatrix) -> float:
    """Frobenius norm of [h(Gamma), Gamma]; zero at stationary points."""
    h = effective_hamiltonian(majh, cov)
    g = cov.gamma
    return float(np.linalg.norm(h @ g - g @ h))


def imaginary_time_evolve(
    majh: MajoranaHamiltonian,
    cov: CovarianceMatrix,
    step: float = 0.05,
    max_iters: int = 20000,
    tol: float = 1e-9,
) -> CovarianceMatrix:
    """Energy descent Gamma <- O Gamma O^T with O = exp(2 dt [h, Gamma]).

    The flow direction lowers the energy to first order (dE = -2 dt |[h,G]|^2)
    and orthogonal conjugation preserves purity exactly. The step is halved
    whenever a move would raise the energy; iteration stops when the
    commutator residual drops below `tol` or after `max_iters` accepted or
    rejected moves.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if not cov.is_pure(1e-8):
        raise ValueError("imaginary-time evolution expects a pure covariance")
    g = cov.gamma.copy()
    m = cov.num_modes
    energy = ghf_energy(majh, CovarianceMatrix(m, g))
    dt = step
    for _ in range(max_iters):
        h = effective_hamiltonian(majh, CovarianceMatrix(m, g))
        k = h @ g - g @ h
        if np.linalg.norm(k) < tol:
            break
        o = expm((2.0 * dt) * k)
        g_new = _antisym(o @ g @ o.T)
        e_new = ghf_energy(majh, CovarianceMatrix(m, g_new))
        if e_new > energy + 1e-12:
            dt *= 0.5
            if dt < 1e-14:
                break  # stalled at numerical floor; residual reported by caller
            continue
        g = g_new
        energy = e_new
    return CovarianceMatrix(m, g)


def _purity_snap(gamma: np.ndarray) -> np.ndarray:
    """Project an antisymmetric matrix onto the nearest-by-structure pure one.

    Real Schur form of an antisymmetric matrix is block diagonal with
    2x2 blocks [[0, c], [-c, 0]]; snapping |c| to 1 (keeping the sign) and
    pairing leftover near-zero coordinates as fresh +1 blocks yields
    Gamma'^2 = -I in the same rotation frame.
    """
    t, z = schur(gamma, output="real")
    n = gamma.shape[0]
    tn = np.zeros_like(t)
    zeros = []
    i = 0
    while i < n:
        if i + 1 < n and abs(t[i, i + 1]) > 1e-8:
            c = 1.0 if t[i, i + 1] > 0 else -1.0
            tn[i, i + 1] = c
            tn[i + 1, i] = -c
            i += 2
        else:
            zeros.append(i)
            i += 1
    # degenerate zero modes: occupation is a free choice, take the +1 pairing
    for a, b in zip(zeros[0::2], zeros[1::2]):
        tn[a, b] = 1.0
        tn[b, a] = -1.0
    return _antisym(z @ tn @ z.T)


def fixed_point_refine(
    majh: MajoranaHamiltonian,
    cov: CovarianceMatrix,
    beta_schedule: Sequence[Optional[float]] = (1.0, 10.0, 100.0, None),
    max_inner: int = 200,
    tol: float = 1e-12,
) -> CovarianceMatrix:
    """Self-consistent thermal iteration sharpened to the ground state.

    For each inverse temperature beta the map is Gamma <- i tanh(2 beta i h)
    evaluated by eigendecomposition of the Hermitian matrix i h(Gamma);
    beta = None takes the sign limit. Thermal iterates are impure, so each
    stage's result is purified by spectral snapping and kept only if its
    energy improves on the best pure candidate seen so far (the input
    included). The returned covariance is pure with energy <= the input's.
    """
    _require_mean_field(majh)
    if not cov.is_pure(1e-8):
        raise ValueError("fixed-point refinement expects a pure covariance")
    m = cov.num_modes
    best = cov
    best_e = ghf_energy(majh, cov)
    g = cov.gamma.copy()
    for beta in beta_schedule:
        for _ in range(max_inner):
            h = effective_hamiltonian(majh, CovarianceMatrix(m, g))
            w, q = eigh(1j * h)
            if beta is None:
                f = np.sign(w)
                f[np.abs(w) < 1e-12] = 0.0
            else:
                f = np.tanh(2.0 * beta * w)
            g_new = _antisym(np.real(1j * (q * f) @ q.conj().T))
            if np.linalg.norm(g_new - g) < tol:
                g = g_new
                break
            g = g_new
        snapped = CovarianceMatrix(m, _purity_snap(g))
        e = ghf_energy(majh, snapped)
        if e < best_e - 1e-14:
            best, best_e = snapped, e
    return best


# ---------------------------------------------------------------------------
# Quasiparticle transforms

@dataclass(frozen=True, eq=False)
class BogoliubovTransform:
    """Quasiparticle transform b_j = sum_p conj(U[p,j]) a_p + conj(V[p,j]) adag_p.

    Columns index quasiparticles. Validity requires U^dag U + V^dag V = I and
    U^T V + V^T U = 0 (unitarity of the full particle-hole doubled map).
    """

    num_modes: int
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        m = self.num_modes
        u = np.array(self.u, dtype=np.complex128)
        v = np.array(self.v, dtype=np.complex128)
        if u.shape != (m, m) or v.shape != (m, m):
            raise ValueError("U and V must be (M, M)")
        unit = np.abs(u.conj().T @ u + v.conj().T @ v - np.eye(m)).max()
        pair = np.abs(u.T @ v + v.T @ u).max(initial=0.0)
        if max(unit, pair) > _ATOL * 10:
            raise ValueError(
                f"transform not unitary: residuals {unit:.2e}, {pair:.2e}"
            )
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def identity(cls, num_modes: int) -> "BogoliubovTransform":
        m = num_modes
        return cls(m, np.eye(m, dtype=complex), np.zeros((m, m), dtype=complex))

    def to_json_dict(self) -> dict:
        return {
            "num_modes": self.num_modes,
            "u_re": self.u.real.tolist(),
            "u_im": self.u.imag.tolist(),
            "v_re": self.v.real.tolist(),
            "v_im": self.v.imag.tolist(),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "BogoliubovTransform":
        m = int(data["num_modes"])
        u = np.array(data["u_re"], float) + 1j * np.array(data["u_im"], float)
        v = np.array(data["v_re"], float) + 1j * np.array(data["v_im"], float)
        return cls(m, u, v)


def orthogonal_from_blocks(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Majorana-basis rotation of a quasiparticle transform.

    With the doubled unitary W = [[U, conj(V)], [V, conj(U)]] this is
    R = Omega W^dag Omega^dag / 2, i.e. blockwise
    [[Re(U+V)^T, -Im(U-V)^T], [Im(U+V)^T, Re(U-V)^T]]. Two equivalent
    readings: quasiparticle Majoranas expand as mu_k = sum_l R[k,l] g_l,
    and a circuit with C g_j C^dag = sum_k R[k,j] g_k prepares the
    transform's vacuum as C^dag |vac>, whose covariance is R^T Gvac R.
    """
    return np.block(
        [
            [(u + v).real.T, -(u - v).imag.T],
            [(u + v).imag.T, (u - v).real.T],
        ]
    )


def ensure_even_parity(
    u: np.ndarray, v: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, bool]:
    """Force det R = +1 by a particle-hole swap of the last quasiparticle.

    Odd-parity transforms (det R = -1) are not reachable by the quadratic
    rotation circuits, so the last column is swapped to its conjugate
    creator. The swapped transform prepares the even-parity Gaussian state,
    which differs from the requested odd-parity one by one excitation; a
    warning is emitted.
    """
    r = orthogonal_from_blocks(u, v)
    if np.linalg.det(r) > 0:
        return u, v, False
    warnings.warn(
        "odd-parity transform: swapping the last quasiparticle column to its "
        "particle-hole conjugate; the compiled circuit prepares the "
        "even-parity sector state",
        stacklevel=2,
    )
    u2 = u.copy()
    v2 = v.copy()
    u2[:, -1] = v[:, -1].conj()
    v2[:, -1] = u[:, -1].conj()
    return u2, v2, True


def _canonical_subspace_basis(projector: np.ndarray, rank: int) -> np.ndarray:
    """Deterministic orthonormal basis of a projector's column space.

    Column-pivoted QR fixes the basis; each column's phase is set so its
    largest-magnitude entry is real positive.
    """
    q, _, _ = qr(projector, pivoting=True)
    basis = np.ascontiguousarray(q[:, :rank])
    for j in range(rank):
        col = basis[:, j]
        k = int(np.argmax(np.abs(col)))
        ph = col[k] / abs(col[k])
        basis[:, j] = col * np.conj(ph)
    return basis


def extract_bogoliubov(cov: CovarianceMatrix, atol: float = 1e-7) -> BogoliubovTransform:
    """Quasiparticle transform whose vacuum is the given pure Gaussian state.

    The covariance is rotated to the ladder-operator basis, assembled into
    the generalized one-particle density projector, and the annihilator
    family is read off its kernel. The kernel basis is fixed by pivoted QR
    plus per-column phase canonicalization, and the parity of the resulting
    Majorana rotation is forced to +1.
    """
    if not cov.is_pure(atol):
        raise ValueError(f"covariance impure (defect {cov.purity_defect():.2e})")
    m = cov.num_modes
    eye = np.eye(m)
    omega = np.block([[eye, eye], [1j * eye, -1j * eye]])
    g4 = omega.conj().T @ cov.gamma @ omega.conj() / 4.0
    kappa = 1j * g4[:m, :m]
    rho = 0.5 * eye + 1j * g4[:m, m:]
    dens = np.block(
        [
            [rho, kappa],
            [kappa.conj().T, eye - rho.T],
        ]
    )
    w, vecs = eigh(dens)
    if np.abs(np.minimum(np.abs(w), np.abs(w - 1.0))).max() > 1e-6:
        raise ValueError("density eigenvalues do not cluster at {0, 1}")
    kernel = vecs[:, w < 0.5]
    if kernel.shape[1] != m:
        raise ValueError("annihilator space has wrong dimension")
    basis = _canonical_subspace_basis(kernel @ kernel.conj().T, m)
    u = basis[:m, :]
    v = basis[m:, :]
    u, v, _ = ensure_even_parity(u, v)
    return BogoliubovTransform(m, u, v)


def covariance_from_bogoliubov(bt: BogoliubovTransform) -> CovarianceMatrix:
    """Covariance of the state annihilated by the transform's quasiparticles."""
    r = orthogonal_from_blocks(bt.u, bt.v)
    g = r.T @ vacuum_covariance(bt.num_modes).gamma @ r
    return CovarianceMatrix(bt.num_modes, g)


# ---------------------------------------------------------------------------
# Full solver pipeline

@dataclass(frozen=True)
class GhfResult:
    covariance: CovarianceMatrix
    energy: float
    residual: float
    converged: bool
    restart_index: int
    restarts: int


def solve(
    majh: MajoranaHamiltonian,
    restarts: int = 8,
    seed: int = 0,
    step: float = 0.05,
    max_iters: int = 20000,
    tol: float = 1e-9,
) -> GhfResult:
    """Minimize the Gaussian energy from the vacuum plus random restarts.

    Each start runs imaginary-time descent then fixed-point refinement; the
    lowest-energy pure state wins, ties resolved by restart index.
    """
    _require_mean_field(majh)
    m = majh.num_modes
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    starts = [vacuum_covariance(m)]
    starts += [random_pure_covariance(m, rng) for _ in range(restarts)]
    best_cov = None
    best_e = np.inf
    best_i = -1
    for i, g0 in enumerate(starts):
        g1 = imaginary_time_evolve(majh, g0, step=step, max_iters=max_iters, tol=tol)
        g2 = fixed_point_refine(majh, g1)
        e = ghf_energy(majh, g2)
        if e < best_e - 1e-12:
            best_cov, best_e, best_i = g2, e, i
    res = ghf_residual(majh, best_cov)
    h_scale = max(1.0, float(np.linalg.norm(effective_hamiltonian(majh, best_cov))))
    return GhfResult(
        covariance=best_cov,
        energy=best_e,
        residual=res,
        converged=res <= 1e-6 * h_scale,
        restart_index=best_i,
        restarts=len(starts),
    )
