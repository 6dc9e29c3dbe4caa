"""Compilation of Majorana-basis rotations into nearest-neighbor circuits.

A quasiparticle transform corresponds to a special orthogonal R acting on
extended Majorana indices (A-type 0..M-1, then B-type M..2M-1). This module
parametrizes R by a fixed brickwork of two-Majorana rotations
exp(theta g_a g_b), recovers the angles by Riemannian trace-fidelity
maximization, and emits the matching nearest-neighbor gate sequence. The
slot layout has exactly dim SO(2M) = 2M^2 - M angles, so generic rotations
are reachable; angle recovery is verified by the trace fidelity
Phi = tr(R_target^T R(Theta)) / 2M.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .circuits import Gate, GateSequence
from .errors import DecompositionError
from .ghf import vacuum_covariance

# time order of the four two-mode rotations within one brickwork slot
_PAIR_KINDS = ("AA", "BB", "AB", "BA")


def ubog_cycles(num_modes: int) -> int:
    return (num_modes + 1) // 2


def ubog_angle_count(num_modes: int) -> int:
    """Free angles of the rotation brickwork: dim SO(2M) = 2M^2 - M."""
    m = num_modes
    return 2 * m * m - m


def ubog_two_qubit_count(num_modes: int) -> int:
    m = num_modes
    return 2 * m * (m - 1)


def ubog_depth_formula(num_modes: int) -> int:
    """Layer count of the full brickwork: one local layer plus 8 per cycle.

    Counts both sublattice blocks of every cycle even when a block holds no
    gates (M = 2 has no odd-sublattice pairs; odd M drops one block), so the
    structural depth of the emitted sequence can be smaller. Both numbers
    are exposed: this formula here, the actual packing via
    GateSequence.depth.
    """
    return 8 * ubog_cycles(num_modes) + 1


def slater_depth_formula(num_modes: int) -> int:
    """Formula depth when the AA and BB sublayers are dropped."""
    return 4 * ubog_cycles(num_modes) + 1


def default_mask(num_modes: int) -> np.ndarray:
    """Active brickwork slots, shape (cycles, M-1).

    Even M keeps every slot. Odd M drops the even-sublattice block (odd pair
    index) of the first cycle, which brings the angle count down to exactly
    dim SO(2M) while preserving strict block alternation and hence full
    coverage; dropping a block at the tail instead leaves two adjacent
    same-sublattice blocks and loses coverage.
    """
    m = num_modes
    k = ubog_cycles(m)
    mask = np.ones((k, max(m - 1, 0)), dtype=bool)
    if m % 2 == 1 and m > 1:
        mask[0, 1::2] = False
    return mask


@dataclass(frozen=True, eq=False)
class BogAngleSet:
    """Angles of the brickwork rotation circuit.

    `local` holds the M single-mode angles applied first; `pair[k, j, n]` is
    the angle of rotation kind n (time order AA, BB, AB, BA) on mode pair
    (j, j+1) in cycle k. `mask[k, j]` marks active slots; masked-out entries
    must be zero. `number_conserving` asserts all AA/BB angles vanish so the
    emitter may drop those sublayers.
    """

    num_modes: int
    local: np.ndarray
    pair: np.ndarray
    mask: np.ndarray = field(default=None)  # type: ignore[assignment]
    number_conserving: bool = False

    def __post_init__(self):
        m = self.num_modes
        k = ubog_cycles(m)
        local = np.array(self.local, dtype=float)
        pair = np.array(self.pair, dtype=float)
        mask = self.mask
        mask = default_mask(m) if mask is None else np.array(mask, dtype=bool)
        if local.shape != (m,):
            raise ValueError("local angles must have shape (M,)")
        if pair.shape != (k, max(m - 1, 0), 4):
            raise ValueError("pair angles must have shape (cycles, M-1, 4)")
        if mask.shape != (k, max(m - 1, 0)):
            raise ValueError("mask must have shape (cycles, M-1)")
        if pair[~mask].size and np.abs(pair[~mask]).max() > 0:
            raise ValueError("masked-out slots must hold zero angles")
        if self.number_conserving and pair.size and np.abs(pair[..., :2]).max() > 0:
            raise ValueError("number-conserving angle sets need zero AA/BB angles")
        for a in (local, pair, mask):
            a.setflags(write=False)
        object.__setattr__(self, "local", local)
        object.__setattr__(self, "pair", pair)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def zeros(cls, num_modes: int, number_conserving: bool = False) -> "BogAngleSet":
        m = num_modes
        k = ubog_cycles(m)
        return cls(
            m,
            np.zeros(m),
            np.zeros((k, max(m - 1, 0), 4)),
            default_mask(m),
            number_conserving,
        )

    @property
    def count(self) -> int:
        """Number of active slots (M locals + 4 per active pair slot)."""
        return self.num_modes + 4 * int(self.mask.sum())


# ---------------------------------------------------------------------------
# Slot plan: the single source of truth for slot ordering and Majorana axes

def _slot_axes(kind: str, j: int, num_modes: int) -> Tuple[int, int]:
    m = num_modes
    if kind == "AA":
        return j, j + 1
    if kind == "BB":
        return m + j, m + j + 1
    if kind == "AB":
        return j, m + j + 1
    if kind == "BA":
        return m + j, j + 1
    raise ValueError(kind)


@dataclass(frozen=True)
class _Slot:
    a: int  # extended Majorana row
    b: int  # extended Majorana row, rotation plane (a, b)
    local_index: Optional[int]
    pair_index: Optional[Tuple[int, int, int]]  # (cycle, j, kind)


def ubog_plan(
    num_modes: int,
    mask: Optional[np.ndarray] = None,
    include_non_conserving: bool = True,
) -> List[_Slot]:
    """Brickwork slots in time order.

    Local rotations first, then per cycle the even-sublattice block (odd
    pair index) followed by the odd-sublattice block (even pair index), four
    rotation kinds per pair. With `include_non_conserving=False` the AA and
    BB kinds are omitted (the number-conserving subgroup).
    """
    m = num_modes
    mask = default_mask(m) if mask is None else np.asarray(mask, dtype=bool)
    slots = [
        _Slot(a=j, b=m + j, local_index=j, pair_index=None) for j in range(m)
    ]
    kinds = range(4) if include_non_conserving else range(2, 4)
    for k in range(ubog_cycles(m)):
        for block in (range(1, m - 1, 2), range(0, m - 1, 2)):
            for j in block:
                if not mask[k, j]:
                    continue
                for n in kinds:
                    a, b = _slot_axes(_PAIR_KINDS[n], j, m)
                    slots.append(
                        _Slot(a=a, b=b, local_index=None, pair_index=(k, j, n))
                    )
    return slots


def _angles_from_set(angles: BogAngleSet, plan: Sequence[_Slot]) -> np.ndarray:
    out = np.empty(len(plan))
    for i, s in enumerate(plan):
        if s.local_index is not None:
            out[i] = angles.local[s.local_index]
        else:
            out[i] = angles.pair[s.pair_index]
    return out


def _set_from_angles(
    num_modes: int,
    plan: Sequence[_Slot],
    theta: np.ndarray,
    mask: np.ndarray,
    number_conserving: bool,
) -> BogAngleSet:
    m = num_modes
    local = np.zeros(m)
    pair = np.zeros((ubog_cycles(m), max(m - 1, 0), 4))
    for s, t in zip(plan, theta):
        if s.local_index is not None:
            local[s.local_index] = t
        else:
            pair[s.pair_index] = t
    return BogAngleSet(m, local, pair, mask, number_conserving)


# ---------------------------------------------------------------------------
# Reconstruction and trace-fidelity gradient

def _apply_givens_left(r: np.ndarray, a: int, b: int, theta: float) -> None:
    # rows (a, b) <- [[cos 2t, sin 2t], [-sin 2t, cos 2t]] @ rows (a, b)
    c = math.cos(2.0 * theta)
    s = math.sin(2.0 * theta)
    ra = r[a].copy()
    r[a] = c * ra + s * r[b]
    r[b] = -s * ra + c * r[b]


def reconstruct(angles: BogAngleSet) -> np.ndarray:
    """Rotation realized by the brickwork: product of slot Givens rotations.

    Each slot multiplies exp(2 theta h_ab) from the left in time order, so
    the result matches the conjugation action of the emitted circuit,
    C g_j C^dag = sum_k R[k, j] g_k.
    """
    m = angles.num_modes
    r = np.eye(2 * m)
    plan = ubog_plan(m, angles.mask)
    for s, t in zip(plan, _angles_from_set(angles, plan)):
        if t != 0.0:
            _apply_givens_left(r, s.a, s.b, t)
    return r


def _fidelity_and_grad(
    theta: np.ndarray, plan: Sequence[_Slot], r_target: np.ndarray
) -> Tuple[float, np.ndarray]:
    """Trace fidelity Phi = tr(R_t^T R(theta)) / 2M and its gradient.

    The gradient uses the similarity recurrence K -> F^T K F over factors in
    reverse time order: with K_i the cyclic rollup of the slot product, the
    derivative at plane (a, b) is (K[b, a] - K[a, b]) / M.
    """
    dim = r_target.shape[0]
    r = np.eye(dim)
    for s, t in zip(plan, theta):
        _apply_givens_left(r, s.a, s.b, t)
    k_mat = r @ r_target.T
    phi = float(np.trace(k_mat)) / dim
    grad = np.empty(len(plan))
    for i in range(len(plan) - 1, -1, -1):
        s = plan[i]
        a, b = s.a, s.b
        grad[i] = 2.0 * (k_mat[b, a] - k_mat[a, b]) / dim
        # roll the factor F = exp(2 theta h) through: K <- F^T K F
        c = math.cos(2.0 * theta[i])
        sn = math.sin(2.0 * theta[i])
        ka = k_mat[a].copy()
        k_mat[a] = c * ka - sn * k_mat[b]
        k_mat[b] = sn * ka + c * k_mat[b]
        ca = k_mat[:, a].copy()
        k_mat[:, a] = c * ca - sn * k_mat[:, b]
        k_mat[:, b] = sn * ca + c * k_mat[:, b]
    return phi, grad


def _check_rotation(r: np.ndarray) -> int:
    r = np.asarray(r, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1] or r.shape[0] % 2:
        raise ValueError("rotation must be square of even dimension")
    dim = r.shape[0]
    if np.abs(r @ r.T - np.eye(dim)).max() > 1e-8:
        raise ValueError("matrix is not orthogonal")
    if np.linalg.det(r) < 0:
        raise ValueError("improper rotation (det = -1) is not compilable")
    return dim // 2


def is_number_conserving_rotation(r: np.ndarray, atol: float = 1e-10) -> bool:
    """True when R commutes with the vacuum complex structure.

    Rotations induced by particle-number-conserving transforms (V = 0)
    commute with Gamma_vac; for them the AA/BB sublayers are redundant.
    """
    m = np.asarray(r).shape[0] // 2
    j = vacuum_covariance(m).gamma
    return float(np.abs(r @ j - j @ r).max()) <= atol


def decompose(
    r_target: np.ndarray,
    restarts: int = 16,
    seed: int = 0,
    atol: float = 1e-8,
) -> BogAngleSet:
    """Recover brickwork angles realizing a special orthogonal target.

    Maximizes the trace fidelity with L-BFGS from a zero start plus random
    restarts. Number-conserving targets are first attempted on the reduced
    slot set (AA/BB frozen at zero); that set only reaches a thin subgroup
    (head-of-circuit locals cannot manufacture the missing hopping
    quadrature), so on a stall the full set takes over and the
    number_conserving flag stays off. Raises DecompositionError when the
    best fidelity stays below 1 - atol; a fidelity in
    (1 - atol, 1 - 1e-10] only warns.
    """
    r_target = np.asarray(r_target, dtype=float)
    m = _check_rotation(r_target)
    mask = default_mask(m)
    attempts = []
    if is_number_conserving_rotation(r_target):
        attempts.append(True)
    attempts.append(False)

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    best_phi = -np.inf
    best = None
    for conserving in attempts:
        plan = ubog_plan(m, mask, include_non_conserving=not conserving)
        n = len(plan)
        n_trials = min(4, restarts) + 1 if conserving else restarts + 1
        for trial in range(n_trials):
            if trial == 0:
                x0 = np.zeros(n)
            else:
                x0 = rng.uniform(-np.pi / 2, np.pi / 2, size=n)
            res = minimize(
                lambda x: _neg_fid(x, plan, r_target),
                x0,
                jac=True,
                method="L-BFGS-B",
                options={"maxiter": 500, "ftol": 1e-16, "gtol": 1e-12},
            )
            phi = 1.0 - res.fun
            if phi > best_phi:
                best_phi = phi
                best = _set_from_angles(m, plan, res.x, mask, conserving)
            if best_phi >= 1.0 - 1e-11:
                break
        if best_phi >= 1.0 - 1e-11:
            break

    if best_phi < 1.0 - atol:
        raise DecompositionError(
            f"angle recovery stalled at fidelity {best_phi:.12f}",
            best_fidelity=best_phi,
        )
    if best_phi < 1.0 - 1e-10:
        warnings.warn(
            f"angle recovery fidelity {best_phi:.12f} below 1 - 1e-10",
            stacklevel=2,
        )
    return best


def _neg_fid(x, plan, r_target):
    phi, grad = _fidelity_and_grad(x, plan, r_target)
    return 1.0 - phi, -grad


# ---------------------------------------------------------------------------
# Gate emission

# rotation kind -> (gate kind, angle sign) for exp(theta g_a g_b)
_EMIT = {
    "AA": ("ryx_minus", -1.0),
    "BB": ("rxy", -1.0),
    "AB": ("ryy_minus", -1.0),
    "BA": ("rxx", -1.0),
}


def emit_ubog(angles: BogAngleSet) -> GateSequence:
    """Nearest-neighbor gate sequence realizing the brickwork rotation.

    Layer structure: one layer of local z rotations, then per cycle and
    sublattice block four layers (one per rotation kind) of parallel
    two-qubit gates. Zero-angle gates are kept so the structure is
    independent of the angle values; for number-conserving angle sets the
    AA/BB layers are dropped entirely.
    """
    m = angles.num_modes
    layers = [
        tuple(
            Gate("rz", (j,), float(angles.local[j]), tag=("ubog_z", j))
            for j in range(m)
        )
    ]
    kinds = range(2, 4) if angles.number_conserving else range(4)
    for k in range(ubog_cycles(m)):
        for block in (range(1, m - 1, 2), range(0, m - 1, 2)):
            js = [j for j in block if angles.mask[k, j]]
            if not js:
                continue
            for n in kinds:
                gate_kind, sign = _EMIT[_PAIR_KINDS[n]]
                layers.append(
                    tuple(
                        Gate(
                            gate_kind,
                            (j, j + 1),
                            sign * float(angles.pair[k, j, n]),
                            tag=("ubog", k, j, n),
                        )
                        for j in js
                    )
                )
    return GateSequence(m, tuple(layers))
