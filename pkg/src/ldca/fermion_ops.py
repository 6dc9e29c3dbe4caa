"""Second-quantized Hamiltonians and their Majorana and qubit representations.

Conventions used throughout the package:

* Modes are indexed 0..M-1. Qubit p hosts mode p; qubit 0 is the most
  significant bit of a statevector index, so basis index j assigns bit
  (j >> (M-1-p)) & 1 to qubit p.
* An occupied mode is qubit state |0>. The Fock vacuum is therefore the
  all-ones string |1...1> and the fully occupied state is |0...0>.
* Ladder operators carry an alternating phase: with s_p = (-1)^p,
  a^dag_p = s_p Z_0..Z_{p-1} sigma^+_p where sigma^+ = |0><1|. The phase
  keeps nearest-neighbor Majorana products local after the mapping.
* Majorana modes use the extended index k in [0, 2M): k < M is the X-type
  operator of mode k, k >= M the Y-type operator of mode k - M. They satisfy
  {gamma_k, gamma_l} = 2 delta_kl.

Hamiltonians are stored as dense one-body/pairing tables plus sparse
canonically-keyed two- and three-body dictionaries, with key (p,q,r,s)
meaning the monomial adag_p adag_q a_s a_r (p<q, r<s) and key (p,q,r,s,t,u)
meaning adag_p adag_q adag_r a_u a_t a_s (p<q<r, s<t<u).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError

_ATOL = 1e-10
_DROP = 1e-14

Word = Tuple[Tuple[int, str], ...]

# ---------------------------------------------------------------------------
# Pauli algebra

# (axis1, axis2) -> (phase, axis) for single-qubit products, identity omitted
_PAULI_MUL = {
    ("X", "X"): (1.0, None),
    ("Y", "Y"): (1.0, None),
    ("Z", "Z"): (1.0, None),
    ("X", "Y"): (1j, "Z"),
    ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"),
    ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"),
    ("X", "Z"): (-1j, "Y"),
}


def _mul_words(w1: Word, w2: Word) -> Tuple[complex, Word]:
    """Product of two Pauli words (each sorted by qubit)."""
    phase = 1.0 + 0.0j
    out = []
    i = j = 0
    while i < len(w1) and j < len(w2):
        q1, a1 = w1[i]
        q2, a2 = w2[j]
        if q1 < q2:
            out.append(w1[i])
            i += 1
        elif q2 < q1:
            out.append(w2[j])
            j += 1
        else:
            ph, axis = _PAULI_MUL[(a1, a2)]
            phase *= ph
            if axis is not None:
                out.append((q1, axis))
            i += 1
            j += 1
    out.extend(w1[i:])
    out.extend(w2[j:])
    return phase, tuple(out)


def _validate_word(word: Word) -> Word:
    word = tuple((int(q), str(a)) for q, a in word)
    last = -1
    for q, a in word:
        if a not in ("X", "Y", "Z"):
            raise ValueError(f"bad Pauli axis {a!r}")
        if q <= last:
            raise ValueError("word qubits must be strictly increasing")
        last = q
    return word


@dataclass(frozen=True)
class PauliTerm:
    """A single Pauli word with a coefficient."""

    word: Word
    coeff: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "word", _validate_word(self.word))
        object.__setattr__(self, "coeff", complex(self.coeff))


def word_action(word: Word, num_qubits: int) -> Tuple[np.ndarray, np.ndarray]:
    """Dense action of a Pauli word: (P psi)[k] = phase[k] * psi[perm[k]].

    perm is an involution (bit flips on the X/Y support) and phase collects
    the i / -1 factors from Y and Z on the source basis state.
    """
    dim = 1 << num_qubits
    flip = 0
    for q, a in word:
        if not 0 <= q < num_qubits:
            raise ValueError(f"qubit {q} out of range")
        if a in ("X", "Y"):
            flip |= 1 << (num_qubits - 1 - q)
    idx = np.arange(dim, dtype=np.int64)
    perm = idx ^ flip
    phase = np.ones(dim, dtype=np.complex128)
    for q, a in word:
        if a == "X":
            continue
        src_bit = (perm >> (num_qubits - 1 - q)) & 1
        if a == "Z":
            phase *= 1.0 - 2.0 * src_bit
        else:  # Y: |0> -> i|1>, |1> -> -i|0>
            phase *= 1j * (1.0 - 2.0 * src_bit)
    return perm, phase


class QubitOperator:
    """A sum of Pauli words: map word -> complex coefficient.

    Words are tuples of (qubit, axis) sorted by qubit; the empty word is the
    identity. Supports +, -, scalar and operator products, and dense/sparse
    materialization on a fixed qubit count.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping[Word, complex]] = None):
        self.terms: Dict[Word, complex] = {}
        if terms:
            for w, c in terms.items():
                w = _validate_word(w)
                c = complex(c)
                if c:
                    self.terms[w] = self.terms.get(w, 0.0) + c

    @classmethod
    def identity(cls, coeff: complex = 1.0) -> "QubitOperator":
        return cls({(): coeff})

    @classmethod
    def from_term(cls, word: Word, coeff: complex = 1.0) -> "QubitOperator":
        return cls({tuple(word): coeff})

    def num_qubits(self) -> int:
        n = 0
        for w in self.terms:
            if w:
                n = max(n, w[-1][0] + 1)
        return n

    def copy(self) -> "QubitOperator":
        out = QubitOperator()
        out.terms = dict(self.terms)
        return out

    def __add__(self, other) -> "QubitOperator":
        out = self.copy()
        out += other
        return out

    def __iadd__(self, other) -> "QubitOperator":
        if isinstance(other, (int, float, complex)):
            other = QubitOperator.identity(other)
        for w, c in other.terms.items():
            self.terms[w] = self.terms.get(w, 0.0) + c
        return self

    __radd__ = __add__

    def __sub__(self, other) -> "QubitOperator":
        return self + (-1.0) * other

    def __neg__(self) -> "QubitOperator":
        return (-1.0) * self

    def __mul__(self, other) -> "QubitOperator":
        if isinstance(other, (int, float, complex)):
            out = QubitOperator()
            out.terms = {w: c * other for w, c in self.terms.items()}
            return out
        out = QubitOperator()
        acc = out.terms
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                ph, w = _mul_words(w1, w2)
                acc[w] = acc.get(w, 0.0) + c1 * c2 * ph
        return out

    def __rmul__(self, scalar) -> "QubitOperator":
        if not isinstance(scalar, (int, float, complex)):
            return NotImplemented
        return self * scalar

    def dagger(self) -> "QubitOperator":
        out = QubitOperator()
        out.terms = {w: c.conjugate() for w, c in self.terms.items()}
        return out

    def simplify(self, threshold: float = _DROP) -> "QubitOperator":
        scale = max((abs(c) for c in self.terms.values()), default=1.0)
        cut = threshold * max(scale, 1.0)
        out = QubitOperator()
        out.terms = {w: c for w, c in self.terms.items() if abs(c) > cut}
        return out

    def is_hermitian(self, atol: float = 1e-8) -> bool:
        return all(abs(c.imag) <= atol for c in self.terms.values())

    def pauli_terms(self) -> Iterable[PauliTerm]:
        return (PauliTerm(w, c) for w, c in sorted(self.terms.items()))

    def to_dense(self, num_qubits: int) -> np.ndarray:
        dim = 1 << num_qubits
        out = np.zeros((dim, dim), dtype=np.complex128)
        for w, c in self.terms.items():
            perm, phase = word_action(w, num_qubits)
            out[np.arange(dim), perm] += c * phase
        return out

    def to_sparse(self, num_qubits: int):
        from scipy.sparse import csr_matrix

        dim = 1 << num_qubits
        rows, cols, vals = [], [], []
        idx = np.arange(dim, dtype=np.int64)
        for w, c in self.terms.items():
            perm, phase = word_action(w, num_qubits)
            rows.append(idx)
            cols.append(perm)
            vals.append(c * phase)
        if not rows:
            return csr_matrix((dim, dim), dtype=np.complex128)
        return csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(dim, dim),
        )

    def __repr__(self) -> str:
        return f"QubitOperator({len(self.terms)} terms)"


# ---------------------------------------------------------------------------
# Jordan-Wigner mapping

LadderOps = Sequence[Tuple[str, int]]


def _ladder_qubit_op(mode: int, dagger: bool, num_modes: int) -> QubitOperator:
    if not 0 <= mode < num_modes:
        raise ValueError(f"mode {mode} out of range for {num_modes} modes")
    sign = -1.0 if mode % 2 else 1.0
    string = tuple((q, "Z") for q in range(mode))
    # occupied = |0>: adag flips |1> -> |0>, i.e. sigma^+ = (X + iY)/2
    y_coeff = 0.5j if dagger else -0.5j
    return QubitOperator(
        {
            string + ((mode, "X"),): 0.5 * sign,
            string + ((mode, "Y"),): y_coeff * sign,
        }
    )


def jordan_wigner(ops: LadderOps, num_modes: int) -> QubitOperator:
    """Map a product of ladder operators to a qubit operator.

    `ops` lists (kind, mode) factors in operator order, kind "+" for creation
    and "-" for annihilation; the empty product is the identity.
    """
    out = QubitOperator.identity(1.0)
    for kind, mode in ops:
        if kind not in ("+", "-"):
            raise ValueError(f"ladder kind must be '+' or '-', got {kind!r}")
        out = out * _ladder_qubit_op(int(mode), kind == "+", num_modes)
    return out


def majorana_operator(index: int, num_modes: int) -> QubitOperator:
    """Qubit image of the Majorana mode with extended index in [0, 2M)."""
    if not 0 <= index < 2 * num_modes:
        raise ValueError(f"Majorana index {index} out of range")
    mode = index % num_modes
    sign = -1.0 if mode % 2 else 1.0
    axis = "X" if index < num_modes else "Y"
    word = tuple((q, "Z") for q in range(mode)) + ((mode, axis),)
    return QubitOperator({word: sign})


def number_operator(num_modes: int) -> QubitOperator:
    """Total particle number: with occupied = |0>, n_p maps to (1 + Z_p)/2."""
    terms: Dict[Word, complex] = {(): num_modes / 2.0}
    for p in range(num_modes):
        terms[((p, "Z"),)] = 0.5
    return QubitOperator(terms)


# ---------------------------------------------------------------------------
# Hamiltonian specification

TwoBodyKey = Tuple[int, int, int, int]
ThreeBodyKey = Tuple[int, int, int, int, int, int]


def _perm_sign(seq: Sequence[int]) -> Tuple[Tuple[int, ...], float]:
    """Sort a sequence, returning (sorted tuple, permutation sign)."""
    items = list(seq)
    sign = 1.0
    for i in range(1, len(items)):
        j = i
        while j > 0 and items[j - 1] > items[j]:
            items[j - 1], items[j] = items[j], items[j - 1]
            sign = -sign
            j -= 1
    return tuple(items), sign


def canonical_two_body(raw: Mapping[TwoBodyKey, complex]) -> Dict[TwoBodyKey, complex]:
    """Canonicalize (p,q,r,s) keys of adag_p adag_q a_s a_r to p<q, r<s."""
    out: Dict[TwoBodyKey, complex] = {}
    for (p, q, r, s), val in raw.items():
        if p == q or r == s:
            continue
        (p, q), s1 = _perm_sign((p, q))
        (r, s), s2 = _perm_sign((r, s))
        key = (p, q, r, s)
        out[key] = out.get(key, 0.0) + complex(val) * s1 * s2
    return {k: v for k, v in out.items() if abs(v) > _DROP}


def canonical_three_body(
    raw: Mapping[ThreeBodyKey, complex]
) -> Dict[ThreeBodyKey, complex]:
    out: Dict[ThreeBodyKey, complex] = {}
    for key, val in raw.items():
        cre, s1 = _perm_sign(key[:3])
        ann, s2 = _perm_sign(key[3:])
        if len(set(cre)) < 3 or len(set(ann)) < 3:
            continue
        full = cre + ann
        out[full] = out.get(full, 0.0) + complex(val) * s1 * s2
    return {k: v for k, v in out.items() if abs(v) > _DROP}


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """A fermionic Hamiltonian with up to three-body interactions.

    H = constant
        + sum_pq one_body[p,q] adag_p a_q
        + sum_pq pairing[p,q] adag_p adag_q + h.c.
        + sum two_body[(p,q,r,s)] adag_p adag_q a_s a_r
        + sum three_body[(p,q,r,s,t,u)] adag_p adag_q adag_r a_u a_t a_s

    one_body is Hermitian, pairing antisymmetric, and the sparse tables are
    canonically keyed (creation and annihilation indices strictly increasing)
    with Hermiticity enforced pairwise.
    """

    num_modes: int
    one_body: np.ndarray
    pairing: np.ndarray
    two_body: Mapping[TwoBodyKey, complex]
    three_body: Mapping[ThreeBodyKey, complex]
    constant: float = 0.0

    def __post_init__(self):
        m = self.num_modes
        if m < 1:
            raise ValueError("need at least one mode")
        t = np.array(self.one_body, dtype=np.complex128)
        d = np.array(self.pairing, dtype=np.complex128)
        if t.shape != (m, m) or d.shape != (m, m):
            raise ValueError("one_body and pairing must be (M, M)")
        scale = max(1.0, np.abs(t).max(initial=0.0), np.abs(d).max(initial=0.0))
        if np.abs(t - t.conj().T).max() > _ATOL * scale:
            raise ValueError("one_body must be Hermitian")
        if np.abs(d + d.T).max() > _ATOL * scale:
            raise ValueError("pairing must be antisymmetric")
        t.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "one_body", t)
        object.__setattr__(self, "pairing", d)
        v = {tuple(int(i) for i in k): complex(c) for k, c in self.two_body.items()}
        w = {tuple(int(i) for i in k): complex(c) for k, c in self.three_body.items()}
        for key, val in v.items():
            p, q, r, s = key
            if not (0 <= p < q < m and 0 <= r < s < m):
                raise ValueError(f"two_body key {key} not canonical")
            partner = (r, s, p, q)
            if abs(v.get(partner, 0.0) - val.conjugate()) > _ATOL * max(1.0, abs(val)):
                raise ValueError(f"two_body not Hermitian at {key}")
        for key, val in w.items():
            if not (
                0 <= key[0] < key[1] < key[2] < m
                and 0 <= key[3] < key[4] < key[5] < m
            ):
                raise ValueError(f"three_body key {key} not canonical")
            partner = key[3:] + key[:3]
            if abs(w.get(partner, 0.0) - val.conjugate()) > _ATOL * max(1.0, abs(val)):
                raise ValueError(f"three_body not Hermitian at {key}")
        object.__setattr__(self, "two_body", MappingProxyType(v))
        object.__setattr__(self, "three_body", MappingProxyType(w))
        object.__setattr__(self, "constant", float(self.constant))

    @classmethod
    def from_raw(
        cls,
        num_modes: int,
        one_body: Optional[np.ndarray] = None,
        pairing: Optional[np.ndarray] = None,
        two_body: Optional[Mapping[TwoBodyKey, complex]] = None,
        three_body: Optional[Mapping[ThreeBodyKey, complex]] = None,
        constant: float = 0.0,
    ) -> "HamiltonianSpec":
        """Build a spec from tables in any index order, canonicalizing signs."""
        m = num_modes
        t = np.zeros((m, m), complex) if one_body is None else one_body
        d = np.zeros((m, m), complex) if pairing is None else pairing
        return cls(
            num_modes=m,
            one_body=t,
            pairing=d,
            two_body=canonical_two_body(two_body or {}),
            three_body=canonical_three_body(three_body or {}),
            constant=constant,
        )

    @property
    def conserves_number(self) -> bool:
        return bool(np.abs(self.pairing).max(initial=0.0) <= _ATOL)

    @property
    def quadratic_only(self) -> bool:
        return not self.two_body and not self.three_body

    # -- term-list interchange ------------------------------------------------

    def to_terms_dict(self) -> dict:
        """Serialize as an explicit list of normal-ordered ladder monomials."""
        terms = []

        def emit(ops, coeff):
            coeff = complex(coeff)
            if abs(coeff) > _DROP:
                terms.append(
                    {"ops": [[k, int(p)] for k, p in ops], "coeff": [coeff.real, coeff.imag]}
                )

        if self.constant:
            emit([], self.constant)
        m = self.num_modes
        for p in range(m):
            for q in range(m):
                emit([("+", p), ("-", q)], self.one_body[p, q])
        for p in range(m):
            for q in range(p + 1, m):
                c = 2.0 * self.pairing[p, q]
                emit([("+", p), ("+", q)], c)
                emit([("-", q), ("-", p)], np.conj(c))
        for (p, q, r, s), val in sorted(self.two_body.items()):
            emit([("+", p), ("+", q), ("-", s), ("-", r)], val)
        for (p, q, r, s, t, u), val in sorted(self.three_body.items()):
            emit([("+", p), ("+", q), ("+", r), ("-", u), ("-", t), ("-", s)], val)
        return {"modes": self.num_modes, "terms": terms}

    @classmethod
    def from_terms_dict(cls, data: dict) -> "HamiltonianSpec":
        try:
            m = int(data["modes"])
            raw_terms = data["terms"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed Hamiltonian terms: {exc}") from exc
        constant = 0.0
        one = np.zeros((m, m), dtype=np.complex128)
        d_cre = np.zeros((m, m), dtype=np.complex128)
        d_ann = np.zeros((m, m), dtype=np.complex128)
        two: Dict[TwoBodyKey, complex] = {}
        three: Dict[ThreeBodyKey, complex] = {}
        for entry in raw_terms:
            ops = [(str(k), int(p)) for k, p in entry["ops"]]
            re, im = entry["coeff"]
            c = complex(float(re), float(im))
            pattern = "".join(k for k, _ in ops)
            idx = [p for _, p in ops]
            if any(not 0 <= p < m for p in idx):
                raise ValueError(f"mode index out of range in {entry}")
            if pattern == "":
                if abs(c.imag) > _ATOL * max(1.0, abs(c)):
                    raise ValueError("constant term must be real")
                constant += c.real
            elif pattern == "+-":
                one[idx[0], idx[1]] += c
            elif pattern == "++":
                p, q = idx
                d_cre[p, q] += c / 2.0
                d_cre[q, p] -= c / 2.0
            elif pattern == "--":
                q, p = idx  # monomial a_q a_p pairs with conj(pairing[p, q])
                d_ann[p, q] += np.conj(c) / 2.0
                d_ann[q, p] -= np.conj(c) / 2.0
            elif pattern == "++--":
                p, q, s, r = idx
                key = (p, q, r, s)
                two[key] = two.get(key, 0.0) + c
            elif pattern == "+++---":
                p, q, r, u, t, s = idx
                key = (p, q, r, s, t, u)
                three[key] = three.get(key, 0.0) + c
            else:
                raise ValueError(f"term pattern {pattern!r} not normal-ordered")
        scale = max(1.0, np.abs(d_cre).max(), np.abs(d_ann).max())
        if np.abs(d_cre - d_ann).max() > _ATOL * scale:
            raise ValueError("pairing terms are not Hermitian-paired")
        return cls.from_raw(m, one, d_cre, two, three, constant)

    def to_json(self, indent: Optional[int] = None) -> str:
        return json.dumps(self.to_terms_dict(), indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "HamiltonianSpec":
        return cls.from_terms_dict(json.loads(text))


def hamiltonian_to_qubits(spec: HamiltonianSpec) -> QubitOperator:
    """Full Jordan-Wigner image of a Hamiltonian spec."""
    m = spec.num_modes
    out = QubitOperator.identity(spec.constant)
    for entry in spec.to_terms_dict()["terms"]:
        ops = [(k, p) for k, p in entry["ops"]]
        if not ops:
            continue
        re, im = entry["coeff"]
        out += complex(re, im) * jordan_wigner(ops, m)
    return out.simplify()


# ---------------------------------------------------------------------------
# Model builders

def build_hubbard(
    nx: int,
    ny: int,
    t: float,
    u: float,
    mu: float = 0.0,
    delta: float = 0.0,
) -> HamiltonianSpec:
    """Fermi-Hubbard model on an open nx-by-ny grid, optionally with on-site
    singlet pairing.

    Site (x, y) has index y*nx + x; mode = 2*site + spin with spin 0 = up.
    The interaction and chemical potential are written in particle-hole
    symmetric form, U (n_up - 1/2)(n_dn - 1/2) - mu (n - 1/2), so mu = 0 is
    half filling. The pairing term is delta (adag_up adag_dn + a_dn a_up)
    per site.
    """
    if nx < 1 or ny < 1:
        raise ValueError("grid must be at least 1x1")
    n_sites = nx * ny
    m = 2 * n_sites
    one = np.zeros((m, m), dtype=np.complex128)
    pair = np.zeros((m, m), dtype=np.complex128)
    two: Dict[TwoBodyKey, complex] = {}
    constant = 0.0

    def site(x, y):
        return y * nx + x

    bonds = []
    for y in range(ny):
        for x in range(nx):
            if x + 1 < nx:
                bonds.append((site(x, y), site(x + 1, y)))
            if y + 1 < ny:
                bonds.append((site(x, y), site(x, y + 1)))
    for s1, s2 in bonds:
        for spin in (0, 1):
            p, q = 2 * s1 + spin, 2 * s2 + spin
            one[p, q] -= t
            one[q, p] -= t
    for s in range(n_sites):
        up, dn = 2 * s, 2 * s + 1
        if u:
            two[(up, dn, up, dn)] = complex(u)
            one[up, up] -= u / 2.0
            one[dn, dn] -= u / 2.0
            constant += u / 4.0
        for p in (up, dn):
            one[p, p] -= mu
            constant += mu / 2.0
        if delta:
            pair[up, dn] += delta / 2.0
            pair[dn, up] -= delta / 2.0
    return HamiltonianSpec(m, one, pair, two, {}, constant)


def mataga_nishimoto(u: float, r: float) -> float:
    """Two-center Coulomb parameter 1 / (1/U + r).

    `r` is the intersite distance in units reciprocal to the energy unit of
    U, so the result interpolates from U at r = 0 to 1/r at large r.
    """
    if u <= 0:
        raise ValueError("on-site repulsion must be positive")
    if r < 0:
        raise ValueError("distance must be nonnegative")
    return 1.0 / (1.0 / u + r)


@dataclass(frozen=True)
class PppParams:
    """Pariser-Parr-Pople model inputs for one geometry.

    t is the symmetric hopping table over sites (diagonal entries are
    on-site energies), u the on-site repulsions, r the distance table in
    reciprocal-energy units consumed by `mataga_nishimoto`, and v_c an
    additive scalar (core/nuclear energy).
    """

    n_sites: int
    t: np.ndarray
    u: np.ndarray
    r: np.ndarray
    v_c: float = 0.0

    def __post_init__(self):
        n = self.n_sites
        t = np.array(self.t, dtype=float)
        u = np.array(self.u, dtype=float)
        r = np.array(self.r, dtype=float)
        if t.shape != (n, n) or r.shape != (n, n) or u.shape != (n,):
            raise ValueError("bad PPP table shapes")
        if np.abs(t - t.T).max(initial=0.0) > _ATOL:
            raise ValueError("hopping table must be symmetric")
        if np.abs(r - r.T).max(initial=0.0) > _ATOL or r.min(initial=0.0) < 0:
            raise ValueError("distance table must be symmetric nonnegative")
        if (u <= 0).any():
            raise ValueError("on-site repulsions must be positive")
        for a in (t, u, r):
            a.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "v_c", float(self.v_c))


def build_ppp(params: PppParams) -> HamiltonianSpec:
    """Pariser-Parr-Pople Hamiltonian over 2*n_sites spin orbitals.

    H = sum_{i<j} t_ij sum_s (adag_is a_js + h.c.) + sum_i t_ii n_i
        + sum_i U_i n_ia n_ib + V_c
        + sum_{i<j} g_ij (n_i - 1)(n_j - 1),

    with g_ij = mataga_nishimoto((U_i + U_j)/2, r_ij). Mode = 2*site + spin.
    """
    n = params.n_sites
    m = 2 * n
    one = np.zeros((m, m), dtype=np.complex128)
    two: Dict[TwoBodyKey, complex] = {}
    constant = params.v_c
    for i in range(n):
        ia, ib = 2 * i, 2 * i + 1
        for p in (ia, ib):
            one[p, p] += params.t[i, i]
        two[(ia, ib, ia, ib)] = complex(params.u[i])
        for j in range(i + 1, n):
            for spin in (0, 1):
                p, q = 2 * i + spin, 2 * j + spin
                one[p, q] += params.t[i, j]
                one[q, p] += params.t[i, j]
            g = mataga_nishimoto(
                0.5 * (params.u[i] + params.u[j]), params.r[i, j]
            )
            for p in (ia, ib):
                for q in (2 * j, 2 * j + 1):
                    key = (p, q, p, q)
                    two[key] = two.get(key, 0.0) + g
                one[p, p] -= g
            for q in (2 * j, 2 * j + 1):
                one[q, q] -= g
            constant += g
    return HamiltonianSpec(m, one, np.zeros((m, m)), two, {}, constant)


def load_ppp_table(lam: float, path: Optional[str] = None) -> PppParams:
    """Load PPP parameters for one value of the geometry coordinate.

    The JSON table holds a list of entries keyed by "lambda"; `path = None`
    reads the packaged cyclobutadiene table.
    """
    if path is None:
        from importlib.resources import files

        text = files("ldca").joinpath("data/cyclobutadiene_ppp.json").read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        data = json.loads(text)
        entries = data["entries"]
        n = int(data["n_sites"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed PPP table: {exc}") from exc
    for entry in entries:
        if abs(float(entry["lambda"]) - lam) < 1e-9:
            return PppParams(
                n_sites=n,
                t=np.array(entry["t"], dtype=float),
                u=np.array(entry["u"], dtype=float),
                r=np.array(entry["r"], dtype=float),
                v_c=float(entry.get("v_c", 0.0)),
            )
    have = ", ".join(str(e["lambda"]) for e in entries)
    raise ConfigError(f"no PPP entry for lambda={lam}; table has {have}")


# ---------------------------------------------------------------------------
# Majorana representation

@dataclass(frozen=True, eq=False)
class MajoranaHamiltonian:
    """H = offset + i sum_ab T[a,b] g_a g_b + sum V[a,b,c,d] g_a g_b g_c g_d
    (+ carried sextic terms), over extended Majorana indices.

    T is real antisymmetric. The quartic table is canonically keyed a<b<c<d
    and holds the fully antisymmetric tensor values, so the abcd entry
    contributes 24 * V[abcd] * g_a g_b g_c g_d after index ordering. Sextic
    terms are stored the same way but mean-field routines reject them.
    """

    num_modes: int
    quadratic: np.ndarray
    quartic: Mapping[Tuple[int, int, int, int], float]
    sextic: Mapping[Tuple[int, ...], float]
    offset: float

    def __post_init__(self):
        m2 = 2 * self.num_modes
        t = np.array(self.quadratic, dtype=float)
        if t.shape != (m2, m2):
            raise ValueError("quadratic table must be (2M, 2M)")
        scale = max(1.0, np.abs(t).max(initial=0.0))
        if np.abs(t + t.T).max(initial=0.0) > _ATOL * scale:
            raise ValueError("quadratic table must be antisymmetric")
        t = 0.5 * (t - t.T)
        t.setflags(write=False)
        object.__setattr__(self, "quadratic", t)
        q = {tuple(int(i) for i in k): float(v) for k, v in self.quartic.items()}
        s = {tuple(int(i) for i in k): float(v) for k, v in self.sextic.items()}
        for key in q:
            if len(key) != 4 or list(key) != sorted(set(key)) or key[-1] >= m2:
                raise ValueError(f"quartic key {key} not canonical")
        for key in s:
            if len(key) != 6 or list(key) != sorted(set(key)) or key[-1] >= m2:
                raise ValueError(f"sextic key {key} not canonical")
        object.__setattr__(self, "quartic", MappingProxyType(q))
        object.__setattr__(self, "sextic", MappingProxyType(s))
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "_quartic_mat", self._expand_quartic())

    def _expand_quartic(self) -> Optional[np.ndarray]:
        if not self.quartic:
            return None
        m2 = 2 * self.num_modes
        dense = np.zeros((m2, m2, m2, m2), dtype=float)
        for key, val in self.quartic.items():
            for perm in itertools.permutations(range(4)):
                _, sign = _perm_sign(perm)
                dense[tuple(key[p] for p in perm)] = sign * val
        mat = dense.reshape(m2 * m2, m2 * m2)
        mat.setflags(write=False)
        return mat

    @property
    def has_sextic(self) -> bool:
        return bool(self.sextic)

    def quartic_trace(self, gamma: np.ndarray) -> np.ndarray:
        """Partial contraction sum_kl V[i,j,k,l] gamma[l,k] as a (2M, 2M) map."""
        m2 = 2 * self.num_modes
        mat = getattr(self, "_quartic_mat")
        if mat is None:
            return np.zeros((m2, m2))
        return (mat @ np.asarray(gamma).T.ravel()).reshape(m2, m2)


def _reduce_majorana(indices: Sequence[int]) -> Tuple[Tuple[int, ...], float]:
    """Sort a Majorana monomial, collapsing squares; returns (tuple, sign)."""
    items = list(indices)
    sign = 1.0
    for i in range(1, len(items)):
        j = i
        while j > 0 and items[j - 1] > items[j]:
            items[j - 1], items[j] = items[j], items[j - 1]
            sign = -sign
            j -= 1
    out: list[int] = []
    for idx in items:
        if out and out[-1] == idx:
            out.pop()
        else:
            out.append(idx)
    return tuple(out), sign


def _ladder_to_majorana(ops: LadderOps, num_modes: int, coeff: complex) -> Dict[Tuple[int, ...], complex]:
    """Expand a ladder monomial over Majorana monomials (sorted, collapsed)."""
    m = num_modes
    partial: list[Tuple[Tuple[int, ...], complex]] = [((), coeff)]
    for kind, p in ops:
        y = 0.5j if kind == "+" else -0.5j
        nxt = []
        for tpl, c in partial:
            nxt.append((tpl + (p,), c * 0.5))
            nxt.append((tpl + (m + p,), c * y))
        partial = nxt
    out: Dict[Tuple[int, ...], complex] = {}
    for tpl, c in partial:
        red, sign = _reduce_majorana(tpl)
        out[red] = out.get(red, 0.0) + sign * c
    return out


def to_majorana(spec: HamiltonianSpec) -> MajoranaHamiltonian:
    """Rewrite a Hamiltonian spec in the Majorana basis.

    Expands every ladder monomial with a = (g_A - i g_B)/2 and
    adag = (g_A + i g_B)/2, then collects by reduced monomial. Hermiticity
    makes the degree-2 coefficients imaginary and the degree-4/6 ones real;
    both facts are checked numerically.
    """
    m = spec.num_modes
    acc: Dict[Tuple[int, ...], complex] = {(): complex(spec.constant)}

    def absorb(ops, coeff):
        if abs(coeff) <= _DROP:
            return
        for tpl, c in _ladder_to_majorana(ops, m, coeff).items():
            acc[tpl] = acc.get(tpl, 0.0) + c

    for entry in spec.to_terms_dict()["terms"]:
        ops = [(k, p) for k, p in entry["ops"]]
        if not ops:
            continue
        re, im = entry["coeff"]
        absorb(ops, complex(re, im))

    scale = max(1.0, max((abs(c) for c in acc.values()), default=1.0))
    quad = np.zeros((2 * m, 2 * m), dtype=float)
    quartic: Dict[Tuple[int, int, int, int], float] = {}
    sextic: Dict[Tuple[int, ...], float] = {}
    offset = 0.0
    for tpl, c in acc.items():
        if abs(c) <= _DROP * scale:
            continue
        deg = len(tpl)
        if deg % 2:
            raise ValueError("odd Majorana monomial from a Hermitian input")
        if deg == 0:
            if abs(c.imag) > _ATOL * scale:
                raise ValueError("offset must be real")
            offset += c.real
        elif deg == 2:
            if abs(c.real) > _ATOL * scale:
                raise ValueError("quadratic coefficients must be imaginary")
            # coefficient of g_a g_b (a<b) is 2i T[a,b]
            a, b = tpl
            quad[a, b] = c.imag / 2.0
            quad[b, a] = -c.imag / 2.0
        elif deg == 4:
            if abs(c.imag) > _ATOL * scale:
                raise ValueError("quartic coefficients must be real")
            quartic[tpl] = c.real / 24.0
        elif deg == 6:
            if abs(c.imag) > _ATOL * scale:
                raise ValueError("sextic coefficients must be real")
            sextic[tpl] = c.real / 720.0
        else:
            raise ValueError(f"degree-{deg} Majorana term unsupported")
    return MajoranaHamiltonian(m, quad, quartic, sextic, offset)
