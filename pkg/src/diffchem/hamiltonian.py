"""Molecular-orbital integrals, fermionic Hamiltonians and their qubit images.

Conventions:

* AO repulsion integrals are chemist-ordered, ``(mn|ls)``; MO two-electron
  integrals are physicist-ordered, ``h_pqrs = <pq|rs> = (ps|qr)``, so that
  ``H = sum h_pq a+_p a_q + 1/2 sum h_pqrs a+_p a+_q a_r a_s``.
* Spin orbitals are interleaved: spatial orbital i maps to 2i (alpha) and
  2i+1 (beta).
* Qubit 0 is the most significant bit of a basis-state index.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .errors import ConsistencyError, ContractError, InputError, ResourceError
from .integrals import IntegralTables, compute_integrals, unique_quartets
from .molecule import Molecule, unpack_parameters
from .scf import SCFConfig, SCFResult, core_hamiltonian, scf_solve

PRUNE_THRESHOLD = 1e-12
IMAG_TOLERANCE = 1e-10
MAX_SPARSE_QUBITS = 20

_LETTERS = "IXYZ"
# single-qubit products: (a, b) -> (phase, letter) with a*b = phase * letter
_PRODUCT = {}
for _a in range(4):
    for _b in range(4):
        if _a == 0:
            _PRODUCT[_a, _b] = (1, _b)
        elif _b == 0:
            _PRODUCT[_a, _b] = (1, _a)
        elif _a == _b:
            _PRODUCT[_a, _b] = (1, 0)
        else:
            _c = 6 - _a - _b
            cyclic = (_b - _a) % 3 == 1
            _PRODUCT[_a, _b] = (1j if cyclic else -1j, _c)


# -- Pauli words and sums ------------------------------------------------

@dataclass(frozen=True, order=True)
class PauliWord:
    """Tensor product of single-qubit Paulis; identity on unlisted qubits."""

    ops: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        qubits = [q for q, _ in self.ops]
        if len(set(qubits)) != len(qubits):
            raise InputError(f"repeated qubit in Pauli word {self.ops}")
        if any(letter not in "XYZ" for _, letter in self.ops):
            raise InputError(f"invalid Pauli letter in {self.ops}")
        object.__setattr__(self, "ops", tuple(sorted(self.ops)))

    @classmethod
    def from_dense(cls, letters: Sequence[int]) -> "PauliWord":
        return cls(tuple((q, _LETTERS[c]) for q, c in enumerate(letters) if c))

    @classmethod
    def parse(cls, text: str) -> "PauliWord":
        text = text.strip()
        if text in ("", "I"):
            return cls()
        ops = []
        for tok in text.split():
            if tok[0] not in "XYZ" or not tok[1:].isdigit():
                raise InputError(f"bad Pauli factor {tok!r}")
            ops.append((int(tok[1:]), tok[0]))
        return cls(tuple(ops))

    def __str__(self):
        return " ".join(f"{letter}{q}" for q, letter in self.ops) or "I"

    @property
    def max_qubit(self) -> int:
        return max((q for q, _ in self.ops), default=-1)

    def masks(self, n_qubits: int) -> tuple[int, int, int]:
        """(x_mask, z_mask, n_y) with qubit k at bit n_qubits-1-k."""
        x = z = ny = 0
        for q, letter in self.ops:
            bit = 1 << (n_qubits - 1 - q)
            if letter in "XY":
                x |= bit
            if letter in "YZ":
                z |= bit
            ny += letter == "Y"
        return x, z, ny

    def qubitwise_commutes(self, other: "PauliWord") -> bool:
        mine = dict(self.ops)
        return all(mine.get(q, letter) == letter for q, letter in other.ops)

    def action(self, n_qubits: int):
        """(row index per column, phase per column) of the word's matrix."""
        x, z, ny = self.masks(n_qubits)
        idx = np.arange(2 ** n_qubits)
        parity = np.bitwise_count(idx & z) & 1
        phase = (1j ** ny) * (1.0 - 2.0 * parity)
        return idx ^ x, phase


def word_expectation(word: PauliWord, amplitudes: np.ndarray, n_qubits: int) -> float:
    rows, phase = word.action(n_qubits)
    return float(np.real(np.vdot(amplitudes[rows], phase * amplitudes)))


@dataclass(frozen=True)
class PauliSum:
    """Coefficient-weighted Pauli words.

    ``constant`` records how much of the identity coefficient is the
    nuclear repulsion; it is metadata only and is already included in the
    terms.
    """

    terms: tuple[tuple[object, PauliWord], ...]
    n_qubits: int
    constant: float = 0.0

    def __post_init__(self):
        for _, w in self.terms:
            if w.max_qubit >= self.n_qubits:
                raise InputError(f"word {w} exceeds {self.n_qubits} qubits")

    def __len__(self):
        return len(self.terms)

    @property
    def words(self) -> list[PauliWord]:
        return [w for _, w in self.terms]

    @property
    def coefficients(self) -> list:
        return [c for c, _ in self.terms]

    def __add__(self, other: "PauliSum") -> "PauliSum":
        n = max(self.n_qubits, other.n_qubits)
        return PauliSum(self.terms + other.terms, n, self.constant + other.constant)

    def scaled(self, factor) -> "PauliSum":
        return PauliSum(tuple((c * factor, w) for c, w in self.terms), self.n_qubits, self.constant)

    def primal(self) -> "PauliSum":
        return PauliSum(tuple((ad.primal(c), w) for c, w in self.terms), self.n_qubits, ad.primal(self.constant))

    def to_text(self) -> str:
        lines = [f"n_qubits {self.n_qubits}", f"constant {format(ad.primal(self.constant), '.16e')}"]
        for c, w in self.terms:
            c = ad.primal(c)
            if isinstance(c, complex):
                if abs(c.imag) > IMAG_TOLERANCE:
                    raise ConsistencyError("text format holds real coefficients only")
                c = c.real
            lines.append(f"{format(float(c), '.16e')} {w}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PauliSum":
        n = None
        constant = 0.0
        terms = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            head, _, rest = line.partition(" ")
            if head == "n_qubits":
                n = int(rest)
            elif head == "constant":
                constant = float(rest)
            else:
                terms.append((float(head), PauliWord.parse(rest)))
        if n is None:
            raise InputError("Pauli text is missing the n_qubits header")
        return cls(tuple(terms), n, constant)


def _is_negligible(c, threshold: float) -> bool:
    return ad.magnitude(c) < threshold if ad.is_dual(c) else abs(c) < threshold


def simplify(ps: PauliSum, threshold: float = PRUNE_THRESHOLD) -> PauliSum:
    """Merge equal words, drop coefficients below ``threshold``, sort canonically."""
    if threshold < 0:
        raise InputError("threshold must be non-negative")
    merged: dict[PauliWord, object] = {}
    for c, w in ps.terms:
        merged[w] = merged[w] + c if w in merged else c
    terms = tuple((merged[w], w) for w in sorted(merged) if not _is_negligible(merged[w], threshold))
    return PauliSum(terms, ps.n_qubits, ps.constant)


@dataclass
class SparseHamiltonian:
    """Sparse 2^n x 2^n matrix in CSR layout."""

    matrix: sp.csr_matrix
    n_qubits: int

    @property
    def dimension(self) -> int:
        return 2 ** self.n_qubits

    def entries(self) -> list[tuple[int, int, complex]]:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [(int(coo.row[k]), int(coo.col[k]), complex(coo.data[k])) for k in order]

    def to_json(self) -> list[list]:
        return [[r, c, v.real, v.imag] for r, c, v in self.entries()]

    @classmethod
    def from_json(cls, rows: list, n_qubits: int) -> "SparseHamiltonian":
        dim = 2 ** n_qubits
        if not rows:
            return cls(sp.csr_matrix((dim, dim), dtype=complex), n_qubits)
        r, c, re, im = (np.array(x) for x in zip(*rows))
        m = sp.csr_matrix((re + 1j * im, (r.astype(int), c.astype(int))), shape=(dim, dim))
        return cls(m, n_qubits)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def hermiticity_error(self) -> float:
        diff = self.matrix - self.matrix.getH()
        return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0

    def gershgorin_bound(self) -> float:
        return float(np.max(np.asarray(abs(self.matrix).sum(axis=1)).ravel()))


def to_sparse(ps: PauliSum, max_qubits: int = MAX_SPARSE_QUBITS) -> SparseHamiltonian:
    n = ps.n_qubits
    if n > max_qubits:
        raise ResourceError(f"{n} qubits exceeds the sparse-matrix cap of {max_qubits}")
    dim = 2 ** n
    rows, cols, data = [], [], []
    idx = np.arange(dim)
    for c, w in ps.terms:
        c = complex(ad.primal(c))
        if c == 0:
            continue
        r, phase = w.action(n)
        rows.append(r)
        cols.append(idx)
        data.append(c * phase)
    if not rows:
        return SparseHamiltonian(sp.csr_matrix((dim, dim), dtype=complex), n)
    m = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    m = m.tocsr()
    m.sum_duplicates()
    m.eliminate_zeros()
    return SparseHamiltonian(m, n)


def group_commuting(ps: PauliSum) -> list[PauliSum]:
    """Greedy first-fit partition into qubit-wise commuting groups."""
    groups: list[list] = []
    for c, w in ps.terms:
        for g in groups:
            if all(w.qubitwise_commutes(other) for _, other in g):
                g.append((c, w))
                break
        else:
            groups.append([(c, w)])
    return [PauliSum(tuple(g), ps.n_qubits) for g in groups]


def number_operator(n_qubits: int) -> PauliSum:
    if n_qubits < 1:
        raise InputError("number operator needs at least one qubit")
    terms = [(0.5 * n_qubits, PauliWord())]
    terms += [(-0.5, PauliWord(((p, "Z"),))) for p in range(n_qubits)]
    return PauliSum(tuple(terms), n_qubits)


# -- MO integrals and fermionic operators --------------------------------

@dataclass
class MOIntegrals:
    h_pq: np.ndarray
    h_pqrs: np.ndarray  # physicist <pq|rs>
    core_constant: object

    @property
    def n_orbitals(self) -> int:
        return self.h_pq.shape[0]


def _transform_axis(tensor, C, axis):
    return np.moveaxis(np.tensordot(C, tensor, axes=([0], [axis])), 0, axis)


def _eightfold(g):
    """Copy each canonical chemist-ordered entry onto its permutations, so the
    real-orbital symmetries hold exactly rather than to roundoff."""
    out = g.copy()
    for p, q, r, s in unique_quartets(g.shape[0]):
        v = g[p, q, r, s]
        for idx in ((p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
                    (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p)):
            out[idx] = v
    return out


def mo_integrals(scf_result: SCFResult, tables: IntegralTables, molecule: Molecule,
                 coefficients=None) -> MOIntegrals:
    """Rotate AO integrals into the molecular-orbital basis.

    ``coefficients`` overrides the SCF orbitals (used in tests).
    """
    if coefficients is None:
        if not scf_result.state.delta_P < 1e-6:
            raise ContractError("molecular orbitals come from an unconverged SCF")
        C = scf_result.state.C
    else:
        C = np.asarray(coefficients)
    H = core_hamiltonian(molecule, tables)
    one = np.dot(C.T, np.dot(H, C))
    g = tables.repulsion
    for axis in range(4):
        g = _transform_axis(g, C, axis)
    g = _eightfold(g)
    # (ps|qr) -> <pq|rs>
    two = np.transpose(g, (0, 2, 3, 1))
    return MOIntegrals(one, two, scf_result.nuclear_repulsion if scf_result is not None else 0.0)


@dataclass(frozen=True)
class FermionicOperator:
    """Sum of products of ladder operators; factor ``(p, True)`` is a+_p."""

    terms: tuple[tuple[object, tuple[tuple[int, bool], ...]], ...]
    n_modes: int

    def __post_init__(self):
        for _, factors in self.terms:
            for p, _ in factors:
                if not 0 <= p < self.n_modes:
                    raise InputError(f"mode {p} outside 0..{self.n_modes - 1}")

    def conjugate(self) -> "FermionicOperator":
        return FermionicOperator(
            tuple((c, tuple((p, not dag) for p, dag in reversed(f))) for c, f in self.terms), self.n_modes)


def fermionic_hamiltonian(mo: MOIntegrals) -> FermionicOperator:
    """Spin-expanded second-quantized Hamiltonian (core constant as identity term)."""
    M = mo.n_orbitals
    h1, h2 = mo.h_pq, mo.h_pqrs
    terms = [(mo.core_constant, ())]
    for P in range(2 * M):
        for Q in range(2 * M):
            if P % 2 == Q % 2:
                terms.append((h1[P // 2, Q // 2], ((P, True), (Q, False))))
    for P in range(2 * M):
        for Q in range(2 * M):
            if P == Q:
                continue
            for R in range(2 * M):
                if R % 2 != Q % 2:
                    continue
                for S in range(2 * M):
                    if S == R or S % 2 != P % 2:
                        continue
                    terms.append((0.5 * h2[P // 2, Q // 2, R // 2, S // 2],
                                  ((P, True), (Q, True), (R, False), (S, False))))
    return FermionicOperator(tuple(terms), 2 * M)


@functools.lru_cache(maxsize=None)
def _jw_product(factors: tuple[tuple[int, bool], ...], n: int) -> tuple[tuple[tuple[int, ...], complex], ...]:
    """Pauli expansion of a ladder-operator product as (dense word, factor) pairs."""
    acc = {tuple([0] * n): 1.0 + 0j}
    for p, dagger in factors:
        prefix = [3] * p + [0] * (n - p)
        halves = ((1, 0.5), (2, -0.5j if dagger else 0.5j))
        nxt: dict = {}
        for word, c in acc.items():
            for letter, weight in halves:
                op = list(prefix)
                op[p] = letter
                phase = c * weight
                out = []
                for a, b in zip(word, op):
                    ph, r = _PRODUCT[a, b]
                    phase *= ph
                    out.append(r)
                key = tuple(out)
                nxt[key] = nxt.get(key, 0) + phase
        acc = {k: v for k, v in nxt.items() if abs(v) > 1e-15}
    return tuple(sorted(acc.items()))


def jordan_wigner(op: FermionicOperator, real: bool = True, prune: bool = True,
                  threshold: float = PRUNE_THRESHOLD) -> PauliSum:
    """Map a fermionic operator to a Pauli sum.

    With ``real=True`` (molecular Hamiltonians) the imaginary part must
    cancel to below 1e-10 and the result keeps real, possibly Dual,
    coefficients.  ``prune=False`` keeps every structurally present word,
    even at zero value, so the word list does not depend on parameters.
    """
    n = op.n_modes
    acc: dict[tuple, object] = {}
    imag: dict[tuple, float] = {}
    for c, factors in op.terms:
        for word, f in _jw_product(tuple(factors), n):
            if real:
                if f.real != 0.0:
                    acc[word] = acc[word] + c * f.real if word in acc else c * f.real
                if f.imag != 0.0:
                    imag[word] = imag.get(word, 0.0) + ad.primal(c) * f.imag
            else:
                acc[word] = acc.get(word, 0) + c * f
    if real:
        worst = max((abs(v) for v in imag.values()), default=0.0)
        if worst > IMAG_TOLERANCE:
            raise ConsistencyError(f"imaginary Pauli coefficient residue {worst:.3e}")
    terms = tuple((c, PauliWord.from_dense(w)) for w, c in acc.items())
    ps = PauliSum(terms, n)
    return simplify(ps, threshold if prune else -0.0)


# -- end-to-end builder --------------------------------------------------

@dataclass
class MolecularHamiltonian:
    hamiltonian: PauliSum
    scf: SCFResult
    tables: IntegralTables
    mo: MOIntegrals
    n_electrons: int

    @property
    def n_qubits(self) -> int:
        return self.hamiltonian.n_qubits


def molecular_hamiltonian(molecule: Molecule, params=None, scf_config: SCFConfig | None = None,
                          prune: bool = True, threshold: float = PRUNE_THRESHOLD) -> MolecularHamiltonian:
    """Integrals, SCF, MO transform, spin expansion and Jordan-Wigner in one call.

    ``params`` (a flat vector, possibly of Duals) replaces the molecule's
    differentiable parameters first.
    """
    if params is not None:
        molecule = unpack_parameters(molecule, params)
    tables = compute_integrals(molecule)
    result = scf_solve(molecule, scf_config, tables)
    mo = mo_integrals(result, tables, molecule)
    op = fermionic_hamiltonian(mo)
    ps = jordan_wigner(op, prune=prune, threshold=threshold)
    ps = PauliSum(ps.terms, ps.n_qubits, ad.primal(result.nuclear_repulsion))
    return MolecularHamiltonian(ps, result, tables, mo, molecule.n_electrons)


def coefficient_function(molecule: Molecule, scf_config: SCFConfig | None = None):
    """Fixed word list and a map from parameter vector to aligned coefficients.

    The word list is the structural Jordan-Wigner support, so the map stays
    smooth even where individual coefficients pass through zero.
    """
    from .molecule import pack_parameters

    base = molecular_hamiltonian(molecule, scf_config=scf_config, prune=False)
    words = base.hamiltonian.words
    index = {w: k for k, w in enumerate(words)}

    def coefficients(values):
        built = molecular_hamiltonian(molecule, values, scf_config, prune=False)
        out = [0.0] * len(words)
        for c, w in built.hamiltonian.terms:
            if w in index:
                out[index[w]] = c
            elif ad.magnitude(c) > PRUNE_THRESHOLD:
                raise ConsistencyError(f"word {w} appeared away from the reference point")
        return out

    return words, coefficients, pack_parameters(molecule).as_array()
