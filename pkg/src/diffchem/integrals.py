"""One- and two-electron integrals over contracted Cartesian Gaussians.

McMurchie-Davidson scheme: every primitive product is expanded in Hermite
Gaussians (:func:`hermite_coefficients`), and the Coulomb-type integrals
reduce to Hermite Coulomb integrals built on the Boys function.  Every
routine accepts Duals wherever a float is expected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .errors import DomainError, LinearDependenceError
from .molecule import ContractedGaussian, Molecule

BOYS_SWITCH = 25.0
_PI_25 = 2.0 * math.pi ** 2.5


# -- Boys function -------------------------------------------------------

def _boys_float(nmax: int, x: float) -> list[float]:
    if x < 0:
        raise DomainError(f"Boys function argument must be non-negative, got {x}")
    ex = math.exp(-x)
    out = [0.0] * (nmax + 1)
    if x < BOYS_SWITCH:
        # series at the top order, then stable downward recursion
        term = 1.0 / (2 * nmax + 1)
        total = term
        k = 0
        while term > 1e-17 * total:
            term *= 2.0 * x / (2 * nmax + 2 * k + 3)
            total += term
            k += 1
        out[nmax] = ex * total
        for n in range(nmax - 1, -1, -1):
            out[n] = (2.0 * x * out[n + 1] + ex) / (2 * n + 1)
    else:
        out[0] = 0.5 * math.sqrt(math.pi / x) * math.erf(math.sqrt(x))
        for n in range(nmax):
            out[n + 1] = ((2 * n + 1) * out[n] - ex) / (2.0 * x)
    return out


def boys_table(nmax: int, x) -> list:
    """``[F_0(x), ..., F_nmax(x)]``; differentiable through ``dF_n/dx = -F_{n+1}``."""
    if isinstance(x, ad.Dual):
        inner = boys_table(nmax + 1, x.value)
        return [ad.Dual(inner[n], x.tangents * (-inner[n + 1])) for n in range(nmax + 1)]
    return _boys_float(nmax, x)


def boys(n: int, x):
    """F_n(x) = integral of t^(2n) exp(-x t^2) over t in [0, 1]."""
    if n < 0:
        raise DomainError("Boys function order must be non-negative")
    return boys_table(n, x)[n]


# -- Hermite expansion ---------------------------------------------------

def _hermite_table(imax: int, jmax: int, a, b, q):
    """E[i][j][t] for one Cartesian axis, ``q = A - B`` along that axis."""
    p = a + b
    oo2p = 0.5 / p
    xpa = -(b / p) * q
    xpb = (a / p) * q
    table = [[None] * (jmax + 1) for _ in range(imax + 1)]
    table[0][0] = [ad.exp(-(a * b / p) * q * q)]

    def step(prev, shift):
        n = len(prev)
        out = []
        for t in range(n + 1):
            v = 0.0
            if t > 0:
                v = v + oo2p * prev[t - 1]
            if t < n:
                v = v + shift * prev[t]
            if t + 1 < n:
                v = v + (t + 1) * prev[t + 1]
            out.append(v)
        return out

    for i in range(imax):
        table[i + 1][0] = step(table[i][0], xpa)
    for i in range(imax + 1):
        for j in range(jmax):
            table[i][j + 1] = step(table[i][j], xpb)
    return table


def hermite_coefficients(l1: int, l2: int, exponents: Sequence, centers: Sequence) -> list:
    """Hermite expansion coefficients E_t, t = 0..l1+l2, of a 1-D Gaussian product.

    ``exponents`` and ``centers`` are the two primitives' exponents and
    their coordinates along the shared axis.
    """
    a, b = exponents
    return _hermite_table(l1, l2, a, b, centers[0] - centers[1])[l1][l2]


def hermite_coulomb(tmax: int, umax: int, vmax: int, alpha, pc) -> dict:
    """Hermite Coulomb integrals R_{tuv}(alpha, PC) for all t<=tmax, u<=umax, v<=vmax."""
    x, y, z = pc
    r2 = x * x + y * y + z * z
    order = tmax + umax + vmax
    f = boys_table(order, alpha * r2)
    base = []
    scale = 1.0
    for n in range(order + 1):
        base.append(scale * f[n])
        scale = scale * (-2.0 * alpha)
    memo: dict = {}

    def r(t, u, v, n):
        if t < 0 or u < 0 or v < 0:
            return 0.0
        key = (t, u, v, n)
        if key in memo:
            return memo[key]
        if t == u == v == 0:
            val = base[n]
        elif t > 0:
            val = x * r(t - 1, u, v, n + 1)
            if t > 1:
                val = val + (t - 1) * r(t - 2, u, v, n + 1)
        elif u > 0:
            val = y * r(t, u - 1, v, n + 1)
            if u > 1:
                val = val + (u - 1) * r(t, u - 2, v, n + 1)
        else:
            val = z * r(t, u, v - 1, n + 1)
            if v > 1:
                val = val + (v - 1) * r(t, u, v - 2, n + 1)
        memo[key] = val
        return val

    return {(t, u, v): r(t, u, v, 0)
            for t in range(tmax + 1) for u in range(umax + 1) for v in range(vmax + 1)
            if t + u + v <= order}


# -- primitive pair data -------------------------------------------------

@dataclass
class _PrimPair:
    weight: object
    a: object
    b: object
    p: object
    center: tuple
    tables: tuple  # per-axis E[i][j][t]


class _Pair:
    """All primitive pairs of two contracted functions, with Hermite tables."""

    def __init__(self, f1: ContractedGaussian, f2: ContractedGaussian, extra: int = 0):
        self.lmn1 = f1.angular_momentum
        self.lmn2 = f2.angular_momentum
        A, B = f1.center, f2.center
        self.prims = []
        for w1, g1 in zip(f1.primitive_weights, f1.primitives):
            for w2, g2 in zip(f2.primitive_weights, f2.primitives):
                a, b = g1.exponent, g2.exponent
                p = a + b
                center = tuple((a * A[k] + b * B[k]) / p for k in range(3))
                tables = tuple(
                    _hermite_table(self.lmn1[k], self.lmn2[k] + extra, a, b, A[k] - B[k]) for k in range(3)
                )
                self.prims.append(_PrimPair(w1 * w2, a, b, p, center, tables))

    def hermite(self, prim: _PrimPair):
        l1, l2 = self.lmn1, self.lmn2
        return [prim.tables[k][l1[k]][l2[k]] for k in range(3)]


def _overlap_pair(pair: _Pair):
    total = 0.0
    for pr in pair.prims:
        ex, ey, ez = pair.hermite(pr)
        total = total + pr.weight * ex[0] * ey[0] * ez[0] * (math.pi / pr.p) ** 1.5
    return total


def _kinetic_pair(pair: _Pair):
    total = 0.0
    l1, l2 = pair.lmn1, pair.lmn2
    for pr in pair.prims:
        root = ad.sqrt(math.pi / pr.p)
        s = []
        t = []
        for k in range(3):
            i, j = l1[k], l2[k]
            row = pr.tables[k][i]
            s1 = row[j][0] * root
            kin = -2.0 * pr.b * pr.b * row[j + 2][0] * root + pr.b * (2 * j + 1) * s1
            if j >= 2:
                kin = kin - 0.5 * j * (j - 1) * row[j - 2][0] * root
            s.append(s1)
            t.append(kin)
        total = total + pr.weight * (t[0] * s[1] * s[2] + s[0] * t[1] * s[2] + s[0] * s[1] * t[2])
    return total


def _attraction_pair(pair: _Pair, nuclei):
    total = 0.0
    for pr in pair.prims:
        ex, ey, ez = pair.hermite(pr)
        for charge, pos in nuclei:
            pc = tuple(pr.center[k] - pos[k] for k in range(3))
            r = hermite_coulomb(len(ex) - 1, len(ey) - 1, len(ez) - 1, pr.p, pc)
            acc = 0.0
            for t, et in enumerate(ex):
                for u, eu in enumerate(ey):
                    for v, ev in enumerate(ez):
                        acc = acc + et * eu * ev * r[(t, u, v)]
            total = total - charge * (2.0 * math.pi / pr.p) * pr.weight * acc
    return total


def _repulsion_quartet(bra: _Pair, ket: _Pair):
    total = 0.0
    for p1 in bra.prims:
        e1 = bra.hermite(p1)
        for p2 in ket.prims:
            e2 = ket.hermite(p2)
            p, q = p1.p, p2.p
            alpha = p * q / (p + q)
            pq = tuple(p1.center[k] - p2.center[k] for k in range(3))
            r = hermite_coulomb(len(e1[0]) + len(e2[0]) - 2, len(e1[1]) + len(e2[1]) - 2,
                                len(e1[2]) + len(e2[2]) - 2, alpha, pq)
            acc = 0.0
            for t, et in enumerate(e1[0]):
                for u, eu in enumerate(e1[1]):
                    for v, ev in enumerate(e1[2]):
                        e_bra = et * eu * ev
                        inner = 0.0
                        for tau, ft in enumerate(e2[0]):
                            for nu, fu in enumerate(e2[1]):
                                for phi, fv in enumerate(e2[2]):
                                    term = ft * fu * fv * r[(t + tau, u + nu, v + phi)]
                                    inner = inner - term if (tau + nu + phi) % 2 else inner + term
                        acc = acc + e_bra * inner
            total = total + p1.weight * p2.weight * _PI_25 / (p * q * ad.sqrt(p + q)) * acc
    return total


# -- matrices ------------------------------------------------------------

def _as_matrix(rows):
    flat = [x for row in rows for x in row]
    dtype = object if any(isinstance(x, ad.Dual) for x in flat) else float
    return np.array(rows, dtype=dtype)


def _symmetric(n, fn):
    rows = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1):
            rows[i][j] = rows[j][i] = fn(i, j)
    return _as_matrix(rows)


def check_positive_definite(s, threshold: float = 1e-8):
    sp = ad.primal_array(s)
    w = np.linalg.eigvalsh(sp)
    if w[0] < threshold:
        off = np.abs(sp - np.diag(np.diag(sp)))
        i, j = np.unravel_index(np.argmax(off), off.shape)
        raise LinearDependenceError(
            f"overlap matrix is numerically singular (smallest eigenvalue {w[0]:.3e}); "
            f"basis functions {min(i, j)} and {max(i, j)} overlap by {sp[i, j]:.12f}"
        )


def overlap_matrix(molecule: Molecule, check: bool = True):
    bf = molecule.basis_functions
    s = _symmetric(len(bf), lambda i, j: _overlap_pair(_Pair(bf[i], bf[j])))
    if check:
        check_positive_definite(s)
    return s


def kinetic_matrix(molecule: Molecule):
    bf = molecule.basis_functions
    return _symmetric(len(bf), lambda i, j: _kinetic_pair(_Pair(bf[i], bf[j], extra=2)))


def _nuclei(molecule: Molecule, charges=None):
    charges = charges if charges is not None else molecule.nuclear_charges
    return [(z, a.position) for z, a in zip(charges, molecule.atoms)]


def attraction_matrix(molecule: Molecule, charges: Sequence[float] | None = None):
    """Electron-nuclear attraction; ``charges`` overrides the atomic numbers."""
    bf = molecule.basis_functions
    nuclei = _nuclei(molecule, charges)
    return _symmetric(len(bf), lambda i, j: _attraction_pair(_Pair(bf[i], bf[j]), nuclei))


def canonical_index(i: int, j: int, k: int, l: int) -> tuple[int, int, int, int]:
    """Lexicographically smallest of the eight real-orbital equivalents of (ij|kl)."""
    return min((i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
               (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i))


def unique_quartets(n: int) -> list[tuple[int, int, int, int]]:
    return sorted({canonical_index(i, j, k, l)
                   for i in range(n) for j in range(n) for k in range(n) for l in range(n)})


def repulsion_tensor(molecule: Molecule):
    """Dense (ij|kl) in chemist ordering: electron 1 in i, j; electron 2 in k, l."""
    bf = molecule.basis_functions
    n = len(bf)
    pairs = {}
    for i in range(n):
        for j in range(i + 1):
            pairs[i, j] = _Pair(bf[i], bf[j])
    values = {}
    for i in range(n):
        for j in range(i + 1):
            ij = i * (i + 1) // 2 + j
            for k in range(n):
                for l in range(k + 1):
                    if k * (k + 1) // 2 + l > ij:
                        continue
                    values[i, j, k, l] = _repulsion_quartet(pairs[i, j], pairs[k, l])
    dtype = object if any(isinstance(v, ad.Dual) for v in values.values()) else float
    eri = np.zeros((n, n, n, n), dtype=dtype)
    for (i, j, k, l), v in values.items():
        for idx in ((i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
                    (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i)):
            eri[idx] = v
    return eri


@dataclass
class IntegralTables:
    overlap: np.ndarray
    kinetic: np.ndarray
    attraction: np.ndarray
    repulsion: np.ndarray

    @property
    def core_hamiltonian(self):
        return self.kinetic + self.attraction

    def to_dict(self) -> dict:
        """JSON-ready dump: matrices row-major, tensor as canonical index/value pairs."""
        eri = ad.primal_array(self.repulsion)
        n = eri.shape[0]
        return {
            "overlap": ad.primal_array(self.overlap).tolist(),
            "kinetic": ad.primal_array(self.kinetic).tolist(),
            "attraction": ad.primal_array(self.attraction).tolist(),
            "repulsion": [[list(q), float(eri[q])] for q in unique_quartets(n)],
        }


def compute_integrals(molecule: Molecule) -> IntegralTables:
    return IntegralTables(
        overlap_matrix(molecule),
        kinetic_matrix(molecule),
        attraction_matrix(molecule),
        repulsion_tensor(molecule),
    )
