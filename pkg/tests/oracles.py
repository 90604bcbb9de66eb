"""Reference computations that share no code with the package kernels."""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate, optimize


def boys0_quadrature(x: float) -> float:
    return integrate.quad(lambda t: math.exp(-x * t * t), 0.0, 1.0, epsabs=1e-15, epsrel=1e-13)[0]


def s_shells(molecule):
    """(center, [(exponent, normalized weight)]) per basis function; s functions only."""
    out = []
    for bf in molecule.basis_functions:
        assert bf.angular_momentum == (0, 0, 0)
        prims = [(float(a), float(d) * (2 * float(a) / math.pi) ** 0.75)
                 for a, d in zip(bf.exponents, bf.coefficients)]
        # renormalize the contraction from scratch
        norm = sum(wa * wb * (math.pi / (a + b)) ** 1.5 for a, wa in prims for b, wb in prims)
        prims = [(a, w / math.sqrt(norm)) for a, w in prims]
        out.append((np.array(bf.center, dtype=float), prims))
    return out


def _contracted_value(shell, rho, z, axis_origin, axis):
    center, prims = shell
    # points on the plane containing the molecular axis
    offset = axis_origin + z * axis - center
    r2 = rho * rho + float(offset @ offset)
    return sum(w * math.exp(-a * r2) for a, w in prims)


def cylindrical_quadrature(f, zlim=12.0, rholim=10.0):
    """integral of f(rho, z) * 2 pi rho over a cylinder around the z axis."""
    val, _ = integrate.dblquad(lambda rho, z: 2 * math.pi * rho * f(rho, z), -zlim, zlim, 0.0, rholim,
                               epsabs=1e-12, epsrel=1e-10)
    return val


def diatomic_overlap_kinetic(molecule):
    """S and T for an all-s diatomic on the z axis by 2-D quadrature in (rho, z)."""
    shells = s_shells(molecule)
    zc = [sh[0][2] for sh in shells]
    mid = 0.5 * (min(zc) + max(zc))
    n = len(shells)
    S = np.zeros((n, n))
    T = np.zeros((n, n))

    def parts(shell, rho, z):
        center, prims = shell
        dz = z - center[2]
        r2 = rho * rho + dz * dz
        g = sum(w * math.exp(-a * r2) for a, w in prims)
        # gradient of an s Gaussian: -2 a (r - A) g
        grho = sum(-2 * a * rho * w * math.exp(-a * r2) for a, w in prims)
        gz = sum(-2 * a * dz * w * math.exp(-a * r2) for a, w in prims)
        return g, grho, gz

    for i in range(n):
        for j in range(i, n):
            def s_int(rho, z, i=i, j=j):
                return parts(shells[i], rho, z + mid)[0] * parts(shells[j], rho, z + mid)[0]

            def t_int(rho, z, i=i, j=j):
                _, ar, az = parts(shells[i], rho, z + mid)
                _, br, bz = parts(shells[j], rho, z + mid)
                return 0.5 * (ar * br + az * bz)

            S[i, j] = S[j, i] = cylindrical_quadrature(s_int)
            T[i, j] = T[j, i] = cylindrical_quadrature(t_int)
    return S, T


def attraction_s(molecule):
    shells = s_shells(molecule)
    n = len(shells)
    V = np.zeros((n, n))
    for i, j in itertools.product(range(n), repeat=2):
        (A, pa), (B, pb) = shells[i], shells[j]
        total = 0.0
        for a, wa in pa:
            for b, wb in pb:
                p = a + b
                P = (a * A + b * B) / p
                K = math.exp(-a * b / p * float((A - B) @ (A - B)))
                for atom in molecule.atoms:
                    C = np.array(atom.position, dtype=float)
                    total -= atom.atomic_number * wa * wb * 2 * math.pi / p * K * boys0_quadrature(
                        p * float((P - C) @ (P - C)))
        V[i, j] = total
    return V


def repulsion_s(molecule):
    shells = s_shells(molecule)
    n = len(shells)
    G = np.zeros((n, n, n, n))
    cache = {}
    for i, j, k, l in itertools.product(range(n), repeat=4):
        key = tuple(sorted([tuple(sorted((i, j))), tuple(sorted((k, l)))]))
        if key in cache:
            G[i, j, k, l] = cache[key]
            continue
        (A, pa), (B, pb), (C, pc), (D, pd) = shells[i], shells[j], shells[k], shells[l]
        total = 0.0
        for a, wa in pa:
            for b, wb in pb:
                p = a + b
                P = (a * A + b * B) / p
                Kab = math.exp(-a * b / p * float((A - B) @ (A - B)))
                for c, wc in pc:
                    for d, wd in pd:
                        q = c + d
                        Q = (c * C + d * D) / q
                        Kcd = math.exp(-c * d / q * float((C - D) @ (C - D)))
                        pref = 2 * math.pi ** 2.5 / (p * q * math.sqrt(p + q))
                        total += wa * wb * wc * wd * pref * Kab * Kcd * boys0_quadrature(
                            p * q / (p + q) * float((P - Q) @ (P - Q)))
        G[i, j, k, l] = cache[key] = total
    return G


def closed_shell_energy(C_occ, H, G):
    """2 sum_i h_ii + sum_ij (2 (ii|jj) - (ij|ji)) in the occupied MO basis."""
    h = C_occ.T @ H @ C_occ
    g = np.einsum("pi,qj,rk,sl,pqrs->ijkl", C_occ, C_occ, C_occ, C_occ, G, optimize=True)
    n = C_occ.shape[1]
    e = 2 * np.trace(h)
    for i in range(n):
        for j in range(n):
            e += 2 * g[i, i, j, j] - g[i, j, j, i]
    return e


def variational_hf_energy(S, H, G, n_occ, starts=5, seed=0):
    """Minimize the closed-shell energy over S-orthonormal occupied orbitals."""
    n = S.shape[0]
    w, V = np.linalg.eigh(S)
    X = V @ np.diag(w ** -0.5) @ V.T
    rng = np.random.default_rng(seed)

    def energy(flat):
        M = flat.reshape(n, n_occ)
        q, _ = np.linalg.qr(M)  # orthonormal columns in the orthogonalized basis
        return closed_shell_energy(X @ q, H, G)

    best = math.inf
    for _ in range(starts):
        res = optimize.minimize(energy, rng.normal(size=n * n_occ), method="BFGS",
                                options={"gtol": 1e-12, "maxiter": 5000})
        best = min(best, res.fun)
    return best


# -- occupation-basis fermion operators ----------------------------------------

def ladder_matrix(p: int, n: int, dagger: bool) -> np.ndarray:
    """a_p or a+_p acting on occupation-number states; qubit 0 is the leftmost bit."""
    dim = 2 ** n
    M = np.zeros((dim, dim))
    for idx in range(dim):
        occ = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
        if occ[p] == (0 if dagger else 1):
            sign = (-1) ** sum(occ[:p])
            new = list(occ)
            new[p] = 1 - occ[p]
            j = sum(b << (n - 1 - q) for q, b in enumerate(new))
            M[j, idx] = sign
    return M


def fermion_matrix(op) -> np.ndarray:
    n = op.n_modes
    dim = 2 ** n
    total = np.zeros((dim, dim), dtype=complex)
    for c, factors in op.terms:
        m = np.eye(dim)
        for p, dagger in factors:
            m = m @ ladder_matrix(p, n, dagger)
        total += complex(c) * m
    return total


def pauli_dense(word, n: int) -> np.ndarray:
    mats = {"I": np.eye(2), "X": np.array([[0, 1], [1, 0]]), "Y": np.array([[0, -1j], [1j, 0]]),
            "Z": np.diag([1.0, -1.0])}
    letters = dict(word.ops)
    out = np.array([[1.0 + 0j]])
    for q in range(n):
        out = np.kron(out, mats[letters.get(q, "I")])
    return out


def pauli_sum_dense(ps) -> np.ndarray:
    dim = 2 ** ps.n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    for c, w in ps.terms:
        out += complex(c) * pauli_dense(w, ps.n_qubits)
    return out


# -- Cartesian Gaussians by Gauss-Hermite quadrature ------------------------------

def _gh_1d(a, A, l, b, B, m, deriv=False):
    """1-D integral of (x-A)^l e^{-a(x-A)^2} * g_m(x) where g_m is (x-B)^m e^{-b(x-B)^2}
    or, with ``deriv``, its second derivative.  Gauss-Hermite is exact here."""
    p = a + b
    P = (a * A + b * B) / p
    K = math.exp(-a * b / p * (A - B) ** 2)
    t, w = np.polynomial.hermite.hermgauss(20)
    x = P + t / math.sqrt(p)
    left = (x - A) ** l
    if deriv:
        u = x - B
        right = (m * (m - 1) * u ** (m - 2) if m >= 2 else 0.0) - 2 * b * (2 * m + 1) * u ** m + 4 * b * b * u ** (m + 2)
    else:
        right = (x - B) ** m
    return K * float(np.sum(w * left * right)) / math.sqrt(p)


def _prim_norm(a, lmn):
    from math import factorial

    def dfact(n):
        return 1 if n <= 0 else n * dfact(n - 2)
    L = sum(lmn)
    return (2 * a / math.pi) ** 0.75 * (4 * a) ** (L / 2) / math.sqrt(
        dfact(2 * lmn[0] - 1) * dfact(2 * lmn[1] - 1) * dfact(2 * lmn[2] - 1))


def cartesian_overlap_kinetic(bi, bj):
    """Contracted overlap and kinetic integrals of arbitrary Cartesian functions."""
    def prim_pair(a, A, la, b, B, lb):
        s = [_gh_1d(a, A[k], la[k], b, B[k], lb[k]) for k in range(3)]
        d = [_gh_1d(a, A[k], la[k], b, B[k], lb[k], deriv=True) for k in range(3)]
        S = s[0] * s[1] * s[2]
        T = -0.5 * (d[0] * s[1] * s[2] + s[0] * d[1] * s[2] + s[0] * s[1] * d[2])
        return S, T

    def contracted(bf):
        return [(float(a), float(c) * _prim_norm(float(a), bf.angular_momentum))
                for a, c in zip(bf.exponents, bf.coefficients)]

    A = [float(v) for v in bi.center]
    B = [float(v) for v in bj.center]
    ci, cj = contracted(bi), contracted(bj)

    def total(x, y, idx):
        return sum(wa * wb * prim_pair(a, x[2], x[1], b, y[2], y[1])[idx]
                   for a, wa in x[0] for b, wb in y[0])

    ni = total((ci, bi.angular_momentum, A), (ci, bi.angular_momentum, A), 0) ** -0.5
    nj = total((cj, bj.angular_momentum, B), (cj, bj.angular_momentum, B), 0) ** -0.5
    S = ni * nj * total((ci, bi.angular_momentum, A), (cj, bj.angular_momentum, B), 0)
    T = ni * nj * total((ci, bi.angular_momentum, A), (cj, bj.angular_momentum, B), 1)
    return S, T
