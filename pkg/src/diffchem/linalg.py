"""Small dense linear algebra that stays differentiable.

Matrices are numpy arrays of dtype float, or dtype object when they hold
Duals.  The symmetric eigensolver is cyclic Jacobi, built only from
arithmetic, ``sqrt`` and primal comparisons, so tangents flow through it.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad

DEGENERACY_GAP = 1e-10


def as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=object)
    if any(isinstance(x, ad.Dual) for x in a.flat):
        return a
    return a.astype(float)


def matmul(a, b):
    return np.dot(a, b)


def max_magnitude(a) -> float:
    """max over entries of :func:`autodiff.magnitude` (primal and tangents)."""
    a = np.asarray(a)
    if a.dtype != object:
        return float(np.max(np.abs(a))) if a.size else 0.0
    return max((ad.magnitude(x) for x in a.flat), default=0.0)


def jacobi_eigh(a, max_sweeps: int = 60, tol: float = 1e-15):
    """Eigen-decomposition of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors, degenerate)`` with eigenvalues
    ascending, eigenvectors as columns whose largest-magnitude component
    is positive (ties within 1e-12 go to the lowest index), and
    ``degenerate`` set when two eigenvalues lie closer than 1e-10.

    Rotations are applied whenever the primal diagonal gap is resolvable,
    even if the primal off-diagonal already vanished, so off-diagonal
    tangents are driven to zero as well.  Exactly degenerate pairs with a
    vanishing coupling are left alone.
    """
    n = a.shape[0]
    m = [[a[i, j] for j in range(n)] for i in range(n)]
    v = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    scale = max(max_magnitude(a), 1e-300)
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p][q]
                d = m[q][q] - m[p][p]
                gap = abs(ad.primal(d))
                coupling = abs(ad.primal(apq))
                if gap <= DEGENERACY_GAP * scale:
                    if coupling <= 1e-14 * scale:
                        continue
                    # degenerate diagonal: a 45 degree rotation
                    t = apq / abs(apq)
                else:
                    off = max(off, ad.magnitude(apq) if ad.is_dual(apq) else coupling)
                    t = 2.0 * apq / (abs(d) + ad.sqrt(d * d + 4.0 * apq * apq))
                    if ad.primal(d) < 0:
                        t = -t
                c = 1.0 / ad.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    mkp, mkq = m[k][p], m[k][q]
                    m[k][p] = c * mkp - s * mkq
                    m[k][q] = s * mkp + c * mkq
                for k in range(n):
                    mpk, mqk = m[p][k], m[q][k]
                    m[p][k] = c * mpk - s * mqk
                    m[q][k] = s * mpk + c * mqk
                for k in range(n):
                    vkp, vkq = v[k][p], v[k][q]
                    v[k][p] = c * vkp - s * vkq
                    v[k][q] = s * vkp + c * vkq
        if off <= tol * scale:
            break
    evals = [m[i][i] for i in range(n)]
    order = sorted(range(n), key=lambda i: ad.primal(evals[i]))
    evals = [evals[i] for i in order]
    vecs = [[v[k][i] for i in order] for k in range(n)]
    for col in range(n):
        mags = [abs(ad.primal(vecs[k][col])) for k in range(n)]
        top = max(mags)
        lead = next(k for k in range(n) if mags[k] >= top - 1e-12 * max(top, 1.0))
        if ad.primal(vecs[lead][col]) < 0:
            for k in range(n):
                vecs[k][col] = -vecs[k][col]
    primal_evals = [ad.primal(e) for e in evals]
    degenerate = any(
        primal_evals[i + 1] - primal_evals[i] < DEGENERACY_GAP * max(1.0, scale) for i in range(n - 1)
    )
    return as_matrix(evals), as_matrix(vecs), degenerate
