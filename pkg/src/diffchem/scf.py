"""Restricted closed-shell Hartree-Fock.

The density matrix here excludes the spin factor, ``P = C_occ C_occ^T``,
so the electronic energy is ``sum P * (2 H + 2 J - K)`` and the Fock matrix
is ``H + 2 J - K``.  The iteration starts from a zero coefficient matrix and
is plain fixed-point (no DIIS); it is unrolled, so Duals entering through
the molecule come out as exact derivatives of the converged energy.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConvergenceError, LinearDependenceError, SingularGeometryError
from .integrals import IntegralTables, compute_integrals
from .linalg import jacobi_eigh, max_magnitude
from .molecule import Atom, Molecule

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SCFConfig:
    max_iterations: int = 200
    tol_P: float = 1e-10
    tol_E: float = 1e-12
    mixing: float = 0.0  # fraction of the previous density kept each step


@dataclass
class SCFState:
    C: np.ndarray
    P: np.ndarray
    F: np.ndarray
    orbital_energies: np.ndarray
    iteration: int
    delta_P: float
    delta_E: float


@dataclass
class SCFResult:
    state: SCFState
    electronic_energy: object
    nuclear_repulsion: object
    total_energy: object
    iterations_used: int
    degenerate: bool = False
    warnings: list[str] = field(default_factory=list)

    @property
    def orbital_energies(self) -> np.ndarray:
        return ad.primal_array(self.state.orbital_energies)


def core_hamiltonian(molecule: Molecule, tables: IntegralTables | None = None):
    if tables is None:
        from .integrals import attraction_matrix, kinetic_matrix
        return kinetic_matrix(molecule) + attraction_matrix(molecule)
    return tables.kinetic + tables.attraction


def coulomb_exchange(P, eri):
    """J_mn = sum_ls P_ls (mn|ls),  K_mn = sum_ls P_ls (ml|ns)."""
    P = np.asarray(P)
    J = np.tensordot(eri, P, axes=([2, 3], [0, 1]))
    K = np.tensordot(eri, P, axes=([1, 3], [0, 1]))
    return J, K


def fock_matrix(H_core, J, K):
    return H_core + 2.0 * J - K


def electronic_energy(P, H_core, J, K):
    return np.sum(np.asarray(P) * (2.0 * H_core + 2.0 * J - K))


def energy_from_density(P, H_core, eri):
    J, K = coulomb_exchange(P, eri)
    return electronic_energy(P, H_core, J, K)


def orthogonalizer(S, threshold: float = 1e-8):
    """Symmetric orthogonalizer X = V D^(-1/2) V^T, so that X^T S X = I."""
    evals, V, _ = jacobi_eigh(np.asarray(S))
    smallest = ad.primal(evals[0])
    if smallest < threshold:
        raise LinearDependenceError(f"overlap eigenvalue {smallest:.3e} below {threshold:.0e}")
    inv_root = np.array([e ** -0.5 for e in evals], dtype=evals.dtype)
    return np.dot(V * inv_root, V.T)


def nuclear_repulsion(atoms: list[Atom] | tuple[Atom, ...], charges=None):
    charges = charges if charges is not None else [a.atomic_number for a in atoms]
    total = 0.0
    for i in range(len(atoms)):
        for j in range(i):
            d2 = sum((atoms[i].position[k] - atoms[j].position[k]) ** 2 for k in range(3))
            if ad.primal(d2) < 1e-20:
                raise SingularGeometryError(f"atoms {j} and {i} coincide")
            total = total + charges[i] * charges[j] / ad.sqrt(d2)
    return total


def scf_solve(molecule: Molecule, config: SCFConfig | None = None,
              tables: IntegralTables | None = None) -> SCFResult:
    config = config or SCFConfig()
    tables = tables or compute_integrals(molecule)
    n_occ = molecule.n_electrons // 2
    H = core_hamiltonian(molecule, tables)
    eri = tables.repulsion
    X = orthogonalizer(tables.overlap)
    n = H.shape[0]

    P = np.zeros((n, n))
    E_prev = None
    delta_P = delta_E = float("inf")
    best_dP, stalled = float("inf"), 0
    converged = False
    notes = []
    for it in range(1, config.max_iterations + 1):
        J, K = coulomb_exchange(P, eri)
        F = fock_matrix(H, J, K)
        E = electronic_energy(P, H, J, K)
        eps, Ct, degenerate = jacobi_eigh(np.dot(X.T, np.dot(F, X)))
        C = np.dot(X, Ct)
        occ = C[:, :n_occ]
        P_new = np.dot(occ, occ.T)
        if config.mixing:
            P_new = (1.0 - config.mixing) * P_new + config.mixing * P
        # tangents of P must settle too, or derivatives would be truncated
        diff = P_new - P
        delta_P = max_magnitude(diff)
        primal_dP = max_magnitude(ad.primal_array(diff))
        delta_E = abs(ad.primal(E) - ad.primal(E_prev)) if E_prev is not None else float("inf")
        P, E_prev = P_new, E
        if delta_P < config.tol_P and delta_E < config.tol_E:
            converged = True
            break
        # near-degenerate orbitals amplify roundoff in the tangents, which
        # then plateau above tol_P while the primal is fully converged
        if delta_P < 0.5 * best_dP:
            best_dP, stalled = delta_P, 0
        else:
            stalled += 1
        if primal_dP < config.tol_P and delta_E < config.tol_E and stalled >= 10 and delta_P < 1e-6:
            notes.append(f"density tangents stalled at {delta_P:.2e}; derivatives carry that error")
            log.info(notes[-1])
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"SCF not converged after {config.max_iterations} iterations "
            f"(max|dP| = {delta_P:.3e}, |dE| = {delta_E:.3e})", delta_P, delta_E)

    J, K = coulomb_exchange(P, eri)
    F = fock_matrix(H, J, K)
    e_elec = electronic_energy(P, H, J, K)
    e_nuc = nuclear_repulsion(molecule.atoms)
    if degenerate:
        msg = "degenerate orbital energies at convergence; orbital derivatives are not reliable"
        notes.append(msg)
        if isinstance(e_elec, ad.Dual):
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    log.debug("SCF converged in %d iterations, E = %.12f", it, ad.primal(e_elec + e_nuc))
    state = SCFState(C, P, F, eps, it, delta_P, delta_E)
    return SCFResult(state, e_elec, e_nuc, e_elec + e_nuc, it, degenerate, notes)


def hf_energy(molecule: Molecule, config: SCFConfig | None = None):
    """Total Hartree-Fock energy; differentiable when the molecule holds Duals."""
    return scf_solve(molecule, config).total_energy
