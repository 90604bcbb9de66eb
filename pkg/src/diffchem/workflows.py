"""Variational algorithms built on the differentiable Hamiltonian.

The energy is ``E(theta, x) = sum_j h_j(x) <P_j>_theta`` where ``h_j`` are
Pauli coefficients (differentiable in the molecular parameters ``x`` by
forward-mode autodiff) and ``<P_j>`` are word expectations of the circuit
state (differentiable in ``theta`` by the shift rule).  Every workflow
below combines those two derivative sources.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .circuits import (Circuit, StateVector, all_singles_doubles, energy_function, expectation,
                       parameter_shift_gradient, run, shift_rule, state_overlap)
from .errors import ContractError, DivergenceError, InputError, SingularGeometryError
from .hamiltonian import (PauliSum, PauliWord, SparseHamiltonian, molecular_hamiltonian, to_sparse,
                          word_expectation)
from .molecule import DiffFlags, Molecule, pack_parameters, unpack_parameters, with_coordinates
from .scf import SCFConfig

log = logging.getLogger(__name__)

DIVERGENCE_MARGIN = 10.0


# -- VQE -------------------------------------------------------------------

@dataclass(frozen=True)
class VQEConfig:
    step: float = 0.1
    tol: float = 1e-7
    max_steps: int = 500


@dataclass
class VQEResult:
    optimal_parameters: np.ndarray
    energy: float
    iterations: int
    energy_history: list[float]
    gradient_norm_final: float
    converged: bool
    cost: float | None = None  # penalized cost, excited-state runs only


def _descend(cost, grad, theta0, config: VQEConfig):
    theta = np.asarray(theta0, dtype=float).copy()
    value = cost(theta)
    start = value
    history = [value]
    g = grad(theta)
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    steps = 0
    while gnorm >= config.tol and steps < config.max_steps:
        theta = theta - config.step * g
        value = cost(theta)
        steps += 1
        history.append(value)
        if not math.isfinite(value) or value > start + DIVERGENCE_MARGIN:
            raise DivergenceError(
                f"cost rose from {start:.6f} to {value:.6f} after {steps} steps; try a smaller step")
        g = grad(theta)
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    return theta, value, steps, history, gnorm, gnorm < config.tol


def vqe_minimize(H: SparseHamiltonian, circuit: Circuit, theta0=None, config: VQEConfig | None = None,
                 initial_state: StateVector | None = None) -> VQEResult:
    """Fixed-step gradient descent on <psi(theta)|H|psi(theta)>."""
    config = config or VQEConfig()
    theta0 = np.zeros(circuit.n_parameters) if theta0 is None else np.asarray(theta0, dtype=float)
    if theta0.size != circuit.n_parameters:
        raise InputError(f"theta0 has {theta0.size} entries, circuit takes {circuit.n_parameters}")
    f = energy_function(circuit, H, initial_state)
    theta, value, steps, history, gnorm, ok = _descend(
        f, lambda t: parameter_shift_gradient(circuit, t, H, initial_state), theta0, config)
    return VQEResult(theta, value, steps, history, gnorm, ok)


@dataclass
class PenaltySpec:
    lower_states: list[StateVector]
    betas: list[float]

    def __post_init__(self):
        if len(self.lower_states) != len(self.betas):
            raise InputError("one beta per penalized state is required")
        if any(b <= 0 for b in self.betas):
            raise InputError("penalty weights must be positive")
        for s in self.lower_states:
            if abs(s.norm() - 1.0) > 1e-10:
                raise InputError("penalized states must be normalized")


def default_penalty(H: SparseHamiltonian, states: Sequence[StateVector]) -> PenaltySpec:
    beta = 2.0 * H.gershgorin_bound()
    return PenaltySpec(list(states), [beta] * len(states))


def excited_state_minimize(H: SparseHamiltonian, circuit: Circuit, theta0, penalty: PenaltySpec,
                           config: VQEConfig | None = None,
                           initial_state: StateVector | None = None) -> VQEResult:
    """Minimize <H> + sum_i beta_i |<psi|psi_i>|^2; report <H> and the cost."""
    config = config or VQEConfig()
    theta0 = np.asarray(theta0, dtype=float)

    def cost(theta):
        psi = run(circuit, theta, initial_state)
        value = expectation(psi, H)
        for phi, beta in zip(penalty.lower_states, penalty.betas):
            value += beta * state_overlap(phi, psi)
        return value

    theta, value, steps, history, gnorm, ok = _descend(cost, lambda t: shift_rule(cost, t), theta0, config)
    energy = expectation(run(circuit, theta, initial_state), H)
    return VQEResult(theta, energy, steps, history, gnorm, ok, cost=value)


# -- sector utilities --------------------------------------------------------

def sector_indices(n_qubits: int, n_electrons: int, spin_balanced: bool = True) -> np.ndarray:
    """Basis indices with the given electron count (and equal alpha/beta counts)."""
    idx = np.arange(2 ** n_qubits)
    alpha = beta = 0
    for q in range(n_qubits):
        bit = 1 << (n_qubits - 1 - q)
        if q % 2 == 0:
            alpha = alpha | bit
        else:
            beta = beta | bit
    keep = np.bitwise_count(idx) == n_electrons
    if spin_balanced:
        keep &= np.bitwise_count(idx & alpha) == np.bitwise_count(idx & beta)
    return idx[keep]


def sector_eigenvalues(H: SparseHamiltonian, n_electrons: int, spin_balanced: bool = True) -> np.ndarray:
    sel = sector_indices(H.n_qubits, n_electrons, spin_balanced)
    block = H.matrix[sel][:, sel].toarray()
    return np.linalg.eigvalsh(block)


# -- Hamiltonian derivatives ---------------------------------------------------

_FLAG_NAMES = ("coordinates", "coefficients", "exponents")


def _flagged(molecule: Molecule, classes: Iterable[str]) -> Molecule:
    classes = set(classes)
    unknown = classes - set(_FLAG_NAMES)
    if unknown:
        raise InputError(f"unknown parameter classes {sorted(unknown)}")
    return replace(molecule, diff_flags=DiffFlags(**{k: k in classes for k in _FLAG_NAMES}))


@dataclass
class CoefficientDerivatives:
    words: list[PauliWord]
    n_qubits: int
    values: np.ndarray            # (W,)
    gradient: np.ndarray          # (W, P)
    hessian: np.ndarray | None    # (W, P, P) when order == 2
    hamiltonian: PauliSum
    molecule: Molecule


def coefficient_derivatives(molecule: Molecule, classes: Iterable[str] = ("coordinates",),
                            order: int = 1, scf_config: SCFConfig | None = None) -> CoefficientDerivatives:
    """Pauli coefficients and their derivatives w.r.t. the selected parameters."""
    mol = _flagged(molecule, classes)
    x0 = pack_parameters(mol).as_array()
    P = x0.size
    mode = "hessian" if order == 2 else "gradient"
    seeded = ad.seed(x0, ad.DiffConfig(max(P, 1), mode))
    built = molecular_hamiltonian(mol, seeded, scf_config, prune=False)
    terms = built.hamiltonian.terms
    W = len(terms)
    values = np.zeros(W)
    grad = np.zeros((W, P))
    hess = np.zeros((W, P, P)) if order == 2 else None
    for k, (c, _) in enumerate(terms):
        ad._check_finite(c)
        values[k] = ad.primal(c)
        if not ad.is_dual(c):
            continue
        grad[k] = ad.tangent_vector(c, P)
        if order == 2:
            for j, t in enumerate(c.tangents):
                if ad.is_dual(t):
                    hess[k, j] = ad.tangent_vector(t, P)
    if hess is not None:
        hess = 0.5 * (hess + np.transpose(hess, (0, 2, 1)))
    primal_terms = tuple((float(v), w) for v, (_, w) in zip(values, terms))
    ps = PauliSum(primal_terms, built.n_qubits, ad.primal(built.hamiltonian.constant))
    return CoefficientDerivatives([w for _, w in terms], built.n_qubits, values, grad, hess, ps, mol)


def word_expectations(words: Sequence[PauliWord], state: StateVector) -> np.ndarray:
    return np.array([word_expectation(w, state.amplitudes, state.n_qubits) for w in words])


def _state_function(circuit, initial_state):
    return lambda theta: run(circuit, theta, initial_state)


def _stationarity(circuit, theta, H, initial_state) -> float:
    g = parameter_shift_gradient(circuit, theta, H, initial_state)
    return float(np.max(np.abs(g))) if g.size else 0.0


# -- forces ------------------------------------------------------------------

def nuclear_forces(molecule: Molecule, theta, circuit: Circuit, initial_state: StateVector | None = None,
                   stationarity_tol: float = 1e-6, scf_config: SCFConfig | None = None) -> np.ndarray:
    """Hellmann-Feynman forces -dE/dR with the circuit state held fixed."""
    deriv = coefficient_derivatives(molecule, ("coordinates",), 1, scf_config)
    psi = run(circuit, theta, initial_state)
    w = word_expectations(deriv.words, psi)
    gnorm = _stationarity(circuit, theta, to_sparse(deriv.hamiltonian), initial_state)
    if gnorm > stationarity_tol:
        warnings.warn(f"circuit gradient {gnorm:.2e} is not stationary; Hellmann-Feynman forces are approximate",
                      RuntimeWarning, stacklevel=2)
    return -(w @ deriv.gradient)


# -- scans -------------------------------------------------------------------

@dataclass
class ScanPoint:
    coordinates: np.ndarray
    energy: float | None
    parameters: np.ndarray | None = None
    error: str | None = None


def bond_geometries(molecule: Molecule, i: int, j: int, distances: Sequence[float]) -> list[np.ndarray]:
    """Geometries with atom j moved along the i->j axis to each distance."""
    xyz = molecule.coordinates
    axis = xyz[j] - xyz[i]
    norm = np.linalg.norm(axis)
    if norm < 1e-12:
        raise SingularGeometryError(f"atoms {i} and {j} coincide")
    axis = axis / norm
    out = []
    for d in distances:
        g = xyz.copy()
        g[j] = xyz[i] + d * axis
        out.append(g)
    return out


def pes_scan(molecule: Molecule, geometries: Sequence, config: VQEConfig | None = None,
             warm_start: bool = True, scf_config: SCFConfig | None = None) -> list[ScanPoint]:
    points = []
    theta = None
    for coords in geometries:
        coords = np.asarray(coords, dtype=float)
        try:
            mol = with_coordinates(molecule, coords)
            built = molecular_hamiltonian(mol, scf_config=scf_config)
            circuit = all_singles_doubles(mol.n_electrons, built.n_qubits)
            start = theta if (warm_start and theta is not None) else np.zeros(circuit.n_parameters)
            res = vqe_minimize(to_sparse(built.hamiltonian), circuit, start, config)
            theta = res.optimal_parameters
            points.append(ScanPoint(coords, res.energy, theta))
        except Exception as exc:  # recorded per point, scan continues
            log.warning("scan point failed: %s", exc)
            points.append(ScanPoint(coords, None, None, f"{type(exc).__name__}: {exc}"))
    if points and all(p.energy is None for p in points):
        raise ContractError(f"every scan point failed; first error: {points[0].error}")
    return points


# -- joint optimization ----------------------------------------------------------

@dataclass(frozen=True)
class JointConfig:
    circuit_step: float = 0.1
    coordinate_step: float = 0.05
    exponent_step: float = 0.01
    coefficient_step: float = 0.01
    circuit_steps_per_round: int = 10
    tol: float = 1e-5
    max_rounds: int = 200


@dataclass
class JointResult:
    parameters: np.ndarray
    molecule: Molecule
    energy: float
    rounds: int
    energy_trace: list[float]
    gradient_norms: dict[str, float]
    converged: bool


_STEP_FIELD = {"coordinates": "coordinate_step", "exponents": "exponent_step",
               "coefficients": "coefficient_step"}
_LAYOUT_KIND = {"coordinates": "coordinate", "exponents": "exponent", "coefficients": "coefficient"}


def joint_optimize(molecule: Molecule, circuit: Circuit, theta0=None, what: Iterable[str] = ("circuit",),
                   config: JointConfig | None = None, initial_state: StateVector | None = None,
                   scf_config: SCFConfig | None = None) -> JointResult:
    """Alternating gradient descent over circuit and Hamiltonian parameters."""
    config = config or JointConfig()
    what = set(what)
    if not what:
        raise InputError("select at least one parameter class")
    classes = sorted(what - {"circuit"})
    _flagged(molecule, classes)
    theta = np.zeros(circuit.n_parameters) if theta0 is None else np.asarray(theta0, dtype=float).copy()

    if classes == []:
        built = molecular_hamiltonian(molecule, scf_config=scf_config)
        vconf = VQEConfig(config.circuit_step, config.tol, config.max_rounds * config.circuit_steps_per_round)
        res = vqe_minimize(to_sparse(built.hamiltonian), circuit, theta, vconf, initial_state)
        return JointResult(res.optimal_parameters, molecule, res.energy, res.iterations, res.energy_history,
                           {"circuit": res.gradient_norm_final}, res.converged)

    mol = _flagged(molecule, classes)
    trace: list[float] = []
    norms: dict[str, float] = {}
    start_energy = None
    converged = False
    rounds = 0
    for rounds in range(1, config.max_rounds + 1):
        deriv = coefficient_derivatives(mol, classes, 1, scf_config)
        H = to_sparse(deriv.hamiltonian)
        if "circuit" in what:
            for _ in range(config.circuit_steps_per_round):
                g = parameter_shift_gradient(circuit, theta, H, initial_state)
                if g.size == 0 or np.max(np.abs(g)) < config.tol:
                    break
                theta = theta - config.circuit_step * g
            g = parameter_shift_gradient(circuit, theta, H, initial_state)
            norms["circuit"] = float(np.max(np.abs(g))) if g.size else 0.0
        psi = run(circuit, theta, initial_state)
        w = word_expectations(deriv.words, psi)
        energy = float(w @ deriv.values)
        trace.append(energy)
        start_energy = energy if start_energy is None else start_energy
        if not math.isfinite(energy) or energy > start_energy + DIVERGENCE_MARGIN:
            raise DivergenceError(f"energy rose to {energy:.6f}; try smaller steps")
        grad_x = w @ deriv.gradient
        layout = pack_parameters(mol)
        x = layout.as_array()
        for cls in classes:
            idx = layout.indices(_LAYOUT_KIND[cls])
            norms[cls] = float(np.max(np.abs(grad_x[idx]))) if idx else 0.0
        if all(v < config.tol for v in norms.values()):
            converged = True
            break
        for cls in classes:
            idx = layout.indices(_LAYOUT_KIND[cls])
            x[idx] -= getattr(config, _STEP_FIELD[cls]) * grad_x[idx]
        mol = unpack_parameters(mol, x)
    final = replace(mol, diff_flags=molecule.diff_flags)
    return JointResult(theta, final, trace[-1], rounds, trace, norms, converged)


# -- Hessian and normal modes -------------------------------------------------------

@dataclass
class HessianResult:
    hessian: np.ndarray
    response_solutions: np.ndarray   # d theta* / dR, shape (n_params, 3N)
    frequencies_squared: np.ndarray
    modes: np.ndarray
    asymmetry: float = 0.0
    response_residual: float = 0.0
    singular: bool = False
    parts: dict = field(default_factory=dict)


def energy_hessian(molecule: Molecule, circuit: Circuit, theta, initial_state: StateVector | None = None,
                   stationarity_tol: float = 1e-7, scf_config: SCFConfig | None = None) -> HessianResult:
    """Nuclear Hessian with the circuit parameters relaxed through the response equations.

    The explicit part is <psi|d2H/dRidRj|psi>; the relaxation part couples
    the mixed derivatives d/dtheta <dH/dR> through the circuit-parameter
    Hessian.
    """
    theta = np.asarray(theta, dtype=float)
    deriv = coefficient_derivatives(molecule, ("coordinates",), 2, scf_config)
    H = to_sparse(deriv.hamiltonian)
    gnorm = _stationarity(circuit, theta, H, initial_state)
    if gnorm > stationarity_tol:
        raise ContractError(f"circuit gradient {gnorm:.2e} exceeds {stationarity_tol:.0e}; optimize theta first")

    def wfun(t):
        return word_expectations(deriv.words, run(circuit, t, initial_state))

    w = wfun(theta)
    explicit = np.einsum("j,jab->ab", w, deriv.hessian)
    n = circuit.n_parameters
    P = deriv.gradient.shape[1]
    singular = False
    residual = 0.0
    if n:
        dw = shift_rule(wfun, theta)                       # (n, W)
        mixed = dw @ deriv.gradient                        # (n, P)
        d2w = shift_rule(lambda t: shift_rule(wfun, t), theta)  # (n, n, W)
        h_tt = d2w @ deriv.values
        h_tt = 0.5 * (h_tt + h_tt.T)
        evals = np.linalg.eigvalsh(h_tt)
        if np.min(np.abs(evals)) < 1e-10:
            singular = True
            response = np.linalg.lstsq(h_tt, -mixed, rcond=1e-10)[0]
        else:
            response = np.linalg.solve(h_tt, -mixed)
        rhs = np.linalg.norm(mixed)
        residual = float(np.linalg.norm(h_tt @ response + mixed) / rhs) if rhs > 0 else 0.0
        relaxation = response.T @ mixed
    else:
        response = np.zeros((0, P))
        relaxation = np.zeros((P, P))
    raw = explicit + relaxation
    asym = float(np.max(np.abs(raw - raw.T)))
    hess = 0.5 * (raw + raw.T)
    freq2, modes = normal_modes_raw(hess)
    return HessianResult(hess, response, freq2, modes, asym, residual, singular,
                         {"explicit": explicit, "relaxation": relaxation})


def normal_modes_raw(hessian: np.ndarray, masses: Sequence[float] | None = None):
    h = np.asarray(hessian, dtype=float)
    if masses is not None:
        m = np.repeat(np.asarray(masses, dtype=float), 3)
        if m.size != h.shape[0]:
            raise InputError("one mass per atom is required")
        scale = 1.0 / np.sqrt(m)
        h = h * np.outer(scale, scale)
    return np.linalg.eigh(0.5 * (h + h.T))


@dataclass
class NormalModes:
    frequencies_squared: np.ndarray
    frequencies: np.ndarray    # signed: negative entries are imaginary frequencies
    modes: np.ndarray
    imaginary: list[int]


def normal_modes(result: HessianResult | np.ndarray, masses: Sequence[float] | None = None) -> NormalModes:
    """Eigen-decomposition of the (optionally mass-weighted) Hessian.

    Args:
        result: a HessianResult or a bare symmetric matrix (hartree/bohr^2).
        masses: per-atom masses; pass electron masses for frequencies in
            atomic units.  Without masses the plain energy Hessian is used.

    Returns:
        NormalModes with eigenvalues ascending and modes as columns.
    """
    h = result.hessian if isinstance(result, HessianResult) else result
    freq2, modes = normal_modes_raw(h, masses)
    freqs = np.sign(freq2) * np.sqrt(np.abs(freq2))
    return NormalModes(freq2, freqs, modes, [int(k) for k in np.flatnonzero(freq2 < 0)])


def vqe_for_molecule(molecule: Molecule, theta0=None, config: VQEConfig | None = None,
                     scf_config: SCFConfig | None = None):
    """Build the Hamiltonian and all-singles-doubles circuit, then run VQE."""
    built = molecular_hamiltonian(molecule, scf_config=scf_config)
    circuit = all_singles_doubles(molecule.n_electrons, built.n_qubits)
    H = to_sparse(built.hamiltonian)
    return vqe_minimize(H, circuit, theta0, config), circuit, H, built
