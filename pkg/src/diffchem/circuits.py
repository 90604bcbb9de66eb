"""Statevector simulation of particle-conserving excitation circuits.

Qubit 0 is the most significant bit of an amplitude index, and qubit k
holds the occupation of spin orbital k.  Gates act in place on the
amplitude vector through precomputed index sets, so no 2^n x 2^n matrix
is ever formed.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InputError, NonHermitianError, UnsupportedGradientError
from .hamiltonian import SparseHamiltonian

KINDS = {"BasisState": None, "PauliX": 1, "SingleExcitation": 2, "DoubleExcitation": 4}
SHIFTABLE = ("SingleExcitation", "DoubleExcitation")
IMAG_TOLERANCE = 1e-10

_C_PLUS = (math.sqrt(2) + 1) / (4 * math.sqrt(2))
_C_MINUS = (math.sqrt(2) - 1) / (4 * math.sqrt(2))
SHIFT_TERMS = (
    (math.pi / 2, _C_PLUS), (-math.pi / 2, -_C_PLUS),
    (3 * math.pi / 2, -_C_MINUS), (-3 * math.pi / 2, _C_MINUS),
)


@dataclass
class StateVector:
    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2 ** self.n_qubits,):
            raise InputError(f"expected {2 ** self.n_qubits} amplitudes, got {self.amplitudes.shape}")

    @classmethod
    def basis(cls, occupied: Sequence[int], n_qubits: int) -> "StateVector":
        amps = np.zeros(2 ** n_qubits, dtype=complex)
        amps[_occupation_index(occupied, n_qubits)] = 1.0
        return cls(amps, n_qubits)

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.n_qubits)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _occupation_index(occupied: Sequence[int], n_qubits: int) -> int:
    index = 0
    for q in occupied:
        if not 0 <= q < n_qubits:
            raise InputError(f"qubit {q} outside 0..{n_qubits - 1}")
        index |= 1 << (n_qubits - 1 - q)
    return index


@dataclass(frozen=True)
class GateOp:
    """One gate.  ``BasisState`` resets the register to the basis state with
    exactly ``wires`` occupied; the excitation kinds read ``param``."""

    kind: str
    wires: tuple[int, ...]
    param: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        width = KINDS[self.kind]
        if width is not None and len(self.wires) != width:
            raise InputError(f"{self.kind} takes {width} wires, got {len(self.wires)}")
        if len(set(self.wires)) != len(self.wires):
            raise InputError(f"{self.kind} wires must be distinct: {self.wires}")
        if (self.param is not None) != (self.kind in SHIFTABLE):
            raise InputError(f"{self.kind} parameter slot mismatch")


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[GateOp, ...] = ()
    n_parameters: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if any(not 0 <= w < self.n_qubits for w in g.wires):
                raise InputError(f"gate {g} exceeds {self.n_qubits} qubits")
            if g.param is not None and not 0 <= g.param < self.n_parameters:
                raise InputError(f"parameter slot {g.param} outside 0..{self.n_parameters - 1}")

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "gates": [{"kind": g.kind, "wires": list(g.wires), "param": g.param} for g in self.gates],
            "n_parameters": self.n_parameters,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Circuit":
        try:
            gates = tuple(GateOp(g["kind"], tuple(g["wires"]), g.get("param")) for g in data["gates"])
            return cls(int(data["n_qubits"]), gates, int(data["n_parameters"]))
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed circuit description: {exc}") from exc

    def with_gate(self, gate: GateOp) -> "Circuit":
        """Append an excitation gate, giving it a fresh parameter slot."""
        slot = self.n_parameters if gate.param is not None else None
        return Circuit(self.n_qubits, self.gates + (GateOp(gate.kind, gate.wires, slot),),
                       self.n_parameters + (slot is not None))


# -- gate application ------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _pair_indices(n_qubits: int, low: tuple[int, ...], high: tuple[int, ...]):
    """Indices with wires ``low`` empty and ``high`` full, and their partners."""
    idx = np.arange(2 ** n_qubits)
    lo = _occupation_index(low, n_qubits)
    hi = _occupation_index(high, n_qubits)
    src = idx[(idx & (lo | hi)) == hi]
    return src, src ^ (lo | hi)


def _rotate(state: StateVector, theta: float, low, high):
    src, dst = _pair_indices(state.n_qubits, tuple(low), tuple(high))
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    a = state.amplitudes[src]
    b = state.amplitudes[dst]
    state.amplitudes[src] = c * a - s * b
    state.amplitudes[dst] = s * a + c * b
    return state


def _check_wires(state: StateVector, wires, count: int):
    if len(wires) != count or len(set(wires)) != count:
        raise InputError(f"need {count} distinct wires, got {wires}")
    if any(not 0 <= w < state.n_qubits for w in wires):
        raise InputError(f"wires {wires} outside 0..{state.n_qubits - 1}")


def apply_single_excitation(state: StateVector, theta: float, wires) -> StateVector:
    """|01> -> cos|01> + sin|10>, |10> -> cos|10> - sin|01> on (p, q)."""
    _check_wires(state, tuple(wires), 2)
    p, q = wires
    return _rotate(state, theta, (p,), (q,))


def apply_double_excitation(state: StateVector, theta: float, wires) -> StateVector:
    """|0011> -> cos|0011> + sin|1100>, |1100> -> cos|1100> - sin|0011> on (p, q, r, s)."""
    _check_wires(state, tuple(wires), 4)
    p, q, r, s = wires
    return _rotate(state, theta, (p, q), (r, s))


def apply_pauli_x(state: StateVector, wire: int) -> StateVector:
    _check_wires(state, (wire,), 1)
    idx = np.arange(2 ** state.n_qubits)
    state.amplitudes = state.amplitudes[idx ^ (1 << (state.n_qubits - 1 - wire))]
    return state


def prepare_hf_state(n_electrons: int, n_qubits: int) -> StateVector:
    if not 0 <= n_electrons <= n_qubits:
        raise InputError(f"{n_electrons} electrons do not fit in {n_qubits} qubits")
    return StateVector.basis(range(n_electrons), n_qubits)


def run(circuit: Circuit, parameters: Sequence[float], initial_state: StateVector | None = None) -> StateVector:
    parameters = np.asarray(parameters, dtype=float).ravel()
    if parameters.size != circuit.n_parameters:
        raise InputError(f"circuit takes {circuit.n_parameters} parameters, got {parameters.size}")
    if initial_state is None:
        state = StateVector.basis((), circuit.n_qubits)
    else:
        if initial_state.n_qubits != circuit.n_qubits:
            raise InputError("initial state and circuit disagree on qubit count")
        state = initial_state.copy()
    for g in circuit.gates:
        if g.kind == "BasisState":
            state = StateVector.basis(g.wires, circuit.n_qubits)
        elif g.kind == "PauliX":
            apply_pauli_x(state, g.wires[0])
        elif g.kind == "SingleExcitation":
            apply_single_excitation(state, parameters[g.param], g.wires)
        else:
            apply_double_excitation(state, parameters[g.param], g.wires)
    return state


# -- observables -----------------------------------------------------------

def expectation(state: StateVector, H: SparseHamiltonian) -> float:
    if H.n_qubits != state.n_qubits:
        raise InputError(f"state has {state.n_qubits} qubits, Hamiltonian {H.n_qubits}")
    value = np.vdot(state.amplitudes, H.matrix @ state.amplitudes)
    if abs(value.imag) >= IMAG_TOLERANCE:
        raise NonHermitianError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def state_overlap(psi: StateVector, phi: StateVector) -> float:
    """|<psi|phi>|^2."""
    if psi.n_qubits != phi.n_qubits:
        raise InputError("states have different qubit counts")
    return float(min(1.0, abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2))


# -- ansatz ----------------------------------------------------------------

def excitations(n_electrons: int, n_qubits: int):
    """Spin-conserving (doubles, singles) from the first ``n_electrons`` qubits."""
    if n_electrons % 2:
        raise InputError("interleaved-spin excitations need an even electron count")
    if not 0 <= n_electrons <= n_qubits:
        raise InputError(f"{n_electrons} electrons do not fit in {n_qubits} qubits")
    occ = range(n_electrons)
    virt = range(n_electrons, n_qubits)
    singles = [(i, a) for i in occ for a in virt if i % 2 == a % 2]
    doubles = []
    for i in occ:
        for j in occ:
            if j <= i:
                continue
            for a in virt:
                for b in virt:
                    if b > a and (i % 2 + j % 2) == (a % 2 + b % 2):
                        doubles.append((i, j, a, b))
    return sorted(doubles), singles


def all_singles_doubles(n_electrons: int, n_qubits: int, hf_prep: bool = True) -> Circuit:
    """HF preparation followed by every spin-conserving double, then single."""
    doubles, singles = excitations(n_electrons, n_qubits)
    gates = []
    if hf_prep and n_electrons:
        gates.append(GateOp("BasisState", tuple(range(n_electrons))))
    k = 0
    for w in doubles:
        gates.append(GateOp("DoubleExcitation", w, k))
        k += 1
    for w in singles:
        gates.append(GateOp("SingleExcitation", w, k))
        k += 1
    return Circuit(n_qubits, tuple(gates), k)


# -- gradients -------------------------------------------------------------

def _check_shiftable(circuit: Circuit):
    for g in circuit.gates:
        if g.param is not None and g.kind not in SHIFTABLE:
            raise UnsupportedGradientError(f"no shift rule for {g.kind}")


def shift_rule(f: Callable[[np.ndarray], object], parameters: Sequence[float]) -> np.ndarray:
    """Four-term shift derivative of ``f`` along each parameter.

    Exact for any ``f`` whose dependence on each parameter is a trigonometric
    polynomial with frequencies 0, 1/2 and 1, which holds for expectation
    values (and overlaps) of excitation-gate circuits.  ``f`` may return an
    array; the result then has shape ``(n_params, *f.shape)``.
    """
    theta = np.asarray(parameters, dtype=float).ravel()
    rows = []
    for a in range(theta.size):
        acc = 0.0
        for shift, weight in SHIFT_TERMS:
            shifted = theta.copy()
            shifted[a] += shift
            acc = acc + weight * np.asarray(f(shifted))
        rows.append(acc)
    return np.array(rows, dtype=float)


def energy_function(circuit: Circuit, H: SparseHamiltonian, initial_state: StateVector | None = None):
    return lambda theta: expectation(run(circuit, theta, initial_state), H)


def parameter_shift_gradient(circuit: Circuit, parameters, H: SparseHamiltonian,
                             initial_state: StateVector | None = None) -> np.ndarray:
    _check_shiftable(circuit)
    if circuit.n_parameters == 0:
        return np.zeros(0)
    return shift_rule(energy_function(circuit, H, initial_state), parameters)


def parameter_shift_hessian(circuit: Circuit, parameters, H: SparseHamiltonian,
                            initial_state: StateVector | None = None) -> np.ndarray:
    """Second derivatives by nesting the shift rule; symmetrized."""
    _check_shiftable(circuit)
    n = circuit.n_parameters
    if n == 0:
        return np.zeros((0, 0))
    f = energy_function(circuit, H, initial_state)
    hess = shift_rule(lambda t: shift_rule(f, t), parameters)
    return 0.5 * (hess + hess.T)


# -- adaptive selection ------------------------------------------------------

@dataclass
class AdaptiveSelection:
    circuit: Circuit
    parameters: np.ndarray
    gradients: list[np.ndarray] = field(default_factory=list)


def _pool_gates(pool: Circuit) -> list[GateOp]:
    gates = [g for g in pool.gates if g.param is not None]
    if not gates:
        raise InputError("gate pool has no parametrized gates")
    return gates


def _pool_gradients(base: Circuit, theta, gates, H, initial_state) -> np.ndarray:
    grads = []
    for g in gates:
        trial = base.with_gate(g)
        f = energy_function(trial, H, initial_state)
        grads.append(shift_rule(lambda t: f(np.append(theta, t)), [0.0])[0])
    return np.array(grads)


def adaptive_selection(pool: Circuit, H: SparseHamiltonian, initial_state: StateVector,
                       strategy: str = "B", threshold: float = 1e-5, max_rounds: int = 20,
                       inner_steps: int = 50, inner_step: float = 0.1) -> AdaptiveSelection:
    gates = _pool_gates(pool)
    empty = Circuit(pool.n_qubits)
    if strategy == "B":
        grads = _pool_gradients(empty, np.zeros(0), gates, H, initial_state)
        circuit = empty
        for g, d in zip(gates, grads):
            if abs(d) > threshold:
                circuit = circuit.with_gate(g)
        return AdaptiveSelection(circuit, np.zeros(circuit.n_parameters), [grads])
    if strategy != "A":
        raise InputError(f"unknown selection strategy {strategy!r}")
    circuit, theta, history = empty, np.zeros(0), []
    for _ in range(max_rounds):
        grads = _pool_gradients(circuit, theta, gates, H, initial_state)
        history.append(grads)
        best = int(np.argmax(np.abs(grads)))
        if abs(grads[best]) < threshold:
            break
        circuit = circuit.with_gate(gates[best])
        f = energy_function(circuit, H, initial_state)
        value = 0.0
        for _ in range(inner_steps):
            value -= inner_step * shift_rule(lambda t: f(np.append(theta, t)), [value])[0]
        theta = np.append(theta, value)
    return AdaptiveSelection(circuit, theta, history)


def select_gates_adaptive(pool: Circuit, H: SparseHamiltonian, initial_state: StateVector,
                          strategy: str = "B", threshold: float = 1e-5, max_rounds: int = 20) -> Circuit:
    """Strategy B keeps pool gates whose gradient at zero exceeds ``threshold``;
    strategy A grows the circuit one largest-gradient gate at a time."""
    return adaptive_selection(pool, H, initial_state, strategy, threshold, max_rounds).circuit
