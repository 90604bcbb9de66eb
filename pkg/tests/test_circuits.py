from __future__ import annotations

import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffchem.circuits import (Circuit, GateOp, StateVector, adaptive_selection, all_singles_doubles,
                               apply_double_excitation, apply_single_excitation, excitations, expectation,
                               parameter_shift_gradient, parameter_shift_hessian, prepare_hf_state, run,
                               select_gates_adaptive, state_overlap)
from diffchem.errors import InputError, NonHermitianError
from diffchem.hamiltonian import PauliSum, PauliWord, molecular_hamiltonian, number_operator, to_sparse


def gate_matrix(apply, n, theta, wires):
    cols = []
    for k in range(2 ** n):
        amps = np.zeros(2 ** n, dtype=complex)
        amps[k] = 1
        cols.append(apply(StateVector(amps, n), theta, wires).amplitudes)
    return np.array(cols).T


def bits(index, n):
    return [(index >> (n - 1 - q)) & 1 for q in range(n)]


def number_expectation(state):
    return expectation(state, to_sparse(number_operator(state.n_qubits)))


def random_state(rng, n):
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return StateVector(v / np.linalg.norm(v), n)


@pytest.fixture(scope="module")
def h2_problem(h2):
    built = molecular_hamiltonian(h2)
    return to_sparse(built.hamiltonian), all_singles_doubles(2, 4)


def test_hf_state():
    s = prepare_hf_state(2, 4)
    assert s.amplitudes[0b1100] == 1 and s.norm() == 1
    assert prepare_hf_state(0, 3).amplitudes[0] == 1
    assert number_expectation(prepare_hf_state(3, 5)) == pytest.approx(3, abs=1e-14)
    with pytest.raises(InputError):
        prepare_hf_state(5, 4)


@pytest.mark.parametrize("theta", [0.0, 0.37, -2.1, math.pi])
def test_single_excitation_matrix_is_exact(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    expected = np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1]], dtype=complex)
    assert np.array_equal(gate_matrix(apply_single_excitation, 2, theta, (0, 1)), expected)


@pytest.mark.parametrize("theta", [0.0, 0.37, -2.1, math.pi])
def test_double_excitation_matrix_is_exact(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    expected = np.eye(16, dtype=complex)
    expected[0b0011, 0b0011] = expected[0b1100, 0b1100] = c
    expected[0b1100, 0b0011] = s
    expected[0b0011, 0b1100] = -s
    assert np.array_equal(gate_matrix(apply_double_excitation, 4, theta, (0, 1, 2, 3)), expected)


def test_gates_at_pi():
    s = apply_single_excitation(StateVector.basis([1], 2), math.pi, (0, 1))
    assert np.allclose(s.amplitudes, StateVector.basis([0], 2).amplitudes)
    d = apply_double_excitation(StateVector.basis([2, 3], 4), math.pi, (0, 1, 2, 3))
    assert np.allclose(d.amplitudes, StateVector.basis([0, 1], 4).amplitudes)
    untouched = StateVector.basis([1, 3], 4)
    assert np.array_equal(apply_double_excitation(untouched.copy(), 0.9, (0, 1, 2, 3)).amplitudes,
                          untouched.amplitudes)


@pytest.mark.parametrize("wires", [(2, 0), (1, 3), (3, 0)])
def test_single_excitation_embedding(wires):
    n, theta = 4, 0.81
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    p, q = wires
    M = gate_matrix(apply_single_excitation, n, theta, wires)
    for k in range(2 ** n):
        b = bits(k, n)
        col = np.zeros(2 ** n)
        if (b[p], b[q]) == (0, 1):
            partner = k ^ (1 << (n - 1 - p)) ^ (1 << (n - 1 - q))
            col[k], col[partner] = c, s
        elif (b[p], b[q]) == (1, 0):
            partner = k ^ (1 << (n - 1 - p)) ^ (1 << (n - 1 - q))
            col[k], col[partner] = c, -s
        else:
            col[k] = 1
        assert np.allclose(M[:, k], col, atol=1e-15)


def test_group_property():
    a, b = 0.4, -1.3
    for apply, n, wires in [(apply_single_excitation, 3, (0, 2)), (apply_double_excitation, 5, (4, 0, 1, 3))]:
        prod = gate_matrix(apply, n, a, wires) @ gate_matrix(apply, n, b, wires)
        assert np.max(np.abs(prod - gate_matrix(apply, n, a + b, wires))) < 1e-12


@st.composite
def random_circuits(draw):
    n = draw(st.integers(4, 6))
    k = draw(st.integers(1, 8))
    gates = []
    for slot in range(k):
        if draw(st.booleans()):
            wires = tuple(draw(st.permutations(range(n)))[:2])
            gates.append(GateOp("SingleExcitation", wires, slot))
        else:
            wires = tuple(draw(st.permutations(range(n)))[:4])
            gates.append(GateOp("DoubleExcitation", wires, slot))
    params = draw(st.lists(st.floats(-math.pi, math.pi), min_size=k, max_size=k))
    return Circuit(n, tuple(gates), k), np.array(params)


@settings(max_examples=30, deadline=None)
@given(random_circuits(), st.integers(0, 2 ** 16))
def test_norm_and_particle_number_preserved(case, seed):
    circuit, params = case
    start = random_state(np.random.default_rng(seed), circuit.n_qubits)
    out = run(circuit, params, start)
    assert abs(out.norm() - 1) < 1e-12
    assert abs(number_expectation(out) - number_expectation(start)) < 1e-12


@settings(max_examples=15, deadline=None)
@given(random_circuits(), st.integers(0, 2 ** 16))
def test_parameter_shift_matches_finite_differences(case, seed):
    circuit, params = case
    rng = np.random.default_rng(seed)
    n = circuit.n_qubits
    A = rng.normal(size=(2 ** n, 2 ** n)) + 1j * rng.normal(size=(2 ** n, 2 ** n))
    from scipy import sparse
    from diffchem.hamiltonian import SparseHamiltonian
    H = SparseHamiltonian(sparse.csr_matrix((A + A.conj().T) / 2), n)
    start = random_state(rng, n)
    g = parameter_shift_gradient(circuit, params, H, start)
    h = 1e-6
    for a in range(params.size):
        e = np.zeros_like(params)
        e[a] = h
        fd = (expectation(run(circuit, params + e, start), H) - expectation(run(circuit, params - e, start), H)) / (2 * h)
        assert abs(g[a] - fd) < 1e-8


def test_shift_rule_closed_form():
    circuit = Circuit(2, (GateOp("SingleExcitation", (0, 1), 0),), 1)
    H = to_sparse(PauliSum(((1.0, PauliWord(((0, "Z"),))),), 2))
    start = StateVector.basis([0], 2)
    for theta in [0.0, 0.3, 2.0]:
        # state cos(t/2)|10> - sin(t/2)|01>, so <Z0> = -cos t
        assert expectation(run(circuit, [theta], start), H) == pytest.approx(-math.cos(theta), abs=1e-14)
        assert parameter_shift_gradient(circuit, [theta], H, start)[0] == pytest.approx(math.sin(theta), abs=1e-10)
    assert parameter_shift_gradient(Circuit(2), [], H, start).size == 0


def test_parameter_shift_hessian(h2_problem):
    H, circuit = h2_problem
    theta = np.array([0.2, -0.1, 0.3])
    hess = parameter_shift_hessian(circuit, theta, H)
    h = 1e-5
    fd = np.array([(parameter_shift_gradient(circuit, theta + h * e, H)
                    - parameter_shift_gradient(circuit, theta - h * e, H)) / (2 * h) for e in np.eye(3)])
    assert np.allclose(hess, fd, atol=1e-7)


def test_run_basics(h2_problem):
    _, circuit = h2_problem
    start = random_state(np.random.default_rng(0), 4)
    assert np.array_equal(run(Circuit(4), [], start).amplitudes, start.amplitudes)
    assert np.array_equal(run(circuit, np.zeros(3)).amplitudes, prepare_hf_state(2, 4).amplitudes)
    with pytest.raises(InputError):
        run(circuit, np.zeros(2))


def test_expectation(h2_problem):
    H, _ = h2_problem
    evals, vecs = np.linalg.eigh(H.toarray())
    for k in (0, 5):
        assert expectation(StateVector(vecs[:, k], 4), H) == pytest.approx(evals[k], abs=1e-10)
    ident = to_sparse(PauliSum(((1.0, PauliWord()),), 4))
    assert expectation(random_state(np.random.default_rng(1), 4), ident) == pytest.approx(1.0, abs=1e-14)
    skew = to_sparse(PauliSum(((1j, PauliWord(((0, "Z"),))),), 1))
    with pytest.raises(NonHermitianError):
        expectation(StateVector.basis([], 1), skew)


def test_state_overlap():
    rng = np.random.default_rng(5)
    a, b = random_state(rng, 3), random_state(rng, 3)
    assert state_overlap(a, a) == pytest.approx(1.0)
    assert state_overlap(StateVector.basis([0], 3), StateVector.basis([1], 3)) == 0.0
    assert state_overlap(a, b) == pytest.approx(abs(np.sum(a.amplitudes.conj() * b.amplitudes)) ** 2, abs=1e-12)


def test_all_singles_doubles_counts():
    c = all_singles_doubles(2, 4)
    kinds = [g.kind for g in c.gates]
    assert kinds == ["BasisState", "DoubleExcitation", "SingleExcitation", "SingleExcitation"]
    assert c.n_parameters == 3
    assert all_singles_doubles(0, 4).gates == ()
    with pytest.raises(InputError):
        all_singles_doubles(3, 6)


@pytest.mark.parametrize("ne,nq", [(2, 6), (4, 8), (2, 8)])
def test_excitation_enumeration(ne, nq):
    doubles, singles = excitations(ne, nq)
    occ, virt = range(ne), range(ne, nq)
    sz = lambda qs: sum(1 if q % 2 == 0 else -1 for q in qs)
    ref_d = [(i, j, a, b) for i, j in itertools.combinations(occ, 2) for a, b in itertools.combinations(virt, 2)
             if sz((i, j)) == sz((a, b))]
    ref_s = [(i, a) for i in occ for a in virt if sz((i,)) == sz((a,))]
    assert doubles == sorted(ref_d) and sorted(singles) == sorted(ref_s)


def test_circuit_json_roundtrip(h2_problem):
    _, circuit = h2_problem
    data = json.loads(json.dumps(circuit.to_dict()))
    assert Circuit.from_dict(data) == circuit
    with pytest.raises(InputError):
        Circuit.from_dict({"n_qubits": 2, "gates": [{"kind": "SingleExcitation", "wires": [0, 0], "param": 0}],
                           "n_parameters": 1})
    with pytest.raises(InputError):
        GateOp("DoubleExcitation", (0, 1, 2), 0)


def test_adaptive_strategy_b_matches_direct_gradients(h2_problem):
    H, pool = h2_problem
    hf = prepare_hf_state(2, 4)
    direct = []
    for g in pool.gates[1:]:
        single = Circuit(4, (GateOp(g.kind, g.wires, 0),), 1)
        direct.append(parameter_shift_gradient(single, [0.0], H, hf)[0])
    chosen = select_gates_adaptive(pool, H, hf, "B", threshold=1e-8)
    expected = [g.wires for g, d in zip(pool.gates[1:], direct) if abs(d) > 1e-8]
    assert [g.wires for g in chosen.gates] == expected == [(0, 1, 2, 3)]
    everything = select_gates_adaptive(pool, H, hf, "B", threshold=0.0)
    assert [g.wires for g in everything.gates] == [g.wires for g, d in zip(pool.gates[1:], direct) if d != 0]


def test_adaptive_strategy_a(h2_problem):
    H, pool = h2_problem
    hf = prepare_hf_state(2, 4)
    sel = adaptive_selection(pool, H, hf, "A", threshold=1e-3, max_rounds=5)
    assert sel.circuit.gates[0].kind == "DoubleExcitation"
    e = expectation(run(sel.circuit, sel.parameters, hf), H)
    assert e < expectation(hf, H) - 1e-2
    with pytest.raises(InputError):
        select_gates_adaptive(Circuit(4), H, hf)
