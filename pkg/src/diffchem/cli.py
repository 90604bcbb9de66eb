"""Command-line entry point: ``diffchem <command> molecule.json [options]``.

Every command prints one JSON report (or writes it to ``--output``).
Reports are deterministic apart from the ``timing`` field.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import autodiff as ad
from .circuits import Circuit, all_singles_doubles, run
from .errors import DiffChemError, InputError
from .hamiltonian import molecular_hamiltonian, to_sparse
from .molecule import pack_parameters, read_molecule_file, unpack_parameters
from .scf import SCFConfig, scf_solve
from . import workflows as wf

COMMANDS = ("hf", "hamiltonian", "vqe", "forces", "hessian", "optimize", "scan")
ENERGY_DECIMALS = 10


@dataclass
class RunSpec:
    command: str
    molecule_file: str
    options: dict = field(default_factory=dict)


def _classes(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    if names == ["all"]:
        return ["coordinates", "coefficients", "exponents"]
    return names


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diffchem", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"diffchem {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("molecule_file", help="molecule JSON file")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--scf-tol", type=float, default=1e-10, help="SCF density tolerance")
    common.add_argument("--scf-max-iter", type=int, default=200)

    variational = argparse.ArgumentParser(add_help=False)
    variational.add_argument("--ansatz", choices=["all-singles-doubles"], default="all-singles-doubles")
    variational.add_argument("--circuit", help="circuit JSON file (overrides --ansatz)")
    variational.add_argument("--step", type=float, default=0.1, help="circuit gradient-descent step")
    variational.add_argument("--tol", type=float, default=1e-7, help="gradient infinity-norm tolerance")
    variational.add_argument("--max-steps", type=int, default=500)
    variational.add_argument("--theta0", choices=["zeros", "random"], default="zeros")
    variational.add_argument("--seed", type=int, default=0, help="seed for --theta0 random")

    p = sub.add_parser("hf", parents=[common], help="Hartree-Fock energy and optional gradient")
    p.add_argument("--grad", type=_classes, default=None,
                   help="comma list of coordinates, exponents, coefficients (or all)")

    p = sub.add_parser("hamiltonian", parents=[common], help="qubit Hamiltonian in Pauli text format")
    p.add_argument("--threshold", type=float, default=1e-12, help="coefficient prune threshold")
    p.add_argument("--pauli-out", help="also write the Pauli text to this file")
    p.add_argument("--sparse-out", help="write the sparse matrix as JSON [row, col, re, im] rows")
    p.add_argument("--groups", action="store_true", help="report qubit-wise commuting groups")

    p = sub.add_parser("vqe", parents=[common, variational], help="ground (and excited) state VQE")
    p.add_argument("--excited", type=int, default=0, help="number of penalty-method excited states")
    p.add_argument("--beta", type=float, default=None, help="penalty weight (default 2x Gershgorin bound)")

    sub.add_parser("forces", parents=[common, variational], help="Hellmann-Feynman nuclear forces")

    p = sub.add_parser("hessian", parents=[common, variational], help="response-equation nuclear Hessian")
    p.add_argument("--mass-weighted", action="store_true", help="mass-weight before diagonalizing")

    p = sub.add_parser("optimize", parents=[common, variational], help="joint circuit/geometry/basis optimization")
    p.add_argument("--what", type=_classes, default=["circuit", "coordinates"],
                   help="comma list from circuit, coordinates, exponents, coefficients")
    p.add_argument("--coordinate-step", type=float, default=0.05)
    p.add_argument("--exponent-step", type=float, default=0.01)
    p.add_argument("--coefficient-step", type=float, default=0.01)
    p.add_argument("--circuit-steps", type=int, default=10, help="circuit steps per outer round")
    p.add_argument("--rounds", type=int, default=200)
    p.add_argument("--opt-tol", type=float, default=1e-5)

    p = sub.add_parser("scan", parents=[common, variational], help="potential energy scan along a bond")
    p.add_argument("--bond", type=int, nargs=2, default=[0, 1], metavar=("I", "J"))
    p.add_argument("--start", type=float, required=True, help="first bond length (bohr)")
    p.add_argument("--stop", type=float, required=True, help="last bond length (bohr)")
    p.add_argument("--points", type=int, default=9)
    p.add_argument("--no-warm-start", action="store_true")
    return parser


def parse_args(argv: list[str] | None = None) -> RunSpec:
    ns = vars(_build_parser().parse_args(argv))
    command = ns.pop("command")
    molecule_file = ns.pop("molecule_file")
    return RunSpec(command, molecule_file, ns)


# -- command bodies ------------------------------------------------------------

def _energy(x) -> float:
    return round(float(ad.primal(x)), ENERGY_DECIMALS)


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _scf_config(opts) -> SCFConfig:
    return SCFConfig(max_iterations=opts["scf_max_iter"], tol_P=opts["scf_tol"])


def _circuit(opts, n_electrons: int, n_qubits: int) -> Circuit:
    if opts.get("circuit"):
        try:
            circuit = Circuit.from_dict(json.loads(Path(opts["circuit"]).read_text()))
        except json.JSONDecodeError as exc:
            raise InputError(f"{opts['circuit']}: not valid JSON ({exc})") from None
        if circuit.n_qubits != n_qubits:
            raise InputError(f"circuit has {circuit.n_qubits} qubits, Hamiltonian {n_qubits}")
        return circuit
    return all_singles_doubles(n_electrons, n_qubits)


def _theta0(opts, n: int) -> np.ndarray:
    if opts.get("theta0") == "random":
        return np.random.default_rng(opts["seed"]).uniform(-0.1, 0.1, n)
    return np.zeros(n)


def _vqe_config(opts) -> wf.VQEConfig:
    return wf.VQEConfig(opts["step"], opts["tol"], opts["max_steps"])


def _vqe_report(res: wf.VQEResult) -> dict:
    out = {
        "energy": _energy(res.energy),
        "optimal_parameters": _floats(res.optimal_parameters),
        "iterations": res.iterations,
        "converged": res.converged,
        "gradient_norm_final": res.gradient_norm_final,
        "energy_history": [_energy(e) for e in res.energy_history],
    }
    if res.cost is not None:
        out["penalized_cost"] = _energy(res.cost)
    return out


def _ground_state(molecule, opts):
    built = molecular_hamiltonian(molecule, scf_config=_scf_config(opts))
    circuit = _circuit(opts, molecule.n_electrons, built.n_qubits)
    H = to_sparse(built.hamiltonian)
    res = wf.vqe_minimize(H, circuit, _theta0(opts, circuit.n_parameters), _vqe_config(opts))
    return built, circuit, H, res


def _cmd_hf(molecule, opts) -> dict:
    config = _scf_config(opts)
    result = scf_solve(molecule, config)
    out = {
        "total_energy": _energy(result.total_energy),
        "electronic_energy": _energy(result.electronic_energy),
        "nuclear_repulsion": _energy(result.nuclear_repulsion),
        "orbital_energies": [_energy(e) for e in result.orbital_energies],
        "iterations": result.iterations_used,
        "degenerate_orbitals": result.degenerate,
    }
    if opts.get("grad"):
        mol = wf._flagged(molecule, opts["grad"])
        x0 = pack_parameters(mol)
        _, g = ad.value_and_grad(lambda x: scf_solve(unpack_parameters(mol, x), config).total_energy,
                                 x0.as_array())
        out["gradient"] = {
            "classes": sorted(opts["grad"]),
            "layout": [list(entry) for entry in x0.layout],
            "values": _floats(g),
        }
    return out


def _cmd_hamiltonian(molecule, opts) -> dict:
    built = molecular_hamiltonian(molecule, scf_config=_scf_config(opts), threshold=opts["threshold"])
    text = built.hamiltonian.to_text()
    if opts.get("pauli_out"):
        Path(opts["pauli_out"]).write_text(text)
    if opts.get("sparse_out"):
        Path(opts["sparse_out"]).write_text(json.dumps(to_sparse(built.hamiltonian).to_json()))
    out = {
        "n_qubits": built.n_qubits,
        "n_terms": len(built.hamiltonian),
        "hf_energy": _energy(built.scf.total_energy),
        "pauli_text": text,
    }
    if opts.get("groups"):
        from .hamiltonian import group_commuting
        out["groups"] = [[str(w) for w in g.words] for g in group_commuting(built.hamiltonian)]
    return out


def _cmd_vqe(molecule, opts) -> dict:
    built, circuit, H, res = _ground_state(molecule, opts)
    out = {
        "hf_energy": _energy(built.scf.total_energy),
        "circuit": circuit.to_dict(),
        "ground": _vqe_report(res),
    }
    if opts.get("excited"):
        states = [run(circuit, res.optimal_parameters)]
        excited = []
        # a symmetric start can sit on a saddle of the penalized cost
        rng = np.random.default_rng(opts["seed"])
        for _ in range(opts["excited"]):
            penalty = wf.default_penalty(H, states)
            if opts.get("beta") is not None:
                penalty = wf.PenaltySpec(states, [opts["beta"]] * len(states))
            theta0 = rng.uniform(-0.3, 0.3, circuit.n_parameters)
            r = wf.excited_state_minimize(H, circuit, theta0, penalty, _vqe_config(opts))
            excited.append(_vqe_report(r))
            states.append(run(circuit, r.optimal_parameters))
        out["excited"] = excited
    return out


def _cmd_forces(molecule, opts) -> dict:
    _, circuit, _, res = _ground_state(molecule, opts)
    forces = wf.nuclear_forces(molecule, res.optimal_parameters, circuit, scf_config=_scf_config(opts))
    return {
        "energy": _energy(res.energy),
        "vqe_converged": res.converged,
        "forces": np.asarray(forces).reshape(-1, 3).tolist(),
        "max_force": float(np.max(np.abs(forces))),
    }


def _cmd_hessian(molecule, opts) -> dict:
    _, circuit, _, res = _ground_state(molecule, opts)
    hr = wf.energy_hessian(molecule, circuit, res.optimal_parameters, scf_config=_scf_config(opts))
    masses = None
    if opts.get("mass_weighted"):
        from .molecule import AMU_TO_ELECTRON_MASS, ATOMIC_MASSES
        masses = [ATOMIC_MASSES[s] * AMU_TO_ELECTRON_MASS for s in molecule.symbols]
    modes = wf.normal_modes(hr, masses)
    return {
        "energy": _energy(res.energy),
        "hessian": hr.hessian.tolist(),
        "frequencies_squared": _floats(modes.frequencies_squared),
        "frequencies": _floats(modes.frequencies),
        "imaginary_modes": modes.imaginary,
        "modes": modes.modes.tolist(),
        "mass_weighted": masses is not None,
        "response_residual": hr.response_residual,
        "response_singular": hr.singular,
    }


def _cmd_optimize(molecule, opts) -> dict:
    built = molecular_hamiltonian(molecule, scf_config=_scf_config(opts))
    circuit = _circuit(opts, molecule.n_electrons, built.n_qubits)
    config = wf.JointConfig(
        circuit_step=opts["step"], coordinate_step=opts["coordinate_step"],
        exponent_step=opts["exponent_step"], coefficient_step=opts["coefficient_step"],
        circuit_steps_per_round=opts["circuit_steps"], tol=opts["opt_tol"], max_rounds=opts["rounds"])
    res = wf.joint_optimize(molecule, circuit, _theta0(opts, circuit.n_parameters), opts["what"], config,
                            scf_config=_scf_config(opts))
    return {
        "energy": _energy(res.energy),
        "rounds": res.rounds,
        "converged": res.converged,
        "gradient_norms": res.gradient_norms,
        "energy_trace": [_energy(e) for e in res.energy_trace],
        "optimal_parameters": _floats(res.parameters),
        "coordinates_bohr": res.molecule.coordinates.tolist(),
        "exponents": [_floats(bf.exponents) for bf in res.molecule.basis_functions],
        "coefficients": [_floats(bf.coefficients) for bf in res.molecule.basis_functions],
    }


def _cmd_scan(molecule, opts) -> dict:
    i, j = opts["bond"]
    n = molecule.coordinates.shape[0]
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise InputError(f"--bond needs two distinct atom indices below {n}")
    if opts["points"] < 1:
        raise InputError("--points must be positive")
    distances = np.linspace(opts["start"], opts["stop"], opts["points"])
    geoms = wf.bond_geometries(molecule, i, j, distances)
    points = wf.pes_scan(molecule, geoms, _vqe_config(opts), not opts["no_warm_start"], _scf_config(opts))
    return {
        "bond": [i, j],
        "points": [
            {"distance": float(d), "energy": None if p.energy is None else _energy(p.energy), "error": p.error}
            for d, p in zip(distances, points)
        ],
    }


_HANDLERS = {
    "hf": _cmd_hf, "hamiltonian": _cmd_hamiltonian, "vqe": _cmd_vqe, "forces": _cmd_forces,
    "hessian": _cmd_hessian, "optimize": _cmd_optimize, "scan": _cmd_scan,
}


def _echo(spec: RunSpec) -> dict:
    return {"command": spec.command, "molecule_file": spec.molecule_file, "options": spec.options}


def execute(spec: RunSpec) -> tuple[int, dict]:
    """Run one command; returns (exit code, report)."""
    if spec.command not in _HANDLERS:
        return 2, {"error": {"kind": "usage", "message": f"unknown command {spec.command!r}"}}
    start = time.perf_counter()
    report = {"version": __version__, "inputs_echo": _echo(spec)}
    try:
        molecule = read_molecule_file(spec.molecule_file)
        report["inputs_echo"]["molecule"] = json.loads(Path(spec.molecule_file).read_text())
        report["result"] = _HANDLERS[spec.command](molecule, spec.options)
        code = 0
    except DiffChemError as exc:
        report["error"] = {"kind": exc.kind, "message": str(exc)}
        code = 1
    except OSError as exc:
        report["error"] = {"kind": "io", "message": str(exc)}
        code = 1
    report["timing"] = {"seconds": round(time.perf_counter() - start, 6)}
    return code, report


def render(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def main(argv: list[str] | None = None) -> int:
    spec = parse_args(argv)
    code, report = execute(spec)
    text = render(report)
    if spec.options.get("output"):
        Path(spec.options["output"]).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
