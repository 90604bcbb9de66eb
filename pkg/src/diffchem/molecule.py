"""Atoms, contracted Gaussian basis sets, and differentiable parameter layout.

All lengths are in bohr.  Basis data for STO-3G ships with the package in
``data/sto-3g.txt``; other contractions in the same text format can be
loaded with :func:`read_basis_file`.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .errors import ClosedShellError, DomainError, InputError, LayoutError, UnsupportedElementError

ATOMIC_NUMBERS = {
    "H": 1, "He": 2, "Li": 3, "Be": 4, "B": 5, "C": 6, "N": 7, "O": 8, "F": 9, "Ne": 10,
}

# most abundant isotope masses in atomic mass units
AMU_TO_ELECTRON_MASS = 1822.888486

# isotopic masses of the most abundant isotope, in unified atomic mass units
ATOMIC_MASSES = {
    "H": 1.00782503, "He": 4.00260325, "Li": 7.01600344, "Be": 9.0121831, "B": 11.0093054,
    "C": 12.0, "N": 14.0030740, "O": 15.9949146, "F": 18.9984032, "Ne": 19.9924402,
}

_P_COMPONENTS = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


@dataclass(frozen=True)
class Atom:
    symbol: str
    atomic_number: int
    position: tuple

    def __post_init__(self):
        if self.atomic_number < 1:
            raise InputError(f"atomic number must be positive, got {self.atomic_number}")
        if len(self.position) != 3 or not all(math.isfinite(ad.primal(c)) for c in self.position):
            raise InputError(f"atom {self.symbol} needs three finite coordinates")


@dataclass(frozen=True)
class GaussianPrimitive:
    exponent: object
    angular_momentum: tuple[int, int, int]
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not ad.primal(self.exponent) > 0:
            raise DomainError(f"Gaussian exponent must be positive, got {ad.primal(self.exponent)}")
        if min(self.angular_momentum) < 0:
            raise DomainError("angular momentum components must be non-negative")


def primitive_norm(exponent, angular_momentum: Sequence[int] = (0, 0, 0)):
    """Constant that gives a Cartesian Gaussian primitive unit self-overlap."""
    if not ad.primal(exponent) > 0:
        raise DomainError(f"exponent must be positive, got {ad.primal(exponent)}")
    l, m, n = angular_momentum
    total = l + m + n
    denom = _double_factorial(2 * l - 1) * _double_factorial(2 * m - 1) * _double_factorial(2 * n - 1)
    return (2.0 * exponent / math.pi) ** 0.75 * (4.0 * exponent) ** (0.5 * total) / math.sqrt(denom)


def _same_center_overlap(a, b, angular_momentum):
    p = a + b
    out = (math.pi / p) ** 1.5
    for k in angular_momentum:
        if k:
            out = out * (_double_factorial(2 * k - 1) / (2.0 * p) ** k)
    return out


@dataclass(frozen=True)
class ContractedGaussian:
    """Fixed contraction of primitives on one center.

    ``coefficients`` multiply normalized primitives; :attr:`normalization`
    rescales the whole contraction to unit norm.
    """

    primitives: tuple[GaussianPrimitive, ...]
    coefficients: tuple
    atom_index: int | None = None

    def __post_init__(self):
        if not self.primitives or len(self.primitives) != len(self.coefficients):
            raise InputError("contraction needs matching, non-empty primitive and coefficient lists")
        first = self.primitives[0]
        for prim in self.primitives[1:]:
            if prim.angular_momentum != first.angular_momentum or prim.center is not first.center and prim.center != first.center:
                raise InputError("primitives of one contraction must share center and angular momentum")

    @property
    def angular_momentum(self) -> tuple[int, int, int]:
        return self.primitives[0].angular_momentum

    @property
    def center(self) -> tuple:
        return self.primitives[0].center

    @property
    def exponents(self) -> tuple:
        return tuple(p.exponent for p in self.primitives)

    @functools.cached_property
    def normalization(self):
        lmn = self.angular_momentum
        weights = [c * primitive_norm(p.exponent, lmn) for c, p in zip(self.coefficients, self.primitives)]
        total = 0.0
        for i, (wi, pi) in enumerate(zip(weights, self.primitives)):
            for wj, pj in zip(weights, self.primitives):
                total = total + wi * wj * _same_center_overlap(pi.exponent, pj.exponent, lmn)
        return 1.0 / ad.sqrt(total)

    @functools.cached_property
    def primitive_weights(self) -> tuple:
        """Total prefactor per primitive: contraction norm * coefficient * primitive norm."""
        lmn = self.angular_momentum
        norm = self.normalization
        return tuple(norm * c * primitive_norm(p.exponent, lmn) for c, p in zip(self.coefficients, self.primitives))

    def moved_to(self, center: tuple, atom_index: int | None = None) -> "ContractedGaussian":
        prims = tuple(replace(p, center=center) for p in self.primitives)
        return ContractedGaussian(prims, self.coefficients, atom_index)


@dataclass(frozen=True)
class DiffFlags:
    coordinates: bool = False
    coefficients: bool = False
    exponents: bool = False


@dataclass(frozen=True)
class Molecule:
    atoms: tuple[Atom, ...]
    charge: int
    n_electrons: int
    basis_functions: tuple[ContractedGaussian, ...]
    diff_flags: DiffFlags = field(default_factory=DiffFlags)

    def __post_init__(self):
        if not self.basis_functions:
            raise InputError("molecule has no basis functions")
        expected = sum(a.atomic_number for a in self.atoms) - self.charge
        if self.n_electrons != expected:
            raise InputError(f"electron count {self.n_electrons} inconsistent with charges ({expected})")
        if self.n_electrons < 0:
            raise InputError("negative electron count")
        if self.n_electrons % 2:
            raise ClosedShellError(
                f"{self.n_electrons} electrons: only closed-shell (even) systems are supported"
            )

    @property
    def symbols(self) -> list[str]:
        return [a.symbol for a in self.atoms]

    @property
    def n_orbitals(self) -> int:
        return len(self.basis_functions)

    @property
    def coordinates(self) -> np.ndarray:
        """Primal nuclear coordinates, shape (n_atoms, 3)."""
        return np.array([[ad.primal(c) for c in a.position] for a in self.atoms], dtype=float)

    @property
    def nuclear_charges(self) -> list[int]:
        return [a.atomic_number for a in self.atoms]


# -- basis data ----------------------------------------------------------

def parse_basis_text(text: str) -> dict[str, list[tuple[str, list[tuple[float, ...]]]]]:
    """Parse the ``element``/``shell`` text format into shell tables."""
    table: dict[str, list] = {}
    element = None
    shell = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        if words[0] == "element":
            element = words[1]
            table[element] = []
            shell = None
        elif words[0] == "shell":
            if element is None:
                raise InputError(f"line {lineno}: shell before element")
            if words[1] not in ("s", "p", "sp"):
                raise InputError(f"line {lineno}: unknown shell type {words[1]!r}")
            shell = (words[1], [])
            table[element].append(shell)
        else:
            if shell is None:
                raise InputError(f"line {lineno}: data outside a shell")
            width = 3 if shell[0] == "sp" else 2
            if len(words) != width:
                raise InputError(f"line {lineno}: expected {width} numbers")
            shell[1].append(tuple(float(w) for w in words))
    return table


@functools.lru_cache(maxsize=None)
def _builtin_table(name: str):
    path = resources.files("diffchem") / "data" / f"{name}.txt"
    return parse_basis_text(path.read_text())


def read_basis_file(path: str | Path):
    return parse_basis_text(Path(path).read_text())


def _shell_functions(kind: str, rows) -> list[ContractedGaussian]:
    exps = [r[0] for r in rows]
    out = []
    if kind in ("s", "sp"):
        out.append(ContractedGaussian(
            tuple(GaussianPrimitive(a, (0, 0, 0)) for a in exps), tuple(r[1] for r in rows)))
    if kind in ("p", "sp"):
        col = 2 if kind == "sp" else 1
        for lmn in _P_COMPONENTS:
            out.append(ContractedGaussian(
                tuple(GaussianPrimitive(a, lmn) for a in exps), tuple(r[col] for r in rows)))
    return out


def load_sto3g(symbol: str, table=None) -> list[ContractedGaussian]:
    """Basis function templates (centered at the origin) for one element."""
    table = table if table is not None else _builtin_table("sto-3g")
    if symbol not in table:
        raise UnsupportedElementError(symbol)
    funcs = []
    for kind, rows in table[symbol]:
        funcs.extend(_shell_functions(kind, rows))
    return funcs


def build_molecule(
    symbols: Sequence[str],
    coordinates,
    charge: int = 0,
    basis_name: str = "sto-3g",
    diff_flags: DiffFlags | dict | None = None,
    basis_table=None,
) -> Molecule:
    """Assemble a closed-shell molecule with its basis functions on the atoms."""
    coords = [tuple(c) for c in coordinates]
    if len(symbols) != len(coords):
        raise InputError(f"{len(symbols)} symbols but {len(coords)} coordinate rows")
    if not symbols:
        raise InputError("molecule needs at least one atom")
    if basis_table is None and basis_name.lower() != "sto-3g":
        raise InputError(f"unsupported basis {basis_name!r}")
    if isinstance(diff_flags, dict):
        diff_flags = DiffFlags(**diff_flags)
    atoms = []
    for sym, pos in zip(symbols, coords):
        if sym not in ATOMIC_NUMBERS:
            raise UnsupportedElementError(sym)
        if len(pos) != 3:
            raise InputError(f"coordinates of {sym} must have three components")
        atoms.append(Atom(sym, ATOMIC_NUMBERS[sym], tuple(p if ad.is_dual(p) else float(p) for p in pos)))
    basis = []
    for i, atom in enumerate(atoms):
        for template in load_sto3g(atom.symbol, basis_table):
            basis.append(template.moved_to(atom.position, i))
    n_electrons = sum(a.atomic_number for a in atoms) - charge
    if n_electrons % 2:
        raise ClosedShellError(f"{n_electrons} electrons: only closed-shell (even) systems are supported")
    return Molecule(tuple(atoms), charge, n_electrons, tuple(basis), diff_flags or DiffFlags())


def with_coordinates(molecule: Molecule, coordinates) -> Molecule:
    """Copy of ``molecule`` with new nuclear positions (basis follows the atoms)."""
    coords = [tuple(c) for c in np.asarray(coordinates, dtype=object).reshape(-1, 3)]
    atoms = tuple(replace(a, position=pos) for a, pos in zip(molecule.atoms, coords))
    basis = tuple(bf.moved_to(atoms[bf.atom_index].position, bf.atom_index) for bf in molecule.basis_functions)
    return replace(molecule, atoms=atoms, basis_functions=basis)


# -- parameter vector ----------------------------------------------------

@dataclass(frozen=True)
class ParameterVector:
    values: tuple
    layout: tuple[tuple[str, int, int], ...]

    def __len__(self):
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.array([ad.primal(v) for v in self.values], dtype=float)

    def indices(self, kind: str) -> list[int]:
        return [i for i, (k, _, _) in enumerate(self.layout) if k == kind]


def parameter_layout(molecule: Molecule) -> tuple[tuple[str, int, int], ...]:
    """Flat index map: (kind, owner index, component) in a fixed order."""
    flags = molecule.diff_flags
    layout = []
    if flags.coordinates:
        layout += [("coordinate", i, k) for i in range(len(molecule.atoms)) for k in range(3)]
    if flags.coefficients:
        layout += [("coefficient", b, k) for b, bf in enumerate(molecule.basis_functions)
                   for k in range(len(bf.coefficients))]
    if flags.exponents:
        layout += [("exponent", b, k) for b, bf in enumerate(molecule.basis_functions)
                   for k in range(len(bf.primitives))]
    return tuple(layout)


def pack_parameters(molecule: Molecule) -> ParameterVector:
    layout = parameter_layout(molecule)
    values = []
    for kind, owner, k in layout:
        if kind == "coordinate":
            values.append(molecule.atoms[owner].position[k])
        elif kind == "coefficient":
            values.append(molecule.basis_functions[owner].coefficients[k])
        else:
            values.append(molecule.basis_functions[owner].primitives[k].exponent)
    return ParameterVector(tuple(values), layout)


def unpack_parameters(molecule: Molecule, vector: ParameterVector | Iterable) -> Molecule:
    """Molecule with the differentiable entries replaced by ``vector``.

    ``vector`` may hold Duals, which then flow through every downstream
    kernel.
    """
    layout = parameter_layout(molecule)
    values = list(vector.values if isinstance(vector, ParameterVector) else vector)
    if len(values) != len(layout):
        raise LayoutError(f"parameter vector has length {len(values)}, layout expects {len(layout)}")
    positions = [list(a.position) for a in molecule.atoms]
    coefs = [list(bf.coefficients) for bf in molecule.basis_functions]
    exps = [list(bf.exponents) for bf in molecule.basis_functions]
    for (kind, owner, k), v in zip(layout, values):
        if kind == "coordinate":
            positions[owner][k] = v
        elif kind == "coefficient":
            coefs[owner][k] = v
        else:
            exps[owner][k] = v
    atoms = tuple(replace(a, position=tuple(p)) for a, p in zip(molecule.atoms, positions))
    basis = []
    for b, bf in enumerate(molecule.basis_functions):
        center = atoms[bf.atom_index].position if bf.atom_index is not None else bf.center
        prims = tuple(GaussianPrimitive(e, bf.angular_momentum, center) for e in exps[b])
        basis.append(ContractedGaussian(prims, tuple(coefs[b]), bf.atom_index))
    return replace(molecule, atoms=atoms, basis_functions=tuple(basis))


# -- file format ---------------------------------------------------------

def molecule_from_dict(data: dict) -> Molecule:
    try:
        symbols = data["symbols"]
        coords = data["coordinates_bohr"]
    except KeyError as exc:
        raise InputError(f"molecule file missing field {exc.args[0]!r}") from None
    flags = data.get("differentiate", {}) or {}
    unknown = set(flags) - {"coordinates", "exponents", "coefficients"}
    if unknown:
        raise InputError(f"unknown differentiate keys: {sorted(unknown)}")
    basis = data.get("basis", "sto-3g")
    table = None
    if basis.lower() != "sto-3g":
        # anything else names a basis text file in the same format as the shipped table
        try:
            table = read_basis_file(basis)
        except OSError as exc:
            raise InputError(f"cannot read basis file {basis!r}: {exc}") from None
    return build_molecule(
        symbols, coords, int(data.get("charge", 0)), "sto-3g" if table is None else "custom",
        DiffFlags(**{k: bool(v) for k, v in flags.items()}), basis_table=table,
    )


def read_molecule_file(path: str | Path) -> Molecule:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from None
    return molecule_from_dict(data)


def molecule_to_dict(molecule: Molecule) -> dict:
    f = molecule.diff_flags
    return {
        "symbols": molecule.symbols,
        "coordinates_bohr": molecule.coordinates.tolist(),
        "charge": molecule.charge,
        "basis": "sto-3g",
        "differentiate": {"coordinates": f.coordinates, "exponents": f.exponents, "coefficients": f.coefficients},
    }
