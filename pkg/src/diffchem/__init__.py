"""Differentiable Hartree-Fock and variational quantum chemistry on a statevector simulator."""

from __future__ import annotations

import os

__version__ = "0.1.0"

# Cap BLAS threading before numpy loads; the Python-level kernels are serial.
_threads = os.environ.get("DIFFCHEM_THREADS")
if _threads and _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

from .errors import DiffChemError  # noqa: E402
from .molecule import Molecule, build_molecule, read_molecule_file  # noqa: E402
from .scf import SCFConfig, hf_energy, scf_solve  # noqa: E402

__all__ = [
    "DiffChemError",
    "Molecule",
    "SCFConfig",
    "__version__",
    "build_molecule",
    "hf_energy",
    "read_molecule_file",
    "scf_solve",
]
