"""Exception hierarchy shared by every module.

Each class carries a short ``kind`` tag used by the CLI when it serializes
an error object.
"""

from __future__ import annotations


class DiffChemError(Exception):
    kind = "error"


class InputError(DiffChemError, ValueError):
    kind = "input"


class UnsupportedElementError(InputError):
    kind = "unsupported_element"

    def __init__(self, symbol: str):
        super().__init__(f"no STO-3G data for element {symbol!r}")
        self.symbol = symbol


class ClosedShellError(InputError):
    kind = "closed_shell_violation"


class LayoutError(InputError):
    kind = "layout"


class DomainError(DiffChemError, ValueError):
    kind = "domain"


class LinearDependenceError(DiffChemError):
    kind = "linear_dependence"


class SingularGeometryError(DiffChemError):
    kind = "singular_geometry"


class ConvergenceError(DiffChemError):
    kind = "convergence"

    def __init__(self, message: str, delta_p: float = float("nan"), delta_e: float = float("nan")):
        super().__init__(message)
        self.delta_p = delta_p
        self.delta_e = delta_e


class DivergenceError(DiffChemError):
    kind = "divergence"


class ContractError(DiffChemError):
    kind = "contract"


class ResourceError(DiffChemError):
    kind = "resource"


class NonHermitianError(DiffChemError):
    kind = "non_hermitian"


class ConsistencyError(DiffChemError):
    kind = "internal_consistency"


class UnsupportedGradientError(DiffChemError):
    kind = "unsupported_gradient"


class UnsupportedPrimitiveError(DiffChemError, TypeError):
    kind = "unsupported_primitive"


class NonFiniteError(DiffChemError, FloatingPointError):
    kind = "non_finite"

    def __init__(self, message: str, value=None):
        super().__init__(message)
        self.value = value
