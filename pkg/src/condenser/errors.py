"""Exception types shared across the package."""


class CondenserError(Exception):
    """Base class for all package errors."""

    code = "Internal"


class ZeroSeparationError(CondenserError):
    """A positive-plate node coincides with a negative-plate node."""

    code = "ZeroSeparation"


class EmptyPlateError(CondenserError):
    """A plate description produced no nodes."""

    code = "EmptyPlate"


class AlignmentError(CondenserError):
    """Vector measure components do not match the condenser's plates."""

    code = "Alignment"


class DuplicateNodeError(CondenserError):
    """Kernel matrix assembly received coinciding nodes."""

    code = "DuplicateNode"


class UnsupportedKernel(CondenserError):
    """Operation requested for a kernel it does not support."""

    code = "UnsupportedKernel"


class SolverDivergence(CondenserError):
    """An iterative solve failed its convergence contract."""

    code = "SolverDivergence"


class InfeasibleError(CondenserError):
    """The feasible region of a constrained problem is empty."""

    code = "Infeasible"


class SigmaDominationError(CondenserError):
    """Explicit negative-plate cap does not dominate the swept positive caps."""

    code = "SigmaDomination"


class WrongScenarioError(CondenserError):
    """A check was invoked on a scenario that does not meet its preconditions."""

    code = "WrongScenario"


class ParseError(CondenserError):
    """Scenario configuration could not be parsed or validated."""

    code = "Parse"


class NonConvergedError(CondenserError):
    """A solve hit its iteration budget before meeting the convergence contract."""

    code = "NonConverged"
