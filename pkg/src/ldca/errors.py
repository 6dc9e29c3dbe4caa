"""Exception types shared across the package."""


class LdcaError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(LdcaError):
    """Invalid or inconsistent user-supplied configuration.

    The CLI maps this to exit code 1; numerical failures map to 2.
    """


class ConvergenceError(LdcaError):
    """An iterative solver failed to reach its tolerance, or two
    independent numerical routes disagree beyond tolerance."""


class DecompositionError(ConvergenceError):
    """Circuit compilation missed its fidelity target.

    Carries the best fidelity reached so callers can report how close
    the optimizer got.
    """

    def __init__(self, message: str, best_fidelity: float):
        super().__init__(message)
        self.best_fidelity = float(best_fidelity)


class ThreeBodyUnsupported(LdcaError):
    """Raised when a mean-field routine receives three-body interactions.

    Sextic Majorana terms are carried through the representation layer but
    the self-consistent solvers only contract quadratic and quartic terms.
    """
