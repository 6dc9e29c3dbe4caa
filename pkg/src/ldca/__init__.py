"""Fermionic simulation toolkit: generalized Hartree-Fock reference states,
matchgate circuit compilation, and low-depth variational eigensolvers.

The package is organized in layers. `fermion_ops` holds the second-quantized
data model and the mappings to Majorana and qubit operators. `ghf` computes
Gaussian reference states as covariance matrices and extracts quasiparticle
transforms. `compiler` turns a quasiparticle transform into a nearest-neighbor
matchgate circuit, `sim` executes circuits on a dense statevector, `vqe` builds
and optimizes the variational ansatzes, and `exact` provides exact
diagonalization references. `cli` wires everything into commands.
"""

from .errors import (
    ConfigError,
    ConvergenceError,
    DecompositionError,
    LdcaError,
    ThreeBodyUnsupported,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DecompositionError",
    "LdcaError",
    "ThreeBodyUnsupported",
    "__version__",
]
