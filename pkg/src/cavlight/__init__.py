"""cavlight: steady-state Wigner-negative temporal modes from cavity QED.

The pipeline: build a driven atom-cavity model, solve its Lindblad steady
state, derive a temporal-mode envelope from the output-field correlation
function, capture that mode in a cascaded absorber cavity, and analyze the
captured state in phase space (negativity, squeezing, purity).
"""

__version__ = "0.1.0"

from .qcore import (
    HilbertSpace,
    Operator,
    DensityMatrix,
    fock_ops,
    spin_ops,
    embed,
    displacement,
    partial_trace,
    identity_op,
    single_space,
    mhz,
)
from .lindblad import (
    LindbladModel,
    Superoperator,
    liouvillian,
    steady_state,
    evolve,
    expect,
)

__all__ = [
    "HilbertSpace",
    "Operator",
    "DensityMatrix",
    "fock_ops",
    "spin_ops",
    "embed",
    "displacement",
    "partial_trace",
    "identity_op",
    "single_space",
    "mhz",
    "LindbladModel",
    "Superoperator",
    "liouvillian",
    "steady_state",
    "evolve",
    "expect",
    "__version__",
]
