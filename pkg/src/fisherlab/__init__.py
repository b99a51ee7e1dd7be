"""Classical and quantum Fisher information of parametrized quantum circuits."""

from .circuit import Observable, ParamCircuit, layers_of, shift, validate
from .fisher import (
    FisherMatrix,
    cfim_exact,
    cfim_sampled,
    prob_jacobian,
    qfim_layer_blocks,
    qfim_mixed,
    qfim_param_shift,
    qfim_projection_fd,
    qfim_pure,
    qfim_spsa,
    reparametrize,
    sld_operators,
)
from .simulator import Measurement, run_mixed, run_pure

__version__ = "0.1.0"
