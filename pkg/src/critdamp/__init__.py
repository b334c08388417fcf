"""Critical damping curves for systems with exponential-kernel damping."""
from .charfun import CharacteristicFunction, PartialBundle, assemble, polynomial_coeffs
from .continuation import (
    CriticalCurve,
    SingularityError,
    Termination,
    TraceConfig,
    ode_rhs,
    region_probe,
    trace,
    trace_all,
)
from .kernels import BACKEND
from .model import (
    Constant,
    DesignPlane,
    Kernel,
    ModelError,
    PoleError,
    Ref,
    ViscoelasticModel,
    builtin_model,
    eval_damping_matrix,
    max_param_count,
)
from .modelfile import load_model, save_model
from .roots import (
    CriticalPoint,
    SingularPoint,
    SpectrumClassification,
    classify_spectrum,
    find_initial_points,
    find_singular_points,
    poly_roots,
)

__version__ = "0.1.0"
