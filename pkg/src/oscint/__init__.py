"""Long-step integrators for highly oscillatory Hamiltonian systems.

The package provides generating-function based long-step schemes for
slow-fast systems (one varying fast frequency, constant block-diagonal
frequencies, and a stiff spring pendulum), classical reference schemes
(velocity Verlet, impulse, mollified impulse), the stock benchmark
systems, and an experiment driver exposed as the `oscint` command.
"""

from ._backend import HAVE_KERNELS
from .core import (IntegratorConfig, ReducedScalarState, RunRecord,
                   SlowFastState, SlowGradientCounter, StiffnessWarning,
                   canonical_structure, gradient_check, jacobian_fd,
                   symplectic_defect)
from .fixedpoint import (FixedPointResult, NoConvergenceError,
                         NonFiniteIterateError, solve_fixed_point)
from .systems import (FrequencyFloorError, FrequencyGroup, MatrixFreqSystem,
                      PendulumDomainError, PendulumSystem, ScalarFreqSystem,
                      adiabatic_sum, elastic_pendulum, energy_multi,
                      energy_pendulum, energy_scalar, fast_actions,
                      fpu_initial_state, fpu_modified, invariants_multi,
                      actions_multi, max_metrics, pendulum_I,
                      quartic_initial_state, quartic_multi)

from . import baselines, hj_matrix, hj_pendulum, hj_scalar

__version__ = "0.1.0"

__all__ = [
    "HAVE_KERNELS", "IntegratorConfig", "ReducedScalarState", "RunRecord",
    "SlowFastState", "SlowGradientCounter", "StiffnessWarning",
    "canonical_structure", "gradient_check", "jacobian_fd",
    "symplectic_defect", "FixedPointResult", "NoConvergenceError",
    "NonFiniteIterateError", "solve_fixed_point", "FrequencyFloorError",
    "FrequencyGroup", "MatrixFreqSystem", "PendulumDomainError",
    "PendulumSystem", "ScalarFreqSystem", "adiabatic_sum",
    "elastic_pendulum", "energy_multi", "energy_pendulum", "energy_scalar",
    "fast_actions", "fpu_initial_state", "fpu_modified", "invariants_multi",
    "actions_multi", "max_metrics", "pendulum_I", "quartic_initial_state",
    "quartic_multi", "baselines", "hj_matrix", "hj_pendulum", "hj_scalar",
    "__version__",
]
