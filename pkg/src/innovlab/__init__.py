"""innovlab: a Monte Carlo laboratory for innovation filtrations.

The package simulates drifted Brownian observations U = B + int u' ds,
computes filtered drifts and innovation processes, reweights ensembles by
Girsanov exponentials, and estimates both sides of the entropy-energy
criterion that characterizes when the observation filtration coincides
with the innovation filtration.  A quantized finite oracle provides exact
reference values for every estimator.

Module map:

* ``core``      -- grids, paths, counter-based random streams, Ito sums
* ``models``    -- the drift-model registry and the shared Euler recursion
* ``filtering`` -- exact and particle filters, innovations, regressions
* ``girsanov``  -- log-weights, stopping-time localization, reweighting
* ``criterion`` -- entropy and energy estimators, verdicts, exact KL
* ``lingauss``  -- closed-form Gaussian path laws for the linear family
* ``oracle``    -- quantized enumeration, entropy identities, the witness
* ``harness``   -- configs, experiment runs, persistence, suites
* ``cli``       -- the ``innovlab`` command (run, report, suite, list-models)
"""

__version__ = "0.1.0"

from .core import (
    AdaptedSamples,
    Path,
    RandomStream,
    TimeGrid,
    energy,
    ito_integral,
    primitive,
    sample_brownian,
)
from .criterion import (
    EQUALITY_CONSISTENT,
    INCONCLUSIVE,
    POSITIVE_GAP,
    LevelReport,
    criterion_levels,
    criterion_verdict,
    gaussian_path_kl,
)
from .filtering import (
    BasisSpec,
    FilterEstimate,
    ensemble_conditional_drift,
    innovation,
    kalman_bucy_filter,
    particle_conditional_drift,
)
from .girsanov import (
    StoppingRule,
    WeightedEnsemble,
    girsanov_log_weight,
    localize,
    normalization_diagnostic,
    reweight,
)
from .harness import ExperimentConfig, report, run_experiment, suite
from .models import list_models, make_model, simulate, simulate_ensemble
from .oracle import (
    AtomSpace,
    QuantizedNoise,
    dpi_verdict,
    enumerate_atoms,
    exact_relative_entropy,
    gauss_quantized,
    witness_space,
)

__all__ = [
    "__version__",
    "AdaptedSamples", "Path", "RandomStream", "TimeGrid",
    "energy", "ito_integral", "primitive", "sample_brownian",
    "EQUALITY_CONSISTENT", "INCONCLUSIVE", "POSITIVE_GAP",
    "LevelReport", "criterion_levels", "criterion_verdict", "gaussian_path_kl",
    "BasisSpec", "FilterEstimate", "ensemble_conditional_drift",
    "innovation", "kalman_bucy_filter", "particle_conditional_drift",
    "StoppingRule", "WeightedEnsemble", "girsanov_log_weight",
    "localize", "normalization_diagnostic", "reweight",
    "ExperimentConfig", "report", "run_experiment", "suite",
    "list_models", "make_model", "simulate", "simulate_ensemble",
    "AtomSpace", "QuantizedNoise", "dpi_verdict", "enumerate_atoms",
    "exact_relative_entropy", "gauss_quantized", "witness_space",
]
