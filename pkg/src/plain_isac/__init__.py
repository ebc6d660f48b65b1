"""PLAIN: compressed multidimensional parameter estimation for ISAC.

The package estimates angles, delays, and Doppler shifts of multiple
objects from a channel tensor sampled over antennas, subcarriers, and
OFDM symbols.  The pipeline compresses the tensor, runs super-resolution
estimation per dimension independently, and fuses the per-dimension
results into paired objects, with sequential and tensor-subspace
baselines, a deterministic bound, and a Monte-Carlo harness alongside.
"""

from .baselines import EspritConfig, sequential_estimate, tensor_esprit
from .compression import CompressedInput, CompressionPlan, compress, downsample_response
from .config import ConfigError, ExperimentConfig, parse_config
from .crb import CrbReport, crb_evaluate
from .estimation import DimensionEstimate, DimensionSpec, dimension_specs, estimate_dimension
from .evaluation import (
    RmseReport,
    SchemeSpec,
    TrialRecord,
    measure_runtime,
    rmse,
    run_sweep,
    write_csv,
)
from .fusion import (
    CoreEstimate,
    DetectedObject,
    DetectedObjectSet,
    iterative_refine,
    ls_fuse,
    omp_fuse,
    plain_detect,
)
from .scenario import (
    GridSpec,
    PathParams,
    Scenario,
    add_noise,
    generate_equidistant_scenario,
    generate_random_scenario,
    param_map,
    synthesize_channel,
)

__version__ = "0.1.0"

__all__ = [
    "EspritConfig",
    "sequential_estimate",
    "tensor_esprit",
    "CompressedInput",
    "CompressionPlan",
    "compress",
    "downsample_response",
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "CrbReport",
    "crb_evaluate",
    "DimensionEstimate",
    "DimensionSpec",
    "dimension_specs",
    "estimate_dimension",
    "RmseReport",
    "SchemeSpec",
    "TrialRecord",
    "measure_runtime",
    "rmse",
    "run_sweep",
    "write_csv",
    "CoreEstimate",
    "DetectedObject",
    "DetectedObjectSet",
    "iterative_refine",
    "ls_fuse",
    "omp_fuse",
    "plain_detect",
    "GridSpec",
    "PathParams",
    "Scenario",
    "add_noise",
    "generate_equidistant_scenario",
    "generate_random_scenario",
    "param_map",
    "synthesize_channel",
    "__version__",
]
