"""Experiment configuration with strict TOML parsing.

The configuration format is TOML with a handful of flat sections; the
grammar is documented in the README.  Parsing is deliberately strict:
unknown sections or keys abort with an error naming the offending key
(and its line when it can be located), because a silently ignored typo in
a physics parameter would invalidate a whole sweep.  An empty file yields
the default base setup: a 16 x 180 x 560 grid at 26 GHz with 60 kHz
subcarrier spacing and a 10 ms sensing window, six equidistant objects
over [30, 150] degrees, [50, 400] m, and [0, 25] km/h, averaging
compression with factors (1, 4, 14), root-MUSIC with forward-backward
averaging, and OMP fusion with the true object count enforced.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .baselines import EspritConfig
from .compression import SCHEMES, CompressionPlan
from .scenario import GridSpec

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "config_from_mapping",
    "parse_snr_range",
    "SCHEME_TOKENS",
    "SORT_DIMENSIONS",
]

SCHEME_TOKENS = ("plain", "sequential", "tensor-esprit")
SORT_DIMENSIONS = ("angle", "distance", "velocity")
SCENARIO_MODES = ("equidistant", "random")


class ConfigError(ValueError):
    """Raised for malformed, unknown, or out-of-range configuration input."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; defaults reproduce the base setup."""

    # grid
    n_antennas: int = 16
    n_subcarriers: int = 180
    n_symbols: int = 560
    carrier_frequency_hz: float = 26e9
    subcarrier_spacing_hz: float = 60e3
    sensing_duration_s: float = 10e-3
    antenna_spacing_wavelengths: float = 0.5
    # scenario
    scenario_mode: str = "equidistant"
    n_objects: int = 6
    angle_range_deg: tuple[float, float] = (30.0, 150.0)
    distance_range_m: tuple[float, float] = (50.0, 400.0)
    velocity_range_kmh: tuple[float, float] = (0.0, 25.0)
    # compression
    compression_scheme: str = "average"
    compression_factors: tuple[int, int, int] = (1, 4, 14)
    max_snapshots: int = 100
    # estimation
    algorithm: str = "root_music"
    use_fba: bool = True
    oversampling: int = 4
    # fusion
    fusion_method: str = "omp"
    true_np_override: bool = True
    clean_rounds: int = 1
    # tensor-esprit baseline
    esprit_smoothing: tuple[int, int, int] = (1, 2, 2)
    esprit_max_snapshots: int = 32
    esprit_max_sweeps: int = 20
    # sweep
    schemes: tuple[str, ...] = ("plain",)
    snr_start_db: float = -10.0
    snr_stop_db: float = 30.0
    snr_step_db: float = 5.0
    trials: int = 200
    seed: int = 1
    output_path: str = "results.csv"
    sort_dimension: str = "angle"

    def __post_init__(self) -> None:
        if self.scenario_mode not in SCENARIO_MODES:
            raise ConfigError(f"scenario.mode must be one of {SCENARIO_MODES}")
        if self.n_objects < 1:
            raise ConfigError("scenario.objects must be at least 1")
        for label, rng in (
            ("scenario.angle_range_deg", self.angle_range_deg),
            ("scenario.distance_range_m", self.distance_range_m),
            ("scenario.velocity_range_kmh", self.velocity_range_kmh),
        ):
            if len(rng) != 2 or not rng[0] <= rng[1]:
                raise ConfigError(f"{label} must be [low, high] with low <= high")
        if not (0.0 <= self.angle_range_deg[0] and self.angle_range_deg[1] < 180.0):
            raise ConfigError("scenario.angle_range_deg must lie inside [0, 180)")
        if self.distance_range_m[0] <= 0:
            raise ConfigError("scenario.distance_range_m must be positive")
        if self.compression_scheme not in SCHEMES:
            raise ConfigError(f"compression.scheme must be one of {SCHEMES}")
        if len(self.compression_factors) != 3 or any(f < 1 for f in self.compression_factors):
            raise ConfigError("compression.factors must be three integers >= 1")
        if self.max_snapshots < 1:
            raise ConfigError("compression.max_snapshots must be at least 1")
        if self.algorithm not in ("root_music", "dft"):
            raise ConfigError("estimation.algorithm must be 'root_music' or 'dft'")
        if self.oversampling < 1:
            raise ConfigError("estimation.oversampling must be at least 1")
        if self.fusion_method not in ("ls", "omp"):
            raise ConfigError("fusion.method must be 'ls' or 'omp'")
        if self.clean_rounds < 1:
            raise ConfigError("fusion.clean_rounds must be at least 1")
        for token in self.schemes:
            if token not in SCHEME_TOKENS:
                raise ConfigError(f"unknown scheme {token!r}; expected one of {SCHEME_TOKENS}")
        if not self.schemes:
            raise ConfigError("sweep.schemes must not be empty")
        if self.snr_step_db <= 0:
            raise ConfigError("SNR step must be positive")
        if self.snr_stop_db < self.snr_start_db:
            raise ConfigError("SNR stop must not be below start")
        if self.trials < 1:
            raise ConfigError("sweep.trials must be at least 1")
        if self.seed < 0:
            raise ConfigError("sweep.seed must be non-negative")
        if self.sort_dimension not in SORT_DIMENSIONS:
            raise ConfigError(f"sweep.sort_dimension must be one of {SORT_DIMENSIONS}")
        # GridSpec and EspritConfig re-validate their own slices.
        self.grid()
        self.esprit_config()

    def grid(self) -> GridSpec:
        wavelength = 299792458.0 / self.carrier_frequency_hz
        return GridSpec(
            n_antennas=self.n_antennas,
            n_subcarriers=self.n_subcarriers,
            n_symbols=self.n_symbols,
            antenna_spacing=self.antenna_spacing_wavelengths * wavelength,
            subcarrier_spacing=self.subcarrier_spacing_hz,
            symbol_spacing=self.sensing_duration_s / self.n_symbols,
            carrier_frequency=self.carrier_frequency_hz,
        )

    def compression_plan(self) -> CompressionPlan:
        return CompressionPlan.uniform(
            self.compression_scheme,
            self.compression_factors,
            max_snapshots=self.max_snapshots,
        )

    def esprit_config(self) -> EspritConfig:
        return EspritConfig(
            smoothing_factors=self.esprit_smoothing,
            max_virtual_snapshots=self.esprit_max_snapshots,
            max_sweeps=self.esprit_max_sweeps,
        )

    def snr_points(self) -> tuple[float, ...]:
        points = []
        value = self.snr_start_db
        while value <= self.snr_stop_db + 1e-9:
            points.append(round(value, 9))
            value += self.snr_step_db
        return tuple(points)

    @property
    def sort_dim(self) -> int:
        return SORT_DIMENSIONS.index(self.sort_dimension)


def _convert_int(value: Any, label: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{label} must be an integer")
    return value


def _convert_float(value: Any, label: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{label} must be a number")
    return float(value)


def _convert_bool(value: Any, label: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{label} must be a boolean")
    return value


def _convert_str(value: Any, label: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{label} must be a string")
    return value


def _convert_pair(value: Any, label: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{label} must be a two-element array [low, high]")
    return (_convert_float(value[0], label), _convert_float(value[1], label))


def _convert_int_triple(value: Any, label: str) -> tuple[int, int, int]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{label} must be a three-element integer array")
    return tuple(_convert_int(v, label) for v in value)  # type: ignore[return-value]


def _convert_str_list(value: Any, label: str) -> tuple[str, ...]:
    if isinstance(value, str):
        value = [v.strip() for v in value.split(",") if v.strip()]
    if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
        raise ConfigError(f"{label} must be an array of strings")
    return tuple(value)


# section -> key -> (ExperimentConfig field, converter)
_SCHEMA: dict[str, dict[str, tuple[str, Any]]] = {
    "grid": {
        "antennas": ("n_antennas", _convert_int),
        "subcarriers": ("n_subcarriers", _convert_int),
        "symbols": ("n_symbols", _convert_int),
        "carrier_frequency_hz": ("carrier_frequency_hz", _convert_float),
        "subcarrier_spacing_hz": ("subcarrier_spacing_hz", _convert_float),
        "sensing_duration_s": ("sensing_duration_s", _convert_float),
        "antenna_spacing_wavelengths": ("antenna_spacing_wavelengths", _convert_float),
    },
    "scenario": {
        "mode": ("scenario_mode", _convert_str),
        "objects": ("n_objects", _convert_int),
        "angle_range_deg": ("angle_range_deg", _convert_pair),
        "distance_range_m": ("distance_range_m", _convert_pair),
        "velocity_range_kmh": ("velocity_range_kmh", _convert_pair),
    },
    "compression": {
        "scheme": ("compression_scheme", _convert_str),
        "factors": ("compression_factors", _convert_int_triple),
        "max_snapshots": ("max_snapshots", _convert_int),
    },
    "estimation": {
        "algorithm": ("algorithm", _convert_str),
        "fba": ("use_fba", _convert_bool),
        "oversampling": ("oversampling", _convert_int),
    },
    "fusion": {
        "method": ("fusion_method", _convert_str),
        "true_np_override": ("true_np_override", _convert_bool),
        "clean_rounds": ("clean_rounds", _convert_int),
    },
    "esprit": {
        "smoothing": ("esprit_smoothing", _convert_int_triple),
        "max_snapshots": ("esprit_max_snapshots", _convert_int),
        "max_sweeps": ("esprit_max_sweeps", _convert_int),
    },
    "sweep": {
        "schemes": ("schemes", _convert_str_list),
        "snr_start_db": ("snr_start_db", _convert_float),
        "snr_stop_db": ("snr_stop_db", _convert_float),
        "snr_step_db": ("snr_step_db", _convert_float),
        "trials": ("trials", _convert_int),
        "seed": ("seed", _convert_int),
        "output": ("output_path", _convert_str),
        "sort_dimension": ("sort_dimension", _convert_str),
    },
}


def _find_line(text: str | None, token: str) -> str:
    """Best-effort line locator for diagnostics."""
    if text is None:
        return ""
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0]
        if token in stripped:
            return f" (line {i})"
    return ""


def config_from_mapping(data: Mapping[str, Any], text: str | None = None) -> ExperimentConfig:
    """Build a config from an already-parsed TOML mapping, strictly."""
    overrides: dict[str, Any] = {}
    for section, content in data.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]{_find_line(text, section)}")
        if not isinstance(content, Mapping):
            raise ConfigError(f"[{section}] must be a table of keys{_find_line(text, section)}")
        for key, raw in content.items():
            try:
                field_name, convert = _SCHEMA[section][key]
            except KeyError:
                raise ConfigError(
                    f"unknown key '{section}.{key}'{_find_line(text, key)}"
                ) from None
            overrides[field_name] = convert(raw, f"{section}.{key}")
    try:
        return ExperimentConfig(**overrides)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path: str | Path) -> ExperimentConfig:
    """Load and validate a TOML experiment file; empty files mean defaults."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    try:
        return config_from_mapping(data, text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_snr_range(token: str) -> tuple[float, float, float]:
    """Parse an ``A:B:STEP`` sweep token into (start, stop, step)."""
    parts = token.split(":")
    if len(parts) != 3:
        raise ConfigError(f"SNR range {token!r} must look like start:stop:step")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"SNR range {token!r} contains a non-numeric part") from None
    if step <= 0:
        raise ConfigError("SNR step must be positive")
    if stop < start:
        raise ConfigError("SNR stop must not be below start")
    return start, stop, step


def default_config_text() -> str:
    """A fully commented TOML document matching the defaults."""
    cfg = ExperimentConfig()
    lines = ["# All values shown are the defaults; delete anything you do not override."]
    for section, keys in _SCHEMA.items():
        lines.append("")
        lines.append(f"[{section}]")
        for key, (field_name, _) in keys.items():
            value = getattr(cfg, field_name)
            lines.append(f"{key} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, tuple):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return repr(value)
