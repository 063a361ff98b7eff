# Run configuration: presets, key=value config files, command-line overrides
"""
A RunConfig is assembled from four layers, later layers winning:

    built-in defaults < preset < config file < command-line flags

Config files hold one key=value per line (read with python-dotenv, so
comments and quoting follow .env conventions). The output directory can
also be set through the EXTREMALS_OUTPUT_DIR environment variable, which
sits between the config file and an explicit --output-dir flag.
"""

import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import dotenv_values

from .errors import InvalidArgumentError
from .mountain_pass import ProblemSpec
from .spaces import Ball, Domain, Rectangle

OUTPUT_DIR_ENV = "EXTREMALS_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "results"

PRESETS: Dict[str, Dict[str, Any]] = {
    'square': {
        'domain': 'rectangle', 'width': 1.0, 'height': 1.0,
        'nx': 32, 'ny': 32,
        'p_list': [2.5, 3.0, 4.0, 6.0, 8.0],
    },
    'rect1x4': {
        'domain': 'rectangle', 'width': 1.0, 'height': 4.0,
        'nx': 16, 'ny': 64,
        'p_list': [2.0, 2.5, 3.0, 4.0, 6.0, 8.0],
    },
    'ball4': {
        'domain': 'ball', 'n': 4, 'radius': 1.0,
        'nr': 256, 'grading': 2.0,
        'p_list': [2.5, 3.0, 3.5, 3.8],
    },
}


@dataclass
class RunConfig:
    """Everything one CLI command needs, validated into ProblemSpecs before solving."""
    command: str = 'solve'
    preset: Optional[str] = None
    domain: str = 'rectangle'
    width: float = 1.0
    height: float = 1.0
    n: int = 2
    radius: float = 1.0
    p: Optional[float] = None
    p_list: List[float] = field(default_factory=list)
    nx: int = 32
    ny: Optional[int] = None
    nr: int = 128
    grading: float = 1.0
    descent_tol: float = 1e-6
    max_iters: int = 500
    max_halvings: int = 30
    cg_tol: float = 1e-10
    eig_tol: float = 1e-9
    seed: int = 0
    n_tests: int = 20
    residual_tol: float = 1e-6
    workers: int = 1
    output_dir: str = DEFAULT_OUTPUT_DIR
    solution: Optional[str] = None
    corrupt: bool = False

    def build_domain(self) -> Domain:
        if self.domain == 'rectangle':
            return Rectangle(width=self.width, height=self.height)
        if self.domain == 'ball':
            return Ball(n=self.n, radius=self.radius)
        raise InvalidArgumentError(f"Unknown domain '{self.domain}' (expected rectangle or ball)")

    @property
    def exponents(self) -> List[float]:
        if self.command == 'sweep':
            return sorted(self.p_list)
        if self.p is not None:
            return [self.p]
        if self.p_list:
            return [self.p_list[0]]
        raise InvalidArgumentError("No exponent given; pass --p")

    def problem_spec(self, p: float) -> ProblemSpec:
        return ProblemSpec(
            domain=self.build_domain(), p=p,
            nx=self.nx, ny=self.ny, nr=self.nr, grading=self.grading,
            descent_tol=self.descent_tol, max_iters=self.max_iters,
            max_halvings=self.max_halvings, cg_tol=self.cg_tol, eig_tol=self.eig_tol,
            seed=self.seed, n_tests=self.n_tests, residual_tol=self.residual_tol,
        )

    def problem_specs(self) -> List[ProblemSpec]:
        """One validated ProblemSpec per exponent; raises before any solve."""
        exponents = self.exponents
        if self.command == 'sweep':
            if len(exponents) < 2:
                raise InvalidArgumentError("A sweep needs at least two exponents")
            if len(set(exponents)) != len(exponents):
                raise InvalidArgumentError(f"Sweep exponents must be distinct, got {exponents}")
        return [self.problem_spec(p) for p in exponents]

    def output_path(self) -> Path:
        return Path(self.output_dir)


# ==================== PARSING ====================

def parse_p_list(text: str) -> List[float]:
    """'2.5, 3,4' -> [2.5, 3.0, 4.0]."""
    try:
        return [float(item) for item in str(text).replace(' ', '').split(',') if item]
    except ValueError:
        raise InvalidArgumentError(f"Cannot parse exponent list: {text!r}")


def _parse_bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off', ''):
        return False
    raise InvalidArgumentError(f"Cannot parse boolean: {text!r}")


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def coerce(key: str, value: Any) -> Any:
    """Convert a raw (string) config value to the type of the RunConfig field."""
    if key not in _FIELD_TYPES:
        raise InvalidArgumentError(f"Unknown configuration key: {key}")
    if value is None or not isinstance(value, str):
        return value
    if key == 'p_list':
        return parse_p_list(value)
    if key == 'corrupt':
        return _parse_bool(value)
    try:
        if key in ('n', 'nx', 'ny', 'nr', 'max_iters', 'max_halvings', 'seed', 'n_tests', 'workers'):
            return int(value)
        if key in ('width', 'height', 'radius', 'p', 'grading', 'descent_tol', 'cg_tol',
                   'eig_tol', 'residual_tol'):
            return float(value)
    except ValueError:
        raise InvalidArgumentError(f"Invalid value for {key}: {value!r}")
    return value


def load_config_file(path) -> Dict[str, Any]:
    """Read a key=value config file into typed RunConfig overrides."""
    path = Path(path)
    if not path.exists():
        raise InvalidArgumentError(f"Config file not found: {path}")
    raw = dotenv_values(path)
    return {key.strip().lower(): coerce(key.strip().lower(), value) for key, value in raw.items()}


def build_run_config(command: str, flags: Optional[Dict[str, Any]] = None,
                     config_file=None) -> RunConfig:
    """Merge defaults, preset, config file and flags (None means 'not given')."""
    flags = {k: v for k, v in (flags or {}).items() if v is not None and k in _FIELD_TYPES}
    file_values = load_config_file(config_file) if config_file else {}

    preset_name = flags.get('preset', file_values.get('preset'))
    merged: Dict[str, Any] = {}
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise InvalidArgumentError(
                f"Unknown preset '{preset_name}' (choose from {', '.join(sorted(PRESETS))})"
            )
        merged.update(PRESETS[preset_name])
        merged['preset'] = preset_name
    merged.update(file_values)

    env_output = os.getenv(OUTPUT_DIR_ENV)
    if env_output:
        merged['output_dir'] = env_output
    merged.update({k: coerce(k, v) for k, v in flags.items()})

    merged['command'] = command
    if isinstance(merged.get('p_list'), str):
        merged['p_list'] = parse_p_list(merged['p_list'])
    if merged.get('workers', 1) < 1:
        raise InvalidArgumentError("workers must be >= 1")
    return RunConfig(**merged)
