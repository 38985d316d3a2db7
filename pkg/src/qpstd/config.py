"""Flat key-value run configuration.

Grammar (one setting per line):

    # comment (also allowed after a value)
    key = value

Keys are dotted lowercase paths (``stepper.mode``).  Values are parsed as
bool (``true``/``false``), int, float, or comma-separated lists thereof;
anything else stays a string.  Unknown keys are rejected so typos fail
loudly.  See DEFAULTS for every key and its default.
"""

from __future__ import annotations

import math
from typing import Dict, List, Optional, Union

Value = Union[bool, int, float, str, list]

DEFAULTS: Dict[str, Value] = {
    # lattice
    "lattice.n": [144, 144, 144],
    "lattice.spacing": [math.pi / 10.0],          # one value or one per axis
    "lattice.min_grids_per_wavelength": 4.0,
    # geometry (grids per side)
    "geometry.abc_grids": 20,
    "geometry.sf_grids": 20,
    "tfsf.transition_grids": 12,                  # forced to 8 in fdtd mode
    # stepper
    "stepper.mode": "pstd",
    "stepper.dtau": 0.0,                          # 0 = 0.99 x stability bound
    "stepper.monochromatic_eta": True,
    "stepper.nan_check_every": 100,
    # incidence
    "incidence.theta_deg": 90.0,
    "incidence.phi_deg": 90.0,
    "incidence.mode": "sinusoidal",
    "incidence.pulse.center": 0.0,                # 0 = auto placement
    "incidence.pulse.width": 4.0,
    "incidence.interp": "spectral",               # or "nearest"
    # absorber
    "abc.u0": 5.0,
    "abc.alpha_per_grid": 0.1,
    "abc.width_grids": 20,
    "abc.profile": "clipped",                     # or "plain"
    # potential
    "potential.kind": "none",                     # or "square_well"
    "potential.s": -0.5,
    "potential.radius": 2.0 * math.pi,
    "potential.antialias": 4,
    # decomposition
    "parallel.px": 1,
    "parallel.py": 1,
    "parallel.pz": 1,
    "parallel.n_halo": 15,
    "parallel.n_t": 10,
    "parallel.workers": 1,
    # run control
    "run.warmup_periods": 10.0,
    "run.soft_start_periods": 4.0,
    "run.steps": 0,                               # pulsed mode: explicit length
    # phasor extraction / scans
    "ntdf.omegas": [1.0],
    "ntdf.scan_radii": [100.0, 2.0e4],
    "ntdf.scan_planes": ["xy", "yz", "xz"],
    "ntdf.scan_points": 360,
    # partial-wave oracle
    "oracle.lmax_override": 0,                    # 0 = automatic
    "oracle.radial_step": 2e-3,
    "oracle.k": 0.0,                              # 0 = take from the archive
    # spherical-wave validation
    "validate.half_extent_x": 41.3119,
    "validate.half_extent_y": 36.5996,
    "validate.half_extent_z": 41.3119,
    "validate.spacing": math.pi / 10.0,
    "validate.plane_grids": 384,
    "validate.radii": [100.0, 2000.0, 10000.0],
    "validate.points_per_circle": 72,
    "validate.amplitude_tol": 0.02,
    "validate.phase_tol_rad": 0.05,
    # comparison thresholds
    "compare.rms_tol": 0.05,
    "compare.floor_fraction": 0.01,
    # outputs
    "output.dir": "out",
    "output.archive": "phasors.qpa",
}


class ConfigError(ValueError):
    pass


def _parse_scalar(tok: str) -> Value:
    t = tok.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        if any(c in t for c in ".eE") and not t.lstrip("+-").isdigit():
            return float(t)
        return int(t)
    except ValueError:
        try:
            return float(t)
        except ValueError:
            return t


def parse_value(text: str) -> Value:
    text = text.strip()
    if "," in text:
        return [_parse_scalar(tok) for tok in text.split(",") if tok.strip()]
    return _parse_scalar(text)


def parse_config_text(text: str) -> Dict[str, Value]:
    out: Dict[str, Value] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        key = key.strip().lower()
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = parse_value(val)
    return out


class RunConfig:
    """Defaults overlaid with a parsed file and command-line overrides."""

    def __init__(self, overrides: Optional[Dict[str, Value]] = None):
        self.values: Dict[str, Value] = dict(DEFAULTS)
        if overrides:
            for k, v in overrides.items():
                if k not in DEFAULTS:
                    raise ConfigError(f"unknown key {k!r}")
                self.values[k] = v

    @classmethod
    def from_file(cls, path, extra: Optional[Dict[str, Value]] = None) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            overrides = parse_config_text(fh.read())
        if extra:
            for k, v in extra.items():
                if k not in DEFAULTS:
                    raise ConfigError(f"unknown key {k!r}")
                overrides[k] = v
        return cls(overrides)

    def get(self, key: str) -> Value:
        return self.values[key]

    def get_float(self, key: str) -> float:
        v = self.values[key]
        if isinstance(v, list):
            raise ConfigError(f"{key} must be a scalar")
        return float(v)

    def get_int(self, key: str) -> int:
        return int(self.get_float(key))

    def get_bool(self, key: str) -> bool:
        return bool(self.values[key])

    def get_str(self, key: str) -> str:
        return str(self.values[key])

    def get_floats(self, key: str) -> List[float]:
        v = self.values[key]
        if not isinstance(v, list):
            v = [v]
        return [float(x) for x in v]

    def get_strs(self, key: str) -> List[str]:
        v = self.values[key]
        if not isinstance(v, list):
            v = [v]
        return [str(x) for x in v]

    def snapshot(self) -> str:
        """Canonical text form of the effective configuration."""
        lines = []
        for k in sorted(self.values):
            v = self.values[k]
            if isinstance(v, list):
                lines.append(f"{k} = {', '.join(repr(x) for x in v)}")
            else:
                lines.append(f"{k} = {v!r}")
        return "\n".join(lines) + "\n"
