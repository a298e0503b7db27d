"""Run configuration parsing and deterministic file output.

Configuration files are flat ``key = value`` text with ``#`` comments.
Unknown keys and out-of-range values are rejected with their line number.
All CSV artifacts serialize numbers with 12 significant digits and end with
a single trailing newline, so reruns with identical config and seed compare
byte for byte.
"""

import hashlib
import json
import resource
import sys
import time
from dataclasses import dataclass, fields, replace

import numpy as np

from .ladder import LadderConfig


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters of one pipeline run."""

    rungs: int = 8
    beam_coupling: float = 1.0
    kappa: float = 0.2
    anisotropy: float = 0.6
    total_sz: float = 0.0
    convention: str = "half"

    t_max: float = 150.0
    dt: float = 0.5
    corr_dt: float = 0.02
    corr_t_max: float = 10.0
    plateau_lo: float = 3.0
    plateau_hi: float = 10.0

    # the published time-scale constant for this model; set to 'fit' to use
    # the plateau of the second-order projection rates instead
    gamma: float | str = 0.528

    window_center: float = 0.0
    window_width: float = 2.0

    state_kind: str = "window_mixed"
    state_x: float = 1.0
    left_up: int = 5
    right_up: int = 3
    samples: int = 10
    state_mode: str = "auto"
    window_order: str = "wxw"

    seed: int = 20220
    dense_ceiling: int = 4000
    threads: int = 0

    def __post_init__(self):
        if self.rungs < 2:
            raise ConfigError(f"rungs must be >= 2, got {self.rungs}")
        if self.kappa < 0:
            raise ConfigError(f"kappa must be >= 0, got {self.kappa}")
        if self.convention not in ("half", "pauli"):
            raise ConfigError(f"convention must be half or pauli, got {self.convention!r}")
        for name in ("t_max", "dt", "corr_dt", "corr_t_max", "window_width"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not (0 <= self.plateau_lo < self.plateau_hi <= self.corr_t_max + 1e-9):
            raise ConfigError(
                f"plateau window [{self.plateau_lo}, {self.plateau_hi}] must be "
                f"increasing and inside the correlation grid"
            )
        if isinstance(self.gamma, str):
            if self.gamma != "fit":
                raise ConfigError(f"gamma must be a positive number or 'fit', got {self.gamma!r}")
        elif self.gamma <= 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if self.state_kind not in ("window_mixed", "product_random", "entangled_random"):
            raise ConfigError(f"unknown state_kind {self.state_kind!r}")
        if self.state_mode not in ("auto", "exact", "typicality"):
            raise ConfigError(f"unknown state_mode {self.state_mode!r}")
        if self.window_order not in ("wxw", "xwx"):
            raise ConfigError(f"unknown window_order {self.window_order!r}")
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1, got {self.samples}")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.dense_ceiling < 1:
            raise ConfigError("dense_ceiling must be positive")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0 (0 = leave defaults)")
        # delegate model-level checks (Sz range and integrality)
        self.ladder_config()

    def ladder_config(self) -> LadderConfig:
        try:
            return LadderConfig(
                rungs=self.rungs,
                beam_coupling=self.beam_coupling,
                rung_coupling=self.kappa,
                anisotropy=self.anisotropy,
                total_sz=self.total_sz,
                spin_convention=self.convention,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def output_times(self):
        n = int(round(self.t_max / self.dt))
        return np.arange(n + 1) * self.dt

    def correlation_times(self):
        n = int(round(self.corr_t_max / self.corr_dt))
        return np.arange(n + 1) * self.corr_dt


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_INT_KEYS = {"rungs", "left_up", "right_up", "samples", "seed", "dense_ceiling", "threads"}
_FLOAT_KEYS = {
    "beam_coupling", "kappa", "anisotropy", "total_sz", "t_max", "dt", "corr_dt",
    "corr_t_max", "plateau_lo", "plateau_hi", "window_center", "window_width", "state_x",
}
_STR_KEYS = {"convention", "state_kind", "state_mode", "window_order"}


def parse_config(text) -> RunConfig:
    """Parse ``key = value`` lines into a validated RunConfig.

    Empty text yields all defaults. Unknown keys, malformed lines and values
    of the wrong type are rejected with their line number.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", line=lineno)
        try:
            if key == "gamma":
                values[key] = val if val == "fit" else float(val)
            elif key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            else:
                values[key] = val
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {val!r}", line=lineno) from exc
    try:
        return RunConfig(**values)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_text(config: RunConfig) -> str:
    """Canonical echo of the effective configuration."""
    lines = []
    for f in fields(RunConfig):
        lines.append(f"{f.name} = {getattr(config, f.name)}")
    return "\n".join(lines) + "\n"


def format_number(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.12g}"


def write_csv(path, header, rows):
    """Write rows of numbers (or strings) with fixed formatting."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                v if isinstance(v, str) else format_number(v) for v in row
            ) + "\n")


def series_header(x_values):
    labels = [f"P_{format_number(x)}" for x in x_values]
    return ["t"] + labels + ["mean", "variance"]


def write_series_csv(path, series):
    """Schema: t, P_x..., mean, variance."""
    header = series_header(series.x_values)
    mean = series.mean()
    var = series.variance()
    rows = []
    for i, t in enumerate(series.times):
        rows.append([t, *series.probabilities[i], mean[i], var[i]])
    write_csv(path, header, rows)


class RunWriter:
    """Collects artifacts plus the run manifest in one output directory."""

    def __init__(self, out_dir, config: RunConfig):
        from pathlib import Path

        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.t0 = time.time()
        self.extra = {}
        echo = config_text(config)
        (self.out / "config.echo").write_text(echo, encoding="utf-8")
        self.config_hash = hashlib.sha256(echo.encode()).hexdigest()

    def path(self, name):
        return self.out / name

    def note(self, key, value):
        self.extra[key] = value

    def finalize(self):
        import numba
        import scipy

        manifest = {
            "config_hash": self.config_hash,
            "seed": self.config.seed,
            "gamma": self.extra.get("gamma_used"),
            "versions": {
                "python": sys.version.split()[0],
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "numba": numba.__version__,
                "spinfpe": _package_version(),
            },
            "wall_time_s": round(time.time() - self.t0, 3),
            "max_rss_mb": round(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024, 1),
        }
        manifest.update({k: v for k, v in self.extra.items() if k != "gamma_used"})
        with open(self.out / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _package_version():
    from . import __version__

    return __version__
