"""Scenario configuration (JSON) and its validation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .algebra import KossakowskiSpec, kossakowski_from_parts
from .errors import ConfigError, MeanFieldError
from .microsim import SECTOR_MAX_N

_KNOWN_KEYS = {"kossakowski", "initial_bloch", "initial_covariance", "n_values", "t_max",
               "tol", "micro_tol", "n_times", "fock", "seed", "output_dir", "char_probes"}


@dataclass(frozen=True)
class FockConfig:
    b: float
    n_max: int


@dataclass(frozen=True)
class Scenario:
    spec: KossakowskiSpec
    initial_bloch: np.ndarray
    initial_covariance: np.ndarray
    n_values: tuple[int, ...]
    t_max: float
    tol: float = 1e-10
    micro_tol: float = 1e-10
    n_times: int = 101
    fock: FockConfig | None = None
    seed: int = 0
    output_dir: Path = Path("out")
    char_probes: int = 0
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_times)

    def probes(self) -> np.ndarray:
        """Seeded random probe vectors for characteristic-function output."""
        rng = np.random.default_rng(self.seed)
        return rng.uniform(-2.0, 2.0, size=(self.char_probes, 3))


def _matrix(value, name, shape) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: not a numeric matrix") from exc
    if arr.shape != shape:
        raise ConfigError(f"{name}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name}: non-finite entries")
    return arr


def scenario_from_dict(cfg: dict[str, Any], *, seed: int | None = None,
                       output_dir=None) -> Scenario:
    """Validate a config mapping; any problem raises :class:`ConfigError`."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        k = cfg["kossakowski"]
        dim = int(k.get("dim", 3))
        if dim != 3:
            raise ConfigError("scenario runs need a 3x3 Kossakowski matrix")
        re = _matrix(k["re"], "kossakowski.re", (dim, dim))
        im = _matrix(k.get("im", np.zeros((dim, dim))), "kossakowski.im", (dim, dim))
        spec = kossakowski_from_parts(re, im)
        omega = _matrix(cfg["initial_bloch"], "initial_bloch", (3,))
        if np.linalg.norm(omega) > 0.5 + 1e-12:
            raise ConfigError("initial_bloch longer than 1/2")
        if cfg.get("initial_covariance") is None:
            cov = np.eye(3) / 4 - np.outer(omega, omega)
        else:
            cov = _matrix(cfg["initial_covariance"], "initial_covariance", (3, 3))
            if np.max(np.abs(cov - cov.T)) > 1e-12:
                raise ConfigError("initial_covariance must be symmetric")
        n_values = tuple(int(n) for n in cfg.get("n_values", []))
        if any(n < 2 or n > SECTOR_MAX_N for n in n_values):
            raise ConfigError(f"n_values must lie in [2, {SECTOR_MAX_N}]")
        if len(set(n_values)) != len(n_values):
            raise ConfigError("n_values must be distinct")
        t_max = float(cfg["t_max"])
        tol = float(cfg.get("tol", 1e-10))
        micro_tol = float(cfg.get("micro_tol", 1e-10))
        n_times = int(cfg.get("n_times", 101))
        if not (t_max > 0 and tol > 0 and micro_tol > 0 and n_times >= 2):
            raise ConfigError("t_max, tol, micro_tol must be positive and n_times >= 2")
        fock = None
        if cfg.get("fock") is not None:
            fock = FockConfig(float(cfg["fock"]["b"]), int(cfg["fock"]["n_max"]))
            if fock.n_max < 4:
                raise ConfigError("fock.n_max must be at least 4")
        char_probes = int(cfg.get("char_probes", 0))
        if char_probes < 0:
            raise ConfigError("char_probes must be non-negative")
        seed_val = int(cfg.get("seed", 0)) if seed is None else int(seed)
        if seed_val < 0 or seed_val >= 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        out = Path(output_dir if output_dir is not None else cfg.get("output_dir", "out"))
    except ConfigError:
        raise
    except MeanFieldError as exc:
        raise ConfigError(f"kossakowski: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc!r}") from exc
    echo = dict(cfg)
    echo["seed"] = seed_val
    echo["output_dir"] = str(out)
    return Scenario(spec=spec, initial_bloch=omega, initial_covariance=cov,
                    n_values=n_values, t_max=t_max, tol=tol, micro_tol=micro_tol,
                    n_times=n_times, fock=fock, seed=seed_val, output_dir=out,
                    char_probes=char_probes, raw=echo)


def load_scenario(path, **overrides) -> Scenario:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return scenario_from_dict(cfg, **overrides)
