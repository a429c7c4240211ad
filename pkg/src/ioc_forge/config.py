"""Run configuration: defaults, YAML loading, overrides and validation.

Schema (all keys optional)::

    system:   {A: [[..]], B: [[..]], C: [[..]], D: [[..]], lag_bound: int}
    weights:  {Q: [[..]], R: [[..]]}
    x0: [..]
    T: 50
    T_ini: 3
    N: 10
    excitation_amplitude: 1.0
    seeds:    {master: 0, trials: 15}
    noise:    {snr_db: .inf, channels: outputs, target: online}
    solver: simplified
    sweeps:   {tini: [1, .., 10], snr_db: [20, .., 60],
               bench_tini: [3, 5, 7, 9, 11], bench_repeats: 7,
               solvers: [vanilla, simplified], record_timing: false}
    output_dir: out
    label: null

Precedence: command-line override > file > default.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .forward import LqObjective
from .lti import CHANNELS, LtiSystem

NOISE_TARGETS = ("online", "offline", "both")
SOLVERS = ("vanilla", "simplified")


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "system": {
        "A": [[1.0, 1.0], [0.0, 1.0]],
        "B": [[0.0], [1.0]],
        "C": [[1.0, 0.0], [0.0, 1.0]],
        "D": [[0.0], [0.0]],
        "lag_bound": None,
    },
    "weights": {"Q": [[1.0, 0.2], [0.2, 0.8]], "R": [[0.4]]},
    "x0": [-3.5, 0.0],
    "T": 50,
    "T_ini": 3,
    "N": 10,
    "excitation_amplitude": 1.0,
    "seeds": {"master": 0, "trials": 15},
    "noise": {"snr_db": math.inf, "channels": "outputs", "target": "online"},
    "solver": "simplified",
    "sweeps": {
        "tini": list(range(1, 11)),
        "snr_db": [20.0, 30.0, 40.0, 50.0, 60.0],
        "bench_tini": [3, 5, 7, 9, 11],
        "bench_repeats": 7,
        "solvers": ["vanilla", "simplified"],
        "record_timing": False,
    },
    "output_dir": "out",
    "label": None,
}


@dataclass(frozen=True)
class RunConfig:
    system: LtiSystem
    weights: LqObjective
    x0: np.ndarray
    T: int = 50
    T_ini: int = 3
    N: int = 10
    excitation_amplitude: float = 1.0
    master_seed: int = 0
    trials: int = 15
    snr_db: float = math.inf
    noise_channels: str = "outputs"
    noise_target: str = "online"
    solver: str = "simplified"
    tini_grid: tuple[int, ...] = tuple(range(1, 11))
    snr_grid: tuple[float, ...] = (20.0, 30.0, 40.0, 50.0, 60.0)
    bench_tini: tuple[int, ...] = (3, 5, 7, 9, 11)
    bench_repeats: int = 7
    sweep_solvers: tuple[str, ...] = SOLVERS
    record_timing: bool = False
    output_dir: Path = field(default_factory=lambda: Path("out"))
    label: str | None = None

    @property
    def n(self) -> int:
        return self.system.n

    def with_(self, **kw) -> "RunConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return RunConfig(**d)

    def run_label(self) -> str:
        return self.label or f"seed{self.master_seed}"


def _merge(base: dict, upd: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in upd.items():
        if k not in base:
            raise ConfigError(f"unknown config key '{path}{k}'")
        if isinstance(base[k], dict) and isinstance(v, dict):
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = v
    return out


def _set_dotted(d: dict, key: str, value: Any) -> dict:
    parts = key.split(".")
    cur = d
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = value
    return d


def _matrix(raw, name: str) -> np.ndarray:
    try:
        M = np.atleast_2d(np.asarray(raw, dtype=float))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field '{name}' is not a numeric matrix: {exc}") from exc
    if M.ndim != 2:
        raise ConfigError(f"field '{name}' must be a 2-D matrix")
    return M


def _positive_int(raw, name: str) -> int:
    if isinstance(raw, bool) or not isinstance(raw, (int, np.integer)) or raw < 1:
        raise ConfigError(f"field '{name}' must be a positive integer, got {raw!r}")
    return int(raw)


def load_yaml(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: YAML parse error{where}: {getattr(exc, 'problem', exc)}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def parse_config(path=None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Build a validated :class:`RunConfig`.

    ``overrides`` maps dotted keys (``"seeds.master"``) to values and is
    applied after the file.
    """
    raw = copy.deepcopy(DEFAULTS)
    if path is not None:
        raw = _merge(raw, load_yaml(path))
    if overrides:
        upd: dict = {}
        for k, v in overrides.items():
            if v is not None:
                _set_dotted(upd, k, v)
        raw = _merge(raw, upd)
    return from_dict(raw)


def from_dict(raw: dict) -> RunConfig:
    s = raw["system"]
    try:
        system = LtiSystem(
            _matrix(s["A"], "system.A"), _matrix(s["B"], "system.B"),
            _matrix(s["C"], "system.C"), _matrix(s["D"], "system.D"), s.get("lag_bound"),
        )
    except ValueError as exc:
        raise ConfigError(f"field 'system': {exc}") from exc
    try:
        weights = LqObjective(_matrix(raw["weights"]["Q"], "weights.Q"), _matrix(raw["weights"]["R"], "weights.R"))
    except ValueError as exc:
        raise ConfigError(f"field 'weights': {exc}") from exc
    if weights.Q.shape != (system.p, system.p) or weights.R.shape != (system.m, system.m):
        raise ConfigError("field 'weights': Q must be p x p and R must be m x m")
    x0 = np.asarray(raw["x0"], dtype=float).ravel()
    if x0.size != system.n:
        raise ConfigError(f"field 'x0' must have length n={system.n}")

    T = _positive_int(raw["T"], "T")
    T_ini = _positive_int(raw["T_ini"], "T_ini")
    N = _positive_int(raw["N"], "N")
    if T < T_ini + N:
        raise ConfigError(f"constraint violated: T >= T_ini + N (T={T}, T_ini={T_ini}, N={N})")

    seeds = raw["seeds"]
    master = seeds["master"]
    if isinstance(master, bool) or not isinstance(master, (int, np.integer)) or master < 0:
        raise ConfigError("field 'seeds.master' must be a nonnegative integer")
    trials = _positive_int(seeds["trials"], "seeds.trials")

    noise = raw["noise"]
    snr = float(noise["snr_db"])
    if math.isnan(snr):
        raise ConfigError("field 'noise.snr_db' must be a number or .inf")
    if noise["channels"] not in CHANNELS:
        raise ConfigError(f"field 'noise.channels' must be one of {CHANNELS}")
    if noise["target"] not in NOISE_TARGETS:
        raise ConfigError(f"field 'noise.target' must be one of {NOISE_TARGETS}")
    if raw["solver"] not in SOLVERS:
        raise ConfigError(f"field 'solver' must be one of {SOLVERS}")

    sw = raw["sweeps"]
    tini = tuple(_positive_int(t, "sweeps.tini") for t in sw["tini"])
    bench = tuple(_positive_int(t, "sweeps.bench_tini") for t in sw["bench_tini"])
    for name, grid in (("sweeps.tini", tini), ("sweeps.bench_tini", bench)):
        if grid and T < max(grid) + N:
            raise ConfigError(f"constraint violated in '{name}': T >= T_ini + N for T_ini={max(grid)}")
    solvers = tuple(sw["solvers"])
    if not solvers or any(x not in SOLVERS for x in solvers):
        raise ConfigError(f"field 'sweeps.solvers' must be a nonempty subset of {SOLVERS}")

    return RunConfig(
        system=system, weights=weights, x0=x0, T=T, T_ini=T_ini, N=N,
        excitation_amplitude=float(raw["excitation_amplitude"]),
        master_seed=int(master), trials=trials,
        snr_db=snr, noise_channels=noise["channels"], noise_target=noise["target"],
        solver=raw["solver"], tini_grid=tini,
        snr_grid=tuple(float(x) for x in sw["snr_db"]),
        bench_tini=bench, bench_repeats=_positive_int(sw["bench_repeats"], "sweeps.bench_repeats"),
        sweep_solvers=solvers, record_timing=bool(sw["record_timing"]),
        output_dir=Path(raw["output_dir"]), label=raw["label"],
    )


def default_config() -> RunConfig:
    return parse_config()
