"""Seeded Monte-Carlo sweeps over (M, mode, architecture) and their persistence."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import SceneConfig, realize
from .optimizer import OptimizerParams, alignment_power, matched_rotation_power, solve
from .scattering import Architecture, ConfigError, Mode, RisConfig, circuit_complexity

MASK64 = (1 << 64) - 1
CHANNEL_STREAM = 0x43484E4C  # "CHNL", keeps channel seeds apart from trial seeds

RESULT_COLUMNS = ["sweep_id", "M", "mode", "architecture", "group_size", "trial", "seed",
                  "sum_rate_bps_hz", "iterations", "wall_ms"]
AGGREGATE_COLUMNS = ["sweep_id", "M", "mode", "architecture", "group_size", "trials",
                     "mean_rate", "std_rate", "ci95_halfwidth"]
METRICS = ("sum_rate", "power_gain")


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def child_seed(master_seed: int, *keys: int) -> int:
    """Stable 64-bit seed for ``keys`` under ``master_seed`` (splitmix64 chaining)."""
    h = splitmix64(master_seed & MASK64)
    for k in keys:
        h = splitmix64(h ^ (int(k) & MASK64))
    return h


@dataclass(frozen=True)
class SweepPoint:
    M: tuple[int, ...]
    mode: str = "reflective"
    architecture: str = "single"
    group_size: int | None = None
    sectors: int | None = None

    def __post_init__(self):
        M = (self.M,) if isinstance(self.M, (int, np.integer)) else tuple(int(m) for m in self.M)
        if not M:
            raise ConfigError("sweep needs at least one M value")
        object.__setattr__(self, "M", M)

    def configs(self) -> list[RisConfig]:
        return [RisConfig(m, self.mode, self.architecture, self.group_size, self.sectors) for m in self.M]


@dataclass
class ExperimentSpec:
    scene: SceneConfig = field(default_factory=SceneConfig)
    sweeps: list[SweepPoint] = field(default_factory=list)
    trials: int = 10
    master_seed: int = 0
    params: OptimizerParams = field(default_factory=OptimizerParams)
    output: str | None = None
    warm_start: bool = False
    metric: str = "sum_rate"

    def points(self) -> list[RisConfig]:
        """Sweeps expanded over their M values; the position is the ``sweep_id``."""
        return [cfg for sw in self.sweeps for cfg in sw.configs()]

    def validate(self):
        if int(self.trials) < 1:
            raise ConfigError("trials must be >= 1")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}")
        if not self.sweeps:
            raise ConfigError("no sweep points")
        for cfg in self.points():
            self.scene.check_compatible(cfg)
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sweeps"] = [dict(dataclasses.asdict(sw), M=list(sw.M)) for sw in self.sweeps]
        return d


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def spec_from_dict(data: dict) -> ExperimentSpec:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    if "scene" in data:
        data["scene"] = _build(SceneConfig, data["scene"], "scene")
    if "params" in data:
        data["params"] = _build(OptimizerParams, data["params"], "params")
    if "sweeps" in data:
        if not isinstance(data["sweeps"], list):
            raise ConfigError("sweeps: expected a list")
        data["sweeps"] = [_build(SweepPoint, sw, f"sweeps[{i}]") for i, sw in enumerate(data["sweeps"])]
    return _build(ExperimentSpec, data, "config").validate()


def load_spec(path) -> ExperimentSpec:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return spec_from_dict(data)


# --------------------------------------------------------------------------
# results

@dataclass
class PointResult:
    sweep_id: int
    config: RisConfig
    values: np.ndarray
    seeds: list[int]
    iterations: list[int]
    wall_ms: list[float]
    error: str | None = None

    @property
    def trials(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        return float(np.std(self.values, ddof=1)) if self.trials > 1 else 0.0

    @property
    def ci95(self) -> float:
        return 1.959963984540054 * self.std / math.sqrt(self.trials)

    @property
    def wall_time_ms(self) -> float:
        return float(np.sum(self.wall_ms))


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    points: list[PointResult]

    @property
    def failed(self) -> list[PointResult]:
        return [p for p in self.points if p.error is not None]

    def point(self, **match) -> PointResult:
        for p in self.points:
            c = p.config
            if all(_field(c, k) == v for k, v in match.items()):
                return p
        raise KeyError(match)


def _field(cfg: RisConfig, key):
    val = getattr(cfg, key)
    return val.value if hasattr(val, "value") else val


def _group_size_out(cfg: RisConfig):
    return cfg.group_antennas if cfg.architecture is not Architecture.NON_DIAGONAL else ""


# --------------------------------------------------------------------------
# execution

def _channel_seed(spec: ExperimentSpec, cfg: RisConfig, trial: int) -> int:
    mode_id = list(Mode).index(cfg.mode)
    return child_seed(spec.master_seed, CHANNEL_STREAM, cfg.M, mode_id, cfg.L, trial)


def _chains(spec: ExperimentSpec) -> list[list[int]]:
    """Sweep ids grouped into solve chains.

    Without warm start every point is its own chain.  With warm start the
    nested architectures of one (M, mode) are ordered poorest first.
    """
    points = spec.points()
    if not spec.warm_start:
        return [[i] for i in range(len(points))]
    nestable = (Architecture.SINGLE, Architecture.GROUP, Architecture.FULLY)
    buckets: dict[tuple, list[int]] = {}
    chains = []
    for i, cfg in enumerate(points):
        if cfg.architecture in nestable:
            buckets.setdefault((cfg.M, cfg.mode, cfg.L), []).append(i)
        else:
            chains.append([i])
    for ids in buckets.values():
        ids = sorted(ids, key=lambda i: (points[i].group_antennas, i))
        for a, b in zip(ids, ids[1:]):
            if points[b].group_antennas % points[a].group_antennas:
                raise ConfigError(f"{points[a].label()} is not nested in {points[b].label()}")
        chains.append(ids)
    return sorted(chains)


def _run_chain(spec: ExperimentSpec, ids: list[int], trial: int) -> list[tuple]:
    points = spec.points()
    out = []
    prev = None
    for i in ids:
        cfg = points[i]
        seed = child_seed(spec.master_seed, i, trial)
        t0 = time.perf_counter()
        try:
            ch = realize(spec.scene, cfg, _channel_seed(spec, cfg, trial))
            if spec.metric == "power_gain":
                value, iters = _oracle_power(spec.scene, cfg, ch), 0
            else:
                kw = {}
                if prev is not None:
                    kw = dict(init_state=prev.final_state, init_precoder=prev.final_precoder)
                res = solve(ch, cfg, spec.scene, spec.params, seed, **kw)
                prev = res
                value, iters = res.rate, res.iterations_used
            err = None
        except Exception as exc:  # recorded per point; other points continue
            value, iters, err, prev = math.nan, 0, f"{type(exc).__name__}: {exc}", None
        out.append((i, trial, seed, value, iters, (time.perf_counter() - t0) * 1e3, err))
    return out


def _oracle_power(scene: SceneConfig, cfg: RisConfig, ch) -> float:
    if ch.n_users != 1 or cfg.mode is not Mode.REFLECTIVE:
        raise ConfigError("power_gain metric needs one user and a reflective surface")
    if cfg.architecture is Architecture.SINGLE:
        return alignment_power(ch.h[0], ch.G, scene.tx_power)
    if cfg.architecture is Architecture.FULLY:
        return matched_rotation_power(ch.h[0], ch.G, scene.tx_power)
    raise ConfigError("power_gain metric compares single- and fully-connected surfaces only")


def _run_task(args):
    spec, ids, trial = args
    return _run_chain(spec, ids, trial)


def run(spec: ExperimentSpec, threads: int = 1) -> ExperimentResult:
    """Run every sweep point for ``spec.trials`` trials.

    Each (point, trial) draws its channel and solver randomness from seeds
    derived from ``master_seed``, so results do not depend on execution
    order or on ``threads``.
    """
    spec.validate()
    points = spec.points()
    tasks = [(spec, ids, t) for ids in _chains(spec) for t in range(spec.trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = [r for chunk in pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * threads)))
                    for r in chunk]
    else:
        rows = [r for task in tasks for r in _run_task(task)]

    n = spec.trials
    table = {i: [None] * n for i in range(len(points))}
    for row in rows:
        table[row[0]][row[1]] = row
    results = []
    for i, cfg in enumerate(points):
        recs = table[i]
        errors = [r[6] for r in recs if r[6]]
        results.append(PointResult(
            sweep_id=i, config=cfg,
            values=np.array([r[3] for r in recs], dtype=float),
            seeds=[r[2] for r in recs],
            iterations=[r[4] for r in recs],
            wall_ms=[r[5] for r in recs],
            error=errors[0] if errors else None,
        ))
    return ExperimentResult(spec, results)


# --------------------------------------------------------------------------
# persistence

def _describe(cfg: RisConfig):
    mode = cfg.mode.value if cfg.mode is not Mode.MULTI_SECTOR else f"multi_sector{cfg.L}"
    return cfg.M, mode, cfg.architecture.value, _group_size_out(cfg)


def write_result(result: ExperimentResult, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    value_col = "sum_rate_bps_hz" if result.spec.metric == "sum_rate" else "received_power_w"
    paths = {"results": out / "results.csv", "aggregate": out / "aggregate.csv", "json": out / "results.json"}

    with open(paths["results"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([value_col if c == "sum_rate_bps_hz" else c for c in RESULT_COLUMNS])
        for p in result.points:
            for t in range(p.trials):
                w.writerow([p.sweep_id, *_describe(p.config), t, p.seeds[t], repr(float(p.values[t])),
                            p.iterations[t], f"{p.wall_ms[t]:.3f}"])

    with open(paths["aggregate"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for p in result.points:
            w.writerow([p.sweep_id, *_describe(p.config), p.trials, repr(p.mean), repr(p.std), repr(p.ci95)])

    doc = {
        "spec": result.spec.to_dict(),
        "metric": result.spec.metric,
        "points": [
            {
                "sweep_id": p.sweep_id,
                "M": p.config.M, "mode": _describe(p.config)[1],
                "architecture": p.config.architecture.value, "group_size": _group_size_out(p.config),
                "values": [float(v) for v in p.values], "seeds": p.seeds, "iterations": p.iterations,
                "mean": p.mean, "std": p.std, "ci95_halfwidth": p.ci95,
                "wall_ms": p.wall_time_ms, "error": p.error,
            }
            for p in result.points
        ],
    }
    with open(paths["json"], "w") as fh:
        json.dump(doc, fh, indent=1, allow_nan=True)
    return paths


# --------------------------------------------------------------------------
# presets

def preset_fig3(side: str, trials: int = 20, master_seed: int = 2023) -> ExperimentSpec:
    Ms = (16, 32, 64)
    if side == "reflective":
        sweeps = [SweepPoint(Ms, "reflective", "single"),
                  SweepPoint(Ms, "reflective", "group", 2),
                  SweepPoint(Ms, "reflective", "group", 4),
                  SweepPoint(Ms, "reflective", "fully")]
    elif side == "fullspace":
        sweeps = [SweepPoint(Ms, "hybrid", "single"),
                  SweepPoint(Ms, "hybrid", "group", 4),
                  SweepPoint(Ms, "hybrid", "fully"),
                  SweepPoint(Ms, "multi_sector", "single", sectors=4),
                  SweepPoint(Ms, "multi_sector", "group", 8, sectors=4),
                  SweepPoint(Ms, "multi_sector", "fully", sectors=4)]
    else:
        raise ConfigError(f"unknown side {side!r}; use 'reflective' or 'fullspace'")
    return ExperimentSpec(scene=SceneConfig(), sweeps=sweeps, trials=trials, master_seed=master_seed)


def preset_power_gain(trials: int = 500, M: int = 64, master_seed: int = 62) -> ExperimentSpec:
    """Single user, single transmit antenna, i.i.d. Rayleigh hops (Rician with no LoS)."""
    scene = SceneConfig(N=1, K=1, rician_factor=0.0)
    sweeps = [SweepPoint(M, "reflective", "single"), SweepPoint(M, "reflective", "fully")]
    return ExperimentSpec(scene=scene, sweeps=sweeps, trials=trials, master_seed=master_seed,
                          metric="power_gain")


def power_ratio(result: ExperimentResult) -> float:
    """Mean fully-connected over mean single-connected received power."""
    return result.point(architecture="fully").mean / result.point(architecture="single").mean


def complexity_table(M: int = 32, sectors: int = 4, group_size: int = 8) -> list[dict]:
    """Component counts of the nine mode/architecture combinations."""
    rows = []
    for mode in (Mode.REFLECTIVE, Mode.HYBRID, Mode.MULTI_SECTOR):
        L = {Mode.REFLECTIVE: 1, Mode.HYBRID: 2}.get(mode, sectors)
        for arch in (Architecture.SINGLE, Architecture.GROUP, Architecture.FULLY):
            gs = group_size if arch is Architecture.GROUP else None
            cfg = RisConfig(M, mode, arch, gs, sectors if mode is Mode.MULTI_SECTOR else None)
            rows.append({"mode": mode.value, "L": L, "architecture": arch.value,
                         "group_size": cfg.group_antennas, "M": M, "components": circuit_complexity(cfg)})
    return rows


def write_complexity_table(out_dir, **kw) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = complexity_table(**kw)
    path = out / "complexity.csv"
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path
