"""Grey Wolf Optimizer over integer per-layer neuron counts.

Wolves move in continuous space; positions are clamped to the bounds after
every update and rounded only when handed to the fitness callback.
Leaders (alpha, beta, delta) are the three best architectures evaluated so
far, so the reported best fitness never gets worse.

Reference: Mirjalili, Mirjalili & Lewis, "Grey Wolf Optimizer",
Advances in Engineering Software 69 (2014).
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .errors import NumericError

logger = logging.getLogger(__name__)


class NetworkArch(NamedTuple):
    layer1: int
    layer2: int
    layer3: int

    def __str__(self):
        return f"{self.layer1}-{self.layer2}-{self.layer3}"

    @classmethod
    def parse(cls, text: str) -> "NetworkArch":
        parts = [int(p) for p in text.replace("--", "-").split("-")]
        if len(parts) != 3:
            raise ValueError(f"architecture needs 3 layer sizes, got {text!r}")
        return cls(*parts)


@dataclass
class GwoConfig:
    herd_size: int = 5
    iterations: int = 10
    lower_bound: float = 2
    upper_bound: float = 1024
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.herd_size < 3:
            raise ValueError("herd_size must be >= 3 so alpha, beta and delta exist")
        if not self.lower_bound < self.upper_bound:
            raise ValueError("lower_bound must be < upper_bound")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")


@dataclass
class Wolf:
    position: np.ndarray
    fitness: float = math.nan  # nan until evaluated


@dataclass
class ConvergenceTrace:
    best_fitness: list[float] = field(default_factory=list)
    best_position: list[NetworkArch] = field(default_factory=list)
    initial_fitness: float = math.inf
    initial_position: NetworkArch | None = None


@dataclass
class GwoResult:
    best: NetworkArch
    best_fitness: float
    trace: ConvergenceTrace
    evaluations: int  # fitness requests, including cache hits
    cache_hits: int
    cache: dict = field(default_factory=dict)


def clamp_and_round(position, config: GwoConfig | None = None) -> NetworkArch:
    """Clamp to the bounds, then round half away from zero."""
    lo = 2 if config is None else config.lower_bound
    hi = 1024 if config is None else config.upper_bound
    out = []
    for x in np.asarray(position, dtype=float):
        x = min(max(float(x), lo), hi)
        out.append(int(math.copysign(math.floor(abs(x) + 0.5), x)))
    return NetworkArch(*out)


class _CachedFitness:
    def __init__(self, fitness: Callable[[NetworkArch], float]):
        self.fitness = fitness
        self.cache: dict[NetworkArch, float] = {}
        self.requests = 0
        self.hits = 0

    def _call(self, arch):
        try:
            value = float(self.fitness(arch))
        except (ArithmeticError, FloatingPointError) as exc:
            logger.warning("fitness failed for %s: %s; treating as +inf", arch, exc)
            return math.inf
        if not math.isfinite(value):
            logger.warning("non-finite fitness for %s; treating as +inf", arch)
            return math.inf
        return value

    def evaluate(self, archs: list[NetworkArch], workers: int = 1) -> list[float]:
        self.requests += len(archs)
        todo = []
        for a in archs:
            if a in self.cache or a in todo:
                self.hits += 1
            else:
                todo.append(a)
        if workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                values = list(pool.map(self._call, todo))
        else:
            values = [self._call(a) for a in todo]
        self.cache.update(zip(todo, values))
        return [self.cache[a] for a in archs]


def _rank(pool: list[tuple[float, NetworkArch, np.ndarray]]):
    # stable: ties keep pool order (incumbent leaders first, then wolves by index)
    return sorted(pool, key=lambda item: item[0])


def gwo_minimize(fitness: Callable[[NetworkArch], float], config: GwoConfig | None = None) -> GwoResult:
    """Minimize ``fitness`` over integer architectures with a wolf herd.

    The herd is evaluated once at initialization and once after each of
    ``config.iterations`` position updates. Non-finite fitness values count
    as ``+inf``; a herd in which every evaluation so far is infinite raises
    :class:`NumericError`.
    """
    config = config or GwoConfig()
    rng = np.random.default_rng(config.seed)
    lo, hi, dim = float(config.lower_bound), float(config.upper_bound), 3
    cf = _CachedFitness(fitness)
    wolves = [Wolf(rng.uniform(lo, hi, size=dim)) for _ in range(config.herd_size)]

    def evaluate_herd():
        archs = [clamp_and_round(w.position, config) for w in wolves]
        for w, f in zip(wolves, cf.evaluate(archs, config.workers)):
            w.fitness = f
        return archs

    archs = evaluate_herd()
    leaders = _rank([(w.fitness, a, w.position.copy()) for w, a in zip(wolves, archs)])[:3]
    if math.isinf(leaders[0][0]):
        raise NumericError("every wolf in the initial herd has infinite fitness")
    trace = ConvergenceTrace(initial_fitness=leaders[0][0], initial_position=leaders[0][1])

    for it in range(config.iterations):
        a = 2.0 - 2.0 * it / config.iterations
        for w in wolves:
            x = w.position
            moves = []
            for _, _, leader in leaders:
                A = 2.0 * a * rng.random(dim) - a
                C = 2.0 * rng.random(dim)
                D = np.abs(C * leader - x)
                moves.append(leader - A * D)
            w.position = np.clip(np.mean(moves, axis=0), lo, hi)
        archs = evaluate_herd()
        pool = leaders + [(w.fitness, arch, w.position.copy()) for w, arch in zip(wolves, archs)]
        leaders = _rank(pool)[:3]
        if math.isinf(leaders[0][0]):
            raise NumericError("every evaluated architecture has infinite fitness")
        trace.best_fitness.append(leaders[0][0])
        trace.best_position.append(leaders[0][1])
        logger.debug("gwo iteration %d: best %.6g at %s", it + 1, leaders[0][0], leaders[0][1])

    return GwoResult(
        best=leaders[0][1],
        best_fitness=leaders[0][0],
        trace=trace,
        evaluations=cf.requests,
        cache_hits=cf.hits,
        cache=dict(cf.cache),
    )


def write_trace_csv(trace: ConvergenceTrace, path) -> None:
    """Write ``iteration,best_rmse,layer1,layer2,layer3`` rows, one per iteration."""
    if not trace.best_fitness:
        raise ValueError("empty convergence trace")
    try:
        fh = Path(path).open("w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc
    with fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "best_rmse", "layer1", "layer2", "layer3"])
        for i, (f, arch) in enumerate(zip(trace.best_fitness, trace.best_position), start=1):
            w.writerow([i, repr(float(f)), *arch])


def read_trace_csv(path) -> ConvergenceTrace:
    trace = ConvergenceTrace()
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            trace.best_fitness.append(float(row["best_rmse"]))
            trace.best_position.append(NetworkArch(int(row["layer1"]), int(row["layer2"]), int(row["layer3"])))
    return trace
