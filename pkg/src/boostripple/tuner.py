"""Simulation-in-the-loop coordinate search for the harmonic feedback gains.

Each one-dimensional search sweeps a grid over one gain with the others held
fixed, refines around the best grid point with a short golden-section stage,
and keeps the new value only if it beats the incumbent.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable

import numpy as np

from .analysis import peak_to_peak, reduction_ratio
from .controller import ZERO_K
from .simulation import ScenarioConfig, gains_to_json, run

INFEASIBLE = math.inf
# v_dc outside this band (relative to v_ref) in the measurement window = lost regulation
REGULATION_BAND = 0.5
GAIN_NAMES = ("z2", "z3", "z4", "z5", "z6", "z7")
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class SearchFailure(RuntimeError):
    def __init__(self, message: str, log: list):
        super().__init__(message)
        self.log = log


@dataclass(frozen=True)
class TuneSpec:
    scenario: ScenarioConfig
    target: str = "voltage"
    gain_order: tuple[str, ...] = GAIN_NAMES
    intervals: tuple[tuple[float, float], ...] = ((-1.0, 1.0),) * 6
    grid_points: int = 21
    passes: int = 2
    golden_iterations: int = 8
    initial: tuple[float, ...] = ZERO_K
    workers: int = 1

    def __post_init__(self):
        if self.target not in ("voltage", "current"):
            raise ValueError("target must be 'voltage' or 'current'")
        if sorted(self.gain_order) != sorted(GAIN_NAMES):
            raise ValueError(f"gain_order must be a permutation of {GAIN_NAMES}")
        if len(self.intervals) != 6 or any(not lo < hi for lo, hi in self.intervals):
            raise ValueError("need six intervals with lo < hi")
        if self.grid_points < 5 or self.passes < 1:
            raise ValueError("grid_points must be >= 5 and passes >= 1")


@dataclass
class TuneResult:
    target: str
    K: tuple[float, ...]
    objective: float
    baseline: float
    log: list = field(default_factory=list, repr=False)

    @property
    def reduction(self) -> float:
        return reduction_ratio(self.baseline, self.objective)

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "K": gains_to_json(self.K),
            "objective": self.objective,
            "baseline": self.baseline,
            "reduction": self.reduction,
        }


def objective_eval(scenario: ScenarioConfig, K, target: str = "voltage") -> float:
    """Steady-state ripple with harmonic gains ``K``; ``INFEASIBLE`` on divergence.

    Divergence covers the simulation's own stop condition and any excursion of
    v_dc outside ``v_ref * (1 +- REGULATION_BAND)`` in the measurement window.

    voltage: lowpass p2p of v_dc with only the voltage loop active.
    current: raw p2p of i_L with the scenario's voltage gains plus ``K``.
    """
    K = tuple(float(k) for k in K)
    if target == "voltage":
        res = run(scenario.with_gains(Kv=K, Ki=ZERO_K), feedback="voltage")
        column, mode = "v_dc", "lowpass"
    elif target == "current":
        res = run(scenario.with_gains(Ki=K), feedback="voltage+current")
        column, mode = "i_L", "raw"
    else:
        raise ValueError("target must be 'voltage' or 'current'")
    if res.diverged:
        return INFEASIBLE
    tr = res.trace
    v = tr["v_dc"][tr.mask(tr.default_window())]
    v_ref = scenario.controller.v_ref
    if v.min() < (1 - REGULATION_BAND) * v_ref or v.max() > (1 + REGULATION_BAND) * v_ref:
        return INFEASIBLE
    value = peak_to_peak(res.trace, column, mode=mode)
    return value if math.isfinite(value) else INFEASIBLE


def _better(a: tuple[float, float], b: tuple[float, float]) -> bool:
    """(objective, gain) ordering: lower objective, ties toward the gain closest to 0."""
    if a[0] != b[0]:
        return a[0] < b[0]
    return (abs(a[1]), a[1]) < (abs(b[1]), b[1])


def _golden(f: Callable[[float], float], lo: float, hi: float, iterations: int):
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    seen = [(fc, c), (fd, d)]
    for _ in range(iterations):
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = f(c)
            seen.append((fc, c))
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = f(d)
            seen.append((fd, d))
    return seen


def coordinate_search(spec: TuneSpec, objective: Callable | None = None) -> TuneResult:
    """Repeated one-dimensional grid + golden-section searches over the six gains.

    ``objective(K) -> float`` defaults to :func:`objective_eval` on the spec's
    scenario.  Deterministic for a given spec.
    """
    if objective is None:
        objective = partial(objective_eval, spec.scenario, target=spec.target)
    pool = ProcessPoolExecutor(spec.workers) if spec.workers > 1 else None
    log: list[dict] = []

    def evaluate_many(Ks, stage, pass_no, gain):
        if pool is not None:
            values = list(pool.map(objective, Ks))
        else:
            values = [objective(K) for K in Ks]
        for K, v in zip(Ks, values):
            log.append({"pass": pass_no, "gain": gain, "stage": stage, "K": list(K),
                        "objective": None if not math.isfinite(v) else v})
        return values

    try:
        K = list(spec.initial)
        baseline = evaluate_many([tuple(ZERO_K)], "baseline", 0, None)[0]
        if tuple(K) == tuple(ZERO_K):
            best = baseline
        else:
            best = evaluate_many([tuple(K)], "initial", 0, None)[0]
        for pass_no in range(1, spec.passes + 1):
            for name in spec.gain_order:
                j = GAIN_NAMES.index(name)
                lo, hi = spec.intervals[j]
                grid = np.linspace(lo, hi, spec.grid_points)

                def with_gain(g, K=K, j=j):
                    trial = list(K)
                    trial[j] = float(g)
                    return tuple(trial)

                values = evaluate_many([with_gain(g) for g in grid], "grid", pass_no, name)
                cand = (values[0], float(grid[0]))
                idx = 0
                for i, (v, g) in enumerate(zip(values, grid)):
                    if _better((v, float(g)), cand):
                        cand, idx = (v, float(g)), i
                if math.isfinite(cand[0]):
                    a = grid[max(idx - 1, 0)]
                    b = grid[min(idx + 1, len(grid) - 1)]

                    def f1(g):
                        return evaluate_many([with_gain(g)], "golden", pass_no, name)[0]

                    for v, g in _golden(f1, float(a), float(b), spec.golden_iterations):
                        if _better((v, g), cand):
                            cand = (v, g)
                if cand[0] < best:
                    best = cand[0]
                    K[j] = cand[1]
                log.append({"pass": pass_no, "gain": name, "stage": "accept", "K": list(K),
                            "objective": best if math.isfinite(best) else None})
    finally:
        if pool is not None:
            pool.shutdown()
    if not math.isfinite(best):
        raise SearchFailure("every evaluation was infeasible", log)
    return TuneResult(spec.target, tuple(K), best, baseline, log)
