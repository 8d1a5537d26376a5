"""Scenario configuration and the closed-loop simulation loop.

Per control sample ``k`` (one PWM period):

1. the plant delivers ``v_dc[k]``, ``i_L[k]`` (plus optional measurement noise);
2. the observers' frequency follows the motor speed (if configured);
3. both observers consume the sample;
4. the controller computes the duty applied over the next period.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .analysis import Trace
from .controller import ZERO_K, ControllerConfig, ControllerState, compute_duty
from .observer import HarmonicObserver, beta_from_speed
from .plant import (BoostParams, ConstantCurrent, LoadModel, MotorState, PeriodicHarmonics,
                    Plant, PlantState, SixStepBLDC)

TRACE_COLUMNS = (
    ["t", "v_dc", "i_L", "duty"]
    + [f"zv{i}" for i in range(1, 8)]
    + [f"zi{i}" for i in range(1, 8)]
    + ["i_load", "beta"]
)
FEEDBACK_MODES = ("off", "voltage", "voltage+current")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ObserverSettings:
    rho: float = 0.99
    speed_source: str = "motor"  # "motor" or "fixed"
    rpm: float = 1000.0
    pole_pairs: int = 4
    pulses_per_electrical_cycle: int = 6
    retune_interval: float = 0.01
    min_rpm: float = 100.0

    def __post_init__(self):
        if self.speed_source not in ("motor", "fixed"):
            raise ConfigError("observer.speed_source must be 'motor' or 'fixed'")
        if not 0 < self.rho < 1:
            raise ConfigError("rho must be in (0,1)")

    @property
    def beta(self) -> float:
        return beta_from_speed(self.rpm, self.pole_pairs, self.pulses_per_electrical_cycle)


@dataclass(frozen=True)
class SimSettings:
    duration: float = 0.6
    seed: int = 0
    noise_stddev_v: float = 0.0
    noise_stddev_i: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError("sim.duration must be > 0")
        if self.noise_stddev_v < 0 or self.noise_stddev_i < 0:
            raise ConfigError("noise standard deviations must be >= 0")


@dataclass(frozen=True)
class OutputSettings:
    trace: str | None = None
    metrics: str | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    plant: BoostParams = field(default_factory=BoostParams)
    load: LoadModel = field(default_factory=lambda: ConstantCurrent(1.0))
    observer: ObserverSettings = field(default_factory=ObserverSettings)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    sim: SimSettings = field(default_factory=SimSettings)
    outputs: OutputSettings = field(default_factory=OutputSettings)

    def __post_init__(self):
        if abs(self.controller.T - self.plant.period) > 1e-15:
            object.__setattr__(self, "controller", replace(self.controller, T=self.plant.period))
        if self.observer.speed_source == "motor" and not isinstance(self.load, SixStepBLDC):
            raise ConfigError("observer.speed_source 'motor' needs a six_step_bldc load")

    def with_gains(self, Kv=None, Ki=None) -> "ScenarioConfig":
        c = self.controller
        return replace(self, controller=replace(c, Kv=c.Kv if Kv is None else tuple(Kv),
                                                Ki=c.Ki if Ki is None else tuple(Ki)))

    def with_feedback(self, mode: str) -> "ScenarioConfig":
        if mode not in FEEDBACK_MODES:
            raise ConfigError(f"feedback must be one of {FEEDBACK_MODES}")
        if mode == "off":
            return self.with_gains(ZERO_K, ZERO_K)
        if mode == "voltage":
            return self.with_gains(Ki=ZERO_K)
        return self


# ---------------------------------------------------------------- JSON I/O

_LOAD_TYPES = {
    "constant_current": ConstantCurrent,
    "periodic_harmonics": PeriodicHarmonics,
    "six_step_bldc": SixStepBLDC,
}
_LOAD_NAMES = {v: k for k, v in _LOAD_TYPES.items()}


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _gains(value, where: str):
    if isinstance(value, dict):
        keys = [f"z{i}" for i in range(2, 8)]
        unknown = sorted(set(value) - set(keys))
        missing = [k for k in keys if k not in value]
        if unknown:
            raise ConfigError(f"{where}: unknown gain keys {unknown}")
        if missing:
            raise ConfigError(f"{where}: missing gain keys {missing}")
        return tuple(float(value[k]) for k in keys)
    return tuple(float(v) for v in value)


def gains_to_json(K) -> dict:
    return {f"z{i}": float(k) for i, k in zip(range(2, 8), K)}


def config_from_dict(data: dict) -> ScenarioConfig:
    allowed = {f.name for f in fields(ScenarioConfig)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    kw = {}
    if "plant" in data:
        kw["plant"] = _build(BoostParams, data["plant"], "plant")
    if "load" in data:
        ld = dict(data["load"])
        kind = ld.pop("type", None)
        if kind not in _LOAD_TYPES:
            raise ConfigError(f"load.type must be one of {sorted(_LOAD_TYPES)}")
        kw["load"] = _build(_LOAD_TYPES[kind], ld, "load")
    if "observer" in data:
        kw["observer"] = _build(ObserverSettings, data["observer"], "observer")
    if "controller" in data:
        c = dict(data["controller"])
        for name in ("Kv", "Ki"):
            if name in c:
                c[name] = _gains(c[name], f"controller.{name}")
        kw["controller"] = _build(ControllerConfig, c, "controller")
    if "sim" in data:
        kw["sim"] = _build(SimSettings, data["sim"], "sim")
    if "outputs" in data:
        kw["outputs"] = _build(OutputSettings, data["outputs"], "outputs")
    try:
        return ScenarioConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(cfg: ScenarioConfig) -> dict:
    load = {"type": _LOAD_NAMES[type(cfg.load)], **asdict(cfg.load)}
    if isinstance(cfg.load, PeriodicHarmonics):
        load["components"] = [list(c) for c in cfg.load.components]
    ctrl = asdict(cfg.controller)
    ctrl["Kv"] = gains_to_json(cfg.controller.Kv)
    ctrl["Ki"] = gains_to_json(cfg.controller.Ki)
    return {
        "plant": asdict(cfg.plant),
        "load": load,
        "observer": asdict(cfg.observer),
        "controller": ctrl,
        "sim": asdict(cfg.sim),
        "outputs": asdict(cfg.outputs),
    }


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


# ------------------------------------------------------------------ presets

def _tuned_gains() -> dict:
    path = Path(__file__).with_name("tuned_gains.json")
    with open(path) as fh:
        return json.load(fh)


def paper_default() -> ScenarioConfig:
    """13.9 V -> 24 V boost (330 uH, 470 uF, 0.1 ohm ESR, 18 kHz) feeding a
    six-step BLDC drive near 1000 rpm; harmonic feedback enabled at 0.1 s
    (voltage) and 0.2 s (current) with the recorded tuned gains.
    """
    tuned = _tuned_gains()
    plant = BoostParams(v_in=13.9, L=330e-6, C=470e-6, esr=0.1, r_on=0.0, f_pwm=18000.0,
                        substeps_per_period=16)
    load = SixStepBLDC(R_phase=0.41, L_phase=0.0007, k_t=0.217, flat_angle=120.0, J=9.6e-5,
                       F=1e-3, pole_pairs=4, load_torque=0.27, commutation_advance=10.0)
    controller = ControllerConfig(
        D0=1.0 - 13.9 / 24.0, i_L0=2.5, v_ref=24.0, k1=-0.08, k2=-0.06, k3=-1.0,
        T=plant.period, duty_min=0.0, duty_max=0.8,
        Kv=_gains(tuned["voltage"]["K"], "tuned voltage"),
        Ki=_gains(tuned["current"]["K"], "tuned current"),
        enable_time_v=0.1, enable_time_i=0.2,
    )
    return ScenarioConfig(plant, load, ObserverSettings(), controller, SimSettings(duration=0.6),
                          OutputSettings())


PRESETS = {"paper-default": paper_default}


# --------------------------------------------------------------- simulation

@dataclass
class SimulationResult:
    trace: Trace
    diverged: bool
    final_state: PlantState
    retunes: int = 0

    @property
    def reason(self) -> str | None:
        return "divergence: v_dc left (0, 5 v_ref] or became non-finite" if self.diverged else None


def initial_state(cfg: ScenarioConfig) -> PlantState:
    """Cold start: inductor empty, capacitor charged to v_in, motor at rest."""
    motor = MotorState() if isinstance(cfg.load, SixStepBLDC) else None
    return PlantState(i_L=0.0, v_C=cfg.plant.v_in, t=0.0, motor=motor)


def run(cfg: ScenarioConfig, feedback: str = "voltage+current") -> SimulationResult:
    cfg = cfg.with_feedback(feedback)
    p, ctrl, obs = cfg.plant, cfg.controller, cfg.observer
    plant = Plant(p, cfg.load, initial_state(cfg))
    cstate = ControllerState()
    T = p.period
    beta0 = obs.beta
    ov = HarmonicObserver(beta0, T, obs.rho, obs.retune_interval)
    oi = HarmonicObserver(beta0, T, obs.rho, obs.retune_interval)
    track_motor = obs.speed_source == "motor"
    rng = np.random.default_rng(cfg.sim.seed)
    sv, si = cfg.sim.noise_stddev_v, cfg.sim.noise_stddev_i
    v_limit = 5.0 * ctrl.v_ref

    n = int(round(cfg.sim.duration / T))
    rows = np.zeros((n, len(TRACE_COLUMNS)))
    retunes = 0
    diverged = False
    duty = min(max(ctrl.D0, ctrl.duty_min), ctrl.duty_max)
    k_done = 0
    for k in range(n):
        meas = plant.step(duty)
        t = (k + 1) * T
        v, i, i_load = float(meas[0]), float(meas[1]), float(meas[2])
        if not (math.isfinite(v) and math.isfinite(i)) or v > v_limit or v < 0:
            diverged = True
            break
        v_m = v + sv * rng.standard_normal() if sv > 0 else v
        i_m = i + si * rng.standard_normal() if si > 0 else i
        if track_motor:
            rpm = plant._motor[1] * 60.0 / (2 * math.pi)
            if rpm >= obs.min_rpm:
                b = beta_from_speed(rpm, obs.pole_pairs, obs.pulses_per_electrical_cycle)
                if 3 * b * T < math.pi:
                    retunes += ov.request_beta(b, t)
                    oi.request_beta(b, t)
        zv = ov.update(v_m)
        zi = oi.update(i_m)
        duty = compute_duty(ctrl, cstate, i_m, v_m, zv, zi, t)
        row = rows[k]
        row[0:4] = (t, v, i, duty)
        row[4:11] = zv
        row[11:18] = zi
        row[18] = i_load
        row[19] = ov.cfg.beta
        k_done = k + 1
    rows = rows[:k_done]
    trace = Trace(T, {name: rows[:, j] for j, name in enumerate(TRACE_COLUMNS)})
    return SimulationResult(trace, diverged, plant.state, retunes)
