"""Switching-level boost converter feeding a dc-link load.

One call to :func:`sample_step` advances one PWM period.  The period is cut
into ``substeps_per_period`` equal trapezoidal steps; the step containing the
turn-off instant is split there so the duty cycle is not quantized.

Linear sub-models (``x' = A x + b``), states ``(i_L, v_C[, i_m])``:

* switch ON: ``L di_L/dt = v_in - r_on i_L``, capacitor feeds the load alone;
* switch OFF: ``L di_L/dt = v_in - v_dc``, capacitor current ``i_L - i_load``;
* ``v_dc = v_C + esr * i_C``;
* six-step BLDC load: ``2 L_ph di_m/dt = v_dc - 2 R_ph i_m - e_pair``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class BoostParams:
    v_in: float = 13.9
    L: float = 330e-6
    C: float = 470e-6
    esr: float = 0.1
    r_on: float = 0.0
    f_pwm: float = 18000.0
    substeps_per_period: int = 16

    def __post_init__(self):
        for name in ("v_in", "L", "C", "f_pwm"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.esr < 0 or self.r_on < 0:
            raise ValueError("esr and r_on must be >= 0")
        if self.substeps_per_period < 8:
            raise ValueError("substeps_per_period must be >= 8")

    @property
    def period(self) -> float:
        return 1.0 / self.f_pwm


@dataclass(frozen=True)
class ConstantCurrent:
    i0: float


@dataclass(frozen=True)
class PeriodicHarmonics:
    """``i0 + sum m cos(n beta t + phase)`` over ``components = ((m, n, phase), ...)``."""

    i0: float
    components: tuple[tuple[float, int, float], ...]
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(tuple(c) for c in self.components))
        for _, n, _ in self.components:
            if n not in (1, 2, 3):
                raise ValueError("harmonic orders must be 1, 2 or 3")
        if not self.beta > 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class SixStepBLDC:
    """Two-phase-on six-step drive run straight off the dc link.

    Angles are in electrical degrees.  ``commutation_advance`` moves the
    commutation instants ahead of the ideal points (30 + 60 k degrees); with
    zero advance the pair back-EMF is flat and the drive draws no
    commutation ripple.
    """

    R_phase: float = 0.41
    L_phase: float = 0.0007
    k_t: float = 1.4
    flat_angle: float = 120.0
    J: float = 9.6e-5
    F: float = 1e-3
    pole_pairs: int = 4
    load_torque: float = 0.0
    commutation_advance: float = 0.0

    def __post_init__(self):
        for name in ("R_phase", "L_phase", "k_t", "J", "F"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.flat_angle < 180:
            raise ValueError("flat_angle must be in (0, 180) degrees")
        if self.pole_pairs < 1:
            raise ValueError("pole_pairs must be >= 1")

    @property
    def k_e_phase(self) -> float:
        # two phases conduct: torque = 2 k_e_phase i
        return self.k_t / 2.0


LoadModel = ConstantCurrent | PeriodicHarmonics | SixStepBLDC


@dataclass
class MotorState:
    theta_e: float = 0.0
    omega_m: float = 0.0
    i_phase: float = 0.0
    stall_time: float = 0.0

    @property
    def stalled(self) -> bool:
        return self.stall_time > 0.01

    @property
    def rpm(self) -> float:
        return self.omega_m * 60.0 / TWO_PI


@dataclass
class PlantState:
    i_L: float = 0.0
    v_C: float = 0.0
    t: float = 0.0
    motor: MotorState | None = None


@dataclass(frozen=True)
class Measurement:
    v_dc: float
    i_L: float
    i_load: float
    i_L_max: float
    i_L_min: float


# (high phase, low phase) for the sector starting at 30 + 60 k electrical degrees
_SECTORS = ((0, 1), (0, 2), (1, 2), (1, 0), (2, 0), (2, 1))


def conducting_pair(theta_e: float, advance: float = 0.0) -> tuple[int, int]:
    """(high, low) phase indices energized at electrical angle ``theta_e`` (radians)."""
    k = math.floor((theta_e - math.pi / 6 + math.radians(advance)) / (math.pi / 3))
    return _SECTORS[k % 6]


def trapezoid(theta: float, flat_angle: float = 120.0) -> float:
    """Unit trapezoid of ``theta`` (radians): rising zero crossing at 0, +1 flat over ``flat_angle`` degrees."""
    return _trapezoid_nb(theta, math.radians(flat_angle))


def pair_emf_shape(load: SixStepBLDC, theta_e: float) -> float:
    """``(e_high - e_low) / (k_e_phase omega)`` for the conducting pair (2 on flat tops)."""
    return _pair_shape_nb(theta_e, math.radians(load.flat_angle), math.radians(load.commutation_advance))


def load_current(load: LoadModel, t: float, v_dc: float = 0.0, motor: MotorState | None = None) -> float:
    if isinstance(load, ConstantCurrent):
        return load.i0
    if isinstance(load, PeriodicHarmonics):
        return load.i0 + sum(m * math.cos(n * load.beta * t + ph) for m, n, ph in load.components)
    if isinstance(load, SixStepBLDC):
        if motor is None:
            raise ValueError("BLDC load needs a motor state")
        return motor.i_phase
    raise TypeError(f"unknown load model {load!r}")


def motor_substep(load: SixStepBLDC, motor: MotorState, v_dc: float, dt: float) -> MotorState:
    """Advance the motor alone by ``dt`` with the dc-link voltage held at ``v_dc``."""
    R2, L2 = 2 * load.R_phase, 2 * load.L_phase
    shape = pair_emf_shape(load, motor.theta_e)
    emf = load.k_e_phase * motor.omega_m * shape
    # implicit trapezoid on the RL loop
    a = R2 / L2
    i1 = (motor.i_phase * (1 - a * dt / 2) + dt * (v_dc - emf) / L2) / (1 + a * dt / 2)
    i_avg = 0.5 * (motor.i_phase + i1)
    f = load.F / load.J
    torque = load.k_e_phase * shape * i_avg
    w1 = (motor.omega_m * (1 - f * dt / 2) + dt * (torque - load.load_torque) / load.J) / (1 + f * dt / 2)
    theta = motor.theta_e + load.pole_pairs * dt * 0.5 * (motor.omega_m + w1)
    stall = motor.stall_time + dt if v_dc < emf else 0.0
    return MotorState(theta, w1, i1, stall)


_CONST, _PERIODIC, _BLDC = 0, 1, 2


@njit(cache=True)
def _trapezoid_nb(theta, flat_angle):
    half_ramp = (math.pi - flat_angle) / 2.0
    th = theta - TWO_PI * math.floor(theta / TWO_PI)
    if th < half_ramp:
        return th / half_ramp
    if th <= math.pi - half_ramp:
        return 1.0
    if th < math.pi + half_ramp:
        return (math.pi - th) / half_ramp
    if th <= TWO_PI - half_ramp:
        return -1.0
    return (th - TWO_PI) / half_ramp


@njit(cache=True)
def _pair_shape_nb(theta, flat_angle, advance):
    k = math.floor((theta - math.pi / 6 + advance) / (math.pi / 3))
    s = int(k) % 6
    hi = (0, 0, 1, 1, 2, 2)[s]
    lo = (1, 2, 2, 0, 0, 1)[s]
    shift = TWO_PI / 3
    return _trapezoid_nb(theta - hi * shift, flat_angle) - _trapezoid_nb(theta - lo * shift, flat_angle)


@njit(cache=True)
def _load_nb(kind, lp, comps, t, i_m):
    if kind == 0:
        return lp[0]
    if kind == 1:
        acc = lp[0]
        for j in range(comps.shape[0]):
            acc += comps[j, 0] * math.cos(comps[j, 1] * lp[1] * t + comps[j, 2])
        return acc
    return i_m


@njit(cache=True)
def _system_nb(on, pp, kind, lp, a):
    v_in, L, C, esr, r_on = pp[0], pp[1], pp[2], pp[3], pp[4]
    for r in range(3):
        for c in range(3):
            a[r, c] = 0.0
    if on:
        a[0, 0] = -r_on / L
    else:
        a[0, 0] = -esr / L
        a[0, 1] = -1.0 / L
        a[1, 0] = 1.0 / C
    if kind == 2:
        L2 = 2.0 * lp[1]
        R2 = 2.0 * lp[0]
        a[1, 2] = -1.0 / C
        a[2, 1] = 1.0 / L2
        a[2, 2] = -(esr + R2) / L2
        if not on:
            a[0, 2] = esr / L
            a[2, 0] = esr / L2


@njit(cache=True)
def _trap_step_nb(x, a, b, h, out):
    # (I - h/2 A) out = (I + h/2 A) x + h b, solved by Gaussian elimination
    m = np.empty((3, 4))
    for r in range(3):
        acc = x[r] + h * b[r]
        for c in range(3):
            acc += 0.5 * h * a[r, c] * x[c]
            m[r, c] = -0.5 * h * a[r, c]
        m[r, r] += 1.0
        m[r, 3] = acc
    for col in range(3):
        piv = col
        for r in range(col + 1, 3):
            if abs(m[r, col]) > abs(m[piv, col]):
                piv = r
        if piv != col:
            for c in range(4):
                tmp = m[col, c]
                m[col, c] = m[piv, c]
                m[piv, c] = tmp
        for r in range(col + 1, 3):
            f = m[r, col] / m[col, col]
            for c in range(col, 4):
                m[r, c] -= f * m[col, c]
    for r in range(2, -1, -1):
        acc = m[r, 3]
        for c in range(r + 1, 3):
            acc -= m[r, c] * out[c]
        out[r] = acc / m[r, r]


@njit(cache=True)
def _period_nb(x, motor, t, duty, pp, kind, lp, comps, meas):
    """Integrate one PWM period in place; fills ``meas`` = (v_dc, i_L, i_load, i_max, i_min)."""
    v_in, L, C, esr = pp[0], pp[1], pp[2], pp[3]
    period = pp[5]
    nsub = int(pp[6])
    h = period / nsub
    t_off = duty * period
    a_on = np.empty((3, 3))
    a_off = np.empty((3, 3))
    _system_nb(True, pp, kind, lp, a_on)
    _system_nb(False, pp, kind, lp, a_off)
    b = np.zeros(3)
    new = np.zeros(3)
    i_max = x[0]
    i_min = x[0]
    elapsed = 0.0
    for k in range(nsub):
        start = k * h
        end = start + h
        npieces = 1
        if start < t_off < end:
            npieces = 2
        for piece in range(npieces):
            if npieces == 2:
                on = piece == 0
                dh = (t_off - start) if on else (end - t_off)
            else:
                on = start < t_off
                dh = h
            tt = t + elapsed
            shape = 0.0
            emf = 0.0
            if kind == 2:
                ke, flat, J, F, npp, tl, adv = lp[2], lp[3], lp[4], lp[5], lp[6], lp[7], lp[8]
                shape = _pair_shape_nb(motor[0] + 0.5 * dh * npp * motor[1], flat, adv)
                emf = ke * motor[1] * shape
                b[0] = v_in / L
                b[1] = 0.0
                b[2] = -emf / (2.0 * lp[1])
            else:
                u = 0.5 * (_load_nb(kind, lp, comps, tt, 0.0) + _load_nb(kind, lp, comps, tt + dh, 0.0))
                b[2] = 0.0
                b[1] = -u / C
                if on:
                    b[0] = v_in / L
                else:
                    b[0] = (v_in + esr * u) / L
            if on:
                _trap_step_nb(x, a_on, b, dh, new)
            else:
                _trap_step_nb(x, a_off, b, dh, new)
            if (not on) and new[0] < 0.0:
                new[0] = 0.0
            if kind == 2:
                i_avg = 0.5 * (x[2] + new[2])
                f = F / J
                torque = ke * shape * i_avg
                w0 = motor[1]
                w1 = (w0 * (1.0 - f * dh / 2.0) + dh * (torque - tl) / J) / (1.0 + f * dh / 2.0)
                motor[0] = motor[0] + npp * dh * 0.5 * (w0 + w1)
                motor[1] = w1
                if on:
                    vdc = new[1] - esr * new[2]
                else:
                    vdc = new[1] + esr * (new[0] - new[2])
                if vdc < emf:
                    motor[2] += dh
                else:
                    motor[2] = 0.0
            x[0] = new[0]
            x[1] = new[1]
            x[2] = new[2]
            elapsed += dh
            if x[0] > i_max:
                i_max = x[0]
            if x[0] < i_min:
                i_min = x[0]
    t_end = t + period
    i_load = _load_nb(kind, lp, comps, t_end, x[2])
    if duty >= 1.0:
        meas[0] = x[1] - esr * i_load
    else:
        meas[0] = x[1] + esr * (x[0] - i_load)
    meas[1] = x[0]
    meas[2] = i_load
    meas[3] = i_max
    meas[4] = i_min


def _load_arrays(load: LoadModel):
    if isinstance(load, ConstantCurrent):
        return _CONST, np.array([load.i0], dtype=float), np.zeros((0, 3))
    if isinstance(load, PeriodicHarmonics):
        comps = np.array(load.components, dtype=float).reshape(-1, 3)
        return _PERIODIC, np.array([load.i0, load.beta]), comps
    if isinstance(load, SixStepBLDC):
        lp = np.array([load.R_phase, load.L_phase, load.k_e_phase, math.radians(load.flat_angle),
                       load.J, load.F, float(load.pole_pairs), load.load_torque,
                       math.radians(load.commutation_advance)])
        return _BLDC, lp, np.zeros((0, 3))
    raise TypeError(f"unknown load model {load!r}")


class Plant:
    """Mutable plant instance for the simulation loop (avoids per-sample allocation)."""

    def __init__(self, p: BoostParams, load: LoadModel, st: PlantState):
        if isinstance(load, SixStepBLDC) and st.motor is None:
            raise ValueError("BLDC load needs PlantState.motor")
        self.p = p
        self.load = load
        self._pp = np.array([p.v_in, p.L, p.C, p.esr, p.r_on, p.period, float(p.substeps_per_period)])
        self._kind, self._lp, self._comps = _load_arrays(load)
        m = st.motor or MotorState()
        self._x = np.array([st.i_L, st.v_C, m.i_phase if st.motor else 0.0])
        self._motor = np.array([m.theta_e, m.omega_m, m.stall_time])
        self._meas = np.zeros(5)
        self.t = st.t

    def step(self, duty: float) -> np.ndarray:
        """Advance one period; returns the measurement array (v_dc, i_L, i_load, i_max, i_min)."""
        if not 0.0 <= duty <= 1.0:
            raise ValueError(f"duty must be in [0, 1], got {duty}")
        _period_nb(self._x, self._motor, self.t, duty, self._pp, self._kind, self._lp,
                   self._comps, self._meas)
        self.t += self.p.period
        return self._meas

    @property
    def state(self) -> PlantState:
        motor = None
        if self._kind == _BLDC:
            motor = MotorState(float(self._motor[0]), float(self._motor[1]), float(self._x[2]),
                               float(self._motor[2]))
        return PlantState(float(self._x[0]), float(self._x[1]), self.t, motor)


def sample_step(p: BoostParams, load: LoadModel, st: PlantState, duty: float):
    """Advance one PWM period at ``duty``; returns ``(new_state, Measurement)``.

    The measurement is taken at the end of the period, just before the next
    turn-on edge.
    """
    plant = Plant(p, load, st)
    m = plant.step(duty)
    return plant.state, Measurement(*(float(v) for v in m))
