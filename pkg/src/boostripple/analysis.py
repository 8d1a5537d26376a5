"""Ripple measurement on sampled traces and closed-form boost design formulas."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_F_PWM = 18000.0
STEADY_FRACTION = 0.4


@dataclass
class Trace:
    """Uniformly sampled columns; ``columns['t']`` is the time base."""

    T: float
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        if "t" not in self.columns:
            raise ValueError("trace needs a 't' column")
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        n = len(self.columns["t"])
        if any(len(v) != n for v in self.columns.values()):
            raise ValueError("all trace columns must have the same length")
        t = self.columns["t"]
        if n > 1:
            dt = np.diff(t)
            if np.any(dt <= 0) or np.max(np.abs(dt - self.T)) > 1e-9 * max(1.0, abs(t[-1])):
                raise ValueError("trace time base must be uniform with spacing T")

    @classmethod
    def from_time(cls, t, **cols) -> "Trace":
        t = np.asarray(t, dtype=float)
        T = float(t[1] - t[0]) if len(t) > 1 else 0.0
        return cls(T, {"t": t, **cols})

    def __len__(self) -> int:
        return len(self.columns["t"])

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    @property
    def t(self) -> np.ndarray:
        return self.columns["t"]

    def default_window(self) -> tuple[float, float]:
        """Last 40 % of the trace."""
        t = self.t
        return (t[0] + (1.0 - STEADY_FRACTION) * (t[-1] - t[0]), t[-1])

    def mask(self, window) -> np.ndarray:
        a, b = window
        t = self.t
        if a < t[0] - 0.5 * self.T or b > t[-1] + 0.5 * self.T or not a < b:
            raise ValueError(f"window {window} outside trace [{t[0]}, {t[-1]}]")
        return (t >= a - 1e-12) & (t <= b + 1e-12)

    def to_csv(self, path) -> None:
        names = list(self.columns)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for row in zip(*(self.columns[n] for n in names)):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "Trace":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path}: empty trace file")
        names = rows[0]
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(names))
        cols = {n: data[:, i] for i, n in enumerate(names)}
        t = cols["t"]
        T = float((t[-1] - t[0]) / (len(t) - 1)) if len(t) > 1 else 0.0
        return cls(T, cols)


@dataclass
class RippleMetrics:
    column: str
    window: tuple[float, float]
    p2p_raw: float
    p2p_lowpass: float
    harmonic_mags: list[float]
    fundamental_hz: float
    switching_mag: float | None
    reduction_vs_baseline: float | None = None

    def to_json(self) -> dict:
        out = {
            "column": self.column,
            "window": list(self.window),
            "p2p_raw": self.p2p_raw,
            "p2p_lowpass": self.p2p_lowpass,
            "harmonics": [
                {"n": n, "freq_hz": n * self.fundamental_hz, "magnitude": m}
                for n, m in enumerate(self.harmonic_mags, start=1)
            ],
            "switching_mag": self.switching_mag,
        }
        if self.reduction_vs_baseline is not None:
            out["reduction_vs_baseline"] = self.reduction_vs_baseline
        return out


def _fundamental(trace: Trace, window, fundamental: float | None) -> float:
    if fundamental is not None:
        return fundamental
    if "beta" in trace.columns:
        return float(np.mean(trace["beta"][trace.mask(window)]) / (2 * math.pi))
    raise ValueError("fundamental frequency is required (no 'beta' column in trace)")


def lowpass(x: np.ndarray, T: float, f_pwm: float = DEFAULT_F_PWM) -> tuple[np.ndarray, int]:
    """Centered moving average over one PWM period.

    Returns the filtered signal and the half-width in samples; the first and
    last ``half`` samples are not fully covered by the kernel.
    """
    width = max(1, int(round(1.0 / (f_pwm * T))))
    if width == 1:
        return x.copy(), 0
    kernel = np.ones(width) / width
    # even widths: average two adjacent odd-length windows to stay centered
    if width % 2 == 0:
        kernel = np.convolve(kernel, [0.5, 0.5])
    half = (len(kernel) - 1) // 2
    return np.convolve(x, kernel, mode="same"), half


def peak_to_peak(trace: Trace, column: str, window=None, mode: str = "raw",
                 fundamental: float | None = None, f_pwm: float = DEFAULT_F_PWM) -> float:
    window = window or trace.default_window()
    f0 = _fundamental(trace, window, fundamental)
    if window[1] - window[0] < 3.0 / f0 - 0.5 * trace.T:
        raise ValueError(f"window shorter than 3 fundamental periods ({3.0 / f0:.4g} s)")
    m = trace.mask(window)
    x = trace[column]
    if mode == "raw":
        sel = x[m]
    elif mode == "lowpass":
        y, half = lowpass(x, trace.T, f_pwm)
        valid = np.zeros(len(x), dtype=bool)
        valid[half:len(x) - half] = True
        sel = y[m & valid]
    else:
        raise ValueError(f"mode must be 'raw' or 'lowpass', got {mode!r}")
    return float(np.max(sel) - np.min(sel))


def spectral_mag(trace: Trace, column: str, f: float, window=None) -> float:
    """``2/N |sum x[k] exp(-i 2 pi f k T)|`` over a whole number of cycles of ``f``."""
    window = window or trace.default_window()
    x = trace[column][trace.mask(window)]
    cycles = math.floor(len(x) * f * trace.T + 1e-9)
    if cycles < 5:
        raise ValueError(f"window holds {len(x) * f * trace.T:.3g} cycles of {f} Hz; need >= 5")
    n = int(round(cycles / (f * trace.T)))
    n = min(n, len(x))
    k = np.arange(n)
    return float(2.0 / n * abs(np.sum(x[:n] * np.exp(-2j * math.pi * f * k * trace.T))))


def ripple_metrics(trace: Trace, column: str, window=None, fundamental: float | None = None,
                   f_pwm: float = DEFAULT_F_PWM) -> RippleMetrics:
    """Peak-to-peak values, the first three harmonics and the switching line.

    ``switching_mag`` is ``None`` when ``f_pwm`` is not below the trace's
    Nyquist frequency (e.g. traces sampled once per PWM period).
    """
    window = tuple(window or trace.default_window())
    f0 = _fundamental(trace, window, fundamental)
    raw = peak_to_peak(trace, column, window, "raw", f0, f_pwm)
    low = peak_to_peak(trace, column, window, "lowpass", f0, f_pwm)
    mags = [spectral_mag(trace, column, n * f0, window) for n in (1, 2, 3)]
    sw = spectral_mag(trace, column, f_pwm, window) if f_pwm < 0.5 / trace.T else None
    return RippleMetrics(column, (float(window[0]), float(window[1])), raw, low, mags, f0, sw)


def reduction_ratio(before: float, after: float) -> float:
    if not before > 0:
        raise ValueError("baseline ripple must be positive")
    return (before - after) / before


def _positive(**kw) -> None:
    for k, v in kw.items():
        if not v > 0:
            raise ValueError(f"{k} must be positive, got {v}")


def min_output_capacitance(i_out_max: float, duty: float, f_s: float, dv_out: float) -> float:
    """``C_min = I_out,max D / (f_s dV_out)`` in farads."""
    _positive(i_out_max=i_out_max, duty=duty, f_s=f_s, dv_out=dv_out)
    if duty >= 1:
        raise ValueError("duty must be < 1")
    return i_out_max * duty / (f_s * dv_out)


def esr_ripple(esr: float, i_out_max: float, duty: float, di_L: float) -> float:
    """Output ripple from capacitor ESR: ``esr (I_out/(1-D) + dI_L/2)``."""
    if duty >= 1:
        raise ValueError("duty must be < 1")
    return esr * (i_out_max / (1.0 - duty) + di_L / 2.0)


def inductor_ripple_estimate(i_out_max: float, v_out: float, v_in: float) -> tuple[float, float]:
    """Rule-of-thumb ripple band: 20 % to 40 % of the input-referred output current."""
    _positive(i_out_max=i_out_max, v_out=v_out, v_in=v_in)
    r = i_out_max * v_out / v_in
    return 0.2 * r, 0.4 * r


def inductor_ripple_max(v_in: float, duty: float, f_s: float, L: float) -> float:
    _positive(v_in=v_in, f_s=f_s, L=L)
    if duty < 0:
        raise ValueError("duty must be >= 0")
    return v_in * duty / (f_s * L)
