"""Device laws for the capacitor-gated memristor emulator and its bench sources.

The emulator is a voltage-controlled resistor: an NMOS held in triode whose
gate sits on a small capacitor, charged and discharged by a saturating
transconductor that senses the voltage across the device terminals.  The
capacitor voltage ``vg`` is the single hidden state.  Everything in this
module is a pure function of explicit arguments; the transient engine owns
time.

Sign conventions: ``v_ab`` is the terminal-A-to-terminal-B voltage and all
currents flow A to B inside the device, so current and voltage always share
a sign (the element is passive) and the current is exactly zero at
``v_ab = 0`` regardless of state.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

__all__ = [
    "GM_PER_IBIAS",
    "MemristorParams",
    "MemristorState",
    "SwitchParams",
    "Dc",
    "Sin",
    "Pulse",
    "Pwl",
    "SourceSpec",
    "memristor_conductance",
    "memristor_current",
    "gm_output_current",
    "state_derivative",
    "apply_pulse",
    "source_value",
    "modulated_half_sine_pwl",
]

# Transconductance per ampere of tail current for the state integrator's input
# pair, used to derive gm0 when it is not given explicitly.  A differential
# pair near weak inversion has gm proportional to its bias, so scaling the
# bias (and the capacitor with it) leaves the state dynamics unchanged.
GM_PER_IBIAS = 20.0


@dataclass(frozen=True)
class MemristorParams:
    """Constants of one emulator instance.  SI units throughout.

    ``level`` selects the conductance law: 0 keeps the triode NMOS as an
    ideal linear conductance in its gate overdrive, 1 adds the square-law
    channel-end correction with saturation past the overdrive.
    """

    kp: float = 300e-6            # A/V^2, process transconductance of the triode NMOS
    w_over_l: float = 3.0 / 0.42  # aspect ratio of the triode NMOS
    vthn: float = 0.0             # V, threshold voltage (zero-VT device)
    vcm: float = 0.6              # V, common-mode level at the source terminal
    vdd: float = 1.2              # V, supply rail; the state clamps to [0, vdd]
    cm: float = 100e-15           # F, state capacitor
    ibias: float = 100e-9         # A, transconductor tail current
    gm0: float | None = None      # S, small-signal transconductance; None -> GM_PER_IBIAS * ibias
    g_leak: float = 10e-9         # S, conductance floor of the off device
    tau_leak: float = 1.0         # s, hold-mode state decay; math.inf disables decay
    level: int = 0

    def __post_init__(self) -> None:
        if self.gm0 is None:
            object.__setattr__(self, "gm0", GM_PER_IBIAS * self.ibias)
        for name in ("kp", "w_over_l", "cm", "ibias", "gm0", "vdd"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.g_leak < 0.0:
            raise ValueError(f"g_leak must be non-negative, got {self.g_leak!r}")
        if not self.tau_leak > 0.0:
            raise ValueError(f"tau_leak must be positive (math.inf allowed), got {self.tau_leak!r}")
        if self.vthn < 0.0:
            raise ValueError(f"vthn must be non-negative, got {self.vthn!r}")
        if not 0.0 <= self.vcm <= self.vdd:
            raise ValueError(f"vcm must lie in [0, vdd], got {self.vcm!r}")
        if self.level not in (0, 1):
            raise ValueError(f"level must be 0 or 1, got {self.level!r}")


@dataclass(frozen=True)
class MemristorState:
    """Capacitor voltage of one emulator; clamped to [0, vdd] by the update rules."""

    vg: float = 0.0


@dataclass(frozen=True)
class SwitchParams:
    """Ideal two-state switch: r_on ohms when closed, g_off siemens when open."""

    r_on: float = 5e3     # minimum-size NMOS pass switch at low overdrive
    g_off: float = 1e-11  # junction/subthreshold leakage of the open switch
    position: str = "on"

    def __post_init__(self) -> None:
        if not self.r_on > 0.0:
            raise ValueError(f"r_on must be positive, got {self.r_on!r}")
        if self.g_off < 0.0:
            raise ValueError(f"g_off must be non-negative, got {self.g_off!r}")
        if self.g_off >= 1.0 / self.r_on:
            raise ValueError("g_off must be smaller than the on conductance 1/r_on")
        if self.position not in ("on", "off"):
            raise ValueError(f"position must be 'on' or 'off', got {self.position!r}")

    @property
    def is_on(self) -> bool:
        return self.position == "on"

    @property
    def conductance(self) -> float:
        return 1.0 / self.r_on if self.is_on else self.g_off


# --------------------------------------------------------------------------
# independent source waveforms


@dataclass(frozen=True)
class Dc:
    v: float


@dataclass(frozen=True)
class Sin:
    offset: float
    amplitude: float
    freq: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        if not self.freq > 0.0:
            raise ValueError(f"SIN frequency must be positive, got {self.freq!r}")


@dataclass(frozen=True)
class Pulse:
    v0: float
    v1: float
    delay: float
    rise: float
    fall: float
    width: float
    period: float

    def __post_init__(self) -> None:
        for name in ("rise", "fall", "width"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"PULSE {name} must be non-negative")
        if not self.period > 0.0:
            raise ValueError(f"PULSE period must be positive, got {self.period!r}")


@dataclass(frozen=True)
class Pwl:
    """Piecewise-linear waveform; held at the first/last value outside the points."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("PWL needs at least one point")
        times = [t for t, _ in self.points]
        if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
            raise ValueError("PWL times must be strictly increasing")


SourceSpec = Dc | Sin | Pulse | Pwl


# --------------------------------------------------------------------------
# device laws


def memristor_conductance(state: MemristorState, p: MemristorParams) -> float:
    """Terminal conductance set by the gate state, floored at the leak value."""
    return max(p.g_leak, p.kp * p.w_over_l * (state.vg - p.vcm - p.vthn))


def memristor_current(v_ab: float, state: MemristorState, p: MemristorParams) -> float:
    """Terminal current of the emulator at terminal voltage ``v_ab``.

    Level 0 is the ideal voltage-controlled conductance.  Level 1 keeps the
    square-law channel-end term, treated symmetrically in the sign of
    ``v_ab`` and held at the square-law maximum past the overdrive; the
    magnitude never drops below the leak-conductance line.
    """
    if v_ab == 0.0:
        return 0.0
    if p.level == 0:
        return memristor_conductance(state, p) * v_ab
    mag = abs(v_ab)
    vov = state.vg - p.vcm - p.vthn
    k = p.kp * p.w_over_l
    if vov <= 0.0:
        i_sq = 0.0
    elif mag < vov:
        i_sq = k * (vov * mag - 0.5 * mag * mag)
    else:
        i_sq = 0.5 * k * vov * vov
    return math.copysign(max(i_sq, p.g_leak * mag), v_ab)


def gm_output_current(v_ab: float, p: MemristorParams) -> float:
    """Output of the saturating transconductor: gm0 * v_ab hard-clamped at +-ibias."""
    i = p.gm0 * v_ab
    if i > p.ibias:
        return p.ibias
    if i < -p.ibias:
        return -p.ibias
    return i


def state_derivative(v_ab: float, strobe: bool, state: MemristorState, p: MemristorParams) -> float:
    """dvg/dt with the strobe closed (integrate) or open (hold/decay).

    At a rail the outward derivative is zeroed instead of projected, so an
    explicit Euler step lands exactly on the rail and stays there.
    """
    if not strobe:
        if math.isinf(p.tau_leak):
            return 0.0
        return -state.vg / p.tau_leak
    rate = gm_output_current(v_ab, p) / p.cm
    if (state.vg >= p.vdd and rate > 0.0) or (state.vg <= 0.0 and rate < 0.0):
        return 0.0
    return rate


def apply_pulse(state: MemristorState, v_spk: float, dt_pulse: float, p: MemristorParams) -> MemristorState:
    """Closed-form state after one rectangular terminal pulse of height v_spk.

    During a pulse the transconductor output is constant, so the capacitor
    integrates it exactly; the result clamps to the rails.
    """
    if dt_pulse < 0.0:
        raise ValueError(f"pulse width must be non-negative, got {dt_pulse!r}")
    vg = state.vg + gm_output_current(v_spk, p) * dt_pulse / p.cm
    return MemristorState(vg=min(p.vdd, max(0.0, vg)))


# --------------------------------------------------------------------------
# source evaluation


def source_value(spec: SourceSpec, t: float) -> float:
    """Value of an independent source at time ``t`` (seconds)."""
    if isinstance(spec, Dc):
        return spec.v
    if isinstance(spec, Sin):
        return spec.offset + spec.amplitude * math.sin(2.0 * math.pi * spec.freq * t + spec.phase)
    if isinstance(spec, Pulse):
        if t < spec.delay:
            return spec.v0
        tau = math.fmod(t - spec.delay, spec.period)
        if tau < spec.rise:
            return spec.v0 + (spec.v1 - spec.v0) * tau / spec.rise
        tau -= spec.rise
        if tau < spec.width:
            return spec.v1
        tau -= spec.width
        if tau < spec.fall:
            return spec.v1 + (spec.v0 - spec.v1) * tau / spec.fall
        return spec.v0
    if isinstance(spec, Pwl):
        points = spec.points
        times = [pt[0] for pt in points]
        idx = bisect.bisect_right(times, t)
        if idx == 0:
            return points[0][1]
        if idx == len(points):
            return points[-1][1]
        t0, v0 = points[idx - 1]
        t1, v1 = points[idx]
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    raise TypeError(f"unknown source spec {spec!r}")


def modulated_half_sine_pwl(
    freq: float,
    n_halves: int,
    peak: float,
    *,
    offset: float = 0.0,
    alternate: bool = False,
    samples_per_half: int = 32,
    envelope=None,
) -> Pwl:
    """Amplitude-modulated half-sine sweep train as a PWL spec.

    Each half cycle of a ``freq`` carrier is scaled by ``envelope(u)`` with
    ``u`` the completed fraction of the train (default: linear ramp up), so
    successive sweeps trace ever larger excursions.  ``alternate`` flips the
    polarity of every other lobe, which keeps the drive zero-mean.
    """
    if n_halves < 1:
        raise ValueError("need at least one half cycle")
    if samples_per_half < 2:
        raise ValueError("need at least two samples per half cycle")
    env = envelope if envelope is not None else (lambda u: u)
    half = 0.5 / freq
    points = [(0.0, offset)]
    for j in range(n_halves):
        amp = peak * env((j + 1) / n_halves)
        sign = -1.0 if (alternate and j % 2 == 1) else 1.0
        for s in range(1, samples_per_half + 1):
            t = j * half + s * (half / samples_per_half)
            points.append((t, offset + sign * amp * math.sin(math.pi * s / samples_per_half)))
    return Pwl(tuple(points))
