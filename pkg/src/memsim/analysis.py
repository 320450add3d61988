"""Waveform post-processing: hysteresis metrics and pulse staircases.

The voltage-current trace of a driven memristor over one period is treated
as a closed curve.  Crossing events are the points where the branch voltage
passes through zero (sign changes, located by linear interpolation, plus
exact zero samples).  Segmenting the cyclic curve at those events yields
the loop's lobes; the reported loop area is the sum of the absolute
shoelace areas of the lobes, and the pinch deviation is the largest current
magnitude seen at any crossing event.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .devices import Pwl, Sin
from .engine import Waveform, transient
from .netlist import Circuit, Tran, VSource

__all__ = [
    "AnalysisError",
    "PinchReport",
    "LoopMetrics",
    "FingerprintRow",
    "StaircaseVerdict",
    "pinch_test",
    "loop_area",
    "frequency_collapse",
    "pulse_staircase",
    "pulse_train_pwl",
    "metrics_to_csv",
]


class AnalysisError(Exception):
    pass


@dataclass(frozen=True)
class PinchReport:
    crossings: int
    max_pinch_current: float
    peak_current: float


@dataclass(frozen=True)
class LoopMetrics:
    area: float
    lobes: int


@dataclass(frozen=True)
class FingerprintRow:
    freq: float
    area: float
    pinch_dev: float
    lobes: int


@dataclass(frozen=True)
class StaircaseVerdict:
    """Gate levels bracketing each pulse of a train."""

    pre: tuple[float, ...]
    post: tuple[float, ...]

    @property
    def steps(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.pre, self.post))

    def uniform(self, atol: float = 1e-9) -> bool:
        steps = self.steps
        mean = sum(steps) / len(steps)
        return all(abs(s - mean) <= atol for s in steps)


def _as_cycle(v, i) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(v, dtype=float)
    i = np.asarray(i, dtype=float)
    if v.shape != i.shape or v.ndim != 1:
        raise AnalysisError("voltage and current must be 1-d arrays of equal length")
    if len(v) < 3:
        raise AnalysisError(f"need at least 3 samples, got {len(v)}")
    return v, i


def _augmented_cycle(v: np.ndarray, i: np.ndarray) -> tuple[list[tuple[float, float]], list[bool]]:
    """Cyclic vertex list with interpolated zero crossings inserted.

    Exact-zero samples are crossing vertices themselves; a sign change
    between neighbours inserts one interpolated vertex at v = 0.
    """
    pts: list[tuple[float, float]] = []
    flags: list[bool] = []
    n = len(v)
    for k in range(n):
        pts.append((v[k], i[k]))
        flags.append(v[k] == 0.0)
        k1 = (k + 1) % n
        if v[k] * v[k1] < 0.0:
            t = v[k] / (v[k] - v[k1])
            pts.append((0.0, i[k] + t * (i[k1] - i[k])))
            flags.append(True)
    return pts, flags


def _shoelace(pts: Sequence[tuple[float, float]]) -> float:
    area2 = 0.0
    n = len(pts)
    for k in range(n):
        x0, y0 = pts[k]
        x1, y1 = pts[(k + 1) % n]
        area2 += x0 * y1 - x1 * y0
    return 0.5 * abs(area2)


def pinch_test(v, i) -> PinchReport:
    """Current magnitude at the zero crossings of the branch voltage."""
    v, i = _as_cycle(v, i)
    pts, flags = _augmented_cycle(v, i)
    currents = [abs(p[1]) for p, f in zip(pts, flags) if f]
    if not currents:
        raise AnalysisError("no pinch points: the voltage never crosses zero")
    return PinchReport(
        crossings=len(currents),
        max_pinch_current=max(currents),
        peak_current=float(np.abs(i).max()),
    )


def loop_area(v, i) -> LoopMetrics:
    """Total lobe area of the closed voltage-current curve."""
    v, i = _as_cycle(v, i)
    pts, flags = _augmented_cycle(v, i)
    cross = [k for k, f in enumerate(flags) if f]
    if not cross:
        return LoopMetrics(area=_shoelace(pts), lobes=1)
    total = 0.0
    for a, b in zip(cross, cross[1:] + [cross[0] + len(pts)]):
        lobe = [pts[k % len(pts)] for k in range(a, b + 1)]
        total += _shoelace(lobe)
    return LoopMetrics(area=total, lobes=len(cross))


def _single_sine_source(c: Circuit) -> VSource:
    sines = [s for s in c.sources() if isinstance(s.spec, Sin)]
    if len(sines) != 1:
        raise AnalysisError(f"need exactly one sine source, found {len(sines)}")
    return sines[0]


def frequency_collapse(
    c: Circuit, device: str, freqs: Sequence[float], *, samples_per_period: int = 1000
) -> list[FingerprintRow]:
    """Drive the bench at each frequency and fingerprint the second period.

    The sine source keeps its offset, amplitude, and phase; only the
    frequency is replaced.  Each run covers two periods at a fixed number of
    samples per period, and the metrics are taken over the second period so
    the first one absorbs the start-up transient.
    """
    if not freqs:
        raise AnalysisError("need at least one frequency")
    if device not in {m.id for m in c.memristors()}:
        raise AnalysisError(f"no memristor {device!r} in the circuit")
    src = _single_sine_source(c)
    rows = []
    for f in freqs:
        period = 1.0 / f
        spec = dataclasses.replace(src.spec, freq=f)
        devices = tuple(
            dataclasses.replace(d, spec=spec) if d is src else d for d in c.devices
        )
        run = Circuit(
            models=c.models,
            devices=devices,
            tran=Tran(period / samples_per_period, 2.0 * period),
            strobe=c.strobe,
        )
        wf = transient(run)
        sl = slice(samples_per_period, 2 * samples_per_period)
        v = wf[f"vab({device})"][sl]
        cur = wf[f"i({device})"][sl]
        pinch = pinch_test(v, cur)
        loop = loop_area(v, cur)
        rows.append(
            FingerprintRow(
                freq=f, area=loop.area, pinch_dev=pinch.max_pinch_current, lobes=loop.lobes
            )
        )
    return rows


def metrics_to_csv(rows: Sequence[FingerprintRow]) -> str:
    lines = ["freq,area,pinch_dev,lobes"]
    for r in rows:
        lines.append(f"{r.freq:.8e},{r.area:.8e},{r.pinch_dev:.8e},{r.lobes}")
    return "\n".join(lines) + "\n"


def pulse_staircase(times, values, pulse_times: Sequence[float]) -> StaircaseVerdict:
    """Bracket each pulse with the settled values just before and after it.

    pre[k] is the value at the last sample strictly before pulse k; post[k]
    is the value at the last sample strictly before pulse k+1 (the final
    sample for the last pulse), by which time the gate has settled because
    pulses are short next to their period.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    pulse_times = list(pulse_times)
    if not pulse_times:
        raise AnalysisError("need at least one pulse time")
    if any(a >= b for a, b in zip(pulse_times, pulse_times[1:])):
        raise AnalysisError("pulse times must be strictly increasing")
    idx = np.searchsorted(times, np.asarray(pulse_times), side="left") - 1
    if idx[0] < 0:
        raise AnalysisError("first pulse starts before the second sample")
    pre = values[idx]
    post = np.append(values[idx[1:]], values[-1])
    return StaircaseVerdict(pre=tuple(pre), post=tuple(post))


def pulse_train_pwl(
    dt: float,
    start_step: int,
    width_steps: int,
    period_steps: int,
    count: int,
    height: float,
    base: float = 0.0,
) -> Pwl:
    """Rectangular pulse train on the sample grid, as a piecewise-linear spec.

    All edges are one sample step wide and every vertex time is an integer
    multiple of dt, so a simulation stepping at dt sees exactly width_steps
    full-height samples per pulse and no partial-height ones.
    """
    if min(start_step, width_steps, period_steps, count) < 1:
        raise AnalysisError("steps and count must be positive integers")
    if count > 1 and period_steps < width_steps + 2:
        raise AnalysisError("period too short: pulses would overlap their edges")
    pts: list[tuple[float, float]] = []
    for j in range(count):
        s = start_step + j * period_steps
        pts.append(((s - 1) * dt, base))
        pts.append((s * dt, height))
        if width_steps > 1:
            pts.append(((s + width_steps - 1) * dt, height))
        pts.append(((s + width_steps) * dt, base))
    return Pwl(tuple(pts))
