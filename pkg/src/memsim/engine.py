"""Transient simulation by modified nodal analysis.

Unknown vector: non-ground node voltages in circuit order, then one branch
current per voltage source.  A source's branch current is the current it
delivers into its positive node.  Each step first advances the gate states
one explicit Euler step using the branch voltages of the previous sample,
then stamps the sources at the new time and solves, so every recorded
sample pairs node voltages with the gate states they were solved against.
Nonlinear (level 1) memristor branches are stamped with the secant
conductance i(v_prev)/v_prev from the previous sample, falling back to the
leak conductance at v_prev = 0, so the stamped matrix always stays
conductance-positive.

The recorded waveform holds the initial sample at t = 0 (solved with the
initial gate states) plus one sample per step.  Memristor currents are
recorded from the device law at the solved branch voltage, not from the
stamped linearization, so recorded samples always satisfy the device
equations exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .devices import MemristorState, memristor_current, source_value
from .netlist import Circuit, Memristor, Resistor, Switch, VSource

__all__ = [
    "SimulationError",
    "SingularSystemError",
    "NumericalError",
    "SimConfig",
    "LinearSystem",
    "Waveform",
    "stamp_system",
    "solve_linear",
    "transient",
    "static_supply_current",
]


class SimulationError(Exception):
    """Base class for simulation failures."""


class SingularSystemError(SimulationError):
    """The stamped matrix has no unique solution (floating node, source loop)."""


class NumericalError(SimulationError):
    """A solve or state update left the trusted regime."""


@dataclass(frozen=True)
class SimConfig:
    """Numerical guards for :func:`transient`.

    residual_rtol   solution accepted if ||Ax-b||_inf <= rtol * max(1, ||b||_inf)
    pivot_rtol      pivot treated as zero below rtol * max|A|
    state_step_frac abort if one Euler step moves a gate by more than this
                    fraction of its rail span (means dt is too coarse)
    """

    residual_rtol: float = 1e-9
    pivot_rtol: float = 1e-14
    state_step_frac: float = 0.25


@dataclass(frozen=True)
class LinearSystem:
    a: np.ndarray
    rhs: np.ndarray
    names: tuple[str, ...]


@dataclass(frozen=True)
class Waveform:
    """Simulation record: times plus named signal columns of equal length."""

    times: np.ndarray
    columns: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def names(self) -> tuple[str, ...]:
        return tuple(self.columns)

    def to_csv(self) -> str:
        header = "t," + ",".join(self.columns)
        cols = [self.times, *self.columns.values()]
        lines = [header]
        for k in range(len(self.times)):
            lines.append(",".join(f"{col[k]:.8e}" for col in cols))
        return "\n".join(lines) + "\n"


class _Assembly:
    """Index maps and static stamps prepared once per circuit."""

    def __init__(self, c: Circuit):
        self.circuit = c
        nodes = [n for n in c.nodes if n != "0"]
        self.node_index = {n: i for i, n in enumerate(nodes)}
        self.sources = list(c.sources())
        self.memristors = list(c.memristors())
        self.n_nodes = len(nodes)
        self.n = self.n_nodes + len(self.sources)
        self.names = tuple(f"v({n})" for n in nodes) + tuple(
            f"i({s.id})" for s in self.sources
        )

        base = np.zeros((self.n, self.n))
        for d in c.devices:
            if isinstance(d, Resistor):
                self._stamp_conductance(base, d.a, d.b, 1.0 / d.ohms)
            elif isinstance(d, Switch):
                self._stamp_conductance(base, d.a, d.b, d.params.conductance)
        for j, s in enumerate(self.sources):
            bj = self.n_nodes + j
            ip = self._idx(s.pos)
            ineg = self._idx(s.neg)
            if ip >= 0:
                base[ip, bj] -= 1.0
                base[bj, ip] += 1.0
            if ineg >= 0:
                base[ineg, bj] += 1.0
                base[bj, ineg] -= 1.0
        self.base = base

        # memristor stamp pattern: four (row, col, sign) entries per device,
        # minus the ones that land on the ground row or column
        rows, cols, signs, dev = [], [], [], []
        self.ia = np.empty(len(self.memristors), dtype=np.intp)
        self.ib = np.empty(len(self.memristors), dtype=np.intp)
        for k, m in enumerate(self.memristors):
            ia, ib = self._idx(m.a), self._idx(m.b)
            self.ia[k], self.ib[k] = ia, ib
            for r, cc, sg in ((ia, ia, 1.0), (ib, ib, 1.0), (ia, ib, -1.0), (ib, ia, -1.0)):
                if r >= 0 and cc >= 0:
                    rows.append(r)
                    cols.append(cc)
                    signs.append(sg)
                    dev.append(k)
        self.srows = np.asarray(rows, dtype=np.intp)
        self.scols = np.asarray(cols, dtype=np.intp)
        self.ssigns = np.asarray(signs)
        self.sdev = np.asarray(dev, dtype=np.intp)

        params = [c.models[m.model] for m in self.memristors]
        self.level = np.asarray([p.level for p in params], dtype=np.intp)
        self.coef = np.asarray([p.kp * p.w_over_l for p in params])
        self.vcm = np.asarray([p.vcm for p in params])
        self.vthn = np.asarray([p.vthn for p in params])
        self.g_leak = np.asarray([p.g_leak for p in params])
        self.gm0 = np.asarray([p.gm0 for p in params])
        self.ibias = np.asarray([p.ibias for p in params])
        self.cm = np.asarray([p.cm for p in params])
        self.vdd = np.asarray([p.vdd for p in params])
        self.tau = np.asarray([p.tau_leak for p in params])
        self.params = params

    def _idx(self, node: str) -> int:
        return -1 if node == "0" else self.node_index[node]

    def _stamp_conductance(self, a: np.ndarray, na: str, nb: str, g: float) -> None:
        ia, ib = self._idx(na), self._idx(nb)
        if ia >= 0:
            a[ia, ia] += g
        if ib >= 0:
            a[ib, ib] += g
        if ia >= 0 and ib >= 0:
            a[ia, ib] -= g
            a[ib, ia] -= g

    def conductances(self, vg: np.ndarray, prev_vab: np.ndarray) -> np.ndarray:
        """Stamped branch conductance per memristor for the next solve."""
        # same association order as the scalar device law, so the two agree
        # to the last bit on level-0 branches
        g = np.maximum(self.g_leak, self.coef * (vg - self.vcm - self.vthn))
        for k in np.flatnonzero(self.level == 1):
            vp = prev_vab[k]
            if vp == 0.0:
                g[k] = self.g_leak[k]
            else:
                g[k] = memristor_current(vp, MemristorState(vg[k]), self.params[k]) / vp
        return g

    def fill(self, vg: np.ndarray, t: float, prev_vab: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a = self.base.copy()
        if self.memristors:
            g = self.conductances(vg, prev_vab)
            np.add.at(a, (self.srows, self.scols), self.ssigns * g[self.sdev])
        b = np.zeros(self.n)
        for j, s in enumerate(self.sources):
            b[self.n_nodes + j] = source_value(s.spec, t)
        return a, b

    def branch_voltages(self, x: np.ndarray) -> np.ndarray:
        va = np.where(self.ia >= 0, x[np.maximum(self.ia, 0)], 0.0)
        vb = np.where(self.ib >= 0, x[np.maximum(self.ib, 0)], 0.0)
        return va - vb

    def currents(self, vab: np.ndarray, vg: np.ndarray) -> np.ndarray:
        i = np.where(
            vab == 0.0,
            0.0,
            np.maximum(self.g_leak, self.coef * (vg - self.vcm - self.vthn)) * vab,
        )
        for k in np.flatnonzero(self.level == 1):
            i[k] = memristor_current(vab[k], MemristorState(vg[k]), self.params[k])
        return i

    def state_derivatives(self, vab: np.ndarray, vg: np.ndarray, high: bool) -> np.ndarray:
        if high:
            dx = np.clip(self.gm0 * vab, -self.ibias, self.ibias) / self.cm
            dx = np.where((vg >= self.vdd) & (dx > 0.0), 0.0, dx)
            dx = np.where((vg <= 0.0) & (dx < 0.0), 0.0, dx)
            return dx
        dx = np.zeros_like(vg)
        finite = np.isfinite(self.tau)
        dx[finite] = -vg[finite] / self.tau[finite]
        return dx


def stamp_system(
    c: Circuit,
    states: dict[str, float] | None = None,
    t: float = 0.0,
    prev_vab: dict[str, float] | None = None,
) -> LinearSystem:
    """Stamp the MNA system for circuit c at time t.

    states maps memristor id to gate voltage (missing ids use the device's
    vg0); prev_vab maps memristor id to the branch voltage used for the
    level-1 secant stamp (missing ids use 0).
    """
    asm = _Assembly(c)
    vg = np.asarray(
        [(states or {}).get(m.id, m.vg0) for m in asm.memristors], dtype=float
    )
    pv = np.asarray([(prev_vab or {}).get(m.id, 0.0) for m in asm.memristors], dtype=float)
    a, b = asm.fill(vg, t, pv)
    return LinearSystem(a, b, asm.names)


def solve_linear(system: LinearSystem, config: SimConfig = SimConfig()) -> np.ndarray:
    """LU solve with zero-pivot and residual guards."""
    a, b = system.a, system.rhs
    if a.size == 0:
        return np.zeros(0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(a, check_finite=False)
    scale = np.abs(a).max()
    bad = np.flatnonzero(np.abs(np.diag(lu)) <= config.pivot_rtol * scale)
    if scale == 0.0 or bad.size:
        which = ", ".join(system.names[j] for j in bad) if bad.size else "all"
        raise SingularSystemError(
            f"singular system: zero pivot for {which}"
            " (floating node, or a voltage source loop)"
        )
    x = lu_solve((lu, piv), b, check_finite=False)
    if not np.all(np.isfinite(x)):
        raise NumericalError("solution is not finite")
    resid = np.abs(a @ x - b).max()
    if resid > config.residual_rtol * max(1.0, np.abs(b).max()):
        raise NumericalError(f"residual {resid:.3e} exceeds tolerance")
    return x


def transient(c: Circuit, config: SimConfig = SimConfig()) -> Waveform:
    """Run the circuit's .tran analysis and return the sampled waveform."""
    asm = _Assembly(c)
    dt, tstop = c.tran.dt, c.tran.tstop
    n_steps = max(1, int(round(tstop / dt)))
    n_samples = n_steps + 1

    names = list(asm.names)
    n_sys = asm.n
    vab_cols = []
    vg_cols = []
    i_cols = []
    for m in asm.memristors:
        vab_cols.append(len(names))
        names.append(f"vab({m.id})")
        vg_cols.append(len(names))
        names.append(f"vg({m.id})")
        i_cols.append(len(names))
        names.append(f"i({m.id})")
    vab_cols = np.asarray(vab_cols, dtype=np.intp)
    vg_cols = np.asarray(vg_cols, dtype=np.intp)
    i_cols = np.asarray(i_cols, dtype=np.intp)

    rec = np.empty((n_samples, len(names)))
    times = np.empty(n_samples)

    vg = np.asarray([m.vg0 for m in asm.memristors], dtype=float)
    prev_vab = np.zeros(len(asm.memristors))
    max_step = asm.vdd * config.state_step_frac if len(vg) else None

    for k in range(n_samples):
        t = k * dt
        if k > 0:
            # advance gates one Euler step from the previous solve
            dx = asm.state_derivatives(prev_vab, vg, c.strobe.is_high(t)) * dt
            if len(vg) and np.any(np.abs(dx) > max_step):
                raise NumericalError(
                    f"gate moved more than {config.state_step_frac:.0%} of the rail"
                    f" span in one step at t={t:.3e}; reduce dt"
                )
            vg = np.clip(vg + dx, 0.0, asm.vdd)
        a, b = asm.fill(vg, t, prev_vab)
        try:
            x = solve_linear(LinearSystem(a, b, asm.names), config)
        except SimulationError as exc:
            raise type(exc)(f"t={t:.3e}: {exc}") from exc
        vab = asm.branch_voltages(x)
        times[k] = t
        rec[k, :n_sys] = x
        if len(vg):
            rec[k, vab_cols] = vab
            rec[k, vg_cols] = vg
            rec[k, i_cols] = asm.currents(vab, vg)
        prev_vab = vab

    columns = {name: rec[:, j].copy() for j, name in enumerate(names)}
    return Waveform(times=times, columns=columns)


def static_supply_current(c: Circuit) -> float:
    """Quiescent bias draw: the sum of every emulator cell's tail current."""
    return float(sum(c.models[m.model].ibias for m in c.memristors()))
