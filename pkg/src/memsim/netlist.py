"""SPICE-flavoured netlist format for the emulator test benches.

One card per line; ``*`` starts a comment, blank lines are skipped, keywords
are case-insensitive, parentheses and commas read as whitespace.  Cards:

    .model <name> memristor [kp=] [wl=] [vthn=] [vcm=] [vdd=] [cm=]
                            [ibias=] [gm0=] [gleak=] [tauleak=] [level=]
    V<id> <n+> <n-> dc <v>
                    | sin(<offset> <amplitude> <freq> [phase])
                    | pulse(<v0> <v1> <delay> <rise> <fall> <width> <period>)
                    | pwl(<t1> <v1> <t2> <v2> ...)
    R<id> <nA> <nB> <ohms>
    S<id> <nA> <nB> <on|off> [ron=<ohms>] [goff=<siemens>]
    X<id> <nA> <nB> <model> [vg0=<volts>]
    .tran <dt> <tstop>
    .strobe high | low | window <t_on> <t_off> | pwl <t1> <l1> <t2> <l2> ...
    .end

Values accept SPICE magnitude suffixes (f p n u m k meg g; longest match
first, so ``meg`` never reads as milli), and letters trailing a suffix are
ignored: ``100fF`` is 100e-15.  ``tauleak=inf`` is accepted for a
non-decaying hold state.  Node ``0`` is ground and always exists; other
nodes come into being on first reference.  The first error aborts the parse
and carries its line number.
"""

from __future__ import annotations

import bisect
import math
import re
from dataclasses import dataclass, field

from .devices import Dc, MemristorParams, Pulse, Pwl, Sin, SourceSpec, SwitchParams

__all__ = [
    "NetlistError",
    "StrobeHigh",
    "StrobeLow",
    "StrobeWindow",
    "StrobePwl",
    "Strobe",
    "Memristor",
    "Switch",
    "Resistor",
    "VSource",
    "Device",
    "Tran",
    "Circuit",
    "parse_value",
    "parse_netlist",
    "serialize_netlist",
]


class NetlistError(Exception):
    """Parse or validation failure; str() includes the line when known."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(message, line, col)

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        if self.col is None:
            return f"line {self.line}: {self.message}"
        return f"line {self.line}, col {self.col}: {self.message}"


# --------------------------------------------------------------------------
# strobe schedules


@dataclass(frozen=True)
class StrobeHigh:
    def is_high(self, t: float) -> bool:
        return True


@dataclass(frozen=True)
class StrobeLow:
    def is_high(self, t: float) -> bool:
        return False


@dataclass(frozen=True)
class StrobeWindow:
    """High on [t_on, t_off), low outside."""

    t_on: float
    t_off: float

    def __post_init__(self) -> None:
        if not self.t_on < self.t_off:
            raise ValueError("strobe window needs t_on < t_off")

    def is_high(self, t: float) -> bool:
        return self.t_on <= t < self.t_off


@dataclass(frozen=True)
class StrobePwl:
    """Level steps: the schedule holds the level of the last point at or
    before t, and is low before the first point."""

    points: tuple[tuple[float, int], ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("strobe pwl needs at least one point")
        times = [t for t, _ in self.points]
        if any(a >= b for a, b in zip(times, times[1:])):
            raise ValueError("strobe pwl times must be strictly increasing")
        if any(level not in (0, 1) for _, level in self.points):
            raise ValueError("strobe pwl levels must be 0 or 1")

    def is_high(self, t: float) -> bool:
        times = [pt[0] for pt in self.points]
        idx = bisect.bisect_right(times, t)
        if idx == 0:
            return False
        return self.points[idx - 1][1] == 1


Strobe = StrobeHigh | StrobeLow | StrobeWindow | StrobePwl


# --------------------------------------------------------------------------
# circuit elements


@dataclass(frozen=True)
class Memristor:
    id: str
    a: str
    b: str
    model: str
    vg0: float = 0.0

    @property
    def nodes(self) -> tuple[str, str]:
        return (self.a, self.b)


@dataclass(frozen=True)
class Switch:
    id: str
    a: str
    b: str
    params: SwitchParams

    @property
    def nodes(self) -> tuple[str, str]:
        return (self.a, self.b)


@dataclass(frozen=True)
class Resistor:
    id: str
    a: str
    b: str
    ohms: float

    def __post_init__(self) -> None:
        if not self.ohms > 0.0:
            raise ValueError(f"resistance must be positive, got {self.ohms!r}")

    @property
    def nodes(self) -> tuple[str, str]:
        return (self.a, self.b)


@dataclass(frozen=True)
class VSource:
    id: str
    pos: str
    neg: str
    spec: SourceSpec

    @property
    def nodes(self) -> tuple[str, str]:
        return (self.pos, self.neg)


Device = Memristor | Switch | Resistor | VSource


@dataclass(frozen=True)
class Tran:
    dt: float
    tstop: float

    def __post_init__(self) -> None:
        if not 0.0 < self.dt <= self.tstop:
            raise ValueError(f"need 0 < dt <= tstop, got dt={self.dt!r} tstop={self.tstop!r}")


@dataclass(frozen=True)
class Circuit:
    """A parsed bench: model table, device list (file order), directives.

    The node table is derived: ground ``'0'`` first, then every other node in
    order of first reference by a device terminal.
    """

    models: dict[str, MemristorParams] = field(default_factory=dict)
    devices: tuple[Device, ...] = ()
    tran: Tran = Tran(1e-9, 1e-6)
    strobe: Strobe = StrobeHigh()

    @property
    def nodes(self) -> tuple[str, ...]:
        seen: dict[str, None] = {"0": None}
        for d in self.devices:
            for n in d.nodes:
                seen.setdefault(n, None)
        return tuple(seen)

    def memristors(self) -> tuple[Memristor, ...]:
        return tuple(d for d in self.devices if isinstance(d, Memristor))

    def sources(self) -> tuple[VSource, ...]:
        return tuple(d for d in self.devices if isinstance(d, VSource))

    def model_of(self, dev: Memristor) -> MemristorParams:
        return self.models[dev.model]


# --------------------------------------------------------------------------
# value grammar

_SUFFIXES = {
    "f": 1e-15,
    "p": 1e-12,
    "n": 1e-9,
    "u": 1e-6,
    "m": 1e-3,
    "k": 1e3,
    "meg": 1e6,
    "g": 1e9,
}

# 'meg' is listed before the single letters so the longest suffix wins.
_VALUE_RE = re.compile(
    r"([+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)(meg|[fpnumkg])?([a-zA-Z]*)",
    re.IGNORECASE,
)


def parse_value(token: str, *, line: int | None = None, col: int | None = None) -> float:
    """Decimal value with optional magnitude suffix; trailing unit letters ignored."""
    m = _VALUE_RE.fullmatch(token.strip())
    if m is None:
        raise NetlistError(f"malformed number {token!r}", line, col)
    value = float(m.group(1))
    suffix = m.group(2)
    if suffix:
        value *= _SUFFIXES[suffix.lower()]
    return value


def _parse_value_or_inf(token: str, line: int, col: int | None) -> float:
    if token.lower() in ("inf", "infinity"):
        return math.inf
    return parse_value(token, line=line, col=col)


# --------------------------------------------------------------------------
# parser

_MODEL_KEYS = {
    "kp": "kp",
    "wl": "w_over_l",
    "vthn": "vthn",
    "vcm": "vcm",
    "vdd": "vdd",
    "cm": "cm",
    "ibias": "ibias",
    "gm0": "gm0",
    "gleak": "g_leak",
    "tauleak": "tau_leak",
    "level": "level",
}


def _tokenize(raw: str) -> list[tuple[str, int]]:
    # parens and commas become single spaces so character columns survive
    norm = raw.replace("(", " ").replace(")", " ").replace(",", " ")
    return [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", norm)]


def _split_options(tokens: list[tuple[str, int]], line: int) -> dict[str, tuple[str, int]]:
    opts: dict[str, tuple[str, int]] = {}
    for tok, col in tokens:
        if "=" not in tok:
            raise NetlistError(f"expected key=value option, got {tok!r}", line, col)
        key, _, val = tok.partition("=")
        key = key.lower()
        if key in opts:
            raise NetlistError(f"duplicate option {key!r}", line, col)
        if not val:
            raise NetlistError(f"option {key!r} has no value", line, col)
        opts[key] = (val, col)
    return opts


def _need(tokens: list[tuple[str, int]], count: int, line: int, what: str) -> None:
    if len(tokens) < count:
        raise NetlistError(f"{what}: expected at least {count} fields, got {len(tokens)}", line)


def parse_netlist(text: str) -> Circuit:
    """Parse netlist text into a Circuit; raises NetlistError at the first problem."""
    models: dict[str, MemristorParams] = {}
    devices: list[Device] = []
    memristor_lines: dict[str, int] = {}
    ids: set[str] = set()
    tran: Tran | None = None
    strobe: Strobe | None = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("*"):
            continue
        tokens = _tokenize(raw)
        head, head_col = tokens[0]
        lowered = head.lower()

        if lowered == ".end":
            break
        if lowered == ".model":
            _need(tokens, 3, lineno, ".model card")
            name = tokens[1][0]
            if name in models:
                raise NetlistError(f"duplicate model {name!r}", lineno, tokens[1][1])
            if tokens[2][0].lower() != "memristor":
                raise NetlistError(
                    f"unknown model type {tokens[2][0]!r} (only 'memristor')", lineno, tokens[2][1]
                )
            kwargs = {}
            for key, (val, col) in _split_options(tokens[3:], lineno).items():
                if key not in _MODEL_KEYS:
                    raise NetlistError(f"unknown model parameter {key!r}", lineno, col)
                if key == "level":
                    number = parse_value(val, line=lineno, col=col)
                    if number not in (0.0, 1.0):
                        raise NetlistError(f"level must be 0 or 1, got {val!r}", lineno, col)
                    kwargs["level"] = int(number)
                elif key == "tauleak":
                    kwargs["tau_leak"] = _parse_value_or_inf(val, lineno, col)
                else:
                    kwargs[_MODEL_KEYS[key]] = parse_value(val, line=lineno, col=col)
            try:
                models[name] = MemristorParams(**kwargs)
            except ValueError as exc:
                raise NetlistError(f"bad model {name!r}: {exc}", lineno) from exc
            continue
        if lowered == ".tran":
            if tran is not None:
                raise NetlistError("duplicate .tran directive", lineno)
            _need(tokens, 3, lineno, ".tran directive")
            if len(tokens) > 3:
                raise NetlistError(".tran takes exactly two values", lineno, tokens[3][1])
            try:
                tran = Tran(
                    parse_value(tokens[1][0], line=lineno, col=tokens[1][1]),
                    parse_value(tokens[2][0], line=lineno, col=tokens[2][1]),
                )
            except ValueError as exc:
                raise NetlistError(str(exc), lineno) from exc
            continue
        if lowered == ".strobe":
            if strobe is not None:
                raise NetlistError("duplicate .strobe directive", lineno)
            _need(tokens, 2, lineno, ".strobe directive")
            kind = tokens[1][0].lower()
            try:
                if kind == "high":
                    strobe = StrobeHigh()
                elif kind == "low":
                    strobe = StrobeLow()
                elif kind == "window":
                    _need(tokens, 4, lineno, ".strobe window")
                    strobe = StrobeWindow(
                        parse_value(tokens[2][0], line=lineno, col=tokens[2][1]),
                        parse_value(tokens[3][0], line=lineno, col=tokens[3][1]),
                    )
                elif kind == "pwl":
                    pairs = tokens[2:]
                    if not pairs or len(pairs) % 2:
                        raise NetlistError(".strobe pwl needs time/level pairs", lineno)
                    points = []
                    for (t_tok, t_col), (l_tok, l_col) in zip(pairs[::2], pairs[1::2]):
                        t = parse_value(t_tok, line=lineno, col=t_col)
                        level = parse_value(l_tok, line=lineno, col=l_col)
                        if level not in (0.0, 1.0):
                            raise NetlistError(f"strobe level must be 0 or 1, got {l_tok!r}", lineno, l_col)
                        points.append((t, int(level)))
                    strobe = StrobePwl(tuple(points))
                else:
                    raise NetlistError(f"unknown strobe kind {kind!r}", lineno, tokens[1][1])
            except ValueError as exc:
                raise NetlistError(str(exc), lineno) from exc
            continue
        if lowered.startswith("."):
            raise NetlistError(f"unknown directive {head!r}", lineno, head_col)

        # device cards, dispatched on the first letter
        kind = lowered[0]
        dev_id = head
        if dev_id in ids:
            raise NetlistError(f"duplicate device id {dev_id!r}", lineno, head_col)
        if kind == "v":
            _need(tokens, 5, lineno, "V card")
            pos, neg = tokens[1][0], tokens[2][0]
            stype, stype_col = tokens[3][0].lower(), tokens[3][1]
            args = tokens[4:]
            try:
                if stype == "dc":
                    if len(args) != 1:
                        raise NetlistError("dc source takes one value", lineno, stype_col)
                    spec: SourceSpec = Dc(parse_value(args[0][0], line=lineno, col=args[0][1]))
                elif stype == "sin":
                    if len(args) not in (3, 4):
                        raise NetlistError("sin source takes offset amplitude freq [phase]", lineno, stype_col)
                    vals = [parse_value(t, line=lineno, col=c) for t, c in args]
                    spec = Sin(*vals)
                elif stype == "pulse":
                    if len(args) != 7:
                        raise NetlistError(
                            "pulse source takes v0 v1 delay rise fall width period", lineno, stype_col
                        )
                    vals = [parse_value(t, line=lineno, col=c) for t, c in args]
                    spec = Pulse(*vals)
                elif stype == "pwl":
                    if len(args) % 2:
                        raise NetlistError("pwl source needs time/value pairs", lineno, stype_col)
                    vals = [parse_value(t, line=lineno, col=c) for t, c in args]
                    spec = Pwl(tuple(zip(vals[::2], vals[1::2])))
                else:
                    raise NetlistError(f"unknown source type {stype!r}", lineno, stype_col)
            except ValueError as exc:
                raise NetlistError(str(exc), lineno) from exc
            devices.append(VSource(dev_id, pos, neg, spec))
        elif kind == "r":
            _need(tokens, 4, lineno, "R card")
            if len(tokens) > 4:
                raise NetlistError("R card takes exactly two nodes and a value", lineno, tokens[4][1])
            try:
                devices.append(
                    Resistor(
                        dev_id,
                        tokens[1][0],
                        tokens[2][0],
                        parse_value(tokens[3][0], line=lineno, col=tokens[3][1]),
                    )
                )
            except ValueError as exc:
                raise NetlistError(str(exc), lineno) from exc
        elif kind == "s":
            _need(tokens, 4, lineno, "S card")
            position = tokens[3][0].lower()
            if position not in ("on", "off"):
                raise NetlistError(f"switch position must be on or off, got {tokens[3][0]!r}", lineno, tokens[3][1])
            kwargs = {"position": position}
            for key, (val, col) in _split_options(tokens[4:], lineno).items():
                if key == "ron":
                    kwargs["r_on"] = parse_value(val, line=lineno, col=col)
                elif key == "goff":
                    kwargs["g_off"] = parse_value(val, line=lineno, col=col)
                else:
                    raise NetlistError(f"unknown switch option {key!r}", lineno, col)
            try:
                devices.append(Switch(dev_id, tokens[1][0], tokens[2][0], SwitchParams(**kwargs)))
            except ValueError as exc:
                raise NetlistError(str(exc), lineno) from exc
        elif kind == "x":
            _need(tokens, 4, lineno, "X card")
            vg0 = 0.0
            for key, (val, col) in _split_options(tokens[4:], lineno).items():
                if key != "vg0":
                    raise NetlistError(f"unknown memristor option {key!r}", lineno, col)
                vg0 = parse_value(val, line=lineno, col=col)
            devices.append(Memristor(dev_id, tokens[1][0], tokens[2][0], tokens[3][0], vg0))
            memristor_lines[dev_id] = lineno
        else:
            raise NetlistError(f"unknown card {head!r}", lineno, head_col)
        ids.add(dev_id)

    if tran is None:
        raise NetlistError("missing .tran directive")
    for dev in devices:
        if isinstance(dev, Memristor):
            line = memristor_lines[dev.id]
            if dev.model not in models:
                raise NetlistError(f"unresolved model {dev.model!r}", line)
            vdd = models[dev.model].vdd
            if not 0.0 <= dev.vg0 <= vdd:
                raise NetlistError(f"vg0 must lie in [0, vdd={vdd!r}], got {dev.vg0!r}", line)
    return Circuit(models=models, devices=tuple(devices), tran=tran, strobe=strobe or StrobeHigh())


# --------------------------------------------------------------------------
# serializer


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else repr(x)


def _spec_text(spec: SourceSpec) -> str:
    if isinstance(spec, Dc):
        return f"dc {_fmt(spec.v)}"
    if isinstance(spec, Sin):
        return f"sin({_fmt(spec.offset)} {_fmt(spec.amplitude)} {_fmt(spec.freq)} {_fmt(spec.phase)})"
    if isinstance(spec, Pulse):
        vals = (spec.v0, spec.v1, spec.delay, spec.rise, spec.fall, spec.width, spec.period)
        return "pulse(" + " ".join(_fmt(v) for v in vals) + ")"
    if isinstance(spec, Pwl):
        return "pwl(" + " ".join(f"{_fmt(t)} {_fmt(v)}" for t, v in spec.points) + ")"
    raise TypeError(f"unknown source spec {spec!r}")


def _strobe_text(strobe: Strobe) -> str:
    if isinstance(strobe, StrobeHigh):
        return ".strobe high"
    if isinstance(strobe, StrobeLow):
        return ".strobe low"
    if isinstance(strobe, StrobeWindow):
        return f".strobe window {_fmt(strobe.t_on)} {_fmt(strobe.t_off)}"
    if isinstance(strobe, StrobePwl):
        return ".strobe pwl " + " ".join(f"{_fmt(t)} {level}" for t, level in strobe.points)
    raise TypeError(f"unknown strobe {strobe!r}")


def serialize_netlist(c: Circuit) -> str:
    """Canonical text form; parse_netlist(serialize_netlist(c)) reproduces c."""
    lines = []
    for name, p in c.models.items():
        lines.append(
            f".model {name} memristor kp={_fmt(p.kp)} wl={_fmt(p.w_over_l)}"
            f" vthn={_fmt(p.vthn)} vcm={_fmt(p.vcm)} vdd={_fmt(p.vdd)} cm={_fmt(p.cm)}"
            f" ibias={_fmt(p.ibias)} gm0={_fmt(p.gm0)} gleak={_fmt(p.g_leak)}"
            f" tauleak={_fmt(p.tau_leak)} level={p.level}"
        )
    for d in c.devices:
        if isinstance(d, VSource):
            lines.append(f"{d.id} {d.pos} {d.neg} {_spec_text(d.spec)}")
        elif isinstance(d, Resistor):
            lines.append(f"{d.id} {d.a} {d.b} {_fmt(d.ohms)}")
        elif isinstance(d, Switch):
            p = d.params
            lines.append(f"{d.id} {d.a} {d.b} {p.position} ron={_fmt(p.r_on)} goff={_fmt(p.g_off)}")
        elif isinstance(d, Memristor):
            lines.append(f"{d.id} {d.a} {d.b} {d.model} vg0={_fmt(d.vg0)}")
        else:
            raise TypeError(f"unknown device {d!r}")
    lines.append(_strobe_text(c.strobe))
    lines.append(f".tran {_fmt(c.tran.dt)} {_fmt(c.tran.tstop)}")
    lines.append(".end")
    return "\n".join(lines) + "\n"
