"""Netlist grammar, validation, and round-trip tests.

Expected values are hand-computed from the suffix table and the card
grammar; round-trip checks rely on dataclass equality only.
"""

from __future__ import annotations

import math

import hypothesis.strategies as st
import pytest
from hypothesis import given, settings

from memsim.devices import Dc, MemristorParams, Pulse, Pwl, Sin, SwitchParams
from memsim.netlist import (
    Circuit,
    Memristor,
    NetlistError,
    Resistor,
    StrobeHigh,
    StrobeLow,
    StrobePwl,
    StrobeWindow,
    Switch,
    Tran,
    VSource,
    parse_netlist,
    parse_value,
    serialize_netlist,
)

MINIMAL = """\
.model m memristor
V1 a 0 dc 1.2
X1 a 0 m vg0=0.6
.tran 1n 1u
.end
"""


class TestParseValue:
    @pytest.mark.parametrize(
        "token,expected",
        [
            ("1", 1.0),
            ("-3.5", -3.5),
            (".25", 0.25),
            ("1e-9", 1e-9),
            ("1E6", 1e6),
            ("100f", 100e-15),
            ("10p", 10e-12),
            ("1n", 1e-9),
            ("5u", 5e-6),
            ("2m", 2e-3),
            ("5k", 5e3),
            ("1meg", 1e6),
            ("2g", 2e9),
            ("100fF", 100e-15),
            ("1MEG", 1e6),
            ("3megHz", 3e6),
            ("0.6V", 0.6),
            ("1mV", 1e-3),
            ("+2.5e-1", 0.25),
        ],
    )
    def test_table(self, token, expected):
        assert parse_value(token) == pytest.approx(expected, rel=1e-15)

    def test_meg_beats_milli(self):
        # longest-match: 'meg' must not read as m + trailing 'eg'
        assert parse_value("1meg") == 1e6
        assert parse_value("1m") == 1e-3

    @pytest.mark.parametrize("token", ["", "volts", "1..2", "--1", "1e", "k1"])
    def test_malformed(self, token):
        if token == "1e":
            # trailing letters are tolerated, so a lone exponent 'e' reads
            # as the unit letter of '1'
            assert parse_value(token) == 1.0
        else:
            with pytest.raises(NetlistError):
                parse_value(token)

    def test_error_carries_position(self):
        err = pytest.raises(NetlistError, parse_value, "x", line=7, col=3).value
        assert err.line == 7 and err.col == 3
        assert "line 7" in str(err)


class TestParseCircuit:
    def test_minimal(self):
        c = parse_netlist(MINIMAL)
        assert set(c.models) == {"m"}
        assert c.models["m"] == MemristorParams()
        assert c.devices == (
            VSource("V1", "a", "0", Dc(1.2)),
            Memristor("X1", "a", "0", "m", 0.6),
        )
        assert c.tran == Tran(1e-9, 1e-6)
        assert c.strobe == StrobeHigh()
        assert c.nodes == ("0", "a")

    def test_model_overrides(self):
        c = parse_netlist(
            ".model hot memristor kp=1m wl=10 vthn=0.2 vcm=0.5 vdd=1 cm=100f"
            " ibias=100n gm0=5u gleak=0 tauleak=inf level=1\n"
            "V1 a 0 dc 1\nX1 a 0 hot\n.tran 1n 1u\n.end\n"
        )
        p = c.models["hot"]
        assert p.kp == 1e-3
        assert p.w_over_l == 10.0
        # suffix scaling may differ from a literal by one ulp
        assert p.cm == pytest.approx(100e-15, rel=1e-15)
        assert p.ibias == pytest.approx(100e-9, rel=1e-15)
        assert p.gm0 == pytest.approx(5e-6, rel=1e-15)
        assert p.g_leak == 0.0
        assert math.isinf(p.tau_leak)
        assert p.level == 1
        assert c.devices[1].vg0 == 0.0

    def test_gm0_defaults_track_ibias(self):
        c = parse_netlist(
            ".model m memristor ibias=100n\nV1 a 0 dc 1\nX1 a 0 m\n.tran 1n 1u\n.end\n"
        )
        assert c.models["m"].gm0 == pytest.approx(20.0 * 100e-9)

    def test_sources(self):
        c = parse_netlist(
            ".model m memristor\n"
            "V1 a 0 sin(0.6 0.2 1meg)\n"
            "V2 b 0 sin(0 1 2k 1.5)\n"
            "V3 c 0 pulse(0 1.2 1u 0 0 0.5u 1u)\n"
            "V4 d 0 pwl(0 0 1u 1.2 2u 0)\n"
            "X1 a b m\n"
            ".tran 1n 1u\n.end\n"
        )
        specs = [d.spec for d in c.sources()]
        assert specs == [
            Sin(0.6, 0.2, 1e6),
            Sin(0.0, 1.0, 2e3, 1.5),
            Pulse(0.0, 1.2, 1e-6, 0.0, 0.0, 5e-7, 1e-6),
            Pwl(((0.0, 0.0), (1e-6, 1.2), (2e-6, 0.0))),
        ]

    def test_switches_and_resistors(self):
        c = parse_netlist(
            ".model m memristor\n"
            "V1 a 0 dc 1\n"
            "R1 a b 10k\n"
            "S1 b c on\n"
            "S2 c 0 off ron=1k goff=1p\n"
            "X1 c 0 m\n"
            ".tran 1n 1u\n.end\n"
        )
        r1, s1, s2 = c.devices[1], c.devices[2], c.devices[3]
        assert isinstance(r1, Resistor) and r1.ohms == 1e4
        assert s1.params == SwitchParams(position="on")
        assert s2.params == SwitchParams(r_on=1e3, g_off=1e-12, position="off")
        assert c.nodes == ("0", "a", "b", "c")

    @pytest.mark.parametrize(
        "text,kind",
        [
            (".strobe high\n", StrobeHigh),
            (".strobe low\n", StrobeLow),
            (".strobe window 1u 2u\n", StrobeWindow),
            (".strobe pwl 0 1 1u 0 2u 1\n", StrobePwl),
        ],
    )
    def test_strobe_kinds(self, text, kind):
        c = parse_netlist(MINIMAL.replace(".end", text + ".end"))
        assert isinstance(c.strobe, kind)

    def test_strobe_schedules(self):
        win = StrobeWindow(1e-6, 2e-6)
        assert not win.is_high(0.0)
        assert win.is_high(1e-6)
        assert win.is_high(1.5e-6)
        assert not win.is_high(2e-6)
        pwl = StrobePwl(((0.0, 1), (1e-6, 0), (2e-6, 1)))
        assert pwl.is_high(0.0)
        assert pwl.is_high(0.5e-6)
        assert not pwl.is_high(1e-6)
        assert pwl.is_high(2.5e-6)
        assert not pwl.is_high(-1.0)

    def test_comments_blanks_and_case(self):
        c = parse_netlist(
            "* bench\n\n.MODEL M MEMRISTOR\nV1 A 0 DC 1.2\n\nX1 A 0 M VG0=0.6\n"
            "* trailing note\n.TRAN 1N 1U\n.END\n"
        )
        # ids and node names keep their case; keywords do not care
        assert c.devices[0].id == "V1"
        assert c.devices[1].model == "M"
        assert c.devices[1].vg0 == 0.6

    def test_parens_and_commas_equivalent(self):
        a = parse_netlist(MINIMAL.replace("dc 1.2", "sin(0.6 0.2 1meg)"))
        b = parse_netlist(MINIMAL.replace("dc 1.2", "sin 0.6, 0.2, 1meg"))
        assert a.devices == b.devices

    def test_cards_after_end_ignored(self):
        c = parse_netlist(MINIMAL + "garbage that would not parse\n")
        assert len(c.devices) == 2


class TestParseErrors:
    CASES = [
        ("X1 a 0 nosuch\n.tran 1n 1u\n.end\n", "unresolved model", 1),
        (".model m memristor\nX1 a 0 m vg0=1.5\n.tran 1n 1u\n.end\n", "vg0", 2),
        (".model m memristor\nX1 a 0 m vg0=-0.1\n.tran 1n 1u\n.end\n", "vg0", 2),
        ("V1 a 0 dc 1\n.end\n", "missing .tran", None),
        ("V1 a 0 dc 1\n.tran 1n 1u\n.tran 1n 1u\n.end\n", "duplicate .tran", 3),
        ("V1 a 0 dc 1\nV1 b 0 dc 2\n.tran 1n 1u\n.end\n", "duplicate device", 2),
        (".model m memristor\n.model m memristor\n.tran 1n 1u\n.end\n", "duplicate model", 2),
        ("W1 a 0 5\n.tran 1n 1u\n.end\n", "unknown card", 1),
        (".frobnicate\n.tran 1n 1u\n.end\n", "unknown directive", 1),
        ("V1 a 0 tri 1\n.tran 1n 1u\n.end\n", "unknown source", 1),
        ("V1 a 0 dc 1 2\n.tran 1n 1u\n.end\n", "takes one value", 1),
        ("V1 a 0 pulse(0 1 0 0 0 1u)\n.tran 1n 1u\n.end\n", "pulse source", 1),
        ("V1 a 0 pwl(0 0 1u)\n.tran 1n 1u\n.end\n", "pairs", 1),
        ("V1 a 0 pwl(1u 0 0 0)\n.tran 1n 1u\n.end\n", "increasing", 1),
        ("R1 a 0 -5\n.tran 1n 1u\n.end\n", "positive", 1),
        ("R1 a 0 5 6\n.tran 1n 1u\n.end\n", "exactly two nodes", 1),
        ("S1 a 0 open\n.tran 1n 1u\n.end\n", "switch position", 1),
        ("S1 a 0 on bogus=1\n.tran 1n 1u\n.end\n", "unknown switch option", 1),
        (".model m memristor bogus=1\n.tran 1n 1u\n.end\n", "unknown model parameter", 1),
        (".model m memristor level=2\n.tran 1n 1u\n.end\n", "level", 1),
        (".model m memristor kp=oops\n.tran 1n 1u\n.end\n", "malformed number", 1),
        (".model m memristor kp=-1\n.tran 1n 1u\n.end\n", "bad model", 1),
        ("V1 a 0 dc 1\n.tran 1u 1n\n.end\n", "dt <= tstop", 2),
        ("V1 a 0 dc 1\n.strobe sideways\n.tran 1n 1u\n.end\n", "unknown strobe", 2),
        ("V1 a 0 dc 1\n.strobe window 2u 1u\n.tran 1n 1u\n.end\n", "t_on < t_off", 2),
        ("V1 a 0 dc 1\n.strobe pwl 0 2\n.tran 1n 1u\n.end\n", "level must be 0 or 1", 2),
        ("V1 a 0\n.tran 1n 1u\n.end\n", "expected at least", 1),
        ("S1 a 0 on ron\n.tran 1n 1u\n.end\n", "key=value", 1),
    ]

    @pytest.mark.parametrize("text,fragment,line", CASES)
    def test_first_error_reported(self, text, fragment, line):
        err = pytest.raises(NetlistError, parse_netlist, text).value
        assert fragment in str(err)
        assert err.line == line


def _circuits() -> st.SearchStrategy[Circuit]:
    node = st.sampled_from(["0", "a", "b", "c", "n1", "n2"])
    fin = st.floats(1e-12, 1e6, allow_nan=False, allow_infinity=False)
    pair = st.tuples(node, node).filter(lambda p: p[0] != p[1])

    def vsource(i, p):
        spec = st.one_of(
            st.builds(Dc, st.floats(-2, 2)),
            st.builds(Sin, st.floats(-1, 1), st.floats(0, 1), st.floats(1, 1e7), st.floats(0, 6)),
            st.just(Pulse(0.0, 1.2, 1e-6, 0.0, 0.0, 5e-7, 1e-6)),
            st.just(Pwl(((0.0, 0.0), (1e-6, 1.2)))),
        )
        return st.builds(lambda s: VSource(f"V{i}", p[0], p[1], s), spec)

    def element(i):
        return pair.flatmap(
            lambda p: st.one_of(
                vsource(i, p),
                st.builds(lambda r: Resistor(f"R{i}", p[0], p[1], r), fin.map(lambda x: x + 1.0)),
                st.builds(
                    lambda on: Switch(f"S{i}", p[0], p[1], SwitchParams(position=on)),
                    st.sampled_from(["on", "off"]),
                ),
                st.builds(
                    lambda v: Memristor(f"X{i}", p[0], p[1], "m", v), st.floats(0, 1.2)
                ),
            )
        )

    strobe = st.one_of(
        st.just(StrobeHigh()),
        st.just(StrobeLow()),
        st.just(StrobeWindow(1e-7, 9e-7)),
        st.just(StrobePwl(((0.0, 1), (5e-7, 0)))),
    )
    devs = st.integers(1, 6).flatmap(
        lambda n: st.tuples(*[element(i) for i in range(n)])
    )
    return st.builds(
        lambda d, s: Circuit(models={"m": MemristorParams()}, devices=d, tran=Tran(1e-9, 1e-6), strobe=s),
        devs,
        strobe,
    )


class TestRoundTrip:
    def test_minimal_fixed_point(self):
        c = parse_netlist(MINIMAL)
        text = serialize_netlist(c)
        assert parse_netlist(text) == c
        # canonical form is its own fixed point
        assert serialize_netlist(parse_netlist(text)) == text

    def test_inf_tauleak_survives(self):
        c = parse_netlist(
            ".model m memristor tauleak=inf\nV1 a 0 dc 1\nX1 a 0 m\n.tran 1n 1u\n.end\n"
        )
        again = parse_netlist(serialize_netlist(c))
        assert math.isinf(again.models["m"].tau_leak)

    @settings(max_examples=60, deadline=None)
    @given(_circuits())
    def test_random_circuits_round_trip(self, c):
        assert parse_netlist(serialize_netlist(c)) == c
