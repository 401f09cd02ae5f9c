import math
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfcosim.network import Network, Source, Tone
from sfcosim.orchestrator import LinkSpec, Recorder, Scenario, Subsystem
from sfcosim.scenario_io import (DanglingReferenceError, InvalidValueError, LinkTimingError,
                                 MissingKeyError, NegativeParameterError, ScenarioError,
                                 ScenarioSyntaxError, StepRatioError, UnknownKeyError, load,
                                 parse, save, serialize)
from sfcosim.surrogate import TAU_26_28, two_area_scenario

MINIMAL = """\
sfcosim-scenario 1

[run]
t_end = 0.01

[subsystem A]
kind = emt
dt = 1e-05
nodes = 3

[branch A V]
kind = V
from = 1
to = 0
tones = 50.0 10.0 0.0

[branch A R]
kind = R
from = 1
to = 2
value = 2.0

[branch A L]
kind = L
from = 2
to = 0
value = 0.01

[recorder iL]
kind = branch
subsystem = A
target = L
"""


def line_of(text, needle):
    return next(i for i, ln in enumerate(text.splitlines(), 1) if ln.strip() == needle)


def test_minimal_parse_and_round_trip():
    sc = parse(MINIMAL)
    assert sc.t_end == 0.01
    assert [b.name for b in sc.subsystems[0].network.branches] == ["V", "R", "L"]
    text = serialize(sc)
    assert serialize(parse(text)) == text


def test_negative_resistance_names_branch():
    bad = MINIMAL.replace("value = 2.0", "value = -1")
    with pytest.raises(NegativeParameterError) as ei:
        parse(bad)
    err = ei.value
    assert err.key == "value"
    assert err.line == line_of(bad, "value = -1")
    assert "branch A R" in str(err)
    assert isinstance(err, InvalidValueError)


def test_unknown_key():
    bad = MINIMAL.replace("value = 0.01", "value = 0.01\ncolour = red")
    with pytest.raises(UnknownKeyError) as ei:
        parse(bad)
    assert (ei.value.line, ei.value.key) == (line_of(bad, "colour = red"), "colour")


def test_dangling_node():
    bad = MINIMAL.replace("to = 2", "to = 7")
    with pytest.raises(DanglingReferenceError) as ei:
        parse(bad)
    assert ei.value.key == "to"
    assert ei.value.line == line_of(bad, "to = 7")


def test_missing_key():
    bad = MINIMAL.replace("value = 0.01\n", "")
    with pytest.raises(MissingKeyError) as ei:
        parse(bad)
    assert ei.value.key == "value"


TWO = MINIMAL + """
[subsystem B]
kind = sfemt
dt = DTB
nodes = 2

[branch B R]
kind = R
from = 1
to = 0
value = 5.0

[link X]
z_c = 100.0
tau = TAU
a = A 2
b = B 1
"""


def test_step_ratio_error():
    bad = TWO.replace("DTB", "3.5e-05").replace("TAU", "1e-3")
    with pytest.raises(StepRatioError) as ei:
        parse(bad)
    assert ei.value.key == "dt"
    assert ei.value.line is not None


def test_link_timing_error():
    bad = TWO.replace("DTB", "0.0005").replace("TAU", "0.0002")
    with pytest.raises(LinkTimingError) as ei:
        parse(bad)
    assert ei.value.key == "tau"
    assert ei.value.line == line_of(bad, "tau = 0.0002")
    good = parse(TWO.replace("DTB", "0.0005").replace("TAU", "0.001"))
    assert good.schedule().ratio == 50


@pytest.mark.parametrize("text, exc", [
    ("", ScenarioSyntaxError),
    ("sfcosim-scenario 2\n", ScenarioSyntaxError),
    ("sfcosim-scenario 1\n[run\n", ScenarioSyntaxError),
    ("sfcosim-scenario 1\nx = 1\n", ScenarioSyntaxError),
    ("sfcosim-scenario 1\n[weird]\n", UnknownKeyError),
    ("sfcosim-scenario 1\n[run]\nt_end = 1\n", MissingKeyError),
    ("sfcosim-scenario 1\n[run]\nt_end = abc\n", InvalidValueError),
    ("sfcosim-scenario 1\n[run]\nt_end = nan\n", InvalidValueError),
])
def test_malformed(text, exc):
    with pytest.raises(exc):
        parse(text)
    assert issubclass(exc, ScenarioError) and issubclass(exc, ValueError)


def test_bundled_surrogate():
    text = resources.files("sfcosim").joinpath("data", "two_area.scn").read_text("utf-8")
    sc = parse(text)
    assert len(sc.links) == 1
    assert sc.links[0].tau == TAU_26_28
    assert sc.schedule().ratio == 25
    assert serialize(sc) == serialize(two_area_scenario())


def test_save_load(tmp_path):
    sc = two_area_scenario(t_end=0.2)
    path = tmp_path / "s.scn"
    save(sc, path)
    assert serialize(load(path)) == serialize(sc)


positive = st.floats(1e-3, 1e4, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(r=positive, l=positive, c=positive, amp=positive, phase=st.floats(-3.0, 3.0),
       k=st.integers(1, 50), dc=st.floats(-10, 10), t_on=st.one_of(st.just(-math.inf),
                                                                 st.floats(0, 1)))
def test_round_trip_property(r, l, c, amp, phase, k, dc, t_on):
    net_a = Network(3)
    net_a.add("V", "V", 1, 0, source=Source((Tone(50.0, amp, phase),), dc=dc, t_on=t_on))
    net_a.add("R", "R", 1, 2, r)
    net_a.add("C", "C", 2, 0, c * 1e-6)
    net_b = Network(2)
    net_b.add("L", "L", 1, 0, l * 1e-3)
    dt = 1e-5
    subs = [Subsystem("A", net_a, "emt", dt),
            Subsystem("B", net_b, "sfemt", k * dt, 2 * math.pi * 50)]
    links = [LinkSpec("X", 100.0, 2 * k * dt, ("A", 2), ("B", 1))]
    recs = [Recorder("v", "node", 2, "A"), Recorder("i", "link", "X", end="b")]
    sc = Scenario(subs, links, recs, 0.1)
    text = serialize(sc)
    again = parse(text)
    assert serialize(again) == text
    assert again.subsystems[0].network.branches[1].value == r
    assert again.subsystems[1].dt == k * dt
