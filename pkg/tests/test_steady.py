import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sfcosim.network import Network, NetworkError, Source, Tone
from sfcosim.steady import SteadyState, line_admittance


@given(st.floats(10, 1000), st.floats(1e-5, 1e-3), st.floats(1.0, 2000.0))
def test_line_two_port_matches_transfer_relations(z_c, tau, w):
    theta = w * tau
    if abs(math.sin(theta)) < 1e-3:
        return
    ys, ym = line_admittance(z_c, tau, w)
    # receiving-end short: input admittance of a shorted lossless line
    assert ys == pytest.approx(1 / (1j * z_c * math.tan(theta)), rel=1e-9)
    # V_a = cos(theta) V_b + j z_c sin(theta) I_b with I_b drawn out of end b
    v_b, i_out = 1.0 + 0.5j, 0.3 - 0.2j
    v_a = math.cos(theta) * v_b + 1j * z_c * math.sin(theta) * i_out
    i_into_b = ys * v_b + ym * v_a
    assert i_into_b == pytest.approx(-i_out, rel=1e-6, abs=1e-9)


def rl_network(t_on=-math.inf):
    net = Network(3)
    net.add("V", "V", 1, 0, source=Source((Tone(50.0, 10.0, 0.3),), t_on=t_on))
    net.add("R", "R", 1, 2, 2.0)
    net.add("L", "L", 2, 0, 0.01)
    return net


def test_rl_phasor():
    ss = SteadyState(rl_network())
    w = 2 * math.pi * 50
    current = 10 * np.exp(0.3j) / (2 + 1e-6 + 1j * w * 0.01)
    assert ss.branch_phasors[50.0][2] == pytest.approx(current, rel=1e-12)
    t = 0.0123
    assert ss.branch_currents(t)[2] == pytest.approx(abs(current) * math.cos(w * t + np.angle(current)))
    env = ss.branch_currents(t, omega_s=w)[2]
    assert env == pytest.approx(current)


def test_only_preexisting_sources_count():
    assert SteadyState(rl_network(t_on=0.0)).freqs == []
    assert SteadyState(rl_network()).freqs == [50.0]


def test_time_vectors():
    ss = SteadyState(rl_network())
    t = np.linspace(0, 0.02, 7)
    assert ss.node_voltages(t).shape == (7, 3)


def test_matched_line_wave():
    # source behind z_c feeding a line terminated in z_c: no reflection, so
    # the wave leaving the receiving end is zero
    z_c, tau = 300.0, 612.13e-6
    net = Network(3)
    net.add("V", "V", 1, 0, source=Source((Tone(50.0, 1.0, 0.0),), t_on=-1))
    net.add("Rs", "R", 1, 2, z_c)
    net.add("Rl", "R", 3, 0, z_c)
    net = Network(4, net.branches)
    ss = SteadyState(net, [(2, 3, z_c, tau)])
    assert abs(ss.wave(0, "b", 0.01)) < 1e-12
    # the receiving voltage lags the sending one by exactly tau
    t = 0.0037
    assert ss.node_voltages(t)[3] == pytest.approx(ss.node_voltages(t - tau)[2], abs=1e-12)


def test_resonant_network_reports():
    net = Network(2)
    net.add("V", "V", 1, 0, source=Source((Tone(50.0, 1.0),), t_on=-1), r_internal=1e-6)
    net.add("I", "I", 0, 1, source=Source(dc=1.0, t_on=-1))
    net.add("L", "L", 1, 0, 1.0)
    # DC shorts the inductor against the source; still solvable (stiff but finite)
    SteadyState(net)
    floating = Network(3)
    floating.add("V", "V", 1, 0, source=Source((Tone(50.0, 1.0),), t_on=-1))
    floating.add("I", "I", 0, 2, source=Source((Tone(50.0, 1.0),), t_on=-1))
    with pytest.raises(NetworkError):
        SteadyState(floating)
