"""Two-area test system used by the examples, CLI defaults and acceptance runs.

Area ``S1`` (EMT) holds a 50 Hz source behind an RL impedance, a resistive
load and a 13 Hz current injection that stands in for a subsynchronous
oscillation. Area ``S2`` (shifted frequency) holds a second 50 Hz source
and load. A single-phase lossless line with a 612.13 us travel time joins
the two buses.
"""
from __future__ import annotations

import math

from .network import Network, Source, Tone
from .orchestrator import ConverterConfig, LinkSpec, Recorder, Scenario, Subsystem

TAU_26_28 = 612.13e-6
F0 = 50.0


def area(name: str, v_peak: float, angle: float, r_src: float, l_src: float,
         r_load: float, interharmonic: float = 0.0, f_ih: float = 13.0,
         ih_on: float = -math.inf) -> Network:
    """Source - R - L - bus(3), with a shunt load and optional injection at the bus.

    The injection is already running at ``t = 0`` unless ``ih_on >= 0``.
    """
    net = Network(4)
    net.add("V", "V", 1, 0, source=Source((Tone(F0, v_peak, angle),), t_on=-math.inf))
    net.add("Rs", "R", 1, 2, r_src)
    net.add("Ls", "L", 2, 3, l_src)
    net.add("Rload", "R", 3, 0, r_load)
    if interharmonic:
        # sine phase: a switched start has no current step
        net.add("Iih", "I", 0, 3,
                source=Source((Tone(f_ih, interharmonic, -math.pi / 2),), t_on=ih_on))
    return net


def two_area_scenario(interharmonic: float = 200.0, t_end: float = 0.5,
                      dt_micro: float = 20e-6, dt_macro: float = 500e-6,
                      tau: float = TAU_26_28, z_c: float = 300.0,
                      interface: str = "esprit", ih_on: float = -math.inf,
                      reconstruction: str = "cubic") -> Scenario:
    s1 = Subsystem("S1", area("S1", 100e3, 0.1, 1.0, 0.05, 300.0, interharmonic,
                              ih_on=ih_on),
                   "emt", dt_micro)
    s2 = Subsystem("S2", area("S2", 100e3, 0.0, 1.0, 0.05, 500.0),
                   "sfemt", dt_macro, 2 * math.pi * F0)
    link = LinkSpec("L1", z_c, tau, ("S1", 3), ("S2", 3))
    recorders = [
        Recorder("i_line_S1", "link", "L1", end="a", quantity="current"),
        Recorder("i_line_S2", "link", "L1", end="b", quantity="current"),
        Recorder("v_bus_S1", "node", 3, subsystem="S1"),
        Recorder("v_bus_S2", "node", 3, subsystem="S2"),
    ]
    return Scenario([s1, s2], [link], recorders, t_end, interface, ConverterConfig(),
                    reconstruction=reconstruction, init="steady")
