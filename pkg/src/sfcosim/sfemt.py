"""Shifted-frequency (complex envelope) solver.

Node voltages and branch currents are complex envelopes ``X(t)`` of the
analytic signals, so a steady tone at the carrier ``omega_s`` is a constant
and large steps stay accurate. Instantaneous values are recovered with
``Re(X(t) * exp(j*omega_s*t))``.
"""
from __future__ import annotations

import math

import numpy as np

from .emt import _assemble, _CompanionSolver
from .network import Network, NetworkError
from .spectral import EnvelopeSeries

OMEGA_50HZ = 2 * math.pi * 50.0


def discretize_sf(network: Network, dt: float, omega_s: float, ports=()):
    """Complex companion branches and nodal system for step ``dt``.

    Inductor (trapezoidal rule on ``dI/dt = V/L - j*omega_s*I``)::

        Y   = (dt/2L) / (1 + j*omega_s*dt/2)
        i_h = rho * I(t-dt) + Y * V(t-dt),  rho = (1 - j*w*dt/2) / (1 + j*w*dt/2)

    Capacitor: ``Y = (2C/dt)(1 + j*w*dt/2)``,
    ``i_h = -I(t-dt) - (2C/dt)(1 - j*w*dt/2) V(t-dt)``.
    """
    if omega_s < 0:
        raise NetworkError("omega_s must be nonnegative")
    network.validate(grounded=[n for n, _ in ports])
    return _assemble(network, dt, omega_s, ports, complex)


def history_rotator(omega_s: float, dt: float) -> complex:
    h = 0.5j * omega_s * dt
    return (1 - h) / (1 + h)


class SFEMTSolver(_CompanionSolver):
    """Complex-envelope solver at carrier ``omega_s`` (rad/s).

    Sources are fed their exact envelopes; a DC offset has no quadrature
    component, so its envelope is ``dc * exp(-j*omega_s*t)``.
    """

    dtype = complex

    def __init__(self, network: Network, dt: float, omega_s: float = OMEGA_50HZ,
                 ports=(), energize: bool = True):
        if omega_s < 0:
            raise NetworkError("omega_s must be nonnegative")
        self.omega_s = float(omega_s)
        super().__init__(network, dt, ports, energize)

    def _sources(self, t):
        arg = self._tone_w * t + self._tone_ph
        analytic = self._src_dc + self._tone_map @ (self._tone_amp * np.exp(1j * arg))
        return analytic * (t >= self._src_on) * np.exp(-1j * self.omega_s * t)

    def instantaneous(self, values, t):
        """Demodulate envelope ``values`` taken at time ``t``."""
        return np.real(np.asarray(values) * np.exp(1j * self.omega_s * t))

    def run(self, t_end: float):
        steps = int(round(t_end / self.dt)) - self.k
        ts = np.empty(steps + 1)
        vs = np.empty((steps + 1, self.network.node_count), dtype=complex)
        ts[0], vs[0] = self.t, self.v
        for s in range(1, steps + 1):
            self.step()
            ts[s], vs[s] = self.t, self.v
        return ts, vs


def step_sf(solver: SFEMTSolver, port_injections=None):
    return solver.step(port_injections)


def demodulate(env: EnvelopeSeries) -> np.ndarray:
    """Real samples ``Re(X(t) exp(j omega_s t))`` for every envelope sample."""
    t = env.times()
    return np.real(env.values * np.exp(1j * env.omega_s * t))
