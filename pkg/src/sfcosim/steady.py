"""Periodic steady-state (phasor) initialization.

Sources flagged as pre-existing (``t_on < 0``) are assumed to have driven
the network long enough for it to sit in sinusoidal steady state at
``t = 0``. One phasor solve per source frequency gives every node voltage,
branch current and line-end wave, which then seed the solver histories and
the line buffers (including the ``tau`` seconds before ``t = 0``).
"""
from __future__ import annotations

import math

import numpy as np

from .network import Network, NetworkError

#: Admittance standing in for a short circuit in the DC solve.
_SHORT = 1e9


def line_admittance(z_c: float, tau: float, omega: float) -> tuple:
    """``(y_self, y_mutual)`` of a lossless line as a two-port at ``omega``."""
    if omega == 0:
        return _SHORT, -_SHORT
    theta = omega * tau
    return -1j / (z_c * math.tan(theta)), 1j / (z_c * math.sin(theta))


class SteadyState:
    """Phasor solution of a network with internal lossless lines.

    ``lines`` holds ``(node_a, node_b, z_c, tau)`` tuples.
    """

    def __init__(self, network: Network, lines=()):
        self.network = network
        self.lines = [(int(a), int(b), float(z), float(t)) for a, b, z, t in lines]
        freqs = set()
        for b in network.branches:
            if b.kind in "VI" and b.source.preexisting:
                freqs.update(t.f for t in b.source.tones)
                if b.source.dc:
                    freqs.add(0.0)
        self.freqs = sorted(freqs)
        self.node_phasors = {}
        self.branch_phasors = {}
        self.line_phasors = {}
        for f in self.freqs:
            self._solve(f)

    def _solve(self, f: float):
        net = self.network
        n = net.node_count
        w = 2 * math.pi * f
        y = np.zeros((n, n), dtype=complex)
        inj = np.zeros(n, dtype=complex)
        yb = np.zeros(len(net.branches), dtype=complex)
        src = np.zeros(len(net.branches), dtype=complex)
        for k, b in enumerate(net.branches):
            if b.kind == "R":
                yb[k] = 1 / b.value
            elif b.kind == "L":
                yb[k] = _SHORT if w == 0 else 1 / (1j * w * b.value)
            elif b.kind == "C":
                yb[k] = 1j * w * b.value
            elif b.source.preexisting:
                ph = sum(t.amplitude * np.exp(1j * t.phase)
                         for t in b.source.tones if t.f == f)
                if f == 0:
                    ph += b.source.dc
                if b.kind == "V":
                    yb[k] = 1 / b.r_internal
                    src[k] = -ph / b.r_internal
                else:
                    src[k] = ph
            elif b.kind == "V":
                yb[k] = 1 / b.r_internal
            i, j = b.n_from, b.n_to
            y[i, i] += yb[k]
            y[j, j] += yb[k]
            y[i, j] -= yb[k]
            y[j, i] -= yb[k]
            inj[i] -= src[k]
            inj[j] += src[k]
        for a, bb, z_c, tau in self.lines:
            ys, ym = line_admittance(z_c, tau, w)
            y[a, a] += ys
            y[bb, bb] += ys
            y[a, bb] += ym
            y[bb, a] += ym
        try:
            v = np.linalg.solve(y[1:, 1:], inj[1:])
        except np.linalg.LinAlgError:
            raise NetworkError(f"no steady state at {f} Hz (resonant or floating)") from None
        v = np.concatenate([[0j], v])
        vb = np.array([v[b.n_from] - v[b.n_to] for b in net.branches])
        self.node_phasors[f] = v
        self.branch_phasors[f] = yb * vb + src
        self.line_phasors[f] = []
        for a, bb, z_c, tau in self.lines:
            ys, ym = line_admittance(z_c, tau, w)
            self.line_phasors[f].append((ys * v[a] + ym * v[bb], ys * v[bb] + ym * v[a]))

    @staticmethod
    def _evaluate(phasors: dict, t, omega_s=None):
        """Sum of phasor contributions at time(s) ``t``; envelope if ``omega_s`` given."""
        t = np.asarray(t, dtype=float)
        out = 0j
        for f, p in phasors.items():
            rate = 2 * math.pi * f if omega_s is None else 2 * math.pi * f - omega_s
            out = out + np.multiply.outer(np.exp(1j * rate * t), p)
        return np.real(out) if omega_s is None else out

    def node_voltages(self, t, omega_s=None):
        return self._evaluate(self.node_phasors, t, omega_s)

    def branch_currents(self, t, omega_s=None):
        return self._evaluate(self.branch_phasors, t, omega_s)

    def wave(self, line: int, end: str, t, omega_s=None):
        """Outgoing wave ``v/z_c + i`` at one line end."""
        a, b, z_c, _ = self.lines[line]
        node = a if end == "a" else b
        k = 0 if end == "a" else 1
        ph = {f: self.node_phasors[f][node] / z_c + self.line_phasors[f][line][k]
              for f in self.freqs}
        return self._evaluate(ph, t, omega_s)

    def line_current(self, line: int, end: str, t, omega_s=None):
        k = 0 if end == "a" else 1
        ph = {f: self.line_phasors[f][line][k] for f in self.freqs}
        return self._evaluate(ph, t, omega_s)
