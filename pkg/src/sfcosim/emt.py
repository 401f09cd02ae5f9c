"""Fixed-step nodal EMT solver with trapezoidal companion models.

Every R/L/C branch is replaced by a conductance in parallel with a history
current source; sources become Norton injections. The same machinery runs
on complex numbers for the shifted-frequency solver (see :mod:`sfemt`),
where the companion coefficients pick up the ``-j*omega_s`` rotation.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .network import Network, NetworkError


class SingularNetworkError(NetworkError):
    pass


@dataclass
class CompanionBranch:
    """``i = conductance * v + history_current``.

    After each solve the history for the next step is
    ``alpha * i + beta * v``.
    """

    conductance: complex
    history_current: complex
    alpha: complex
    beta: complex
    n_from: int
    n_to: int


def companion_coefficients(kind: str, value: float, dt: float, omega_s: float = 0.0):
    """Trapezoidal ``(conductance, alpha, beta)`` for an R, L or C branch.

    With ``omega_s = 0`` these are the usual real EMT coefficients:
    ``L -> dt/(2L)``, ``C -> 2C/dt``.
    """
    if not dt > 0:
        raise NetworkError(f"dt must be positive, got {dt}")
    if not value > 0:
        raise NetworkError(f"{kind} value must be positive, got {value}")
    if omega_s < 0:
        raise NetworkError("omega_s must be nonnegative")
    if kind == "R":
        return 1.0 / value, 0.0, 0.0
    h = 0.5j * omega_s * dt
    if kind == "L":
        g = dt / (2 * value)
        if omega_s == 0:
            return g, 1.0, g
        y = g / (1 + h)
        return y, (1 - h) / (1 + h), y
    if kind == "C":
        g = 2 * value / dt
        if omega_s == 0:
            return g, -1.0, -g
        return g * (1 + h), -1.0, -g * (1 - h)
    raise NetworkError(f"no companion model for kind {kind!r}")


@dataclass
class NodalSystem:
    """Ground-eliminated admittance matrix with a cached LU factorization."""

    matrix: np.ndarray
    rhs: np.ndarray
    factorized: bool = False

    def factorize(self):
        with warnings.catch_warnings():
            # singularity is reported below with a clearer message
            warnings.simplefilter("ignore", LinAlgWarning)
            lu, piv = lu_factor(self.matrix, check_finite=False)
        d = np.abs(np.diag(lu))
        if d.size and d.min() <= 1e-14 * max(d.max(), 1e-300):
            raise SingularNetworkError(
                "admittance matrix is singular (floating subnetwork?)")
        self._lu = (lu, piv)
        self.factorized = True

    def solve(self, rhs=None):
        if not self.factorized:
            self.factorize()
        return lu_solve(self._lu, self.rhs if rhs is None else rhs,
                        check_finite=False)


@dataclass
class SolverState:
    t: float
    node_voltages: np.ndarray
    branch_currents: np.ndarray
    dt: float


def _incidence(network: Network) -> np.ndarray:
    nb = len(network.branches)
    a = np.zeros((network.node_count, nb))
    for k, b in enumerate(network.branches):
        a[b.n_from, k] += 1.0
        a[b.n_to, k] -= 1.0
    return a[1:]


def _assemble(network, dt, omega_s, ports, dtype):
    branches = []
    for b in network.branches:
        if b.kind in "RLC":
            g, alpha, beta = companion_coefficients(b.kind, b.value, dt, omega_s)
        elif b.kind == "V":
            g, alpha, beta = 1.0 / b.r_internal, 0.0, 0.0
        else:
            g, alpha, beta = 0.0, 0.0, 0.0
        branches.append(CompanionBranch(g, 0.0, alpha, beta, b.n_from, b.n_to))
    a = _incidence(network)
    yb = np.array([c.conductance for c in branches], dtype=dtype)
    y = (a * yb) @ a.T
    for node, g in ports:
        if node > 0:
            y[node - 1, node - 1] += g
    system = NodalSystem(y.astype(dtype), np.zeros(network.node_count - 1, dtype=dtype))
    return branches, system


def discretize(network: Network, dt: float, ports=()):
    """Companion branches and the real nodal system for step ``dt``.

    ``ports`` is a sequence of ``(node, shunt_conductance)`` pairs added to
    the diagonal (transmission-line ends).
    """
    network.validate(grounded=[n for n, _ in ports])
    return _assemble(network, dt, 0.0, ports, float)


class _CompanionSolver:
    """Shared stepping logic; subclasses choose the number field."""

    dtype = float
    omega_s = 0.0

    def __init__(self, network: Network, dt: float, ports: Sequence = (),
                 energize: bool = True):
        if not dt > 0:
            raise NetworkError(f"dt must be positive, got {dt}")
        network.validate(grounded=[n for n, _ in ports])
        self.network = network
        self.dt = dt
        self.ports = [(int(n), float(g)) for n, g in ports]
        self.branches, self.system = _assemble(
            network, dt, self.omega_s, self.ports, self.dtype)
        self.system.factorize()

        self._a = _incidence(network)
        self._yb = np.array([c.conductance for c in self.branches], dtype=self.dtype)
        self._alpha = np.array([c.alpha for c in self.branches], dtype=self.dtype)
        self._beta = np.array([c.beta for c in self.branches], dtype=self.dtype)
        self._setup_sources()

        nb = len(network.branches)
        self.k = 0
        self.v = np.zeros(network.node_count, dtype=self.dtype)
        self.i = np.zeros(nb, dtype=self.dtype)
        self._hist = np.zeros(nb, dtype=self.dtype)
        self._pending = np.zeros(network.node_count, dtype=self.dtype)
        if energize:
            self.energize()

    def energize(self, port_injections=None) -> SolverState:
        """Consistent state at ``t = 0+`` for sources switched on at ``t = 0``.

        Inductors carry their (zero) initial current, capacitors hold their
        (zero) initial voltage. Starting the trapezoidal rule from this state
        avoids the spurious flux of ``v(0+) * dt / 2`` that a cold start
        leaves in every inductor.
        """
        kinds = [b.kind for b in self.network.branches]
        y0 = np.array([0.0 if k == "L" else c.conductance
                       for k, c in zip(kinds, self.branches)], dtype=self.dtype)
        big = 1e6 * max(np.abs(self._yb).max(initial=0.0), 1.0)
        is_c = np.array([k == "C" for k in kinds], dtype=bool)
        y0[is_c] = big
        y = (self._a * y0) @ self._a.T
        for node, g in self.ports:
            if node > 0:
                y[node - 1, node - 1] += g
        y[np.diag_indices_from(y)] += 1e-12 * np.abs(np.diag(y)).max(initial=1.0)
        c = np.zeros(len(kinds), dtype=self.dtype)
        c[self._src_idx] = self._src_gain * self._sources(0.0)
        inj = np.zeros(self.network.node_count, dtype=self.dtype)
        if port_injections is not None:
            for (node, _), cur in zip(self.ports, port_injections):
                inj[node] += cur
        vn = np.linalg.solve(y, inj[1:] - self._a @ c)
        self.v = np.concatenate([[0.0], vn]).astype(self.dtype)
        vb = self._a.T @ vn
        self.i = y0 * vb + c
        self.k = 0
        self._update_history(vb)
        return self.state

    def _setup_sources(self):
        src = [(k, b) for k, b in enumerate(self.network.branches) if b.kind in "VI"]
        self._src_idx = np.array([k for k, _ in src], dtype=int)
        self._src_dc = np.array([b.source.dc for _, b in src], dtype=float)
        self._src_on = np.array([b.source.t_on for _, b in src], dtype=float)
        # voltage sources enter as -G*Vs, current sources as +Is
        self._src_gain = np.array(
            [-1.0 / b.r_internal if b.kind == "V" else 1.0 for _, b in src])
        owner, f, amp, ph = [], [], [], []
        for j, (_, b) in enumerate(src):
            for tone in b.source.tones:
                owner.append(j)
                f.append(tone.f)
                amp.append(tone.amplitude)
                ph.append(tone.phase)
        self._tone_map = np.zeros((len(src), len(owner)))
        self._tone_map[owner, np.arange(len(owner))] = 1.0
        self._tone_w = 2 * np.pi * np.array(f, dtype=float)
        self._tone_amp = np.array(amp, dtype=float)
        self._tone_ph = np.array(ph, dtype=float)

    def source_values(self, t: float) -> np.ndarray:
        arg = self._tone_w * t + self._tone_ph
        out = self._src_dc + self._tone_map @ (self._tone_amp * np.cos(arg))
        return out * (t >= self._src_on)

    @property
    def t(self) -> float:
        return self.k * self.dt

    @property
    def state(self) -> SolverState:
        return SolverState(self.t, self.v.copy(), self.i.copy(), self.dt)

    def branch_voltages(self) -> np.ndarray:
        return self._a.T @ self.v[1:]

    def initialize(self, node_voltages=None, branch_currents=None, t: float = 0.0):
        """Set a (consistent) initial state and rebuild the branch histories."""
        if node_voltages is not None:
            self.v = np.asarray(node_voltages, dtype=self.dtype).copy()
            self.v[0] = 0
        if branch_currents is not None:
            self.i = np.asarray(branch_currents, dtype=self.dtype).copy()
        self.k = int(round(t / self.dt))
        self._update_history(self.branch_voltages())

    def _update_history(self, vb):
        self._hist = self._alpha * self.i + self._beta * vb

    def companion_branches(self):
        """Companion records carrying the current history values."""
        for c, h in zip(self.branches, self._hist):
            c.history_current = h
        return self.branches

    def inject_boundary(self, node: int, current) -> None:
        """Add ``current`` into ``node`` for the next solve only."""
        if not 0 <= node < self.network.node_count:
            raise NetworkError(f"node {node} out of range")
        self._pending[node] += current

    def step(self, port_injections=None) -> SolverState:
        """Advance one step. ``port_injections[p]`` flows into port ``p``'s node."""
        t_next = (self.k + 1) * self.dt
        c = self._hist.copy()
        c[self._src_idx] = self._src_gain * self._sources(t_next)
        inj = self._pending
        if port_injections is not None:
            for (node, _), cur in zip(self.ports, port_injections):
                inj[node] += cur
        rhs = inj[1:] - self._a @ c
        vn = self.system.solve(rhs)
        self.v[1:] = vn
        vb = self._a.T @ vn
        self.i = self._yb * vb + c
        self._update_history(vb)
        self._pending = np.zeros_like(self._pending)
        self.k += 1
        return self.state

    def _sources(self, t):
        return self.source_values(t)


class EMTSolver(_CompanionSolver):
    """Real-valued trapezoidal EMT solver."""

    def run(self, t_end: float):
        """Step to ``t_end``; returns times and node-voltage history."""
        steps = int(round(t_end / self.dt)) - self.k
        ts = np.empty(steps + 1)
        vs = np.empty((steps + 1, self.network.node_count), dtype=self.dtype)
        ts[0], vs[0] = self.t, self.v
        for s in range(1, steps + 1):
            self.step()
            ts[s], vs[s] = self.t, self.v
        return ts, vs


def step(solver: _CompanionSolver, port_injections=None) -> SolverState:
    return solver.step(port_injections)
