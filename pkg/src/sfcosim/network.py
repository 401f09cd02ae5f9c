"""Circuit description shared by the EMT and shifted-frequency solvers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

BRANCH_KINDS = ("R", "L", "C", "V", "I")

#: Internal resistance of the Norton equivalent used for voltage sources.
DEFAULT_SOURCE_RESISTANCE = 1e-6


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class Tone:
    f: float
    amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class Source:
    """``dc + sum(A cos(2 pi f t + phase))`` for ``t >= t_on``, zero before.

    A negative ``t_on`` marks a source that has been on long enough for the
    network to sit in periodic steady state at ``t = 0``.
    """

    tones: tuple = ()
    dc: float = 0.0
    t_on: float = 0.0

    @property
    def preexisting(self) -> bool:
        return self.t_on < 0

    def _gate(self, t):
        return np.where(np.asarray(t) >= self.t_on, 1.0, 0.0)

    def value(self, t):
        out = np.zeros_like(np.asarray(t, dtype=float)) + self.dc
        for tone in self.tones:
            out = out + tone.amplitude * np.cos(2 * np.pi * tone.f * t + tone.phase)
        return out * self._gate(t)

    def analytic(self, t):
        """Analytic signal; a DC offset has no quadrature part."""
        out = np.zeros_like(np.asarray(t, dtype=float)) + complex(self.dc)
        for tone in self.tones:
            out = out + tone.amplitude * np.exp(1j * (2 * np.pi * tone.f * t + tone.phase))
        return out * self._gate(t)

    def envelope(self, t, omega_s: float):
        return self.analytic(t) * np.exp(-1j * omega_s * np.asarray(t))


@dataclass(frozen=True)
class Branch:
    """One two-terminal element between ``n_from`` and ``n_to``.

    Branch current is positive flowing from ``n_from`` to ``n_to`` through
    the element. For a current source this means the source drives current
    into ``n_to``. For a voltage source ``v(n_from) - v(n_to)`` equals the
    source value (behind ``r_internal``).
    """

    name: str
    kind: str
    n_from: int
    n_to: int
    value: float = 0.0
    source: Optional[Source] = None
    r_internal: float = DEFAULT_SOURCE_RESISTANCE

    def __post_init__(self):
        if self.kind not in BRANCH_KINDS:
            raise NetworkError(f"branch {self.name!r}: unknown kind {self.kind!r}")
        if self.kind in "RLC" and not self.value > 0:
            raise NetworkError(
                f"branch {self.name!r}: {self.kind} value must be positive, "
                f"got {self.value}")
        if self.kind in "VI" and self.source is None:
            raise NetworkError(f"branch {self.name!r}: source descriptor missing")
        if self.kind == "V" and not self.r_internal > 0:
            raise NetworkError(f"branch {self.name!r}: r_internal must be positive")
        if self.n_from == self.n_to:
            raise NetworkError(f"branch {self.name!r}: both terminals on node {self.n_from}")


@dataclass
class Network:
    """Nodes ``0 .. node_count - 1``; node 0 is ground."""

    node_count: int
    branches: list = field(default_factory=list)

    def add(self, name, kind, n_from, n_to, value=0.0, source=None, **kw) -> Branch:
        b = Branch(name, kind, n_from, n_to, value, source, **kw)
        self.branches.append(b)
        return b

    def branch_index(self, name: str) -> int:
        for i, b in enumerate(self.branches):
            if b.name == name:
                return i
        raise NetworkError(f"no branch named {name!r}")

    def validate(self, grounded=()) -> None:
        """Check node indices, unique names and a conductive path to ground.

        ``grounded`` lists nodes tied to ground by elements outside this
        network (line ports).
        """
        if self.node_count < 2:
            raise NetworkError("network needs at least one non-ground node")
        names = set()
        for b in self.branches:
            if b.name in names:
                raise NetworkError(f"duplicate branch name {b.name!r}")
            names.add(b.name)
            for node in (b.n_from, b.n_to):
                if not 0 <= node < self.node_count:
                    raise NetworkError(
                        f"branch {b.name!r}: node {node} outside 0..{self.node_count - 1}")
        parent = list(range(self.node_count))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for b in self.branches:
            if b.kind != "I":
                parent[find(b.n_from)] = find(b.n_to)
        for node in grounded:
            parent[find(node)] = find(0)
        floating = [i for i in range(1, self.node_count) if find(i) != find(0)]
        if floating:
            raise NetworkError(f"nodes {floating} have no conductive path to ground")


def lc_energy(network: Network, branch_voltages, branch_currents) -> float:
    """Energy stored in inductors and capacitors (real quantities)."""
    e = 0.0
    for b, v, i in zip(network.branches, branch_voltages, branch_currents):
        if b.kind == "L":
            e += 0.5 * b.value * i * i
        elif b.kind == "C":
            e += 0.5 * b.value * v * v
    return e


def phasor_impedance(kind: str, value: float, omega: float) -> complex:
    if kind == "R":
        return complex(value)
    if kind == "L":
        return 1j * omega * value
    if kind == "C":
        return 1 / (1j * omega * value) if omega else complex(math.inf)
    raise NetworkError(f"no impedance for kind {kind!r}")
