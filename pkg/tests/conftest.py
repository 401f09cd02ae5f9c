import numpy as np
import pytest


def tones(t, comps):
    """Sum of ``a*cos(2*pi*f*t + phi)`` over ``(f, a, phi)`` triples."""
    t = np.asarray(t, dtype=float)
    return sum(a * np.cos(2 * np.pi * f * t + phi) for f, a, phi in comps)


def fft_quadrature(x):
    """Quadrature signal by applying ``-j*sgn(f)`` in the frequency domain.

    Exact for records that hold an integer number of periods of every tone.
    """
    spec = np.fft.fft(np.asarray(x, dtype=float))
    freqs = np.fft.fftfreq(spec.size)
    return np.real(np.fft.ifft(-1j * np.sign(freqs) * spec))


@pytest.fixture
def two_tone():
    """The reference two-tone record: 50 Hz plus a 13 Hz interharmonic."""
    return [(50.0, 1.0, 0.3), (13.0, 0.2, -1.0)]
