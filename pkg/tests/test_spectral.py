import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import fft_quadrature, tones
from sfcosim.spectral import (AnalyticSample, EspritConfig, SampleWindow, SpectralComponent,
                              SpectralError, analyze, build_hankel, construct_analytic,
                              estimate_order, estimate_phasors, estimate_poles, has_dc,
                              phasor_to_component, poles_to_frequencies, shift_frequency,
                              singular_values, synthesize_imaginary, synthesize_real)

DT = 500e-6


def window_of(comps, n_samples=101, dt=DT, t_ref=0.0, dc=0.0):
    t = t_ref - dt * np.arange(n_samples - 1, -1, -1)
    return SampleWindow(tones(t, comps) + dc, dt, t_ref)


class TestWindow:
    @pytest.mark.parametrize("samples", [[1.0, 2.0], [1.0], [1, 2, 3, 4]])
    def test_rejects_even_or_short(self, samples):
        with pytest.raises(SpectralError):
            SampleWindow(np.array(samples, dtype=float), 1.0)

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(SpectralError):
            SampleWindow(np.zeros(5), 0.0)

    def test_times_end_at_reference(self):
        w = SampleWindow(np.zeros(5), 0.1, t_ref=2.0)
        assert w.times() == pytest.approx([1.6, 1.7, 1.8, 1.9, 2.0])
        assert w.n == 2
        assert w.span == pytest.approx(0.4)


class TestHankel:
    def test_three_samples(self):
        h = build_hankel(SampleWindow(np.array([1.0, 2.0, 3.0]), 1.0))
        np.testing.assert_array_equal(h, [[1, 2], [2, 3]])

    def test_constant_window_is_rank_one(self):
        h = build_hankel(SampleWindow(np.full(5, 3.5), 1.0))
        assert np.linalg.matrix_rank(h) == 1

    def test_single_tone_has_rank_two(self):
        dt = 20e-6
        x = np.cos(2 * np.pi * 50 * np.arange(41) * dt)
        sv = np.linalg.svd(build_hankel(SampleWindow(x, dt)), compute_uv=False)
        assert np.sum(sv > 1e-10 * sv[0]) == 2

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20))
    def test_constant_antidiagonals(self, half):
        x = np.array(half + [0.5] + half[::-1])
        h = build_hankel(SampleWindow(x, 1.0))
        n = len(half)
        for r in range(n + 1):
            for c in range(n + 1):
                assert h[r, c] == x[r + c]


class TestOrder:
    def test_threshold_counts_pairs(self):
        assert estimate_order([10, 9, 1e-12, 1e-13], 1e-8) == 1

    def test_zero_spectrum(self):
        assert estimate_order([0.0, 0.0, 0.0], 1e-8) == 0

    def test_empty_list_rejected(self):
        with pytest.raises(SpectralError):
            estimate_order([], 1e-8)

    @pytest.mark.parametrize("thr", [0.0, 1.0, -0.1])
    def test_threshold_range(self, thr):
        with pytest.raises(SpectralError):
            estimate_order([1.0, 0.5], thr)

    def test_two_tone_window(self, two_tone):
        sv = singular_values(window_of(two_tone))
        assert estimate_order(sv, 1e-8) == 2
        assert not has_dc(sv, 1e-8)

    def test_dc_gives_odd_count(self):
        sv = singular_values(window_of([(50.0, 1.0, 0.0)], dc=0.4))
        assert estimate_order(sv, 1e-8) == 1
        assert has_dc(sv, 1e-8)


class TestPoles:
    def test_dc_window(self):
        poles = estimate_poles(SampleWindow(np.full(11, 2.0), DT), 0, dc=True)
        assert poles == pytest.approx([1.0])

    def test_single_tone_closed_form(self):
        dt = 20e-6
        x = np.cos(2 * np.pi * 50 * np.arange(101) * dt)
        poles = estimate_poles(SampleWindow(x, dt), 1)
        expected = np.exp(np.array([-1j, 1j]) * 2 * np.pi * 50 * dt)
        np.testing.assert_allclose(np.sort_complex(poles), np.sort_complex(expected), atol=1e-9)
        assert np.all(np.abs(np.abs(poles) - 1) < 1e-9)

    def test_two_tone_frequencies(self, two_tone):
        poles = estimate_poles(window_of(two_tone), 2)
        f = np.sort(poles_to_frequencies(poles, DT))
        np.testing.assert_allclose(f, [13.0, 50.0], rtol=1e-6)

    def test_order_too_high(self):
        with pytest.raises(SpectralError):
            estimate_poles(SampleWindow(np.ones(5), DT), 2)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(5.0, 400.0), st.floats(0.1, 10.0), st.floats(-3.0, 3.0))
    def test_real_signal_gives_conjugate_unit_poles(self, f, a, phi):
        poles = estimate_poles(window_of([(f, a, phi)], dt=100e-6), 1)
        np.testing.assert_allclose(np.sort_complex(poles), np.sort_complex(poles.conj()),
                                   atol=1e-9)
        assert np.all(np.abs(np.abs(poles) - 1) < 1e-9)


class TestFrequencies:
    def test_unit_pole_is_dc(self):
        assert poles_to_frequencies([1.0], 1.0) == pytest.approx([0.0])

    def test_quarter_turn(self):
        assert poles_to_frequencies([1j], 1.0) == pytest.approx([0.25])

    def test_round_trip(self):
        dt = 20e-6
        z = np.exp(1j * 2 * np.pi * 50 * dt)
        f = poles_to_frequencies([z, z.conjugate()], dt)
        assert f == pytest.approx([50.0])

    def test_zero_pole(self):
        with pytest.raises(SpectralError):
            poles_to_frequencies([0.0], 1.0)


class TestPhasors:
    def _poles(self, f, dt=DT):
        z = np.exp(2j * np.pi * f * dt)
        return np.array([z, z.conjugate()])

    def test_zero_window(self):
        p = estimate_phasors(SampleWindow(np.zeros(21), DT), self._poles(50))
        assert np.all(p == 0)

    def test_unit_cosine_centre_reference(self):
        # phases are referenced to the centre sample, which sits at t = 0 here
        t = (np.arange(101) - 50) * DT
        p = estimate_phasors(SampleWindow(np.cos(2 * np.pi * 50 * t), DT), self._poles(50))
        assert p[0] == pytest.approx(0.5, abs=1e-9)
        assert p[1] == pytest.approx(0.5, abs=1e-9)

    def test_amplitude_and_phase(self):
        t = (np.arange(101) - 50) * DT
        x = 2 * np.cos(2 * np.pi * 50 * t + 0.3)
        p = estimate_phasors(SampleWindow(x, DT), self._poles(50))
        pos = p[np.argmax(np.angle(self._poles(50)))]
        assert 2 * abs(pos) == pytest.approx(2.0, abs=1e-9)
        assert np.angle(pos) == pytest.approx(0.3, abs=1e-9)

    def test_repeated_poles_rejected(self):
        z = np.exp(2j * np.pi * 50 * DT)
        with pytest.raises(SpectralError):
            estimate_phasors(SampleWindow(np.ones(21), DT), [z, z])


class TestComponent:
    def test_half_amplitude_phasor(self):
        assert phasor_to_component(0.5 + 0j, 50) == SpectralComponent(50, 1.0, 0.0)

    def test_zero_phasor(self):
        assert phasor_to_component(0j, 13).a == 0

    def test_negative_phase(self):
        c = phasor_to_component(0.25 * np.exp(-1j), 13)
        assert (c.a, c.phi) == pytest.approx((0.5, -1.0))

    def test_dc_sign(self):
        assert phasor_to_component(-0.7 + 0j, 0).phi == pytest.approx(math.pi)
        assert phasor_to_component(0.7 + 0j, 0).a == pytest.approx(0.7)

    def test_negative_frequency_rejected(self):
        with pytest.raises(SpectralError):
            phasor_to_component(1 + 0j, -1.0)


class TestAnalyze:
    def test_zero_window(self):
        assert analyze(SampleWindow(np.zeros(101), DT)).components == []

    def test_two_tone_recovery(self, two_tone):
        est = analyze(window_of(two_tone))
        assert len(est.components) == 2
        for c, (f, a, phi) in zip(est.components, sorted(two_tone)):
            assert c.f == pytest.approx(f, rel=1e-6)
            assert c.a == pytest.approx(a, rel=1e-6)
            assert c.phi == pytest.approx(phi, abs=1e-6)

    def test_phases_follow_reference_time(self, two_tone):
        # same signal observed up to t = 0.0123 s: phases advance accordingly
        t_ref = 0.0123
        est = analyze(window_of(two_tone, t_ref=t_ref))
        for c, (f, a, phi) in zip(est.components, sorted(two_tone)):
            expected = math.remainder(phi + 2 * math.pi * f * t_ref, 2 * math.pi)
            assert c.phi == pytest.approx(expected, abs=1e-6)

    def test_dc_component(self):
        est = analyze(window_of([(50.0, 1.0, 0.2)], dc=-0.3))
        dc = [c for c in est.components if c.f == 0]
        assert len(dc) == 1
        assert dc[0].a == pytest.approx(0.3, rel=1e-6)
        assert dc[0].phi == pytest.approx(math.pi)

    def test_forced_order(self, two_tone):
        est = analyze(window_of(two_tone), EspritConfig(order=1))
        assert len(est.components) == 1

    def test_max_order_cap(self, two_tone):
        assert analyze(window_of(two_tone), EspritConfig(max_order=1)).order_m == 1

    def test_noise_median(self, two_tone):
        clean = window_of(two_tone)
        sigma = np.sqrt(np.mean(clean.samples ** 2)) * 10 ** (-60 / 20)
        errs_f, errs_a = [], []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            w = SampleWindow(clean.samples + rng.normal(0, sigma, clean.samples.size), DT)
            est = analyze(w, EspritConfig(1e-3))
            f = est.frequencies()
            a = est.amplitudes()
            i13 = np.argmin(np.abs(f - 13))
            errs_f.append(abs(f[i13] - 13) / 13)
            errs_a.append(abs(a[i13] - 0.2) / 0.2)
        assert np.median(errs_f) < 1e-3
        assert np.median(errs_a) < 1e-2

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.tuples(st.floats(2.0, 900.0), st.floats(0.05, 5.0),
                              st.floats(-3.0, 3.0)), min_size=1, max_size=3))
    def test_round_trip(self, comps):
        freqs = sorted(f for f, _, _ in comps)
        assume(all(b - a > 20.0 for a, b in zip(freqs, freqs[1:])))
        amps = [a for _, a, _ in comps]
        assume(max(amps) / min(amps) < 20)
        est = analyze(window_of(comps, 101))
        got = sorted((c.f, c.a, c.phi) for c in est.components)
        want = sorted(comps)
        assert len(got) == len(want)
        for (f1, a1, p1), (f2, a2, p2) in zip(got, want):
            assert f1 == pytest.approx(f2, rel=1e-6)
            assert a1 == pytest.approx(a2, rel=1e-6)
            assert math.remainder(p1 - p2, 2 * math.pi) == pytest.approx(0, abs=1e-6)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(1e-3, 1e3))
    def test_scale_equivariance(self, k):
        comps = [(50.0, 1.0, 0.3), (13.0, 0.2, -1.0)]
        base = analyze(window_of(comps))
        scaled = analyze(SampleWindow(k * window_of(comps).samples, DT))
        np.testing.assert_allclose(scaled.frequencies(), base.frequencies(), rtol=1e-9)
        np.testing.assert_allclose(scaled.phases(), base.phases(), atol=1e-8)
        np.testing.assert_allclose(scaled.amplitudes(), k * base.amplitudes(), rtol=1e-8)


class TestSynthesis:
    def test_sine_at_reference(self):
        est = analyze(window_of([(50.0, 1.0, 0.0)]))
        assert synthesize_imaginary(est, 0.0) == pytest.approx(0.0, abs=1e-9)

    def test_quarter_period(self):
        est = analyze(window_of([(50.0, 1.0, 0.0)], t_ref=0.0))
        assert synthesize_imaginary(est, 0.005) == pytest.approx(1.0, abs=1e-9)

    def test_matches_fft_quadrature(self, two_tone):
        # a 1 s record holds whole periods of both tones, so the FFT
        # quadrature is exact there
        t = np.arange(2000) * DT
        x = tones(t, two_tone)
        oracle = fft_quadrature(x)
        t_ref = t[1100]
        est = analyze(SampleWindow(x[1000:1101], DT, t_ref))
        got = synthesize_imaginary(est, t[1000:1101])
        np.testing.assert_allclose(got, oracle[1000:1101], atol=1e-6)

    def test_real_reconstruction(self, two_tone):
        w = window_of(two_tone)
        est = analyze(w)
        np.testing.assert_allclose(synthesize_real(est, w.times()), w.samples, atol=1e-9)

    def test_dc_has_no_quadrature(self):
        est = analyze(SampleWindow(np.full(21, 4.0), DT))
        assert synthesize_imaginary(est, -0.001) == 0.0
        assert synthesize_real(est, -0.001) == pytest.approx(4.0)

    def test_orthogonality_over_whole_periods(self, two_tone):
        # 1 s holds 50 and 13 whole periods; the window spans it exactly
        dt = 1.0 / 400
        n = 401
        t = dt * np.arange(n)
        x = tones(t, two_tone)
        est = analyze(SampleWindow(x, dt, t[-1]))
        x_hat = synthesize_imaginary(est, t[:-1])
        assert abs(np.sum(x[:-1] * x_hat)) / np.sum(x[:-1] ** 2) < 1e-6


class TestAnalytic:
    def test_parts(self):
        assert construct_analytic(1, 0, 0).value == 1
        assert construct_analytic(0, 1, 0).value == 1j

    @given(st.floats(-10, 10))
    def test_euler(self, theta):
        s = construct_analytic(math.cos(theta), math.sin(theta), 0.0)
        assert s.value == pytest.approx(np.exp(1j * theta))

    @given(st.floats(0, 1.0), st.floats(0, 1000.0))
    def test_carrier_cancels(self, t, w):
        assert shift_frequency(AnalyticSample(np.exp(1j * w * t), t), w) == pytest.approx(1)

    def test_zero(self):
        assert shift_frequency(AnalyticSample(0j, 0.3), 314.0) == 0

    @given(st.floats(0, 0.5), st.floats(-50.0, 50.0))
    def test_offset_remains(self, t, dw):
        w = 2 * math.pi * 50
        got = shift_frequency(AnalyticSample(np.exp(1j * (w + dw) * t), t), w)
        assert got == pytest.approx(np.exp(1j * dw * t))
