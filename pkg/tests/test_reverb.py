import math

import numpy as np
import pytest

from roomsim.analysis import estimate_decay, schroeder_edc
from roomsim.errors import ConfigurationError, DesignError, StabilityError, ValidationError
from roomsim.reverb import (
    FdnSpec,
    couple_volumes,
    design_fdn,
    fit_band_filter,
    householder_matrix,
    resolve_coupled_mix,
    run_fdn,
)
from roomsim.scene import ReverbTarget, RoomGeometry

FS = 44100.0
LIVING = RoomGeometry(dims=(4.97, 3.78, 2.71))
UNDERGROUND = RoomGeometry(dims=(120.0, 15.7, 4.16))
TUNNELS = RoomGeometry(dims=(79.0, 8.0, 5.0))


def downmix(tail, seed=0):
    """Random-weight downmix; the all-ones sum is a Householder eigenvector."""
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(tail.shape[0])
    return (w / np.linalg.norm(w)) @ tail


class TestDesign:
    def test_gain_formula_example(self):
        # g = 10^(-3 m / (fs T30)): m=1500, fs=44100, T30=1 -> 0.7906
        g = 10.0 ** (-3.0 * 1500 / (44100 * 1.0))
        assert g == pytest.approx(0.7906, abs=5e-5)
        spec = design_fdn(LIVING, ReverbTarget.flat(1.0), fs=FS)
        m = np.asarray(spec.delays, dtype=float)
        assert np.allclose(spec.band_gains, 10.0 ** (-3.0 * m[:, None] / (FS * 1.0)))

    def test_long_t30_limit_gains_approach_one(self):
        spec = design_fdn(LIVING, ReverbTarget.flat(1e5), fs=FS)
        assert np.all(spec.band_gains > 0.999)
        assert np.all(spec.band_gains < 1.0)

    def test_delays_distinct_and_coprime(self):
        for room in (LIVING, UNDERGROUND):
            spec = design_fdn(room, ReverbTarget.flat(1.0), fs=FS)
            delays = spec.delays
            assert len(set(delays)) == len(delays)
            for i in range(len(delays)):
                for j in range(i + 1, len(delays)):
                    assert math.gcd(delays[i], delays[j]) == 1

    def test_feedback_orthonormal(self):
        spec = design_fdn(LIVING, ReverbTarget.flat(0.5), fs=FS)
        q = spec.feedback
        assert np.max(np.abs(q.T @ q - np.eye(len(q)))) < 1e-9

    def test_householder_matrix_orthonormal(self):
        for n in (4, 8, 12, 16):
            q = householder_matrix(n)
            assert np.max(np.abs(q.T @ q - np.eye(n))) < 1e-12

    def test_room_too_small(self):
        with pytest.raises(DesignError):
            design_fdn(RoomGeometry(dims=(0.05, 0.04, 0.03)), ReverbTarget.flat(0.5), fs=FS)

    def test_odd_or_tiny_n_lines(self):
        with pytest.raises(DesignError):
            design_fdn(LIVING, ReverbTarget.flat(0.5), fs=FS, n_lines=7)
        with pytest.raises(DesignError):
            design_fdn(LIVING, ReverbTarget.flat(0.5), fs=FS, n_lines=2)

    def test_spec_invariants_enforced(self):
        spec = design_fdn(LIVING, ReverbTarget.flat(0.5), fs=FS)
        with pytest.raises(ValidationError):
            FdnSpec(
                delays=(100, 200),  # not coprime
                feedback=householder_matrix(2),
                band_gains=spec.band_gains[:2],
                input_gains=np.ones(2),
                output_gains=np.ones(2),
                sample_rate=FS,
            )

    def test_band_filter_fit_under_half_db(self):
        # non-flat target: T30 rising toward low bands
        t30 = np.linspace(0.9, 0.4, 10)
        m = 800.0
        gains = 10.0 ** (-3.0 * m / (FS * t30))
        scalar, sos = fit_band_filter(gains, FS)
        from scipy.signal import sosfreqz

        from roomsim.bands import DEFAULT_BANDS

        w = 2 * np.pi * np.asarray(DEFAULT_BANDS.centers_hz) / FS
        _, h = sosfreqz(sos, worN=w)
        achieved_db = 20 * np.log10(np.abs(h) * scalar)
        target_db = 20 * np.log10(gains)
        assert np.max(np.abs(achieved_db - target_db)) < 0.5


class TestRun:
    def test_fully_absorbing_silence_after_injection(self):
        spec = design_fdn(LIVING, ReverbTarget.flat(0.5), fs=FS)
        tiny = FdnSpec(
            delays=spec.delays,
            feedback=spec.feedback,
            band_gains=np.full_like(spec.band_gains, 1e-12),
            input_gains=spec.input_gains,
            output_gains=spec.output_gains,
            sample_rate=FS,
        )
        out = run_fdn(tiny, 0.5)
        first_pass_end = max(tiny.delays) + 1
        # after one pass through the lines, everything is absorbed
        assert np.max(np.abs(out[:, first_pass_end + max(tiny.delays):])) < 1e-9

    def test_determinism(self):
        spec = design_fdn(LIVING, ReverbTarget.flat(0.54), fs=FS)
        a = run_fdn(spec, 1.0)
        b = run_fdn(spec, 1.0)
        assert np.array_equal(a, b)

    def test_unstable_spec_rejected(self):
        spec = design_fdn(LIVING, ReverbTarget.flat(0.5), fs=FS)
        bad = FdnSpec.__new__(FdnSpec)
        object.__setattr__(bad, "delays", spec.delays)
        object.__setattr__(bad, "feedback", spec.feedback)
        object.__setattr__(bad, "band_gains", np.full_like(spec.band_gains, 1.01))
        object.__setattr__(bad, "input_gains", spec.input_gains)
        object.__setattr__(bad, "output_gains", spec.output_gains)
        object.__setattr__(bad, "sample_rate", FS)
        object.__setattr__(bad, "onset_s", 0.0)
        object.__setattr__(bad, "coupled", None)
        with pytest.raises(StabilityError):
            run_fdn(bad, 0.5)

    def test_length_must_exceed_onset(self):
        spec = design_fdn(LIVING, ReverbTarget.flat(0.5), fs=FS)
        from dataclasses import replace

        late = replace(spec, onset_s=1.0)
        with pytest.raises(ConfigurationError):
            run_fdn(late, 0.5)

    @pytest.mark.parametrize("t30", [0.54, 1.0])
    def test_closed_loop_t30_within_10pct(self, t30):
        spec = design_fdn(LIVING, ReverbTarget.flat(t30), fs=FS)
        tail = run_fdn(spec, max(2.0, 1.5 * t30))
        ana = estimate_decay(downmix(tail), FS, bands=None)
        assert ana.t30 == pytest.approx(t30, rel=0.10)

    def test_edc_slope_example_t30_one_second(self):
        spec = design_fdn(LIVING, ReverbTarget.flat(1.0), fs=FS)
        tail = run_fdn(spec, 2.0)
        edc, t = schroeder_edc(downmix(tail), FS)
        sel = (edc < -5) & (edc > -35)
        slope = np.polyfit(t[sel], edc[sel], 1)[0]
        assert slope == pytest.approx(-60.0, rel=0.10)

    def test_channels_pairwise_decorrelated(self):
        spec = design_fdn(LIVING, ReverbTarget.flat(0.54), fs=FS)
        tail = run_fdn(spec, 2.0)
        late = tail[:, int(0.5 * FS):int(1.5 * FS)]
        n = late.shape[0]
        worst = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                denom = np.sqrt(np.sum(late[i] ** 2) * np.sum(late[j] ** 2))
                xc = np.abs(np.correlate(late[i], late[j], "full")).max() / denom
                worst = max(worst, xc)
        assert worst < 0.3

    def test_nonflat_band_gains_decay_per_band(self):
        # 500 Hz decays at 0.9 s, 8 kHz at 0.45 s
        t30 = np.array([0.9, 0.9, 0.9, 0.9, 0.9, 0.8, 0.65, 0.55, 0.45, 0.45])
        spec = design_fdn(LIVING, ReverbTarget(tuple(t30), 0.7), fs=FS)
        tail = run_fdn(spec, 1.6)
        ana = estimate_decay(downmix(tail), FS)
        assert ana.t30_per_band[4] == pytest.approx(0.9, rel=0.15)
        assert ana.t30_per_band[8] == pytest.approx(0.45, rel=0.15)


class TestCoupledVolumes:
    def test_underground_dual_slope_knee(self):
        main = design_fdn(UNDERGROUND, ReverbTarget.flat(1.6), fs=FS)
        spec = couple_volumes(main, TUNNELS, 4.0, -15.0)
        tail = run_fdn(spec, 2.5)
        ana = estimate_decay(downmix(tail), FS, bands=None)
        assert ana.dual_slope is not None
        assert -18.0 <= ana.dual_slope.knee_db <= -12.0
        assert ana.t30 == pytest.approx(1.6, rel=0.10)

    def test_disabled_stage_single_slope(self):
        main = design_fdn(UNDERGROUND, ReverbTarget.flat(1.6), fs=FS)
        tail = run_fdn(main, 2.5)
        ana = estimate_decay(downmix(tail), FS, bands=None)
        assert ana.dual_slope is None
        assert ana.t30 == pytest.approx(1.6, rel=0.10)

    def test_vanishing_mix_indistinguishable(self):
        main = design_fdn(UNDERGROUND, ReverbTarget.flat(1.6), fs=FS)
        spec = couple_volumes(main, TUNNELS, 4.0, -200.0)
        with_stage = downmix(run_fdn(spec, 2.5))
        without = downmix(run_fdn(main, 2.5))
        e1, _ = schroeder_edc(without, FS)
        e2, _ = schroeder_edc(with_stage, FS)
        sel = e1 > -60.0
        assert np.max(np.abs(e1[sel] - e2[sel])) < 0.01

    def test_coupled_not_slower_rejected(self):
        main = design_fdn(UNDERGROUND, ReverbTarget.flat(1.6), fs=FS)
        with pytest.raises(ConfigurationError):
            couple_volumes(main, TUNNELS, 1.0, -15.0)

    def test_positive_knee_rejected(self):
        main = design_fdn(UNDERGROUND, ReverbTarget.flat(1.6), fs=FS)
        with pytest.raises(ConfigurationError):
            couple_volumes(main, TUNNELS, 4.0, +3.0)

    def test_resolve_mix_accounts_for_extra_early_energy(self):
        main = design_fdn(UNDERGROUND, ReverbTarget.flat(1.6), fs=FS)
        spec = couple_volumes(main, TUNNELS, 4.0, -15.0)
        from roomsim.reverb import _run_single

        m = _run_single(spec, 2.5, FS)
        c = _run_single(spec.coupled.spec, 2.5, FS)
        me = np.sum(m**2, axis=0)
        # add a strong direct-sound energy spike up front
        early = me.copy()
        early[:32] += me.sum() * 0.5 / 32
        g_plain, _ = resolve_coupled_mix(me, np.sum(c**2, axis=0), FS, -15.0)
        g_early, _ = resolve_coupled_mix(early, np.sum(c**2, axis=0), FS, -15.0)
        # more total energy up front -> knee sits deeper -> louder stage needed
        assert g_early > g_plain
