"""Simulator geometry, validation, and reproducibility checks."""

import numpy as np
import pytest

from pulsecancel.scenario import (BREATHING_AMPLITUDE_M, FAMILIES,
                                  DisplacementSignal, IntermodTone,
                                  RadarConfig, Scenario,
                                  displacement_to_phase, fig_masking_scenario,
                                  load_scenario, masking_scenario,
                                  reference_trace, scenario_slow_time,
                                  synthesize_displacement,
                                  synthesize_radar_cube, synthesize_slow_time,
                                  window_starts)


class TestRadarConfig:
    def test_derived_geometry(self):
        cfg = RadarConfig()
        assert cfg.wavelength_m == 0.003896103896103896
        assert cfg.bandwidth_hz == 3.5e9
        assert cfg.range_bin_width_m == 0.04285714285714286
        assert cfg.unambiguous_range_m == 4.285714285714286
        assert cfg.frame_rate_hz == 100.0

    def test_beat_frequency_is_linear_in_range(self):
        cfg = RadarConfig()
        assert cfg.beat_frequency_hz(1.0) == 466666.6666666667
        assert cfg.beat_frequency_hz(2.0) == 2.0 * cfg.beat_frequency_hz(1.0)

    def test_rejects_nonpositive_parameters(self):
        with pytest.raises(ValueError):
            RadarConfig(carrier_frequency_hz=0.0)
        with pytest.raises(ValueError):
            RadarConfig(adc_samples_per_chirp=1)

    def test_rejects_adc_window_longer_than_chirp(self):
        with pytest.raises(ValueError, match="longer than the chirp"):
            RadarConfig(adc_samples_per_chirp=400, chirp_duration_s=50e-6)


class TestIntermodTone:
    def test_rule_frequencies(self):
        rr, hr = 0.26, 1.2
        assert IntermodTone("HR-RR", 1e-4).frequency_hz(rr, hr) == hr - rr
        assert IntermodTone("HR+RR", 1e-4).frequency_hz(rr, hr) == hr + rr
        assert IntermodTone("HR+2RR", 1e-4).frequency_hz(rr, hr) == pytest.approx(hr + 2 * rr)

    def test_explicit_frequency_passes_through(self):
        assert IntermodTone(1.5, 1e-4).frequency_hz(0.26, 1.2) == 1.5

    def test_rejects_unknown_rule_and_negative_amplitude(self):
        with pytest.raises(ValueError, match="unknown intermod rule"):
            IntermodTone("HR*RR", 1e-4)
        with pytest.raises(ValueError, match="amplitude"):
            IntermodTone("HR-RR", -1e-4)


class TestScenarioValidation:
    def test_rates_must_sit_in_their_bands(self):
        with pytest.raises(ValueError, match="breathing rate"):
            Scenario(breathing_hz=0.05)
        with pytest.raises(ValueError, match="heart rate"):
            Scenario(heartbeat_hz=2.5)

    def test_amplitude_bounds_and_override(self):
        hi = BREATHING_AMPLITUDE_M[1]
        with pytest.raises(ValueError, match="breathing amplitude"):
            Scenario(breathing_harmonics=[(hi * 2, 0.0)])
        sc = Scenario(breathing_harmonics=[(hi * 2, 0.0)],
                      allow_amplitude_override=True)
        assert sc.breathing_harmonics[0][0] == hi * 2

    def test_duration_must_be_integer_frames(self):
        with pytest.raises(ValueError, match="integer number of frames"):
            Scenario(duration_s=1.2345)
        assert Scenario(duration_s=20.0).n_frames == 2000

    def test_simulated_content_must_stay_below_nyquist(self):
        with pytest.raises(ValueError, match="Nyquist"):
            Scenario(intermod_tones=[IntermodTone(55.0, 1e-4)])

    def test_clutter_range_must_be_positive(self):
        with pytest.raises(ValueError, match="clutter range"):
            Scenario(clutter=[(-0.5, 1.0)])

    def test_needs_both_fundamentals(self):
        with pytest.raises(ValueError, match="fundamental"):
            Scenario(heartbeat_harmonics=[])


class TestDisplacement:
    def test_single_tone_matches_closed_form(self):
        sc = Scenario(duration_s=10.0, breathing_hz=0.25,
                      breathing_harmonics=[(1.5e-3, 0.3)],
                      heartbeat_harmonics=[(0.0, 0.0)],
                      allow_amplitude_override=True)
        disp = synthesize_displacement(sc)
        t = disp.times()
        expected = 1.5e-3 * np.sin(2 * np.pi * 0.25 * t + 0.3)
        np.testing.assert_allclose(disp.samples, expected, atol=1e-15)
        assert disp.sample_rate == 100.0
        assert disp.standoff_m == sc.standoff_m

    def test_harmonics_and_tones_superpose(self):
        sc = Scenario(duration_s=10.0,
                      breathing_harmonics=[(1.5e-3, 0.0), (4e-4, 0.2)],
                      intermod_tones=[IntermodTone("HR-RR", 2e-4, 0.1)])
        d = synthesize_displacement(sc).samples
        t = np.arange(sc.n_frames) / 100.0
        manual = np.zeros_like(t)
        for k, (amp, ph) in enumerate(sc.breathing_harmonics, start=1):
            manual += amp * np.sin(2 * np.pi * k * sc.breathing_hz * t + ph)
        for l, (amp, ph) in enumerate(sc.heartbeat_harmonics, start=1):
            manual += amp * np.sin(2 * np.pi * l * sc.heartbeat_hz * t + ph)
        f = sc.heartbeat_hz - sc.breathing_hz
        manual += 2e-4 * np.sin(2 * np.pi * f * t + 0.1)
        np.testing.assert_allclose(d, manual, atol=1e-15)

    def test_half_millimeter_maps_to_known_phase(self):
        disp = DisplacementSignal(np.array([5e-4]), 100.0, 1.0)
        theta = displacement_to_phase(disp, RadarConfig())
        assert theta.samples[0] == pytest.approx(1.6126842288427605, abs=1e-12)


class TestSlowTime:
    def test_noiseless_is_unit_modulus(self):
        theta = np.linspace(0.0, 1.0, 200)
        z = synthesize_slow_time(theta)
        np.testing.assert_allclose(np.abs(z), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.angle(z), theta, atol=1e-12)

    def test_noise_is_seed_reproducible(self):
        theta = np.zeros(500)
        a = synthesize_slow_time(theta, complex_noise_std=0.1, seed=3)
        b = synthesize_slow_time(theta, complex_noise_std=0.1, seed=3)
        c = synthesize_slow_time(theta, complex_noise_std=0.1, seed=4)
        np.testing.assert_array_equal(a, b)
        assert np.any(a != c)

    def test_scenario_slow_time_deterministic(self):
        sc = masking_scenario(5, variant="b", duration_s=40.0)
        np.testing.assert_array_equal(scenario_slow_time(sc),
                                      scenario_slow_time(sc))


class TestRadarCube:
    def test_shape_and_dtype(self, fixture_scenario):
        cube = synthesize_radar_cube(fixture_scenario)
        assert cube.iq.shape == (2000, 200)
        assert np.iscomplexobj(cube.iq)

    def test_rejects_scatterer_beyond_unambiguous_range(self):
        sc = Scenario(duration_s=2.0, standoff_m=4.5)
        with pytest.raises(ValueError, match="unambiguous"):
            synthesize_radar_cube(sc)

    def test_rejects_target_crossing_zero_range(self):
        # one full breathing cycle so the trough below -1 mm is sampled
        sc = Scenario(duration_s=6.0, standoff_m=1e-3)
        with pytest.raises(ValueError, match="positive"):
            synthesize_radar_cube(sc)

    def test_static_clutter_adds_constant_return(self):
        sc = Scenario(duration_s=2.0, clutter=[(2.0, 0.5)])
        with_clutter = synthesize_radar_cube(sc).iq
        sc2 = Scenario(duration_s=2.0)
        without = synthesize_radar_cube(sc2).iq
        diff = with_clutter - without
        # a fixed scatterer contributes the same chirp to every frame
        np.testing.assert_allclose(
            diff, np.broadcast_to(diff[0], diff.shape), atol=1e-12)


class TestWindows:
    def test_sliding_window_count(self):
        starts = window_starts(28000, 100.0, 20.0, 1.0)
        assert len(starts) == 261
        assert starts[0] == 0
        assert starts[-1] == 26000

    def test_rejects_window_longer_than_record(self):
        with pytest.raises(ValueError, match="longer than record"):
            window_starts(100, 100.0, 2.0, 1.0)
        with pytest.raises(ValueError, match="positive"):
            window_starts(1000, 100.0, 2.0, 0.0)

    def test_reference_trace_centers_and_value(self, fixture_scenario):
        trace = reference_trace(fixture_scenario, 20.0)
        assert len(trace) == 1
        assert trace.entries[0].time_s == 10.0
        assert trace.entries[0].hr_bpm == pytest.approx(76.6)
        with pytest.raises(ValueError, match="longer than the scenario"):
            reference_trace(fixture_scenario, 30.0)


class TestFamilies:
    def test_fixture_rates_and_tones(self, fixture_scenario):
        sc = fixture_scenario
        assert sc.breathing_hz == pytest.approx(15.6 / 60.0)
        assert sc.heartbeat_hz == pytest.approx(76.6 / 60.0)
        assert sc.duration_s == 20.0
        assert sc.complex_noise_std == 0.0
        assert [t.rule for t in sc.intermod_tones] == ["HR-RR", "HR+RR",
                                                       "HR+2RR"]

    def test_masking_scenario_bands(self):
        for seed in range(8):
            sc = masking_scenario(seed)
            assert 14.5 / 60 <= sc.breathing_hz <= 17.0 / 60
            assert 70.0 / 60 <= sc.heartbeat_hz <= 85.0 / 60
            assert sc.complex_noise_std == 0.1
            assert len(sc.intermod_tones) == 3

    def test_masking_scenario_is_seeded(self):
        a = masking_scenario(9, variant="c")
        b = masking_scenario(9, variant="c")
        assert a.breathing_hz == b.breathing_hz
        assert a.heartbeat_harmonics == b.heartbeat_harmonics

    def test_variant_validation_and_registry(self):
        with pytest.raises(ValueError, match="variant"):
            masking_scenario(0, variant="z")
        assert set(FAMILIES) == {"masking", "masking-a", "masking-b",
                                 "masking-c"}
        sc = FAMILIES["masking-a"](3, duration_s=20.0)
        assert sc.duration_s == 20.0


class TestLoadScenario:
    def test_bpm_keys_convert(self):
        sc = load_scenario({"breathing_bpm": 15.6, "heartbeat_bpm": 76.6,
                            "duration_s": 20.0})
        assert sc.breathing_hz == pytest.approx(15.6 / 60.0)
        assert sc.heartbeat_hz == pytest.approx(76.6 / 60.0)

    def test_rejects_rate_given_both_ways(self):
        with pytest.raises(ValueError, match="not both"):
            load_scenario({"breathing_hz": 0.26, "breathing_bpm": 15.6})

    def test_rejects_unknown_keys(self):
        with pytest.raises(ValueError, match="unknown scenario keys"):
            load_scenario({"breathing_rate": 0.26})

    def test_radar_override_and_lists(self):
        sc = load_scenario({
            "radar": {"adc_samples_per_chirp": 128},
            "breathing_harmonics": [[1.5e-3, 0.0], [4e-4, 0.1]],
            "intermod_tones": [["HR-RR", 2e-4, 0.0]],
            "clutter": [[1.5, 0.3]],
            "seed": 7,
        })
        assert sc.radar.adc_samples_per_chirp == 128
        assert sc.breathing_harmonics[1] == (4e-4, 0.1)
        assert sc.intermod_tones[0].rule == "HR-RR"
        assert sc.clutter == [(1.5, 0.3)]
        assert sc.seed == 7

    def test_rejects_non_object(self):
        with pytest.raises(ValueError, match="JSON object"):
            load_scenario([1, 2, 3])
