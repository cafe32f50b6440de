import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mirkit.audio import AudioBuffer
from mirkit.dsp import (
    Spectrogram,
    autocorrelate,
    chromagram,
    logfreq_spectrogram,
    onset_envelope,
    stft,
)
from mirkit.errors import EmptySignal, InsufficientResolution, LagTooLarge, WrongBinning
from mirkit.signals import synth_click_track, synth_tone


class TestStft:
    def test_sine_argmax_bin(self):
        buf = synth_tone([1000.0], 1.0, 22050)
        spec = stft(buf)
        expected_bin = round(1000 * 2048 / 22050)  # = 93
        assert expected_bin == 93
        for frame in spec.magnitudes:
            assert np.argmax(frame) == expected_bin

    def test_zero_input_zero_output(self):
        buf = AudioBuffer(np.zeros(22050), 22050)
        spec = stft(buf)
        assert np.all(spec.magnitudes == 0)

    def test_too_short_raises(self):
        buf = AudioBuffer(np.zeros(1000), 22050)
        with pytest.raises(EmptySignal):
            stft(buf)

    def test_frame_count(self):
        buf = AudioBuffer(np.zeros(2048 + 512 * 9), 22050)
        assert stft(buf).n_frames == 10

    def test_linear_scaling(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-0.4, 0.4, 8000)
        a = stft(AudioBuffer(x, 22050))
        b = stft(AudioBuffer(2 * x, 22050))
        assert np.allclose(b.magnitudes, 2 * a.magnitudes, rtol=1e-9)

    def test_window_must_be_power_of_two(self):
        buf = synth_tone([440.0], 0.5)
        with pytest.raises(ValueError):
            stft(buf, window_len=1000)


class TestLogfreqSpectrogram:
    def test_c4_energy_lands_on_logbin_24(self):
        spec = stft(synth_tone([440.0], 0.5))
        lin_bin = int(round(261.63 / (22050 / 2048)))
        mags = np.zeros_like(spec.magnitudes)
        mags[:, lin_bin] = 1.0
        synthetic = Spectrogram(mags, spec.hop_sec, spec.bin_freqs_hz, spec.t0_sec)
        pooled = logfreq_spectrogram(synthetic)
        assert np.argmax(pooled.magnitudes[0]) == 24  # C4, two octaves above C2

    def test_zero_in_zero_out(self):
        buf = AudioBuffer(np.zeros(8192), 22050)
        pooled = logfreq_spectrogram(stft(buf))
        assert np.all(pooled.magnitudes == 0)

    def test_insufficient_resolution(self):
        spec = stft(synth_tone([440.0], 0.5))
        with pytest.raises(InsufficientResolution):
            logfreq_spectrogram(spec, fmin_hz=5.0)

    def test_weights_partition_per_bin(self):
        spec = stft(synth_tone([440.0], 0.5))
        flat = Spectrogram(np.ones_like(spec.magnitudes), spec.hop_sec,
                           spec.bin_freqs_hz, spec.t0_sec)
        pooled = logfreq_spectrogram(flat)
        # each output bin's weights sum to one, so a flat input stays flat
        assert np.allclose(pooled.magnitudes, 1.0)


class TestChromagram:
    def test_a440_maps_to_class_9(self):
        chroma = chromagram(logfreq_spectrogram(stft(synth_tone([440.0], 1.0))))
        voiced = chroma.energies.sum(axis=1) > 0
        assert np.all(np.argmax(chroma.energies[voiced], axis=1) == 9)

    def test_octave_folding_concentrates_energy(self):
        buf = synth_tone([261.63, 523.25, 1046.5], 1.0)  # C4, C5, C6
        chroma = chromagram(logfreq_spectrogram(stft(buf)))
        voiced = chroma.energies.sum(axis=1) > 0
        frames = chroma.energies[voiced]
        share = frames[:, 0] / frames.sum(axis=1)
        assert np.all(share > 0.8)

    def test_zero_input(self):
        chroma = chromagram(logfreq_spectrogram(stft(AudioBuffer(np.zeros(8192), 22050))))
        assert np.all(chroma.energies == 0)

    def test_wrong_binning_rejected(self):
        spec = stft(synth_tone([440.0], 0.5))
        pooled = logfreq_spectrogram(spec, bins_per_octave=24, n_bins=96)
        with pytest.raises(WrongBinning):
            chromagram(pooled)

    def test_energy_conserved(self):
        buf = synth_tone([220.0, 330.0, 495.0], 0.5)
        pooled = logfreq_spectrogram(stft(buf))
        chroma = chromagram(pooled)
        assert chroma.energies.sum() == pytest.approx(pooled.magnitudes.sum(), rel=1e-6)


class TestOnsetEnvelope:
    def test_clicks_produce_aligned_peaks(self):
        buf, beats = synth_click_track(120.0, 5.0)
        spec = stft(buf)
        env = onset_envelope(spec)
        strength = env.strength
        times = env.frame_times()
        for t in beats[1:-1]:  # first click sits on the window edge
            nearest = np.argmin(np.abs(times - t))
            window = strength[max(0, nearest - 3):nearest + 4]
            assert window.max() > 0.3

    def test_stationary_sine_flux_is_negligible_vs_click(self):
        # raw-flux oracle: a sustained sine's flux must sit far below the
        # scale any click sets, frame 1 onward
        def raw_flux(buf):
            logmag = np.log1p(stft(buf).magnitudes)
            return np.maximum(0.0, np.diff(logmag, axis=0)).sum(axis=1)

        sine_flux = raw_flux(synth_tone([440.0], 2.0))
        click_buf, _ = synth_click_track(120.0, 2.0)
        click_peak = raw_flux(click_buf).max()
        assert np.all(sine_flux[1:] < 0.05 * click_peak)
        env = onset_envelope(stft(synth_tone([440.0], 2.0)))
        assert env.strength[0] == 0.0

    def test_silence_all_zero(self):
        env = onset_envelope(stft(AudioBuffer(np.zeros(22050), 22050)))
        assert np.all(env.strength == 0)

    def test_needs_two_frames(self):
        buf = AudioBuffer(np.zeros(2048), 22050)
        with pytest.raises(EmptySignal):
            onset_envelope(stft(buf))

    def test_gain_invariant_peak_locations(self):
        buf, _ = synth_click_track(100.0, 4.0)
        env1 = onset_envelope(stft(buf))
        env2 = onset_envelope(stft(AudioBuffer(buf.samples * 0.5, buf.sample_rate_hz)))
        peaks1 = set(np.where(env1.strength > 0.5)[0])
        peaks2 = set(np.where(env2.strength > 0.5)[0])
        assert peaks1 == peaks2


class TestAutocorrelate:
    def test_hand_computed(self):
        r = autocorrelate([1, 0, 1, 0, 1, 0], 5)
        assert list(r) == [3, 0, 2, 0, 1, 0]

    def test_zeros(self):
        assert np.all(autocorrelate(np.zeros(16), 8) == 0)

    def test_lag_too_large(self):
        with pytest.raises(LagTooLarge):
            autocorrelate(np.zeros(8), 8)

    @pytest.mark.parametrize("period", [2, 3, 5, 7])
    def test_impulse_train_period_recovered(self, period):
        x = np.zeros(120)
        x[::period] = 1.0
        r = autocorrelate(x, 40)
        assert np.argmax(r[1:]) + 1 == period

    @given(st.lists(st.floats(-1, 1, allow_nan=False, width=32), min_size=2, max_size=64))
    @settings(max_examples=50, deadline=None)
    def test_lag_zero_is_sum_of_squares_and_dominates(self, values):
        x = np.asarray(values, dtype=np.float64)
        r = autocorrelate(x, len(x) - 1)
        assert r[0] == pytest.approx(np.sum(x * x), abs=1e-9)
        assert np.all(r[0] >= r - 1e-9)
