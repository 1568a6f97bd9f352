import numpy as np
import pytest

from perturbbench.errors import ParameterError, StftConfigError
from perturbbench.signal_core import AudioSignal
from perturbbench.spectral import (
    StftConfig,
    griffin_lim,
    griffin_lim_trace,
    istft,
    stft,
    time_warp,
)


def snr_db(reference: np.ndarray, estimate: np.ndarray) -> float:
    err = estimate - reference
    return 10.0 * np.log10(np.sum(reference**2) / np.sum(err**2))


class TestConfig:
    def test_default_geometry(self):
        cfg = StftConfig.for_rate(16000)
        assert (cfg.win_samples, cfg.hop_samples, cfg.fft_size) == (512, 128, 512)

    def test_invalid_geometry_rejected(self):
        with pytest.raises(StftConfigError):
            StftConfig(win_samples=512, hop_samples=600, fft_size=512)
        with pytest.raises(StftConfigError):
            StftConfig(win_samples=512, hop_samples=128, fft_size=256)
        # hop > win/2 breaks constant overlap-add for the Hann window
        with pytest.raises(StftConfigError):
            StftConfig(win_samples=512, hop_samples=400, fft_size=512)


class TestStft:
    def test_zero_signal_zero_frames(self):
        spec = stft(AudioSignal(np.zeros(4000), 16000))
        assert np.all(spec.frames == 0)

    def test_empty_signal_rejected(self):
        with pytest.raises(ParameterError):
            stft(AudioSignal(np.zeros(0), 16000))

    def test_sine_concentrates_at_nearest_bin(self):
        sr = 16000
        t = np.arange(sr) / sr
        spec = stft(AudioSignal(0.5 * np.sin(2 * np.pi * 440 * t), sr))
        expected_bin = round(440 * spec.config.fft_size / sr)
        interior = np.abs(spec.frames[4:-4])
        assert np.all(np.argmax(interior, axis=1) == expected_bin)

    def test_frame_count_rule(self, speech):
        cfg = StftConfig.for_rate(speech.sample_rate)
        spec = stft(speech, cfg)
        assert spec.frames.shape[0] == cfg.n_frames(len(speech))
        assert spec.frames.shape[1] == cfg.n_bins


class TestIstft:
    def test_round_trip_white_noise(self):
        rng = np.random.default_rng(0)
        sig = AudioSignal(rng.standard_normal(16000) * 0.1, 16000)
        rec = istft(stft(sig))
        assert len(rec) == len(sig)
        assert snr_db(sig.samples, rec.samples) >= 60.0

    def test_zero_spectrogram_zero_signal(self):
        sig = AudioSignal(np.zeros(2000), 16000)
        spec = stft(sig)
        assert np.all(istft(spec).samples == 0)

    @pytest.mark.parametrize("win,hop,fft", [(256, 64, 512), (400, 100, 512), (512, 256, 512)])
    def test_round_trip_other_cola_configs(self, win, hop, fft):
        cfg = StftConfig(win_samples=win, hop_samples=hop, fft_size=fft)
        rng = np.random.default_rng(2)
        sig = AudioSignal(rng.standard_normal(9000) * 0.2, 16000)
        rec = istft(stft(sig, cfg))
        assert snr_db(sig.samples, rec.samples) >= 60.0

    def test_length_exact_for_awkward_sizes(self):
        rng = np.random.default_rng(1)
        for n in (1, 7, 511, 513, 4097):
            sig = AudioSignal(rng.standard_normal(n), 16000)
            rec = istft(stft(sig))
            assert len(rec) == n
            if n > 16:
                assert snr_db(sig.samples, rec.samples) >= 60.0


class TestGriffinLim:
    def test_true_phase_fixpoint_zero_iterations(self, speech):
        spec = stft(speech)
        rec = griffin_lim(
            np.abs(spec.frames), spec.config, speech.sample_rate,
            init_phase=np.angle(spec.frames), iterations=0, length=len(speech),
        )
        assert snr_db(speech.samples, rec.samples) >= 60.0

    def test_residual_non_increasing_on_random_magnitude(self):
        cfg = StftConfig.for_rate(16000)
        rng = np.random.default_rng(5)
        magnitude = rng.random((30, cfg.n_bins))
        _, residuals = griffin_lim_trace(magnitude, cfg, 16000, iterations=60)
        assert len(residuals) == 60
        assert residuals[-1] <= residuals[0]
        tol = 1e-9 * residuals[0]
        assert all(b <= a + tol for a, b in zip(residuals, residuals[1:]))

    def test_zero_magnitude_zero_signal(self):
        cfg = StftConfig.for_rate(16000)
        out = griffin_lim(np.zeros((10, cfg.n_bins)), cfg, 16000)
        assert np.all(out.samples == 0)

    def test_negative_iterations_rejected(self):
        cfg = StftConfig.for_rate(16000)
        with pytest.raises(ParameterError):
            griffin_lim(np.zeros((4, cfg.n_bins)), cfg, 16000, iterations=-1)

    def test_negative_magnitude_rejected(self):
        cfg = StftConfig.for_rate(16000)
        with pytest.raises(ParameterError):
            griffin_lim(-np.ones((4, cfg.n_bins)), cfg, 16000)


class TestTimeWarp:
    def test_factor_one_is_bit_exact_identity(self, speech):
        out = time_warp(speech, 1.0)
        assert out is speech

    @pytest.mark.parametrize("factor", [0.25, 0.5, 0.8, 1.25, 2.0, 4.0])
    def test_duration_law(self, short_speech, factor):
        cfg = StftConfig.for_rate(short_speech.sample_rate)
        out = time_warp(short_speech, factor, iterations=6)
        assert abs(len(out) - len(short_speech) / factor) <= 2 * cfg.hop_samples

    @pytest.mark.parametrize("factor", [0.5, 2.0])
    def test_average_magnitude_spectrum_preserved(self, short_speech, factor):
        cfg = StftConfig.for_rate(short_speech.sample_rate)
        out = time_warp(short_speech, factor)
        mean_in = np.abs(stft(short_speech, cfg).frames).mean(axis=0)
        mean_out = np.abs(stft(out, cfg).frames).mean(axis=0)
        rel = np.linalg.norm(mean_out - mean_in) / np.linalg.norm(mean_in)
        assert rel <= 0.20

    def test_bad_factor_rejected(self, speech):
        with pytest.raises(ParameterError):
            time_warp(speech, 0.0)
        with pytest.raises(ParameterError):
            time_warp(speech, -2.0)
