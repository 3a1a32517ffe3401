import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disfluency import dsp


def sine(freq, seconds=1.0, rate=16000, amp=0.5):
    t = np.arange(int(seconds * rate)) / rate
    return dsp.Waveform(amp * np.sin(2 * np.pi * freq * t), rate)


@pytest.fixture(scope="module")
def tone_200():
    return dsp.compute_frame_features(sine(200.0))


class TestFraming:
    def test_frame_count_formula(self):
        w = dsp.Waveform(np.zeros(16000))
        frames = dsp.compute_frame_features(w)
        assert frames.n_frames == (16000 - 400) // 160 + 1

    def test_too_short_audio_rejected(self):
        with pytest.raises(ValueError, match="too short"):
            dsp.compute_frame_features(dsp.Waveform(np.zeros(100)))


class TestPitch:
    def test_pure_tone_nccf_high(self, tone_200):
        assert np.all(tone_200.values[:, 0] >= 0.95)

    def test_pure_tone_f0_recovered(self, tone_200):
        # pov_log_pitch = pov * log(f0); pov ~ 1 for a clean tone.
        pov = np.maximum(0.0, tone_200.values[:, 0]) ** 2
        log_f0 = tone_200.values[:, 1] / pov
        f0 = np.exp(log_f0)
        assert np.all(np.abs(f0 - 200.0) <= 2.0)

    def test_all_zero_waveform(self):
        frames = dsp.compute_frame_features(dsp.Waveform(np.zeros(8000)))
        assert np.all(frames.values[:, 0] == 0.0)  # nccf defined as 0
        assert np.allclose(frames.values[:, 3], np.log(1e-10))
        assert np.allclose(frames.values[:, 1], 0.0)  # pov weight kills pitch
        assert np.allclose(frames.values[:, 2], 0.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_nccf_bounded(self, seed):
        rng = np.random.default_rng(seed)
        w = dsp.Waveform(rng.normal(0, 0.3, 1600))
        frames = dsp.compute_frame_features(w)
        assert np.all(frames.values[:, 0] >= -1.0 - 1e-12)
        assert np.all(frames.values[:, 0] <= 1.0 + 1e-12)


class TestEnergy:
    def test_scaling_shifts_log_energy_by_2ln10(self):
        w = sine(180.0, 0.5)
        scaled = dsp.Waveform(w.samples * 10.0, w.sample_rate)
        a = dsp.compute_frame_features(w)
        b = dsp.compute_frame_features(scaled)
        diff = b.values[:, 3] - a.values[:, 3]
        assert np.allclose(diff, 2.0 * np.log(10.0), atol=1e-9)

    def test_scaling_leaves_higher_mfccs_unchanged(self):
        w = sine(180.0, 0.5)
        scaled = dsp.Waveform(w.samples * 10.0, w.sample_rate)
        a = dsp.compute_frame_features(w)
        b = dsp.compute_frame_features(scaled)
        assert np.allclose(b.values[:, 7:19], a.values[:, 7:19], atol=1e-6)
        c0_shift = b.values[:, 6] - a.values[:, 6]
        assert np.allclose(c0_shift, c0_shift[0], atol=1e-6)
        assert c0_shift[0] > 0


class TestMelAndDct:
    def test_dct_rows_orthonormal(self):
        mat = dsp.dct_matrix(13, 40)
        gram = mat @ mat.T
        assert np.allclose(gram, np.eye(13), atol=1e-10)

    def test_filter_rows_positive(self):
        bank = dsp.mel_filterbank(512, 16000)
        assert np.all(bank.sum(axis=1) > 0)

    def test_filters_cover_spectrum_with_overlap(self):
        bank = dsp.mel_filterbank(512, 16000)
        coverage = bank.sum(axis=0)
        assert np.all(coverage[1:-1] > 0)  # every interior bin touched
        active = bank > 0
        for b in range(bank.shape[0] - 1):
            assert np.any(active[b] & active[b + 1])  # adjacent overlap

    @pytest.mark.parametrize("band", [5, 12, 20, 33])
    def test_tone_energy_concentrates_in_neighborhood(self, band):
        n_fft = 512
        bank = dsp.mel_filterbank(n_fft, 16000)
        mel_pts = dsp.mel_to_hz(
            np.linspace(dsp.hz_to_mel(0), dsp.hz_to_mel(8000), dsp.N_MEL + 2)
        )
        center = mel_pts[band + 1]
        w = sine(center, 0.2)
        seg = w.samples[:400] * np.hamming(400)
        spec = np.abs(np.fft.rfft(seg, n_fft)) ** 2
        mel_e = bank @ spec
        neighborhood = mel_e[max(0, band - 1) : band + 2].sum()
        assert neighborhood / mel_e.sum() >= 0.60


class TestWordAverage:
    def make_frames(self, column_values):
        vals = np.tile(np.asarray(column_values, dtype=float)[:, None], (1, 19))
        return dsp.FrameFeatures(vals)

    def test_constant_values(self):
        frames = self.make_frames([3.0] * 20)
        assert np.allclose(dsp.word_average(frames, 0.05, 0.15), 3.0)

    def test_two_frame_mean(self):
        frames = self.make_frames([1.0, 3.0])
        # Centers at 12.5 ms and 22.5 ms.
        out = dsp.word_average(frames, 0.010, 0.025)
        assert np.allclose(out, 2.0)

    def test_eighty_ms_word_covers_eight_frames(self):
        frames = self.make_frames(np.arange(40.0))
        start = 0.100  # frame boundary
        out = dsp.word_average(frames, start, start + 0.080)
        centers = np.array([frames.frame_center(t) for t in range(40)])
        inside = (centers >= start) & (centers < start + 0.080)
        assert inside.sum() == 8
        assert np.allclose(out, np.arange(40.0)[inside].mean())

    def test_tiny_span_uses_nearest_frame(self):
        frames = self.make_frames([1.0, 5.0, 9.0])
        out = dsp.word_average(frames, 0.0224, 0.0226)  # nearest center 22.5 ms
        assert np.allclose(out, 5.0)


class TestIo:
    def test_frame_file_round_trip(self, tmp_path):
        frames = dsp.compute_frame_features(sine(150.0, 0.1))
        path = tmp_path / "frames.tsv"
        dsp.write_frame_features(frames, path)
        again = dsp.read_frame_features(path)
        assert np.allclose(again.values, frames.values, atol=1e-6)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "frames.tsv"
        path.write_text("a\tb\n1\t2\n")
        with pytest.raises(ValueError, match="header"):
            dsp.read_frame_features(path)

    def test_wav_round_trip(self, tmp_path):
        import wave

        path = tmp_path / "t.wav"
        data = (sine(200, 0.05).samples * 32767).astype("<i2")
        with wave.open(str(path), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(16000)
            wf.writeframes(data.tobytes())
        w = dsp.read_wav(path)
        assert w.sample_rate == 16000
        assert w.samples.size == data.size

    def test_wav_wrong_rate_rejected(self, tmp_path):
        import wave

        path = tmp_path / "t.wav"
        with wave.open(str(path), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(8000)
            wf.writeframes(b"\x00\x00" * 100)
        with pytest.raises(ValueError, match="16 kHz"):
            dsp.read_wav(path)
