import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from replaykit.corpus import (
    AudioSignal,
    DeviceProfile,
    Manifest,
    SynthConfig,
    UtteranceMeta,
    apply_replay_channel,
    channel_power_gain,
    load_device_profiles,
    parse_manifest,
    read_wav,
    save_device_profiles,
    synth_corpus,
    write_manifest,
    write_wav,
)
from replaykit.errors import ManifestError, WavFormatError
from replaykit.spectrum import frame_signal, power_spectrum

SR = 16000


def _write_raw_wav(path, pcm_bytes, n_channels=1, sampwidth=2, rate=SR):
    """Hand-rolled RIFF writer so the reader is tested against raw bytes."""
    byte_rate = rate * n_channels * sampwidth
    block_align = n_channels * sampwidth
    header = b"RIFF" + struct.pack("<I", 36 + len(pcm_bytes)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, n_channels, rate,
                                    byte_rate, block_align, 8 * sampwidth)
    header += b"data" + struct.pack("<I", len(pcm_bytes))
    path.write_bytes(header + pcm_bytes)


class TestReadWav:
    def test_single_sample_scaling(self, tmp_path):
        p = tmp_path / "one.wav"
        _write_raw_wav(p, struct.pack("<h", 16384))
        sig = read_wav(p)
        assert sig.sample_rate == SR
        np.testing.assert_array_equal(sig.samples, [0.5])

    def test_endpoint_mapping(self, tmp_path):
        p = tmp_path / "ends.wav"
        _write_raw_wav(p, struct.pack("<hh", 0, -32768))
        np.testing.assert_array_equal(read_wav(p).samples, [0.0, -1.0])

    def test_wrong_sample_rate(self, tmp_path):
        p = tmp_path / "slow.wav"
        _write_raw_wav(p, struct.pack("<h", 100), rate=8000)
        with pytest.raises(WavFormatError, match="sample rate"):
            read_wav(p)

    def test_stereo_rejected(self, tmp_path):
        p = tmp_path / "st.wav"
        _write_raw_wav(p, struct.pack("<hh", 1, 2), n_channels=2)
        with pytest.raises(WavFormatError, match="mono"):
            read_wav(p)

    def test_8bit_rejected(self, tmp_path):
        p = tmp_path / "b8.wav"
        _write_raw_wav(p, b"\x80\x90", sampwidth=1)
        with pytest.raises(WavFormatError, match="16-bit"):
            read_wav(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_wav(tmp_path / "nope.wav")

    def test_sample_count_matches_data_length(self, tmp_path):
        p = tmp_path / "n.wav"
        _write_raw_wav(p, struct.pack("<4h", 1, 2, 3, 4))
        assert len(read_wav(p)) == 4

    def test_roundtrip_every_16bit_value(self, tmp_path):
        ints = np.arange(-32768, 32768, dtype=np.int64)
        sig = AudioSignal(ints / 32768.0, SR)
        p = tmp_path / "all.wav"
        write_wav(sig, p)
        back = read_wav(p)
        np.testing.assert_array_equal(back.samples, sig.samples)


class TestAudioSignal:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match=r"\[-1.0, 1.0\)"):
            AudioSignal(np.array([0.0, 1.0]), SR)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError, match="positive"):
            AudioSignal(np.zeros(4), 0)


class TestManifest:
    HEADER = "utt_id\taudio_path\tlabel\tspeaker_id\tphrase_id\tdevice_id"

    def _write(self, tmp_path, lines):
        p = tmp_path / "m.tsv"
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return p

    def test_basic_fields(self, tmp_path):
        p = self._write(tmp_path, [self.HEADER,
                                   "u1\ta.wav\tgenuine\tS01\tP03\t-"])
        m = parse_manifest(p)
        rec = m.records[0]
        assert rec.label == "genuine"
        assert rec.device_id == "-"
        assert rec.speaker_id == "S01"
        assert rec.phrase_id == "P03"

    def test_duplicate_utt_id(self, tmp_path):
        p = self._write(tmp_path, [self.HEADER,
                                   "u1\ta.wav\tgenuine\tS01\tP03\t-",
                                   "u1\tb.wav\treplay\tS01\tP03\tD00"])
        with pytest.raises(ManifestError, match="duplicate"):
            parse_manifest(p)

    def test_case_sensitive_label(self, tmp_path):
        p = self._write(tmp_path, [self.HEADER,
                                   "u1\ta.wav\tGenuine\tS01\tP03\t-"])
        with pytest.raises(ManifestError, match="unknown label"):
            parse_manifest(p)

    def test_missing_column(self, tmp_path):
        p = self._write(tmp_path,
                        ["utt_id\taudio_path\tlabel\tspeaker_id\tphrase_id",
                         "u1\ta.wav\tgenuine\tS01\tP03"])
        with pytest.raises(ManifestError, match="header"):
            parse_manifest(p)

    def test_empty_manifest(self, tmp_path):
        p = self._write(tmp_path, [self.HEADER])
        with pytest.raises(ManifestError, match="no records"):
            parse_manifest(p)

    def test_genuine_with_device_rejected(self, tmp_path):
        p = self._write(tmp_path, [self.HEADER,
                                   "u1\ta.wav\tgenuine\tS01\tP03\tD00"])
        with pytest.raises(ManifestError, match="device_id '-'"):
            parse_manifest(p)

    def test_replay_without_device_rejected(self, tmp_path):
        p = self._write(tmp_path, [self.HEADER,
                                   "u1\ta.wav\treplay\tS01\tP03\t-"])
        with pytest.raises(ManifestError, match="needs a device_id"):
            parse_manifest(p)

    def test_write_then_parse_is_identity(self, tmp_path):
        m = Manifest([
            UtteranceMeta("u1", "a.wav", "genuine", "S00", "P00", "-"),
            UtteranceMeta("u2", "b.wav", "replay", "S00", "P00", "D00"),
        ])
        p = tmp_path / "m.tsv"
        write_manifest(m, p)
        assert parse_manifest(p).records == m.records


class TestDeviceProfile:
    def test_validates_cutoff_order(self):
        with pytest.raises(ValueError, match="low_cutoff_hz must be in"):
            DeviceProfile("D00", 40.0, 7000.0, (), 30.0)

    def test_validates_ripple_centers(self):
        with pytest.raises(ValueError, match="below 4000"):
            DeviceProfile("D00", 100.0, 7000.0, ((4500.0, 3.0),), 30.0)

    def test_json_roundtrip(self, tmp_path):
        profiles = [
            DeviceProfile("D00", 80.0, 7000.0, ((500.0, 3.0), (1500.0, -2.0)), 35.0),
            DeviceProfile("H00", 120.0, 6500.0, (), 28.0),
        ]
        p = tmp_path / "devices.json"
        save_device_profiles(profiles, p)
        assert load_device_profiles(p) == profiles


def _tone(freq, seconds=0.5, amp=0.9):
    t = np.arange(int(seconds * SR)) / SR
    return AudioSignal(amp * np.sin(2 * np.pi * freq * t), SR)


def _band_energy(signal, f_lo, f_hi):
    frames = frame_signal(signal, 400, 160)
    spec = power_spectrum(frames, 512, SR)
    freqs = spec.bin_freqs()
    mask = (freqs >= f_lo) & (freqs < f_hi)
    return float(spec.values[:, mask].sum())


class TestReplayChannel:
    PROFILE = DeviceProfile("D00", 80.0, 6000.0, ((800.0, 3.0),), 40.0)

    def test_zero_in_zero_out(self):
        sig = AudioSignal(np.zeros(4000), SR)
        out = apply_replay_channel(sig, self.PROFILE, seed=3)
        np.testing.assert_array_equal(out.samples, 0.0)

    def test_length_preserved(self):
        sig = _tone(440.0)
        out = apply_replay_channel(sig, self.PROFILE, seed=3)
        assert len(out) == len(sig)

    def test_seed_determinism(self):
        sig = _tone(440.0)
        a = apply_replay_channel(sig, self.PROFILE, seed=3)
        b = apply_replay_channel(sig, self.PROFILE, seed=3)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_different_seed_differs(self):
        sig = _tone(440.0)
        a = apply_replay_channel(sig, self.PROFILE, seed=3)
        b = apply_replay_channel(sig, self.PROFILE, seed=4)
        assert np.any(a.samples != b.samples)

    def test_high_tone_attenuated_at_least_20db(self):
        # 7 kHz tone against a 6 kHz high cutoff: band-pass roll-off plus
        # the shared high-shelf cut must remove >= 20 dB of band energy.
        sig = _tone(7000.0)
        out = apply_replay_channel(sig, self.PROFILE, seed=11)
        before = _band_energy(sig, 6800.0, 7200.0)
        after = _band_energy(out, 6800.0, 7200.0)
        assert 10.0 * np.log10(before / after) >= 20.0

    def test_peak_bounded(self):
        # Ripple gain can push a mid-band tone above the input peak.
        profile = DeviceProfile("D00", 80.0, 7400.0, ((1000.0, 6.0),), 40.0)
        sig = _tone(1000.0, amp=0.99)
        out = apply_replay_channel(sig, profile, seed=5)
        assert np.max(np.abs(out.samples)) <= 0.99

    @given(n=st.integers(min_value=0, max_value=2000),
           seed=st.integers(min_value=0, max_value=2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_length_and_determinism_property(self, n, seed):
        rng = np.random.default_rng(n + 1)
        sig = AudioSignal(rng.uniform(-0.5, 0.5, size=n), SR)
        a = apply_replay_channel(sig, self.PROFILE, seed)
        b = apply_replay_channel(sig, self.PROFILE, seed)
        assert len(a) == n
        np.testing.assert_array_equal(a.samples, b.samples)


class TestSynthCorpus:
    def test_counts(self):
        cfg = SynthConfig(n_speakers=2, n_phrases=2, n_train_devices=2,
                          n_heldout_devices=1, utt_seconds=0.5, reps=1)
        signals, manifest, profiles = synth_corpus(cfg, seed=1)
        assert len(manifest.genuine_records()) == 4
        assert len(manifest.replay_records()) == 12
        assert len(signals) == len(manifest)
        assert len(profiles) == 3

    def test_device_naming(self):
        cfg = SynthConfig(n_speakers=1, n_phrases=1, n_train_devices=1,
                          n_heldout_devices=1, utt_seconds=0.5, reps=1)
        _, manifest, profiles = synth_corpus(cfg, seed=1)
        assert manifest.device_ids() == ["D00", "H00"]
        assert [p.device_id for p in profiles] == ["D00", "H00"]

    def test_seed_determinism(self):
        cfg = SynthConfig(n_speakers=1, n_phrases=2, n_train_devices=1,
                          n_heldout_devices=1, utt_seconds=0.5, reps=1)
        sig_a, man_a, prof_a = synth_corpus(cfg, seed=9)
        sig_b, man_b, prof_b = synth_corpus(cfg, seed=9)
        assert man_a.records == man_b.records
        assert prof_a == prof_b
        for a, b in zip(sig_a, sig_b):
            np.testing.assert_array_equal(a.samples, b.samples)

    def test_different_seeds_differ(self):
        cfg = SynthConfig(n_speakers=1, n_phrases=1, n_train_devices=1,
                          n_heldout_devices=1, utt_seconds=0.5, reps=1)
        sig_a, _, _ = synth_corpus(cfg, seed=9)
        sig_b, _, _ = synth_corpus(cfg, seed=10)
        assert np.any(sig_a[0].samples != sig_b[0].samples)

    def test_invalid_config(self):
        with pytest.raises(ValueError, match="invalid config"):
            SynthConfig(n_speakers=0)
        with pytest.raises(ValueError, match="utt_seconds"):
            SynthConfig(utt_seconds=0.1)

    @given(n_spk=st.integers(1, 3), n_phr=st.integers(1, 2),
           n_train=st.integers(1, 2), n_held=st.integers(1, 2),
           reps=st.integers(1, 2), seed=st.integers(0, 1000))
    @settings(max_examples=10, deadline=None)
    def test_manifest_invariants_hold(self, n_spk, n_phr, n_train, n_held,
                                      reps, seed):
        cfg = SynthConfig(n_speakers=n_spk, n_phrases=n_phr,
                          n_train_devices=n_train, n_heldout_devices=n_held,
                          utt_seconds=0.5, reps=reps)
        signals, manifest, _ = synth_corpus(cfg, seed=seed)
        # Manifest/UtteranceMeta constructors enforce the invariants; the
        # counts confirm the generator's arithmetic.
        n_gen = n_spk * n_phr * reps
        assert len(manifest.genuine_records()) == n_gen
        assert len(manifest.replay_records()) == n_gen * (n_train + n_held)
        for sig in signals:
            assert np.max(np.abs(sig.samples)) < 1.0

    def test_replay_cue_measurable_for_every_pair(self):
        cfg = SynthConfig(n_speakers=2, n_phrases=2, n_train_devices=2,
                          n_heldout_devices=2, utt_seconds=1.0, reps=1)
        signals, manifest, _ = synth_corpus(cfg, seed=123)
        by_id = {rec.utt_id: sig for rec, sig in zip(manifest, signals)}
        for rec in manifest.replay_records():
            source_id = rec.utt_id.rsplit("-", 1)[0] + "-live"
            e_src = _band_energy(by_id[source_id], 6000.0, 8000.0)
            e_rep = _band_energy(by_id[rec.utt_id], 6000.0, 8000.0)
            assert e_rep < e_src, rec.utt_id


class TestChannelGainLinkage:
    def test_power_gain_matches_measured_shift(self):
        # Broadband input: per-band output/input energy ratio should match
        # the channel's band-averaged power gain.
        rng = np.random.default_rng(5)
        sig = AudioSignal(rng.uniform(-0.5, 0.5, size=SR), SR)
        profile = DeviceProfile("D00", 60.0, 7400.0, ((1200.0, 4.0),), 40.0)
        out = apply_replay_channel(sig, profile, seed=2)
        for f_lo, f_hi in [(1000.0, 1500.0), (3000.0, 4000.0),
                           (6200.0, 7000.0)]:
            ratio = _band_energy(out, f_lo, f_hi) / _band_energy(sig, f_lo, f_hi)
            centers = np.linspace(f_lo, f_hi, 200)
            predicted = float(np.mean(channel_power_gain(profile, centers)))
            assert abs(np.log(ratio) - np.log(predicted)) < 0.5
