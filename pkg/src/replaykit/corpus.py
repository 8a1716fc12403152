"""Audio and manifest I/O plus a deterministic synthetic replay corpus.

The synthetic corpus stands in for licensed anti-spoofing data. Genuine
utterances are harmonic sources (speaker-specific fundamental) shaped by a
phrase-specific spectral envelope plus broadband noise. Replayed copies are
the genuine signals passed through a simulated playback-and-recording
channel: a device-specific band-pass with low/mid-frequency ripple, plus a
high-shelf cut above 6 kHz that is shared by every device. The shared
high-band cut is the engineered replay cue; the device-specific parts live
below 4 kHz, so cross-device variation concentrates in the low and middle
bands while the discriminative cue stays in the high bands.
"""

from __future__ import annotations

import json
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ManifestError, WavFormatError

PIPELINE_SAMPLE_RATE = 16000

# Replay cue applied to every replayed copy regardless of device: a flat
# amplitude cut above the shelf frequency.
REPLAY_SHELF_HZ = 6000.0
REPLAY_SHELF_DB = -10.0

# Width of the Gaussian gain bumps realizing a device's ripple entries.
RIPPLE_WIDTH_HZ = 300.0

GENUINE_LABEL = "genuine"
REPLAY_LABEL = "replay"
NO_DEVICE = "-"

MANIFEST_COLUMNS = ("utt_id", "audio_path", "label", "speaker_id",
                    "phrase_id", "device_id")


@dataclass
class AudioSignal:
    """Mono PCM samples in [-1.0, 1.0) with their sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("samples must be a 1-D array")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.samples.size and (np.min(self.samples) < -1.0
                                  or np.max(self.samples) >= 1.0):
            raise ValueError("samples must lie in [-1.0, 1.0)")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class UtteranceMeta:
    """One manifest row: identity, file location, label and factor values."""

    utt_id: str
    audio_path: str
    label: str
    speaker_id: str
    phrase_id: str
    device_id: str

    def __post_init__(self):
        if self.label not in (GENUINE_LABEL, REPLAY_LABEL):
            raise ManifestError(f"unknown label {self.label!r}")
        if self.label == GENUINE_LABEL and self.device_id != NO_DEVICE:
            raise ManifestError(
                f"genuine utterance {self.utt_id!r} must use device_id '-'")
        if self.label == REPLAY_LABEL and self.device_id == NO_DEVICE:
            raise ManifestError(
                f"replay utterance {self.utt_id!r} needs a device_id")

    @property
    def is_genuine(self) -> bool:
        return self.label == GENUINE_LABEL


@dataclass
class Manifest:
    """Ordered utterance records with unique ids."""

    records: list[UtteranceMeta]

    def __post_init__(self):
        if not self.records:
            raise ManifestError("manifest is empty")
        seen = set()
        for rec in self.records:
            if rec.utt_id in seen:
                raise ManifestError(f"duplicate utt_id {rec.utt_id!r}")
            seen.add(rec.utt_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def filter(self, pred) -> "Manifest":
        return Manifest([r for r in self.records if pred(r)])

    def genuine_records(self) -> list[UtteranceMeta]:
        return [r for r in self.records if r.is_genuine]

    def replay_records(self) -> list[UtteranceMeta]:
        return [r for r in self.records if not r.is_genuine]

    def device_ids(self) -> list[str]:
        return sorted({r.device_id for r in self.replay_records()})


@dataclass(frozen=True)
class DeviceProfile:
    """Playback-and-recording channel: band-pass cutoffs, low/mid ripple,
    and the noise level of the recording side."""

    device_id: str
    low_cutoff_hz: float
    high_cutoff_hz: float
    ripple: tuple[tuple[float, float], ...]
    snr_db: float

    def __post_init__(self):
        object.__setattr__(self, "ripple",
                           tuple((float(c), float(g)) for c, g in self.ripple))
        if not 50.0 <= self.low_cutoff_hz <= 300.0:
            raise ValueError("low_cutoff_hz must be in [50, 300]")
        if not 6000.0 <= self.high_cutoff_hz <= 7500.0:
            raise ValueError("high_cutoff_hz must be in [6000, 7500]")
        if self.low_cutoff_hz >= self.high_cutoff_hz:
            raise ValueError("low_cutoff_hz must be below high_cutoff_hz")
        for center, gain in self.ripple:
            if center >= 4000.0:
                raise ValueError("ripple centers must be below 4000 Hz")
            if abs(gain) > 6.0:
                raise ValueError("ripple gain must satisfy |gain_db| <= 6")
        if not 20.0 <= self.snr_db <= 40.0:
            raise ValueError("snr_db must be in [20, 40]")


# ---------------------------------------------------------------------------
# WAV I/O
# ---------------------------------------------------------------------------

def read_wav(path) -> AudioSignal:
    """Read a mono 16-bit PCM WAV at 16 kHz; sample s maps to s / 32768."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise WavFormatError(f"{path}: not a supported PCM WAV ({exc})") from exc
    if n_channels != 1:
        raise WavFormatError(f"{path}: expected mono, got {n_channels} channels")
    if sampwidth != 2:
        raise WavFormatError(f"{path}: expected 16-bit PCM, got "
                             f"{8 * sampwidth}-bit")
    if rate != PIPELINE_SAMPLE_RATE:
        raise WavFormatError(f"{path}: expected sample rate "
                             f"{PIPELINE_SAMPLE_RATE}, got {rate}")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioSignal(samples, rate)


def write_wav(signal: AudioSignal, path) -> None:
    """Write 16-bit PCM; the exact inverse of read_wav's sample mapping."""
    ints = np.round(signal.samples * 32768.0)
    ints = np.clip(ints, -32768, 32767).astype("<i2")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(signal.sample_rate)
        wf.writeframes(ints.tobytes())


# ---------------------------------------------------------------------------
# Manifest I/O
# ---------------------------------------------------------------------------

def parse_manifest(path) -> Manifest:
    """Read a TSV manifest with the exact six-column header."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ManifestError(f"{path}: empty file")
    header = tuple(lines[0].split("\t"))
    if header != MANIFEST_COLUMNS:
        raise ManifestError(
            f"{path}: bad header, missing column or wrong order; expected "
            f"{list(MANIFEST_COLUMNS)}")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != len(MANIFEST_COLUMNS):
            raise ManifestError(
                f"{path}:{lineno}: expected {len(MANIFEST_COLUMNS)} fields, "
                f"got {len(fields)}")
        records.append(UtteranceMeta(*fields))
    if not records:
        raise ManifestError(f"{path}: manifest has no records")
    return Manifest(records)


def write_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(MANIFEST_COLUMNS)]
    for r in manifest:
        lines.append("\t".join((r.utt_id, r.audio_path, r.label,
                                r.speaker_id, r.phrase_id, r.device_id)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_device_profiles(profiles: list[DeviceProfile], path) -> None:
    """Serialize profiles as a JSON array, field names as in DeviceProfile."""
    doc = [{
        "device_id": p.device_id,
        "low_cutoff_hz": p.low_cutoff_hz,
        "high_cutoff_hz": p.high_cutoff_hz,
        "ripple": [[c, g] for c, g in p.ripple],
        "snr_db": p.snr_db,
    } for p in profiles]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_device_profiles(path) -> list[DeviceProfile]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [DeviceProfile(device_id=d["device_id"],
                          low_cutoff_hz=d["low_cutoff_hz"],
                          high_cutoff_hz=d["high_cutoff_hz"],
                          ripple=tuple((c, g) for c, g in d["ripple"]),
                          snr_db=d["snr_db"])
            for d in doc]


# ---------------------------------------------------------------------------
# Replay channel
# ---------------------------------------------------------------------------

def channel_power_gain(profile: DeviceProfile, freqs: np.ndarray) -> np.ndarray:
    """Squared magnitude response of the full replay channel at `freqs`.

    Band edges follow a zero-phase 4th-order Butterworth magnitude applied
    forward and backward (so the amplitude response is the Butterworth
    magnitude squared), ripple entries are Gaussian gain bumps in dB, and
    the shared replay cue is a flat cut above REPLAY_SHELF_HZ.
    """
    return _amplitude_response(profile, np.asarray(freqs, dtype=np.float64)) ** 2


def _amplitude_response(profile: DeviceProfile, freqs: np.ndarray) -> np.ndarray:
    freqs = np.asarray(freqs, dtype=np.float64)
    amp = 1.0 / (1.0 + (freqs / profile.high_cutoff_hz) ** 8)
    highpass = np.zeros_like(freqs)
    pos = freqs > 0.0
    ratio = np.minimum(profile.low_cutoff_hz / freqs[pos], 1e30)
    highpass[pos] = 1.0 / (1.0 + ratio ** 8)
    amp = amp * highpass
    gain_db = np.zeros_like(freqs)
    for center, gain in profile.ripple:
        gain_db += gain * np.exp(-0.5 * ((freqs - center) / RIPPLE_WIDTH_HZ) ** 2)
    gain_db += np.where(freqs >= REPLAY_SHELF_HZ, REPLAY_SHELF_DB, 0.0)
    return amp * 10.0 ** (gain_db / 20.0)


def apply_replay_channel(signal: AudioSignal, profile: DeviceProfile,
                         seed: int) -> AudioSignal:
    """Pass a signal through a playback-and-recording channel.

    Zero-phase spectral filtering (length-preserving), then additive white
    noise scaled to profile.snr_db against the input RMS; silence in means
    silence out. The result is rescaled only if its peak exceeds 0.99.
    """
    x = signal.samples
    if x.size == 0:
        return AudioSignal(x.copy(), signal.sample_rate)
    freqs = np.fft.rfftfreq(x.size, d=1.0 / signal.sample_rate)
    spectrum = np.fft.rfft(x) * _amplitude_response(profile, freqs)
    y = np.fft.irfft(spectrum, n=x.size)

    in_rms = float(np.sqrt(np.mean(x ** 2)))
    if in_rms > 0.0:
        rng = np.random.default_rng(seed)
        noise_rms = in_rms * 10.0 ** (-profile.snr_db / 20.0)
        y = y + rng.standard_normal(x.size) * noise_rms

    peak = float(np.max(np.abs(y))) if y.size else 0.0
    if peak > 0.99:
        y = y * (0.99 / peak)
    return AudioSignal(y, signal.sample_rate)


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    """Corpus size and duration knobs."""

    n_speakers: int = 6
    n_phrases: int = 4
    n_train_devices: int = 3
    n_heldout_devices: int = 3
    utt_seconds: float = 2.0
    reps: int = 2

    def __post_init__(self):
        for name in ("n_speakers", "n_phrases", "n_train_devices",
                     "n_heldout_devices", "reps"):
            if getattr(self, name) < 1:
                raise ValueError(f"invalid config: {name} must be >= 1")
        if not 0.5 <= self.utt_seconds <= 10.0:
            raise ValueError("invalid config: utt_seconds must be in [0.5, 10]")


@dataclass(frozen=True)
class _PhraseEnvelope:
    """Three Gaussian spectral peaks over a flat base."""

    centers: tuple[float, float, float]
    widths: tuple[float, float, float]
    amps: tuple[float, float, float]

    def __call__(self, freqs: np.ndarray, base: float,
                 peak_scales: np.ndarray) -> np.ndarray:
        # The base keeps harmonics alive up to Nyquist so genuine signals
        # carry real energy above the replay-cue shelf.
        env = np.full_like(freqs, base)
        for c, w, a, s in zip(self.centers, self.widths, self.amps,
                              peak_scales):
            env = env + a * s * np.exp(-0.5 * ((freqs - c) / w) ** 2)
        return env


def _synth_genuine(f0: float, envelope: _PhraseEnvelope, n_samples: int,
                   rng: np.random.Generator) -> AudioSignal:
    sr = PIPELINE_SAMPLE_RATE
    t = np.arange(n_samples) / sr
    # Per-utterance delivery variation: pitch and spectral shape wander
    # around the speaker/phrase targets so classes form broad clusters
    # instead of points.
    f0 = f0 * rng.uniform(0.95, 1.05)
    base = 0.2 * rng.uniform(0.8, 1.25)
    peak_scales = rng.uniform(0.75, 1.25, size=3)
    harmonics = np.arange(1, int((sr / 2 - 1.0) / f0) + 1)
    freqs = harmonics * f0
    amps = envelope(freqs, base, peak_scales)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=harmonics.size)
    x = (amps[None, :] * np.sin(2.0 * np.pi * t[:, None] * freqs[None, :]
                                + phases[None, :])).sum(axis=1)
    # Slow amplitude modulation so frames differ beyond the noise floor.
    mod_hz = rng.uniform(2.0, 6.0)
    mod_phase = rng.uniform(0.0, 2.0 * np.pi)
    x = x * (0.7 + 0.3 * np.sin(2.0 * np.pi * mod_hz * t + mod_phase))
    x = x / np.sqrt(np.mean(x ** 2))
    x = x + rng.standard_normal(n_samples) * 10.0 ** (-30.0 / 20.0)
    x = x * (0.5 / np.max(np.abs(x)))
    return AudioSignal(x, sr)


def _derive_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def synth_corpus(config: SynthConfig, seed: int
                 ) -> tuple[list[AudioSignal], Manifest, list[DeviceProfile]]:
    """Generate a deterministic corpus of genuine and replayed utterances.

    Returns signals aligned with the manifest rows: every (speaker, phrase,
    rep) genuine utterance followed at the end by its replayed copy through
    each device. Train devices are named D00.., held-out devices H00...
    """
    rng = np.random.default_rng([seed, 0])
    fundamentals = rng.uniform(100.0, 250.0, size=config.n_speakers)
    envelopes = []
    for _ in range(config.n_phrases):
        envelopes.append(_PhraseEnvelope(
            centers=tuple(rng.uniform(300.0, 3200.0, size=3)),
            widths=tuple(rng.uniform(150.0, 400.0, size=3)),
            amps=tuple(rng.uniform(1.0, 2.5, size=3)),
        ))

    profiles = []
    n_devices = config.n_train_devices + config.n_heldout_devices
    for d in range(n_devices):
        if d < config.n_train_devices:
            device_id = f"D{d:02d}"
        else:
            device_id = f"H{d - config.n_train_devices:02d}"
        n_bumps = int(rng.integers(5, 9))
        ripple = tuple(
            (float(rng.uniform(200.0, 3800.0)), float(rng.uniform(-6.0, 6.0)))
            for _ in range(n_bumps))
        # SNR kept at the quiet end of the allowed range so the high-shelf
        # cue stays measurable against the device noise floor on every pair.
        profiles.append(DeviceProfile(
            device_id=device_id,
            low_cutoff_hz=float(rng.uniform(60.0, 280.0)),
            high_cutoff_hz=float(rng.uniform(6200.0, 7400.0)),
            ripple=ripple,
            snr_db=float(rng.uniform(28.0, 40.0)),
        ))

    n_samples = int(round(config.utt_seconds * PIPELINE_SAMPLE_RATE))
    signals: list[AudioSignal] = []
    records: list[UtteranceMeta] = []
    genuine: list[tuple[str, AudioSignal, str, str, str]] = []
    for s in range(config.n_speakers):
        for p in range(config.n_phrases):
            for r in range(config.reps):
                utt_rng = np.random.default_rng([seed, 1, s, p, r])
                sig = _synth_genuine(fundamentals[s], envelopes[p],
                                     n_samples, utt_rng)
                stem = f"S{s:02d}-P{p:02d}-R{r}"
                genuine.append((stem, sig, f"S{s:02d}", f"P{p:02d}", "live"))

    for stem, sig, spk, phr, _ in genuine:
        utt_id = f"{stem}-live"
        signals.append(sig)
        records.append(UtteranceMeta(utt_id, f"audio/{utt_id}.wav",
                                     GENUINE_LABEL, spk, phr, NO_DEVICE))
    for g_idx, (stem, sig, spk, phr, _) in enumerate(genuine):
        for d_idx, profile in enumerate(profiles):
            utt_id = f"{stem}-{profile.device_id}"
            replay = apply_replay_channel(sig, profile,
                                          _derive_seed(seed, 2, g_idx, d_idx))
            signals.append(replay)
            records.append(UtteranceMeta(utt_id, f"audio/{utt_id}.wav",
                                         REPLAY_LABEL, spk, phr,
                                         profile.device_id))

    return signals, Manifest(records), profiles
