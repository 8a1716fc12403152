"""End-to-end experiment loop on the synthetic corpus.

One `run_study` call generates a corpus, extracts log-Fbank and
cepstra+delta features for all three warps, probes the speaker, phrase and
device factors (plus the train-vs-heldout dataset comparison), trains
diagonal and full-covariance mixture pairs per cepstral feature on the
train-device portion, scores the held-out-device portion, and aggregates
every dispersion and EER into a StudyReport. Everything is deterministic
under the seed, including the bytes of every file written.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .archive import FeatureArchive, write_archive
from .corpus import (
    Manifest,
    SynthConfig,
    save_device_profiles,
    synth_corpus,
    write_manifest,
    write_wav,
)
from .filterbank import (
    FeatureKind,
    FeatureMatrix,
    WarpKind,
    append_deltas,
    build_filterbank,
    cepstral_features,
    fbank_features,
)
from .fratio import ProbeReport, compare_datasets, normalized_shapes, probe_factor
from .gmm import GmmPairModel, TrainConfig, save_pair_model, score_utterance, train_gmm
from .metrics import ScoreRecord, compute_eer, write_scores
from .spectrum import frame_signal, power_spectrum

FBANK_TAGS = {WarpKind.LINEAR: "L-Fbank", WarpKind.MEL: "M-Fbank",
              WarpKind.INVERTED_MEL: "IM-Fbank"}
CEPSTRA_TAGS = {WarpKind.LINEAR: "LFCC", WarpKind.MEL: "MFCC",
                WarpKind.INVERTED_MEL: "IMFCC"}
PROBE_FACTORS_ORDER = ("speaker", "phrase", "device")
COV_KINDS_ORDER = ("diag", "full")


def feature_tag(warp: WarpKind, feature: FeatureKind) -> str:
    """Conventional name of a feature stream, e.g. IM-Fbank or IMFCC+D."""
    if feature is FeatureKind.LOG_FBANK:
        return FBANK_TAGS[warp]
    tag = CEPSTRA_TAGS[warp]
    return tag + "+D" if feature is FeatureKind.CEPSTRA_DELTA else tag


@dataclass(frozen=True)
class ExtractionConfig:
    warp: WarpKind
    feature: FeatureKind
    bands: int = 23
    frame_len: int = 400
    hop: int = 160
    n_fft: int = 512
    delta_window: int = 2

    def to_dict(self) -> dict:
        return {"warp": self.warp.value, "feature": self.feature.value,
                "bands": self.bands, "frame_len": self.frame_len,
                "hop": self.hop, "n_fft": self.n_fft,
                "delta_window": self.delta_window}


def extract_features(signal, config: ExtractionConfig) -> FeatureMatrix:
    """Run one utterance through framing, spectra, filterbank and, if
    requested, cepstra and deltas."""
    fb = build_filterbank(config.warp, config.bands, config.n_fft,
                          signal.sample_rate)
    spec = power_spectrum(frame_signal(signal, config.frame_len, config.hop),
                          config.n_fft, signal.sample_rate)
    feats = fbank_features(spec, fb)
    if config.feature is FeatureKind.LOG_FBANK:
        return feats
    feats = cepstral_features(feats)
    if config.feature is FeatureKind.CEPSTRA:
        return feats
    return append_deltas(feats, config.delta_window)


def build_archive(entries: dict[str, FeatureMatrix],
                  config: ExtractionConfig) -> FeatureArchive:
    return FeatureArchive(feature_tag(config.warp, config.feature),
                          config.to_dict(), entries)


# ---------------------------------------------------------------------------
# Probe report serialization
# ---------------------------------------------------------------------------

def write_probe_report(report: ProbeReport, tsv_path) -> None:
    """TSV: one row per factor value, band columns, then each row's RMS
    deviation from the mean normalized shape. A JSON document with the
    raw patterns and the scalar dispersion goes next to it."""
    shapes = normalized_shapes(report.patterns)
    mean_shape = shapes.mean(axis=0)
    contributions = ((shapes - mean_shape) ** 2).mean(axis=1) ** 0.5

    header = ["value"] + [f"F_{i + 1}" for i in range(report.n_bands)]
    header.append("dispersion_contribution")
    lines = ["\t".join(header)]
    for pattern, contrib in zip(report.patterns, contributions):
        value = pattern.condition[1] if pattern.condition else "-"
        cells = [value] + [repr(v) for v in pattern.values.tolist()]
        cells.append(repr(float(contrib)))
        lines.append("\t".join(cells))
    tsv_path = Path(tsv_path)
    tsv_path.parent.mkdir(parents=True, exist_ok=True)
    tsv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    doc = {
        "factor": report.factor,
        "warp": report.band_kind.value if report.band_kind else None,
        "bands": report.n_bands,
        "dispersion": report.dispersion,
        "patterns": [{
            "value": p.condition[1] if p.condition else "-",
            "n_genuine_frames": p.n_genuine_frames,
            "n_replay_frames": p.n_replay_frames,
            "values": p.values.tolist(),
        } for p in report.patterns],
    }
    tsv_path.with_suffix(".json").write_text(
        json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StudyConfig:
    corpus: SynthConfig = field(default_factory=SynthConfig)
    bands: int = 23
    frame_len: int = 400
    hop: int = 160
    n_fft: int = 512
    delta_window: int = 2
    n_comp: int = 64
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> dict:
        return {"corpus": dataclasses.asdict(self.corpus),
                "bands": self.bands, "frame_len": self.frame_len,
                "hop": self.hop, "n_fft": self.n_fft,
                "delta_window": self.delta_window, "n_comp": self.n_comp,
                "train": self.train.to_dict()}


@dataclass
class StudyReport:
    """Aggregated dispersions and detection results of one study run."""

    seed: int
    config: dict
    probe_dispersions: dict[str, dict[str, float]]
    dataset_dispersions: dict[str, float]
    eers: dict[str, dict[str, dict[str, float]]]

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=1) + "\n"


def _derive_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def _pool_frames(entries: dict[str, FeatureMatrix], utt_ids: list[str]):
    return np.concatenate([entries[u].values for u in utt_ids], axis=0)


def run_study(seed: int, out_dir, config: StudyConfig | None = None) -> StudyReport:
    """Run the full probing-and-detection loop; see the module docstring."""
    config = config or StudyConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    signals, manifest, profiles = synth_corpus(config.corpus, seed)
    corpus_dir = out_dir / "corpus"
    write_manifest(manifest, corpus_dir / "manifest.tsv")
    save_device_profiles(profiles, corpus_dir / "devices.json")
    for rec, sig in zip(manifest, signals):
        write_wav(sig, corpus_dir / rec.audio_path)

    # Extraction: one spectrogram per utterance, reused across warps.
    banks = {kind: build_filterbank(kind, config.bands, config.n_fft,
                                    signals[0].sample_rate)
             for kind in WarpKind}
    fbank_entries: dict[WarpKind, dict[str, FeatureMatrix]] = \
        {kind: {} for kind in WarpKind}
    ceps_entries: dict[WarpKind, dict[str, FeatureMatrix]] = \
        {kind: {} for kind in WarpKind}
    for rec, sig in zip(manifest, signals):
        spec = power_spectrum(
            frame_signal(sig, config.frame_len, config.hop),
            config.n_fft, sig.sample_rate)
        for kind in WarpKind:
            fb_feats = fbank_features(spec, banks[kind])
            fbank_entries[kind][rec.utt_id] = fb_feats
            ceps_entries[kind][rec.utt_id] = append_deltas(
                cepstral_features(fb_feats), config.delta_window)

    features_dir = out_dir / "features"
    for kind in WarpKind:
        fb_cfg = ExtractionConfig(kind, FeatureKind.LOG_FBANK, config.bands,
                                  config.frame_len, config.hop, config.n_fft,
                                  config.delta_window)
        cd_cfg = dataclasses.replace(fb_cfg, feature=FeatureKind.CEPSTRA_DELTA)
        write_archive(build_archive(fbank_entries[kind], fb_cfg),
                      features_dir / f"{kind.value}_fbank.rpfa")
        write_archive(build_archive(ceps_entries[kind], cd_cfg),
                      features_dir / f"{kind.value}_cepstra-delta.rpfa")

    # Probes on log-Fbank features, per factor and warp, plus the
    # train-vs-heldout dataset comparison.
    train_devices = {p.device_id
                     for p in profiles[:config.corpus.n_train_devices]}
    man_train = manifest.filter(
        lambda r: r.is_genuine or r.device_id in train_devices)
    man_heldout = manifest.filter(
        lambda r: r.is_genuine or r.device_id not in train_devices)

    probes_dir = out_dir / "probes"
    probe_dispersions: dict[str, dict[str, float]] = {}
    dataset_dispersions: dict[str, float] = {}
    for kind in WarpKind:
        per_factor = {}
        for factor in PROBE_FACTORS_ORDER:
            report = probe_factor(fbank_entries[kind], manifest, factor)
            write_probe_report(report,
                               probes_dir / f"{factor}_{kind.value}.tsv")
            per_factor[factor] = report.dispersion
        probe_dispersions[kind.value] = per_factor
        ds_report = compare_datasets(fbank_entries[kind], man_train,
                                     fbank_entries[kind], man_heldout)
        write_probe_report(ds_report, probes_dir / f"dataset_{kind.value}.tsv")
        dataset_dispersions[kind.value] = ds_report.dispersion

    # Detection legs: genuine model on all genuine frames, replay model on
    # train-device replay frames; score genuine plus held-out replays.
    genuine_ids = [r.utt_id for r in manifest.genuine_records()]
    train_replay_ids = [r.utt_id for r in man_train.replay_records()]
    eval_records = (manifest.genuine_records() + man_heldout.replay_records())

    eers: dict[str, dict[str, dict[str, float]]] = {}
    for kind_idx, kind in enumerate(WarpKind):
        entries = ceps_entries[kind]
        tag = feature_tag(kind, FeatureKind.CEPSTRA_DELTA)
        genuine_frames = _pool_frames(entries, genuine_ids)
        replay_frames = _pool_frames(entries, train_replay_ids)
        eers[tag] = {}
        for cov_idx, cov in enumerate(COV_KINDS_ORDER):
            g_model = train_gmm(genuine_frames, config.n_comp, cov,
                                config.train,
                                seed=_derive_seed(seed, 3, kind_idx, cov_idx, 0))
            r_model = train_gmm(replay_frames, config.n_comp, cov,
                                config.train,
                                seed=_derive_seed(seed, 3, kind_idx, cov_idx, 1))
            pair = GmmPairModel(g_model, r_model, tag, config.train.to_dict())
            stem = f"{tag.split('+')[0].lower()}_{cov}"
            save_pair_model(pair, out_dir / "models" / f"{stem}.json")

            scores = [ScoreRecord(r.utt_id,
                                  score_utterance(pair, entries[r.utt_id]),
                                  r.label)
                      for r in eval_records]
            write_scores(scores, out_dir / "scores" / f"{stem}.tsv")
            eer, threshold = compute_eer(scores)
            eers[tag][cov] = {"eer": eer, "threshold": threshold}

    report = StudyReport(seed=seed, config=config.to_dict(),
                         probe_dispersions=probe_dispersions,
                         dataset_dispersions=dataset_dispersions,
                         eers=eers)
    (out_dir / "study_report.json").write_text(report.to_json(),
                                               encoding="utf-8")
    return report
