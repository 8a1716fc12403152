"""Replay-attack detection pipeline with warped filterbank features,
per-band discriminability probing, GMM scoring, and EER evaluation."""

from .archive import FeatureArchive, read_archive, write_archive
from .corpus import (
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
from .errors import (
    ArchiveFormatError,
    DegenerateBandError,
    ManifestError,
    ReplaykitError,
    SingularComponentError,
    WavFormatError,
)
from .filterbank import (
    FeatureKind,
    FeatureMatrix,
    FilterBank,
    WarpKind,
    append_deltas,
    build_filterbank,
    cepstral_features,
    fbank_features,
    warp,
    warp_inverse,
)
from .fratio import (
    FRatioPattern,
    ProbeReport,
    compare_datasets,
    fratio_pattern,
    pattern_dispersion,
    probe_factor,
)
from .gmm import (
    Gmm,
    GmmPairModel,
    TrainConfig,
    load_pair_model,
    log_likelihood,
    save_pair_model,
    score_utterance,
    train_gmm,
)
from .metrics import ScoreRecord, compute_eer, read_scores, write_scores
from .spectrum import FrameMatrix, PowerSpectrogram, dct_ii, frame_signal, power_spectrum
from .study import (
    ExtractionConfig,
    StudyConfig,
    StudyReport,
    extract_features,
    feature_tag,
    run_study,
)

__version__ = "0.1.0"
