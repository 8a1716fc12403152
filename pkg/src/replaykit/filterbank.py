"""Frequency warps, triangular filterbanks, and Fbank/cepstral features.

Three warps share one filter-placement rule: edges are spaced uniformly on
the warped axis and triangles are evaluated at each FFT bin's warped
coordinate, so adjacent filters always sum to one between the first and
last centers. The Mel warp stretches the low-frequency axis; the inverted
Mel warp is its mirror about the band midpoint and stretches the high end,
which is where genuine and replayed speech differ most.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .spectrum import PowerSpectrogram, dct_ii

NYQUIST_HZ = 8000.0
NUM_CEPSTRA = 13
LOG_FLOOR = 1e-10


class WarpKind(enum.Enum):
    LINEAR = "linear"
    MEL = "mel"
    INVERTED_MEL = "imel"

    @classmethod
    def from_name(cls, name: str) -> "WarpKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown warp kind {name!r}; "
                         f"expected one of {[k.value for k in cls]}")


class FeatureKind(enum.Enum):
    LOG_FBANK = "fbank"
    CEPSTRA = "cepstra"
    CEPSTRA_DELTA = "cepstra-delta"


def _mel(f):
    return 2595.0 * np.log10(1.0 + f / 700.0)


def _mel_inverse(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def warp(kind: WarpKind, f) -> np.ndarray | float:
    """Map frequency in Hz to the warped coordinate; increasing, warp(0)=0."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0.0) or np.any(f > NYQUIST_HZ):
        raise ValueError(f"frequency out of range [0, {NYQUIST_HZ}]")
    if kind is WarpKind.LINEAR:
        out = f.copy()
    elif kind is WarpKind.MEL:
        out = _mel(f)
    else:
        out = _mel(NYQUIST_HZ) - _mel(NYQUIST_HZ - f)
    return out if out.ndim else float(out)


def warp_inverse(kind: WarpKind, w) -> np.ndarray | float:
    """Map a warped coordinate back to Hz."""
    w = np.asarray(w, dtype=np.float64)
    top = warp(kind, NYQUIST_HZ)
    if np.any(w < 0.0) or np.any(w > top * (1.0 + 1e-12)):
        raise ValueError(f"warped coordinate out of range [0, {top}]")
    if kind is WarpKind.LINEAR:
        out = w.copy()
    elif kind is WarpKind.MEL:
        out = _mel_inverse(w)
    else:
        out = NYQUIST_HZ - _mel_inverse(_mel(NYQUIST_HZ) - w)
    out = np.clip(out, 0.0, NYQUIST_HZ)
    return out if out.ndim else float(out)


@dataclass
class FilterBank:
    """M triangular filters over FFT bins, uniform on the warped axis."""

    kind: WarpKind
    M: int
    n_fft: int
    sample_rate: int
    f_lo: float
    f_hi: float
    weights: np.ndarray
    edges_warped: np.ndarray

    def center_freqs_hz(self) -> np.ndarray:
        return np.asarray(warp_inverse(self.kind, self.edges_warped[1:-1]))


def build_filterbank(kind: WarpKind, M: int, n_fft: int, sample_rate: int,
                     f_lo: float = 0.0, f_hi: float = NYQUIST_HZ) -> FilterBank:
    """Place M+2 uniformly spaced warped edges and rasterize the triangles.

    Raises if a filter covers no FFT bin (too many filters for the FFT
    resolution) rather than silently producing a dead band.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if not 0.0 <= f_lo < f_hi <= sample_rate / 2.0:
        raise ValueError(f"invalid band [{f_lo}, {f_hi}] for sample rate "
                         f"{sample_rate}")
    edges = np.linspace(warp(kind, f_lo), warp(kind, f_hi), M + 2)
    bin_freqs = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)
    coords = np.asarray(warp(kind, np.minimum(bin_freqs, NYQUIST_HZ)))

    weights = np.zeros((M, coords.size))
    for i in range(M):
        left, center, right = edges[i], edges[i + 1], edges[i + 2]
        rising = (coords >= left) & (coords <= center)
        falling = (coords > center) & (coords <= right)
        weights[i, rising] = (coords[rising] - left) / (center - left)
        weights[i, falling] = (right - coords[falling]) / (right - center)

    empty = np.flatnonzero(~weights.any(axis=1))
    if empty.size:
        raise ValueError(
            f"too many filters: filter(s) {empty.tolist()} span zero FFT "
            f"bins at n_fft={n_fft} (kind={kind.value}, M={M})")
    return FilterBank(kind, M, n_fft, sample_rate, f_lo, f_hi, weights, edges)


@dataclass
class FeatureMatrix:
    """Frames-by-dims feature values for one utterance."""

    values: np.ndarray
    kind: FeatureKind
    warp_kind: WarpKind | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("feature values must be 2-D (frames x dims)")
        if self.kind is FeatureKind.CEPSTRA and self.dim != NUM_CEPSTRA:
            raise ValueError(f"cepstra must have dim {NUM_CEPSTRA}")
        if self.kind is FeatureKind.CEPSTRA_DELTA and self.dim != 2 * NUM_CEPSTRA:
            raise ValueError(f"cepstra+deltas must have dim {2 * NUM_CEPSTRA}")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def fbank_features(spec: PowerSpectrogram, fb: FilterBank) -> FeatureMatrix:
    """Log filterbank energies: ln(max(weights @ power, LOG_FLOOR))."""
    if spec.n_fft != fb.n_fft or spec.sample_rate != fb.sample_rate:
        raise ValueError(
            f"spectrogram (n_fft={spec.n_fft}, rate={spec.sample_rate}) "
            f"does not match filterbank (n_fft={fb.n_fft}, "
            f"rate={fb.sample_rate})")
    energies = spec.values @ fb.weights.T
    return FeatureMatrix(np.log(np.maximum(energies, LOG_FLOOR)),
                         FeatureKind.LOG_FBANK, fb.kind)


def cepstral_features(logfb: FeatureMatrix) -> FeatureMatrix:
    """Orthonormal DCT-II of each log-Fbank frame, coefficients c0..c12."""
    if logfb.kind is not FeatureKind.LOG_FBANK:
        raise ValueError(f"expected log-Fbank features, got {logfb.kind.value}")
    if logfb.dim < NUM_CEPSTRA:
        raise ValueError(f"need at least {NUM_CEPSTRA} bands, got {logfb.dim}")
    return FeatureMatrix(dct_ii(logfb.values, NUM_CEPSTRA),
                         FeatureKind.CEPSTRA, logfb.warp_kind)


def append_deltas(feats: FeatureMatrix, window: int = 2) -> FeatureMatrix:
    """Concatenate regression-slope deltas:
    d_t = sum_n n (x_{t+n} - x_{t-n}) / (2 sum_n n^2), edges replicated."""
    if feats.kind is not FeatureKind.CEPSTRA:
        raise ValueError(f"expected cepstra, got {feats.kind.value}")
    if window < 1:
        raise ValueError("window must be >= 1")
    if feats.n_frames == 0:
        raise ValueError("cannot append deltas to an empty feature matrix")
    x = feats.values
    t = np.arange(x.shape[0])
    num = np.zeros_like(x)
    for n in range(1, window + 1):
        ahead = x[np.minimum(t + n, x.shape[0] - 1)]
        behind = x[np.maximum(t - n, 0)]
        num += n * (ahead - behind)
    deltas = num / (2.0 * sum(n * n for n in range(1, window + 1)))
    return FeatureMatrix(np.hstack([x, deltas]), FeatureKind.CEPSTRA_DELTA,
                         feats.warp_kind)
