"""Equal error rate over pooled utterance scores.

Genuine is the accept class. At threshold t the false-acceptance rate is
the fraction of replay scores >= t (ties accepted) and the false-rejection
rate is the fraction of genuine scores < t. Both are step functions of t;
the EER is their crossing, linearly interpolated between the adjacent
operating points where the sign of (FAR - FRR) flips.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import GENUINE_LABEL, REPLAY_LABEL, Manifest


@dataclass(frozen=True)
class ScoreRecord:
    utt_id: str
    score: float
    label: str

    def __post_init__(self):
        if self.label not in (GENUINE_LABEL, REPLAY_LABEL):
            raise ValueError(f"unknown label {self.label!r}")
        if not np.isfinite(self.score):
            raise ValueError(f"score for {self.utt_id!r} is not finite")


def compute_eer(records: list[ScoreRecord]) -> tuple[float, float]:
    """Return (eer, threshold) from labeled scores.

    Sweeps the sorted unique scores (every achievable operating point) plus
    a sentinel past the maximum, then interpolates at the sign change of
    FAR - FRR.
    """
    genuine = np.array([r.score for r in records if r.label == GENUINE_LABEL])
    replay = np.array([r.score for r in records if r.label == REPLAY_LABEL])
    if genuine.size == 0 or replay.size == 0:
        raise ValueError("need at least one genuine and one replay score")

    thresholds = np.unique(np.concatenate([genuine, replay]))
    thresholds = np.append(thresholds, thresholds[-1] + 1.0)
    # score >= t accepted: counts via searchsorted on sorted class scores
    genuine_sorted = np.sort(genuine)
    replay_sorted = np.sort(replay)
    far = 1.0 - np.searchsorted(replay_sorted, thresholds, side="left") / replay.size
    frr = np.searchsorted(genuine_sorted, thresholds, side="left") / genuine.size

    diff = far - frr
    exact = np.flatnonzero(diff == 0.0)
    if exact.size:
        i = exact[0]
        return float(far[i]), float(thresholds[i])
    # diff starts at +1 (everything accepted) and ends at -1; find the flip
    i = int(np.flatnonzero(diff[:-1] > 0)[-1])
    alpha = diff[i] / (diff[i] - diff[i + 1])
    eer = far[i] + alpha * (far[i + 1] - far[i])
    threshold = thresholds[i] + alpha * (thresholds[i + 1] - thresholds[i])
    return float(eer), float(threshold)


# ---------------------------------------------------------------------------
# Score file I/O: TSV utt_id <tab> score <tab> label
# ---------------------------------------------------------------------------

def write_scores(records: list[ScoreRecord], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{r.utt_id}\t{r.score!r}\t{r.label}" for r in records]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_scores(path, manifest: Manifest | None = None) -> list[ScoreRecord]:
    """Read a score TSV; '-' labels are filled from the manifest if given."""
    labels = {r.utt_id: r.label for r in manifest} if manifest else {}
    records = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8")
                                  .splitlines(), start=1):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 fields, got "
                             f"{len(fields)}")
        utt_id, score, label = fields
        if label == "-":
            if utt_id not in labels:
                raise ValueError(f"{path}:{lineno}: no label for {utt_id!r} "
                                 f"and none found in the manifest")
            label = labels[utt_id]
        elif utt_id in labels and labels[utt_id] != label:
            raise ValueError(f"{path}:{lineno}: label {label!r} disagrees "
                             f"with manifest {labels[utt_id]!r}")
        records.append(ScoreRecord(utt_id, float(score), label))
    if not records:
        raise ValueError(f"{path}: no score records")
    return records
