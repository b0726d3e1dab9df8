"""Ensemble verdicts from per-parser p-value sets.

For each parser, template labels whose p-value reaches the significance
level survive as that parser's prediction set. A record is alarmed only
when every parser's prediction set is empty; any surviving label anywhere
vouches for normality.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .conformal import CalibrationModel, PValueSet, pvalues_for
from .errors import NoParsers
from .templates import natural_key

NORMAL = "normal"
ANOMALY = "anomaly"


@dataclass(frozen=True)
class DetectorConfig:
    epsilon: float = 0.27

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")


@dataclass
class Verdict:
    line_id: int
    label: str
    prediction_set: dict[str, list[tuple[str, float]]]
    max_p: float
    error: str | None = None


def decide(psets: list[PValueSet], cfg: DetectorConfig, line_id: int = 0) -> Verdict:
    """Filter each parser's p-values at epsilon and label the record.

    The boundary survives: p == epsilon stays in the prediction set.
    """
    if not psets:
        raise NoParsers("need p-value sets from at least one parser")
    prediction: dict[str, list[tuple[str, float]]] = {}
    max_p = 0.0
    for pset in psets:
        surviving = [(tid, p) for tid, p in pset.pvalues.items() if p >= cfg.epsilon]
        surviving.sort(key=lambda item: natural_key(item[0]))
        prediction[pset.parser_name] = surviving
        if pset.pvalues:
            max_p = max(max_p, max(pset.pvalues.values()))
    label = ANOMALY if all(not s for s in prediction.values()) else NORMAL
    return Verdict(line_id=line_id, label=label, prediction_set=prediction,
                   max_p=max_p)


def pvalue_sets_for(models: list[CalibrationModel], record) -> list[PValueSet]:
    return [pvalues_for(model, record) for model in models]


def detect_batch(models: list[CalibrationModel], records,
                 cfg: DetectorConfig) -> list[Verdict]:
    """One verdict per record, order preserved.

    Per-record failures are captured on the verdict's ``error`` field with a
    fail-closed anomaly label instead of aborting the batch. Identical token
    sequences share one p-value computation.
    """
    if not models:
        raise NoParsers("no trained models")
    cache: dict[tuple[str, ...], list[PValueSet]] = {}
    verdicts = []
    for rec in records:
        try:
            psets = cache.get(rec.tokens)
            if psets is None:
                psets = pvalue_sets_for(models, rec)
                cache[rec.tokens] = psets
            verdicts.append(decide(psets, cfg, line_id=rec.line_id))
        except NoParsers:
            raise
        except Exception as exc:  # per-record error channel
            verdicts.append(Verdict(line_id=rec.line_id, label=ANOMALY,
                                    prediction_set={}, max_p=0.0,
                                    error=str(exc)))
    return verdicts


def render_alarm_line(verdict: Verdict) -> str:
    """Stable line-delimited alarm record for downstream diffing."""
    doc = {
        "line_id": verdict.line_id,
        "label": verdict.label,
        "max_p": verdict.max_p,
        "prediction_set": {parser: [[tid, p] for tid, p in pairs]
                           for parser, pairs in sorted(verdict.prediction_set.items())},
    }
    if verdict.error is not None:
        doc["error"] = verdict.error
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))
