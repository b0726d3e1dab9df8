"""Per-parser calibration and conformal p-values.

Calibration scores every training record against the template it matches
and files the score under that template. A new record's p-value for a
template is the fraction of that template's calibration scores at least as
large as the record's own score: small p means the record is unusually
nonconforming for that event class.
"""

from __future__ import annotations

import json
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BundleError, EmptyCorpus, EmptyTemplateSet, UnknownTemplate
from .nonconformity import score_against_set, weighted_score
from .templates import EventTemplate, TemplateSet, list_templates

BUNDLE_VERSION = 1


@dataclass
class CalibrationModel:
    """Per-template reservoirs of training nonconformity scores."""

    parser_name: str
    template_set: TemplateSet
    calib: dict[str, list[float]]  # ascending per template
    total_count: int


@dataclass
class PValueSet:
    """One p-value per template of a parser's model, for one record."""

    parser_name: str
    pvalues: dict[str, float] = field(default_factory=dict)

    def max_p(self) -> float:
        return max(self.pvalues.values(), default=0.0)


def calibrate(ts: TemplateSet, training) -> CalibrationModel:
    """Score every training record against its matched template.

    Identical token sequences are scored once and their score replicated, so
    the calibration lists still hold one entry per record.
    """
    if not ts.templates:
        raise EmptyTemplateSet(f"{ts.parser_name} has no templates")
    training = list(training)
    if not training:
        raise EmptyCorpus("no calibration records")

    calib: dict[str, list[float]] = {t.template_id: [] for t in ts.templates}
    cache: dict[tuple[str, ...], tuple[str, float]] = {}
    for rec in training:
        hit = cache.get(rec.tokens)
        if hit is None:
            scored = score_against_set(ts, rec)
            hit = (scored.argmin, scored.min_score)
            cache[rec.tokens] = hit
        calib[hit[0]].append(hit[1])
    for scores in calib.values():
        scores.sort()
    return CalibrationModel(parser_name=ts.parser_name, template_set=ts,
                            calib=calib, total_count=len(training))


def pvalue(model: CalibrationModel, template_id: str, alpha_star: float) -> float:
    """Fraction of the template's calibration scores >= ``alpha_star``.

    An empty calibration class cannot vouch for conformity, so its p-value
    is 0.
    """
    if template_id not in model.calib:
        raise UnknownTemplate(template_id)
    scores = model.calib[template_id]
    if not scores:
        return 0.0
    return (len(scores) - bisect_left(scores, alpha_star)) / len(scores)


def pvalues_for(model: CalibrationModel, record) -> PValueSet:
    """P-value of the record under every template of the model."""
    out = PValueSet(parser_name=model.parser_name)
    for tmpl in model.template_set.templates:
        alpha_star = weighted_score(tmpl.tokens, record)
        out.pvalues[tmpl.template_id] = pvalue(model, tmpl.template_id, alpha_star)
    return out


# ---------------------------------------------------------------------------
# Bundle persistence (byte-stable JSON)
# ---------------------------------------------------------------------------

def _model_to_doc(model: CalibrationModel) -> dict:
    ts = model.template_set
    return {
        "parser_name": model.parser_name,
        "parser_params": ts.parser_params,
        "templates": [[t.template_id, list(t.tokens), t.support]
                      for t in list_templates(ts)],
        "calibration": {tid: scores for tid, scores in model.calib.items()},
        "total_count": model.total_count,
    }


def _model_from_doc(doc: dict) -> CalibrationModel:
    ts = TemplateSet(parser_name=doc["parser_name"],
                     parser_params=doc["parser_params"])
    for template_id, tokens, support in doc["templates"]:
        ts.templates.append(EventTemplate(template_id=template_id,
                                          tokens=tuple(tokens),
                                          support=support))
    return CalibrationModel(parser_name=doc["parser_name"], template_set=ts,
                            calib={tid: list(scores)
                                   for tid, scores in doc["calibration"].items()},
                            total_count=doc["total_count"])


def bundle_to_bytes(models: list[CalibrationModel], schema_doc: dict) -> bytes:
    doc = {
        "bundle_version": BUNDLE_VERSION,
        "schema": schema_doc,
        "models": [_model_to_doc(m) for m in models],
    }
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def save_bundle(models: list[CalibrationModel], schema_doc: dict, path) -> None:
    """Atomic write: the bundle appears complete or not at all."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(bundle_to_bytes(models, schema_doc))
    tmp.replace(path)


def load_bundle(path) -> tuple[list[CalibrationModel], dict]:
    """Load a bundle; raises :class:`BundleError` when unusable."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise BundleError(f"cannot read bundle {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("bundle_version") != BUNDLE_VERSION:
        raise BundleError(f"unsupported bundle version in {path}")
    try:
        models = [_model_from_doc(m) for m in doc["models"]]
        schema_doc = doc["schema"]
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleError(f"malformed bundle {path}: {exc}") from exc
    return models, schema_doc
