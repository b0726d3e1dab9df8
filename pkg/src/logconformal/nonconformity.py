"""Weighted edit-distance scoring of log records against event templates.

The nonconformity of a record with respect to a template is the sum of a
positional sigmoid weight over the minimal token-level edit script turning
the template into the record:

    score = sum_i 1 / (1 + exp(x_i - v))

where x_i is the 1-based record position touched by the i-th edit and v
centers the sigmoid. Edits near the front of a record (the constant part of
an event) weigh close to 1; edits in the tail (variable fields) decay toward
0. A wildcard token on the template side matches exactly one record token at
zero cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EmptyTemplateSet
from .templates import WILDCARD, TemplateSet

INSERT = "insert"
DELETE = "delete"
REPLACE = "replace"


@dataclass(slots=True)
class EditScript:
    """Minimal edit script; each op is a (kind, 1-based record position) pair.

    Positions index the record for replace/insert; for delete they give the
    index the removed template token would occupy in the record.
    """

    ops: tuple[tuple[str, int], ...]

    @property
    def n(self) -> int:
        return len(self.ops)


@dataclass(frozen=True, slots=True)
class ScoreParams:
    """Sigmoid center, in units of token index. Must be positive."""

    v: float

    def __post_init__(self):
        if not self.v > 0:
            raise ValueError(f"sigmoid center must be > 0, got {self.v}")


@dataclass(slots=True)
class ScoreSet:
    """Per-template scores for one record, with the best template singled out."""

    scores: dict[str, float]
    min_score: float
    argmin: str


def _tokens_of(obj) -> tuple[str, ...]:
    tokens = getattr(obj, "tokens", obj)
    return tuple(tokens)


def edit_script(a, b) -> EditScript:
    """Minimal-cost edit script transforming token sequence ``a`` into ``b``.

    Unit costs; a ``<*>`` in ``a`` matches any single token of ``b`` for
    free. Among minimal alignments the backtrace deterministically prefers
    match, then replace, then delete, then insert, working backward from the
    sequence ends.
    """
    a = _tokens_of(a)
    b = _tokens_of(b)
    m, n = len(a), len(b)

    # dp[i][j] = min ops to turn a[:i] into b[:j]
    dp = [list(range(n + 1))]
    for i in range(1, m + 1):
        prev = dp[i - 1]
        row = [i] + [0] * n
        ai = a[i - 1]
        wild = ai == WILDCARD
        for j in range(1, n + 1):
            sub = prev[j - 1] + (0 if wild or ai == b[j - 1] else 1)
            dele = prev[j] + 1
            ins = row[j - 1] + 1
            row[j] = sub if sub <= dele and sub <= ins else (dele if dele <= ins else ins)
        dp.append(row)

    ops: list[tuple[str, int]] = []
    i, j = m, n
    while i > 0 or j > 0:
        here = dp[i][j]
        if i > 0 and j > 0 and dp[i - 1][j - 1] == here and (a[i - 1] == WILDCARD or a[i - 1] == b[j - 1]):
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and dp[i - 1][j - 1] + 1 == here:
            ops.append((REPLACE, j))
            i -= 1
            j -= 1
        elif i > 0 and dp[i - 1][j] + 1 == here:
            ops.append((DELETE, j + 1))
            i -= 1
        else:
            ops.append((INSERT, j))
            j -= 1
    ops.reverse()
    return EditScript(ops=tuple(ops))


def _weight(x: int, v: float) -> float:
    t = x - v
    if t > 700.0:  # exp overflow guard; weight is ~0 long before this
        return 0.0
    return 1.0 / (1.0 + math.exp(t))


def default_center(template, record) -> float:
    """Per-pair sigmoid center: the mean of the two token counts."""
    return (len(_tokens_of(template)) + len(_tokens_of(record))) / 2.0


def weighted_score(template, record, params: ScoreParams | None = None) -> float:
    """Nonconformity of ``record`` against ``template``.

    With ``params`` omitted, the sigmoid center defaults to the mean of the
    two token counts, so edits in the first half of a record weigh > 0.5.
    """
    a = _tokens_of(template)
    b = _tokens_of(record)
    if not a and not b:
        return 0.0
    v = params.v if params is not None else default_center(a, b)
    script = edit_script(a, b)
    if not script.ops:
        return 0.0
    return sum(_weight(x, v) for _, x in script.ops)


def score_against_set(ts: TemplateSet, record, params: ScoreParams | None = None) -> ScoreSet:
    """Score a record against every template of a set.

    Each pair gets its own default sigmoid center unless ``params`` pins one.
    Ties on the minimum go to the lexicographically smaller template id.
    """
    if not ts.templates:
        raise EmptyTemplateSet(f"{ts.parser_name} has no templates")
    tokens = _tokens_of(record)
    scores: dict[str, float] = {}
    best_id = None
    best = math.inf
    for tmpl in ts.templates:
        s = weighted_score(tmpl.tokens, tokens, params)
        scores[tmpl.template_id] = s
        if s < best or (s == best and tmpl.template_id < best_id):
            best = s
            best_id = tmpl.template_id
    return ScoreSet(scores=scores, min_score=best, argmin=best_id)
