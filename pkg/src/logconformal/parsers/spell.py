"""Longest-common-subsequence template miner.

Each record is compared with the templates of existing same-length groups;
the group whose literal tokens share the longest common subsequence with
the record wins, provided that length reaches the threshold fraction of the
record length. Positions where the merged record disagrees with the group
template become wildcards. Records whose exact token sequence was seen
before short-circuit into the same group.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..templates import WILDCARD


@dataclass
class _Group:
    serial: int
    template: list[str]
    member_ids: list[int] = field(default_factory=list)


def lcs_length(a, b) -> int:
    """Length of the longest common subsequence of two token sequences."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for ai in a:
        row = [0]
        for j, bj in enumerate(b, 1):
            if ai == bj:
                row.append(prev[j - 1] + 1)
            else:
                row.append(max(prev[j], row[j - 1]))
        prev = row
    return prev[-1]


def fit_spell(records, lcs_threshold: float = 0.5):
    """Group records; returns groups in creation order."""
    groups: list[_Group] = []
    seen: dict[tuple[str, ...], _Group] = {}
    for rec in records:
        tokens = rec.tokens
        group = seen.get(tokens)
        if group is None:
            best = None
            best_len = 0
            for cand in groups:
                if len(cand.template) != len(tokens):
                    continue
                literals = [t for t in cand.template if t != WILDCARD]
                common = lcs_length(literals, tokens)
                if common > best_len:
                    best, best_len = cand, common
            if best is not None and tokens and best_len >= lcs_threshold * len(tokens):
                best.template = [t if t == o or t == WILDCARD else WILDCARD
                                 for t, o in zip(best.template, tokens)]
                group = best
            else:
                group = _Group(serial=len(groups) + 1, template=list(tokens))
                groups.append(group)
            seen[tokens] = group
        group.member_ids.append(rec.line_id)
    return groups
