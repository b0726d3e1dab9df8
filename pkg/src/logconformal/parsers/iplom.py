"""Iterative-partitioning template miner.

Three partitioning passes, each refining the previous one:

1. by token count;
2. by the token position with the fewest distinct values;
3. by a position pair whose values co-occur as a bijection (1-1); for 1-M /
   M-1 relations the single-valued side splits the partition when its
   cardinality ratio stays below ``lower_bound``.

A partition already dominated by constant positions (fraction of
single-valued positions at or above ``upper_bound``) is left alone after
pass 1. Split products whose relative support falls below
``partition_support_threshold`` are pooled into a leftover partition at that
step. Finally each partition becomes one template: positions with a single
surviving value stay literal, the rest become wildcards.
"""

from __future__ import annotations

from collections import defaultdict

from ..templates import WILDCARD


def _distinct_per_position(rows) -> list[set]:
    width = len(rows[0])
    distinct = [set() for _ in range(width)]
    for row in rows:
        for i, tok in enumerate(row):
            distinct[i].add(tok)
    return distinct


def _apply_support_threshold(buckets, parent_size, threshold):
    """Route under-supported split products into one leftover bucket."""
    if threshold <= 0.0:
        return list(buckets)
    kept = []
    leftovers = []
    for bucket in buckets:
        if len(bucket) / parent_size < threshold:
            leftovers.extend(bucket)
        else:
            kept.append(bucket)
    if leftovers:
        kept.append(leftovers)
    return kept


def _split_by_position(rows, pos):
    by_value: dict[str, list] = defaultdict(list)
    for row in rows:
        by_value[row[0][pos]].append(row)
    return [by_value[key] for key in by_value]


def _goodness(rows) -> float:
    distinct = _distinct_per_position(rows)
    if not distinct:
        return 1.0
    return sum(1 for d in distinct if len(d) == 1) / len(distinct)


def _step2(rows, upper_bound):
    if len(rows) <= 1 or not rows[0][0]:
        return [rows]
    if _goodness([r[0] for r in rows]) >= upper_bound:
        return [rows]
    distinct = _distinct_per_position([r[0] for r in rows])
    pos = min(range(len(distinct)), key=lambda i: (len(distinct[i]), i))
    if len(distinct[pos]) <= 1:
        return [rows]
    return _split_by_position(rows, pos)


def _step3(rows, lower_bound):
    if len(rows) <= 1:
        return [rows]
    tokens = [r[0] for r in rows]
    distinct = _distinct_per_position(tokens)
    varying = [i for i, d in enumerate(distinct) if len(d) > 1]
    if len(varying) < 2:
        return [rows]
    p1, p2 = sorted(varying, key=lambda i: (len(distinct[i]), i))[:2]
    forward: dict[str, set] = defaultdict(set)
    backward: dict[str, set] = defaultdict(set)
    for row in tokens:
        forward[row[p1]].add(row[p2])
        backward[row[p2]].add(row[p1])
    one_to = all(len(v) == 1 for v in forward.values())
    to_one = all(len(v) == 1 for v in backward.values())
    if one_to and to_one:
        return _split_by_position(rows, p1)
    if one_to and len(distinct[p1]) / len(rows) <= lower_bound:
        return _split_by_position(rows, p1)
    if to_one and len(distinct[p2]) / len(rows) <= lower_bound:
        return _split_by_position(rows, p2)
    return [rows]


def fit_iplom(records, partition_support_threshold: float = 0.0,
              lower_bound: float = 0.25, upper_bound: float = 0.9):
    """Partition records; returns a list of (template_tokens, line_ids)."""
    by_count: dict[int, list] = defaultdict(list)
    for rec in records:
        by_count[len(rec.tokens)].append((rec.tokens, rec.line_id))

    final = []
    for count in sorted(by_count):
        level1 = by_count[count]
        level2 = []
        for part in _apply_support_threshold(
                _step2(level1, upper_bound), len(level1),
                partition_support_threshold):
            level2.append(part)
        for part in level2:
            for out in _apply_support_threshold(
                    _step3(part, lower_bound), len(part),
                    partition_support_threshold):
                final.append(out)

    described = []
    for part in final:
        rows = [r[0] for r in part]
        ids = [r[1] for r in part]
        if rows[0]:
            distinct = _distinct_per_position(rows)
            template = [next(iter(d)) if len(d) == 1 else WILDCARD for d in distinct]
        else:
            template = []
        described.append((template, ids))
    described.sort(key=lambda item: min(item[1]))
    return described
