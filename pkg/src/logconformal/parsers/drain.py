"""Fixed-depth parse-tree template miner.

Records are routed through a shallow prefix tree: the first level is keyed
by token count, the next levels by leading tokens (tokens carrying digits
are keyed as the wildcard). Leaf groups hold clusters; a record joins the
most similar cluster when the fraction of positions with exactly equal
tokens reaches the similarity threshold, and every differing position of
the cluster template becomes a wildcard. Otherwise the record seeds a new
cluster.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..templates import WILDCARD


def _has_digit(token: str) -> bool:
    return any(ch.isdigit() for ch in token)


@dataclass
class _Cluster:
    serial: int
    template: list[str]
    member_ids: list[int] = field(default_factory=list)


class _Node:
    __slots__ = ("children", "clusters")

    def __init__(self):
        self.children: dict[str, _Node] = {}
        self.clusters: list[_Cluster] = []


class DrainTree:
    def __init__(self, depth: int = 4, sim_threshold: float = 0.5,
                 max_children: int = 100):
        # depth counts root, token-count level, leading-token levels and the
        # leaf group level, so depth 4 keys one leading token.
        self.lead_levels = depth - 3
        self.sim_threshold = sim_threshold
        self.max_children = max_children
        self.root = _Node()
        self.clusters: list[_Cluster] = []

    def _path_tokens(self, tokens) -> list[str]:
        # never key on the final token; it is usually a variable tail
        usable = max(len(tokens) - 1, 0)
        return [t for t in tokens[:min(self.lead_levels, usable)]]

    def _similarity(self, template, tokens) -> tuple[float, int]:
        same = 0
        params = 0
        for t, o in zip(template, tokens):
            if t == WILDCARD:
                params += 1
            elif t == o:
                same += 1
        return (same / len(template) if template else 1.0), params

    def _search(self, tokens) -> _Cluster | None:
        node = self.root.children.get(str(len(tokens)))
        if node is None:
            return None
        for tok in self._path_tokens(tokens):
            child = node.children.get(tok) or node.children.get(WILDCARD)
            if child is None:
                return None
            node = child
        best = None
        best_sim = -1.0
        best_params = -1
        for cluster in node.clusters:
            sim, params = self._similarity(cluster.template, tokens)
            if sim > best_sim or (sim == best_sim and params > best_params):
                best, best_sim, best_params = cluster, sim, params
        if best is not None and best_sim >= self.sim_threshold:
            return best
        return None

    def _insert(self, cluster: _Cluster):
        node = self.root.children.setdefault(str(len(cluster.template)), _Node())
        for tok in self._path_tokens(cluster.template):
            key = WILDCARD if _has_digit(tok) else tok
            if key in node.children:
                node = node.children[key]
            elif WILDCARD in node.children:
                if len(node.children) < self.max_children:
                    node = node.children.setdefault(key, _Node())
                else:
                    node = node.children[WILDCARD]
            elif len(node.children) + 1 < self.max_children:
                node = node.children.setdefault(key, _Node())
            else:
                node = node.children.setdefault(WILDCARD, _Node())
        node.clusters.append(cluster)

    def add(self, tokens, line_id: int):
        cluster = self._search(tokens)
        if cluster is None:
            cluster = _Cluster(serial=len(self.clusters) + 1, template=list(tokens))
            self.clusters.append(cluster)
            self._insert(cluster)
        else:
            cluster.template = [t if t == o or t == WILDCARD else WILDCARD
                                for t, o in zip(cluster.template, tokens)]
        cluster.member_ids.append(line_id)


def fit_drain(records, depth: int = 4, sim_threshold: float = 0.5,
              max_children: int = 100):
    """Group records; returns (clusters in creation order)."""
    tree = DrainTree(depth=depth, sim_threshold=sim_threshold,
                     max_children=max_children)
    for rec in records:
        tree.add(rec.tokens, rec.line_id)
    return tree.clusters
