"""Top-k ranking metrics over held-out positives.

Single-positive protocol: every instance holds one positive, ranked either
against an explicit candidate list (``sampled``) or against the full catalog
minus masked items (``full``). Per instance, HR@k is the indicator that the
positive ranked within k and NDCG@k is 1/log2(rank+1) (IDCG = 1). Ties are
broken by ascending item index, mirroring the recommender's top-k rule, so
metric values and emitted lists never disagree.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .data import ALL_ITEMS, EvalInstance
from .errors import ParameterError, ProtocolError
from .recommender import ScoreRow

PROTOCOL_SAMPLED = "sampled"
PROTOCOL_FULL = "full"

__all__ = [
    "PROTOCOL_SAMPLED",
    "PROTOCOL_FULL",
    "EvalReport",
    "rank_of_positive",
    "evaluate",
    "compare_reports",
]


@dataclass
class EvalReport:
    """HR@k / NDCG@k per k plus phase wall-clock timings."""

    protocol: str
    k_values: tuple[int, ...]
    hr: dict[int, float]
    ndcg: dict[int, float]
    n_instances: int
    wall_clock_ms: dict[str, float]

    def metric(self, name: str, k: int) -> float:
        table = {"hr": self.hr, "ndcg": self.ndcg}.get(name)
        if table is None or k not in table:
            raise ParameterError(f"no metric {name}@{k} in report")
        return table[k]

    def to_dict(self, include_timings: bool = True) -> dict:
        out = {"protocol": self.protocol, "n_instances": self.n_instances}
        for k in self.k_values:
            out[f"hr@{k}"] = self.hr[k]
            out[f"ndcg@{k}"] = self.ndcg[k]
        if include_timings:
            out["wall_clock_ms"] = dict(self.wall_clock_ms)
        return out

    def to_tsv(self) -> str:
        header = ["protocol", "n_instances"]
        row = [self.protocol, str(self.n_instances)]
        for k in self.k_values:
            header += [f"hr@{k}", f"ndcg@{k}"]
            row += [repr(self.hr[k]), repr(self.ndcg[k])]
        return "\t".join(header) + "\n" + "\t".join(row) + "\n"


def rank_of_positive(row: ScoreRow, instance: EvalInstance) -> int:
    """1-based rank of the positive, ties broken by ascending item index."""
    pos = instance.positive_item
    if pos in row.masked_items:
        raise ProtocolError(
            f"subject {instance.subject_id}: positive item {pos} is masked")
    scores = row.scores
    pos_score = scores[pos]
    if instance.candidate_items is ALL_ITEMS:
        higher = int(np.count_nonzero(scores > pos_score))
        tied_before = int(np.count_nonzero(scores[:pos] == pos_score))
        return 1 + higher + tied_before
    cands = np.asarray(instance.candidate_items, dtype=np.int64)
    cand_scores = scores[cands]
    higher = int(np.count_nonzero(cand_scores > pos_score))
    tied_before = int(np.count_nonzero((cand_scores == pos_score) & (cands < pos)))
    return 1 + higher + tied_before


def _detect_protocol(instances) -> str:
    sampled = {inst.candidate_items is not ALL_ITEMS for inst in instances}
    if len(sampled) > 1:
        raise ProtocolError("instances mix sampled-candidate and full-ranking forms")
    return PROTOCOL_SAMPLED if sampled.pop() else PROTOCOL_FULL


def evaluate(scorer, instances, k_list=(10,)) -> EvalReport:
    """Score every instance's subject and aggregate HR@k / NDCG@k.

    *scorer* maps a subject id to a :class:`ScoreRow`; score rows are cached
    per subject. Means use exact summation, so instance order is irrelevant.
    """
    instances = tuple(instances)
    if not instances:
        raise ProtocolError("no evaluation instances")
    k_values = tuple(sorted({int(k) for k in k_list}))
    if not k_values or k_values[0] < 1:
        raise ParameterError(f"invalid k list {k_list!r}")
    protocol = _detect_protocol(instances)

    rows: dict[int, ScoreRow] = {}
    t_score = 0.0
    t0 = time.perf_counter()
    ranks = []
    for inst in instances:
        if inst.subject_id not in rows:
            t = time.perf_counter()
            rows[inst.subject_id] = scorer(inst.subject_id)
            t_score += time.perf_counter() - t
        ranks.append(rank_of_positive(rows[inst.subject_id], inst))
    hr = {k: math.fsum(1.0 for r in ranks if r <= k) / len(ranks) for k in k_values}
    ndcg = {k: math.fsum(1.0 / math.log2(r + 1) for r in ranks if r <= k) / len(ranks)
            for k in k_values}
    total = time.perf_counter() - t0
    timings = {"scoring": t_score * 1e3, "metrics": (total - t_score) * 1e3}
    return EvalReport(protocol, k_values, hr, ndcg, len(instances), timings)


def compare_reports(a: EvalReport, b: EvalReport) -> dict:
    """Per-metric differences (b - a) and relative change against *a*."""
    if a.protocol != b.protocol:
        raise ProtocolError(f"cannot compare {a.protocol} vs {b.protocol} reports")
    if a.k_values != b.k_values:
        raise ProtocolError(f"k lists differ: {a.k_values} vs {b.k_values}")
    out = {}
    for name in ("hr", "ndcg"):
        for k in a.k_values:
            va, vb = a.metric(name, k), b.metric(name, k)
            diff = vb - va
            if va:
                rel = diff / va
            else:
                rel = 0.0 if diff == 0 else math.copysign(math.inf, diff)
            out[f"{name}@{k}"] = {"a": va, "b": vb, "diff": diff, "relative": rel}
    return out
