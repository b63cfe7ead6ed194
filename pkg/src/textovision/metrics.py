"""Rank-based retrieval metrics: R@K, median/mean rank, mean inverted
rank, and mean average precision. Stateless and loop-based; pools at
evaluation scale are small."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .retrieval import Ranking


@dataclass(frozen=True)
class GroundTruth:
    """Query id to set of relevant item ids."""

    relevance: dict[str, set[str]]

    def __post_init__(self):
        for query_id, items in self.relevance.items():
            if not query_id:
                raise ValueError("ground truth contains an empty query id")
            if not items:
                raise ValueError(f"query {query_id!r} has no relevant item")
            if any(not item for item in items):
                raise ValueError(f"query {query_id!r} has an empty relevant item id")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "GroundTruth":
        relevance: dict[str, set[str]] = {}
        for query_id, item_id in pairs:
            relevance.setdefault(query_id, set()).add(item_id)
        return cls(relevance)


@dataclass(frozen=True)
class MetricReport:
    r_at: dict[int, float] = field(default_factory=dict)
    median_rank: float = 0.0
    mean_rank: float = 0.0
    mean_inverted_rank: float = 0.0
    map_score: float = 0.0


def first_relevant_rank(ranking: Ranking, truth: GroundTruth) -> int:
    """1-based position of the highest-ranked relevant item."""
    relevant = truth.relevance.get(ranking.query_id)
    if relevant is None:
        raise ValueError(f"query {ranking.query_id!r} is absent from the ground truth")
    for pos, (item_id, _) in enumerate(ranking.entries, start=1):
        if item_id in relevant:
            return pos
    raise ValueError(f"no relevant item for query {ranking.query_id!r} appears in the ranking")


def recall_at_k(ranks: Sequence[int], k: int) -> float:
    """Percentage of queries whose first relevant item lands in the top k."""
    _check_ranks(ranks)
    if k < 1:
        raise ValueError("k must be >= 1")
    return 100.0 * sum(1 for r in ranks if r <= k) / len(ranks)


def median_rank(ranks: Sequence[int]) -> float:
    """Median first-relevant rank; even counts average the two middle values."""
    _check_ranks(ranks)
    return float(statistics.median(ranks))


def mean_rank(ranks: Sequence[int]) -> float:
    _check_ranks(ranks)
    return statistics.fmean(ranks)


def mean_inverted_rank(ranks: Sequence[int]) -> float:
    """Mean of 1/rank of the first relevant item."""
    _check_ranks(ranks)
    return statistics.fmean(1.0 / r for r in ranks)


def average_precision(ranking: Ranking, truth: GroundTruth) -> float:
    """Mean over relevant items of the precision at that item's rank.

    Only relevant items present in the ranking contribute; the ranking
    must contain at least one.
    """
    relevant = truth.relevance.get(ranking.query_id)
    if relevant is None:
        raise ValueError(f"query {ranking.query_id!r} is absent from the ground truth")
    hits = 0
    precisions = []
    for pos, (item_id, _) in enumerate(ranking.entries, start=1):
        if item_id in relevant:
            hits += 1
            precisions.append(hits / pos)
    if not precisions:
        raise ValueError(f"no relevant item for query {ranking.query_id!r} appears in the ranking")
    return statistics.fmean(precisions)


def mean_average_precision(rankings: Sequence[Ranking], truth: GroundTruth) -> float:
    if not rankings:
        raise ValueError("no rankings to evaluate")
    return statistics.fmean(average_precision(r, truth) for r in rankings)


def compute_metrics(
    rankings: Sequence[Ranking],
    truth: GroundTruth,
    ks: Sequence[int] = (1, 5, 10),
) -> MetricReport:
    """Evaluate the full metric set over a list of rankings."""
    if not rankings:
        raise ValueError("no rankings to evaluate")
    ranks = [first_relevant_rank(r, truth) for r in rankings]
    return MetricReport(
        r_at={k: recall_at_k(ranks, k) for k in ks},
        median_rank=median_rank(ranks),
        mean_rank=mean_rank(ranks),
        mean_inverted_rank=mean_inverted_rank(ranks),
        map_score=mean_average_precision(rankings, truth),
    )


def _check_ranks(ranks: Sequence[int]) -> None:
    if not ranks:
        raise ValueError("rank list is empty")
    if any(r < 1 for r in ranks):
        raise ValueError("ranks are 1-based and must be >= 1")
