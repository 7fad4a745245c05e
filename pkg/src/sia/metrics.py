"""Ranking metrics for response selection: R_n@k, MAP, MRR, P@1.

All functions consume already-ranked binary relevance lists (position 0 is
the top-scored candidate); tie handling happens upstream in the scorer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class RankedCase:
    """Binary relevance labels of one candidate pool, in ranked order."""

    relevance: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "relevance", tuple(self.relevance))
        if not self.relevance:
            raise ValueError("ranked case must contain at least one candidate")
        if any(r not in (0, 1) for r in self.relevance):
            raise ValueError("relevance labels must be 0 or 1")

    @property
    def n(self) -> int:
        return len(self.relevance)

    @property
    def num_positive(self) -> int:
        return sum(self.relevance)


def recall_at_k(case: RankedCase, k: int) -> float:
    """Fraction of the case's positives that appear in the top k."""
    if not 1 <= k <= case.n:
        raise ValueError(f"k must be in 1..{case.n}, got {k}")
    total = case.num_positive
    if total == 0:
        raise ValueError("recall undefined for a case without positives")
    return sum(case.relevance[:k]) / total


def mrr(cases: Sequence[RankedCase]) -> float:
    """Mean reciprocal rank of the first positive (ranks are 1-based)."""
    if not cases:
        raise ValueError("mrr requires at least one case")
    total = 0.0
    for case in cases:
        total += 1.0 / (_first_positive_rank(case))
    return total / len(cases)


def mean_average_precision(cases: Sequence[RankedCase]) -> float:
    """Mean over cases of average precision at the positive positions."""
    if not cases:
        raise ValueError("map requires at least one case")
    return sum(_average_precision(c) for c in cases) / len(cases)


def p_at_1(cases: Sequence[RankedCase]) -> float:
    """Fraction of cases whose top-ranked candidate is positive."""
    if not cases:
        raise ValueError("p@1 requires at least one case")
    return sum(c.relevance[0] for c in cases) / len(cases)


def _first_positive_rank(case: RankedCase) -> int:
    for rank, rel in enumerate(case.relevance, start=1):
        if rel:
            return rank
    raise ValueError("case has no positive candidate")


def _average_precision(case: RankedCase) -> float:
    hits = 0
    precisions = []
    for rank, rel in enumerate(case.relevance, start=1):
        if rel:
            hits += 1
            precisions.append(hits / rank)
    if not precisions:
        raise ValueError("case has no positive candidate")
    return sum(precisions) / len(precisions)


REPORT_KS = (1, 2, 5)


def evaluation_report(cases: Sequence[RankedCase]) -> dict:
    """Aggregate report over a uniform-size candidate pool.

    Keys are ``R{n}@{k}`` for k in {1, 2, 5} clipped to the pool size, plus
    MAP, MRR, P@1, and num_cases.
    """
    if not cases:
        raise ValueError("evaluation requires at least one case")
    sizes = {c.n for c in cases}
    if len(sizes) != 1:
        raise ValueError(f"candidate pools must share one size, got sizes {sorted(sizes)}")
    n = sizes.pop()
    report = {}
    for k in REPORT_KS:
        if k <= n:
            report[f"R{n}@{k}"] = sum(recall_at_k(c, k) for c in cases) / len(cases)
    report["MAP"] = mean_average_precision(cases)
    report["MRR"] = mrr(cases)
    report["P@1"] = p_at_1(cases)
    report["num_cases"] = len(cases)
    return report
