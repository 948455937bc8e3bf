"""Non-learning policy providers: a topology-resource ranking and a random floor.

The topology-resource ranking ("NodeRank-style" in all outputs) starts from
available-cpu x incident-bandwidth products and applies two passes of a
degree-normalized random-walk step, so well-connected resource-rich regions
score highest. It approximates, not reproduces, full random-walk ranking.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .policies import ranked_by_score
from .substrate import MultiDomainSubstrate


@dataclass(frozen=True)
class RankScore:
    node_id: int
    score: float


def _walk_pass(substrate: MultiDomainSubstrate, score: np.ndarray) -> np.ndarray:
    """Each node spreads its score equally over its neighbors."""
    n = substrate.num_nodes
    out = np.zeros(n)
    if not substrate.num_links:
        return out
    ends = substrate.link_ends
    degree = np.bincount(ends.ravel(), minlength=n).astype(np.float64)
    share = np.divide(score, degree, out=np.zeros(n), where=degree > 0)
    np.add.at(out, ends[:, 1], share[ends[:, 0]])
    np.add.at(out, ends[:, 0], share[ends[:, 1]])
    return out


def noderank_scores(substrate: MultiDomainSubstrate) -> list[RankScore]:
    """Two walk passes over available-cpu x incident-available-bandwidth."""
    score = substrate.cpu_available * substrate.available_bw_sums()
    score = _walk_pass(substrate, score)
    score = _walk_pass(substrate, score)
    return [RankScore(i, float(score[i])) for i in range(substrate.num_nodes)]


def random_ranking(substrate: MultiDomainSubstrate, seed: int) -> list[RankScore]:
    rng = random.Random(seed)
    return [RankScore(i, rng.random()) for i in range(substrate.num_nodes)]


class NodeRankPolicy:
    """Deterministic provider ranking by the two-pass walk scores."""

    def __call__(self, substrate: MultiDomainSubstrate, vnr):
        score = np.array([rs.score for rs in noderank_scores(substrate)])
        return ranked_by_score(substrate, vnr, score)


class RandomPolicy:
    """Seeded provider drawing fresh uniform scores per arrival."""

    def __init__(self, seed: int):
        self._rng = random.Random(seed)

    def __call__(self, substrate: MultiDomainSubstrate, vnr):
        ranking = random_ranking(substrate, self._rng.randrange(2**32))
        score = np.array([rs.score for rs in ranking])
        return ranked_by_score(substrate, vnr, score)
