"""Synchronous parameter federation across domains.

Only parameter messages cross domain boundaries: uploads carry (params,
sample count, local loss) and the broadcast carries the aggregated global
parameters. Raw states, traces, and request contents never leave the domain
that produced them; the per-domain snapshot assembled for logging holds each
domain's own report, keyed by domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agent import DomainAgent, PolicyParams, StateMatrix


class EmptyRound(Exception):
    pass


class MissingUpload(Exception):
    def __init__(self, domain_id: int):
        super().__init__(f"domain {domain_id} has not produced a training batch")
        self.domain_id = domain_id


@dataclass(frozen=True)
class ParamUpload:
    domain_id: int
    params: PolicyParams
    sample_count: int
    local_loss: float


@dataclass
class DomainReport:
    domain_id: int
    state: StateMatrix | None
    actions: list[int]
    reward_sum: float
    reward_mean: float
    next_state: StateMatrix | None


@dataclass
class FederatedSnapshot:
    states: dict[int, StateMatrix | None]
    actions: dict[int, list[int]]
    rewards: dict[int, float]
    next_states: dict[int, StateMatrix | None]


@dataclass
class FederationRound:
    round_id: int
    uploads: list[ParamUpload]
    global_params: PolicyParams
    global_loss: float
    snapshot: FederatedSnapshot
    reward_means: dict[int, float] = field(default_factory=dict)


def aggregate(uploads) -> PolicyParams:
    """Sample-count-weighted mean of the uploaded parameters."""
    if not uploads:
        raise EmptyRound("cannot aggregate an empty round")
    total = sum(u.sample_count for u in uploads)
    if total <= 0:
        raise EmptyRound("uploads carry no samples")
    kernel = np.zeros_like(uploads[0].params.kernel)
    bias = 0.0
    for u in uploads:
        kernel = kernel + u.sample_count * u.params.kernel
        bias += u.sample_count * u.params.bias
    return PolicyParams(kernel=kernel / total, bias=bias / total)


def global_loss(uploads) -> float:
    """Sample-count-weighted mean of the uploaded local losses."""
    if not uploads:
        raise EmptyRound("cannot compute the loss of an empty round")
    total = sum(u.sample_count for u in uploads)
    if total <= 0:
        raise EmptyRound("uploads carry no samples")
    return sum(u.sample_count * u.local_loss for u in uploads) / total


def assemble_snapshot(reports) -> FederatedSnapshot:
    """Concatenate per-domain reports, keyed by domain id."""
    if not reports:
        raise EmptyRound("no domain reports to assemble")
    return FederatedSnapshot(
        states={r.domain_id: r.state for r in reports},
        actions={r.domain_id: list(r.actions) for r in reports},
        rewards={r.domain_id: r.reward_sum for r in reports},
        next_states={r.domain_id: r.next_state for r in reports},
    )


class Coordinator:
    """Runs synchronous rounds over a fixed set of registered domains."""

    def __init__(self, domain_ids):
        self.domain_ids = sorted(domain_ids)
        if not self.domain_ids:
            raise EmptyRound("coordinator needs at least one domain")
        self.round_id = 0
        self.global_params: PolicyParams | None = None

    def ready(self, agents: dict[int, DomainAgent]) -> bool:
        return all(agents[d].pending_samples > 0 for d in self.domain_ids)

    def run_round(self, agents: dict[int, DomainAgent]) -> FederationRound:
        """Collect uploads, aggregate, and broadcast the global parameters.

        Raises MissingUpload (and leaves every agent untouched) if any
        registered domain has not trained since the previous round.
        """
        uploads = []
        reports = []
        for d in self.domain_ids:
            agent = agents[d]
            if agent.pending_samples <= 0:
                raise MissingUpload(d)
            uploads.append(
                ParamUpload(d, agent.params.copy(), agent.pending_samples, agent.pending_loss)
            )
            rewards = agent.pending_rewards
            reports.append(
                DomainReport(
                    domain_id=d,
                    state=agent.first_state,
                    actions=list(agent.pending_actions),
                    reward_sum=float(sum(rewards)),
                    reward_mean=float(np.mean(rewards)) if rewards else 0.0,
                    next_state=agent.last_state,
                )
            )
        params = aggregate(uploads)
        loss = global_loss(uploads)
        for d in self.domain_ids:
            agents[d].apply_global(params)
        self.round_id += 1
        self.global_params = params
        return FederationRound(
            round_id=self.round_id,
            uploads=uploads,
            global_params=params,
            global_loss=loss,
            snapshot=assemble_snapshot(reports),
            reward_means={r.domain_id: r.reward_mean for r in reports},
        )
