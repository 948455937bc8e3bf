"""Training loop: per-domain batches interleaved with federation rounds.

Each epoch replays the training stream on a fresh copy of the substrate.
Every ``batch_size`` completed episodes, each domain with buffered traces
takes one gradient step; a federation round runs as soon as every domain
has trained since the previous round (a domain that saw no placements keeps
the round deferred until it catches up).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .agent import DomainAgent, PolicyParams, init_params
from .engine import run_simulation
from .federation import Coordinator, ParamUpload, aggregate
from .policies import HflPolicy
from .substrate import MultiDomainSubstrate


@dataclass
class RoundRow:
    round_id: int
    global_loss: float
    local_losses: dict[int, float]
    reward_means: dict[int, float]
    window_episodes: int
    window_accepted: int
    window_revenue: float
    window_cost: float

    @property
    def window_acc(self) -> float:
        return self.window_accepted / self.window_episodes if self.window_episodes else 0.0

    @property
    def window_ltar2c(self) -> float | None:
        return self.window_revenue / self.window_cost if self.window_cost > 0 else None


@dataclass
class EpisodeRow:
    epoch: int
    index: int
    vnr_id: int
    t_s: float
    accepted: bool
    revenue: float
    cost: float


@dataclass
class TrainResult:
    domain_params: dict[int, PolicyParams]
    global_params: PolicyParams
    round_rows: list[RoundRow] = field(default_factory=list)
    episode_rows: list[EpisodeRow] = field(default_factory=list)


class Trainer:
    def __init__(
        self,
        substrate: MultiDomainSubstrate,
        vnrs,
        *,
        learning_rate: float,
        batch_size: int,
        epochs: int,
        seed: int,
        reject_reward: float = 0.0,
    ):
        if batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if epochs < 1:
            raise ValueError("need at least one epoch")
        self.template = substrate
        self.vnrs = vnrs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.reject_reward = reject_reward
        rng = random.Random(seed)
        self.agents = {
            d: DomainAgent(d, init_params(rng)) for d in range(substrate.num_domains)
        }
        self.coordinator = Coordinator(self.agents.keys())
        self.policy = HflPolicy(self.agents, record_traces=True, reject_reward=reject_reward)
        self.round_rows: list[RoundRow] = []
        self.episode_rows: list[EpisodeRow] = []
        self._epoch = 0
        self._since_boundary = 0
        self._window_episodes = 0
        self._window_accepted = 0
        self._window_revenue = 0.0
        self._window_cost = 0.0

    def run(self) -> TrainResult:
        for epoch in range(self.epochs):
            self._epoch = epoch
            run_simulation(self.template.copy(), self.vnrs, self.policy, on_record=self._on_record)
            self._boundary()  # flush a partial final batch of the epoch
        global_params = self.coordinator.global_params
        if global_params is None:
            # no round ever completed; fall back to a plain mean of the agents
            global_params = aggregate(
                [ParamUpload(d, a.params.copy(), 1, 0.0) for d, a in sorted(self.agents.items())]
            )
        return TrainResult(
            domain_params={d: a.params.copy() for d, a in self.agents.items()},
            global_params=global_params,
            round_rows=self.round_rows,
            episode_rows=self.episode_rows,
        )

    def _on_record(self, vnr, record) -> None:
        self.policy.finish_episode(vnr, record)
        self.episode_rows.append(
            EpisodeRow(
                epoch=self._epoch,
                index=len(self.episode_rows),
                vnr_id=vnr.vnr_id,
                t_s=vnr.t_s,
                accepted=record.accepted,
                revenue=record.revenue,
                cost=record.cost,
            )
        )
        self._window_episodes += 1
        self._window_accepted += int(record.accepted)
        self._window_revenue += record.revenue
        self._window_cost += record.cost
        self._since_boundary += 1
        if self._since_boundary >= self.batch_size:
            self._boundary()

    def _boundary(self) -> None:
        self._since_boundary = 0
        for d in sorted(self.agents):
            if self.agents[d].buffer:
                self.agents[d].train(self.learning_rate)
        if not self.coordinator.ready(self.agents):
            return
        fed_round = self.coordinator.run_round(self.agents)
        self.round_rows.append(
            RoundRow(
                round_id=fed_round.round_id,
                global_loss=fed_round.global_loss,
                local_losses={u.domain_id: u.local_loss for u in fed_round.uploads},
                reward_means=dict(fed_round.reward_means),
                window_episodes=self._window_episodes,
                window_accepted=self._window_accepted,
                window_revenue=self._window_revenue,
                window_cost=self._window_cost,
            )
        )
        self._window_episodes = 0
        self._window_accepted = 0
        self._window_revenue = 0.0
        self._window_cost = 0.0
