"""Per-domain policy: state extraction, scoring, ranking, and training.

Each domain runs the same tiny model: a 3-feature linear layer (kernel plus
bias) over the domain's state matrix, followed by a softmax that turns node
scores into allocation probabilities. Training is one policy-gradient step
per batch of completed episodes, with the batch-mean reward as baseline.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .substrate import MultiDomainSubstrate

NUM_FEATURES = 3


@dataclass
class StateMatrix:
    """Per-node features for one domain.

    Rows follow ``node_ids``. ``raw`` holds [available cpu, incident
    available bandwidth, incident distance sum]; ``features`` is the same
    matrix min-max normalized per column (constant columns map to 0.5).
    """

    node_ids: list[int]
    raw: np.ndarray
    features: np.ndarray


@dataclass
class PolicyParams:
    kernel: np.ndarray
    bias: float

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.kernel.copy(), self.bias)


@dataclass
class DecisionTrace:
    """One episode's placement decisions inside a single domain.

    Each sample is (state, chosen row index, probability vector) for one
    embedded virtual node; the episode reward is shared by all samples.
    """

    samples: list[tuple[StateMatrix, int, np.ndarray]]
    reward: float


@dataclass
class TrainStepResult:
    params: PolicyParams
    loss: float
    degenerate: bool


def init_params(rng: random.Random) -> PolicyParams:
    kernel = np.array([rng.uniform(-0.1, 0.1) for _ in range(NUM_FEATURES)])
    return PolicyParams(kernel=kernel, bias=0.0)


def _minmax_normalize(raw: np.ndarray) -> np.ndarray:
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    span = hi - lo
    out = np.full_like(raw, 0.5)
    for c in range(raw.shape[1]):
        if span[c] > 0:
            out[:, c] = (raw[:, c] - lo[c]) / span[c]
    return out


def extract_state(substrate: MultiDomainSubstrate, domain_id: int) -> StateMatrix:
    """Build the domain's state matrix from a substrate snapshot.

    Incident sums include inter-domain links. The distance column weights
    each incident link's Euclidean length by 1/(1 + hops); incident links
    are one hop away, so each contributes half its length.
    """
    ids = substrate.domain_node_ids(domain_id)
    avail = substrate.cpu_available[ids]
    if substrate.num_links:
        ends = substrate.link_ends.ravel()
        sum_bw = substrate.available_bw_sums()[ids]
        dis = np.bincount(
            ends,
            weights=np.repeat(substrate.link_length / 2.0, 2),
            minlength=substrate.num_nodes,
        )[ids]
    else:
        sum_bw = np.zeros(len(ids))
        dis = np.zeros(len(ids))
    raw = np.column_stack([avail, sum_bw, dis])
    return StateMatrix(node_ids=[int(i) for i in ids], raw=raw, features=_minmax_normalize(raw))


def scores(params: PolicyParams, state: StateMatrix) -> np.ndarray:
    return state.features @ params.kernel + params.bias


def forward(params: PolicyParams, state: StateMatrix) -> np.ndarray:
    """Allocation probabilities: softmax over the linear node scores."""
    z = scores(params, state)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def log_probs(params: PolicyParams, state: StateMatrix) -> np.ndarray:
    z = scores(params, state)
    shifted = z - z.max()
    return shifted - np.log(np.exp(shifted).sum())


def rank_candidates(params: PolicyParams, state: StateMatrix, cpu_demand: float) -> list[int]:
    """Feasible domain nodes in descending probability, ties by node id."""
    p = forward(params, state)
    order = sorted(range(len(state.node_ids)), key=lambda r: (-p[r], state.node_ids[r]))
    return [state.node_ids[r] for r in order if state.raw[r, 0] >= cpu_demand]


def episode_reward(record, reject_reward: float = 0.0) -> float:
    """Revenue-to-cost ratio of an accepted request; reject_reward otherwise."""
    if not record.accepted or record.cost <= 0:
        return reject_reward
    return record.revenue / record.cost


def batch_loss(params: PolicyParams, traces, baseline: float | None = None) -> float:
    """Mean over samples of -log p(chosen) * (reward - baseline)."""
    if not traces:
        raise ValueError("empty trace batch")
    if baseline is None:
        baseline = float(np.mean([t.reward for t in traces]))
    total = 0.0
    count = 0
    for trace in traces:
        advantage = trace.reward - baseline
        for state, chosen, _ in trace.samples:
            total += -advantage * log_probs(params, state)[chosen]
            count += 1
    return total / count if count else 0.0


def train_step(
    params: PolicyParams,
    traces,
    learning_rate: float,
    baseline: float | None = None,
) -> TrainStepResult:
    """One gradient-descent step on the batch loss.

    The gradient is computed analytically through the softmax and linear
    layer. A batch whose rewards all equal the baseline has zero advantage
    everywhere and is returned as a no-op with ``degenerate`` set.
    """
    if not traces:
        raise ValueError("empty trace batch")
    if baseline is None:
        baseline = float(np.mean([t.reward for t in traces]))
    advantages = [t.reward - baseline for t in traces]
    n_samples = sum(len(t.samples) for t in traces)
    if n_samples == 0 or all(a == 0.0 for a in advantages):
        return TrainStepResult(params.copy(), 0.0, True)

    grad_kernel = np.zeros(NUM_FEATURES)
    grad_bias = 0.0
    loss = 0.0
    for trace, advantage in zip(traces, advantages):
        for state, chosen, _ in trace.samples:
            lp = log_probs(params, state)
            p = np.exp(lp)
            loss += -advantage * lp[chosen]
            grad_kernel += advantage * (p @ state.features - state.features[chosen])
            grad_bias += advantage * (p.sum() - 1.0)
    loss /= n_samples
    grad_kernel /= n_samples
    grad_bias /= n_samples
    updated = PolicyParams(
        kernel=params.kernel - learning_rate * grad_kernel,
        bias=params.bias - learning_rate * grad_bias,
    )
    return TrainStepResult(updated, float(loss), False)


class DomainAgent:
    """Holds one domain's parameters, trace buffer, and upload bookkeeping.

    Traces accumulate between training steps; training consumes the buffer
    and stashes the step's statistics for the next federation round. The
    coordinator reads the pending fields to build an upload and calls
    ``apply_global`` to install the broadcast parameters.
    """

    def __init__(self, domain_id: int, params: PolicyParams):
        self.domain_id = domain_id
        self.params = params
        self.buffer: list[DecisionTrace] = []
        self.pending_samples = 0
        self._pending_loss_weighted = 0.0
        self.pending_rewards: list[float] = []
        self.pending_actions: list[int] = []
        self.first_state: StateMatrix | None = None
        self.last_state: StateMatrix | None = None

    @property
    def pending_loss(self) -> float:
        if self.pending_samples == 0:
            return 0.0
        return self._pending_loss_weighted / self.pending_samples

    def add_trace(self, trace: DecisionTrace) -> None:
        self.buffer.append(trace)
        for state, chosen, _ in trace.samples:
            self.pending_actions.append(state.node_ids[chosen])
            if self.first_state is None:
                self.first_state = state
            self.last_state = state

    def train(self, learning_rate: float, baseline: float | None = None) -> TrainStepResult:
        result = train_step(self.params, self.buffer, learning_rate, baseline)
        self.params = result.params
        samples = sum(len(t.samples) for t in self.buffer)
        self.pending_samples += samples
        self._pending_loss_weighted += result.loss * samples
        self.pending_rewards.extend(t.reward for t in self.buffer)
        self.buffer = []
        return result

    def apply_global(self, params: PolicyParams) -> None:
        self.params = params.copy()
        self.pending_samples = 0
        self._pending_loss_weighted = 0.0
        self.pending_rewards = []
        self.pending_actions = []
        self.first_state = None
        self.last_state = None


# -- checkpoints -------------------------------------------------------------


def save_checkpoint(path, domain_params: dict[int, PolicyParams], global_params: PolicyParams) -> None:
    """One line per domain (in id order) then one line for the global model."""
    lines = []
    for d in sorted(domain_params):
        p = domain_params[d]
        lines.append(" ".join(repr(float(x)) for x in p.kernel) + f" {repr(float(p.bias))}")
    g = global_params
    lines.append(" ".join(repr(float(x)) for x in g.kernel) + f" {repr(float(g.bias))}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> tuple[dict[int, PolicyParams], PolicyParams]:
    with open(path) as fh:
        rows = [line.split() for line in fh if line.strip()]
    if len(rows) < 2:
        raise ValueError(f"{path}: checkpoint needs at least one domain and a global line")
    params = []
    for row in rows:
        if len(row) != NUM_FEATURES + 1:
            raise ValueError(f"{path}: each checkpoint line needs {NUM_FEATURES + 1} values")
        values = [float(x) for x in row]
        params.append(PolicyParams(kernel=np.array(values[:NUM_FEATURES]), bias=values[-1]))
    domains = {d: p for d, p in enumerate(params[:-1])}
    return domains, params[-1]
