import dataclasses
import random

import numpy as np
import pytest

from fedvne.agent import DecisionTrace, DomainAgent, PolicyParams, StateMatrix
from fedvne.federation import (
    Coordinator,
    DomainReport,
    EmptyRound,
    MissingUpload,
    ParamUpload,
    aggregate,
    assemble_snapshot,
    global_loss,
)


def upload(domain_id, kernel, bias, count, loss=0.0):
    return ParamUpload(domain_id, PolicyParams(np.array(kernel, dtype=float), bias), count, loss)


def agent_with_pending(domain_id, kernel, bias, reward=0.5):
    """An agent that has trained once and is ready to upload."""
    agent = DomainAgent(domain_id, PolicyParams(np.array(kernel, dtype=float), bias))
    state = StateMatrix([0, 1], np.ones((2, 3)), np.full((2, 3), 0.5))
    agent.add_trace(DecisionTrace([(state, 0, None)], reward))
    agent.train(0.0)  # zero step: upload bookkeeping without moving params
    return agent


def test_aggregate_idempotent_on_identical_uploads():
    uploads = [upload(d, [0.3, -0.2, 0.5], 0.7, count) for d, count in enumerate((5, 9, 2))]
    merged = aggregate(uploads)
    assert np.allclose(merged.kernel, [0.3, -0.2, 0.5], atol=1e-12)
    assert merged.bias == pytest.approx(0.7, abs=1e-12)


def test_aggregate_symmetry_cancels():
    uploads = [upload(0, [1.0, -2.0, 3.0], 0.0, 10), upload(1, [-1.0, 2.0, -3.0], 0.0, 10)]
    merged = aggregate(uploads)
    assert np.allclose(merged.kernel, 0.0, atol=1e-12)


def test_aggregate_weighted_mean():
    uploads = [upload(0, [0, 0, 0], 1.0, 25), upload(1, [0, 0, 0], 2.0, 75)]
    assert aggregate(uploads).bias == pytest.approx(1.75, abs=1e-12)


def test_aggregate_requires_uploads():
    with pytest.raises(EmptyRound):
        aggregate([])


def test_aggregate_permutation_invariant():
    rng = random.Random(13)
    uploads = [
        upload(d, [rng.uniform(-2, 2) for _ in range(3)], rng.uniform(-1, 1), rng.randint(1, 99))
        for d in range(6)
    ]
    base = aggregate(uploads)
    shuffled = uploads[:]
    rng.shuffle(shuffled)
    permuted = aggregate(shuffled)
    assert np.allclose(base.kernel, permuted.kernel, atol=1e-12)
    assert base.bias == pytest.approx(permuted.bias, abs=1e-12)


def test_aggregate_homogeneous_degree_one():
    rng = random.Random(14)
    uploads = [
        upload(d, [rng.uniform(-2, 2) for _ in range(3)], rng.uniform(-1, 1), rng.randint(1, 9))
        for d in range(4)
    ]
    scaled = [
        dataclasses.replace(
            u, params=PolicyParams(u.params.kernel * 2.5, u.params.bias * 2.5)
        )
        for u in uploads
    ]
    assert np.allclose(aggregate(scaled).kernel, aggregate(uploads).kernel * 2.5, atol=1e-12)
    assert aggregate(scaled).bias == pytest.approx(aggregate(uploads).bias * 2.5, abs=1e-12)


def test_global_loss_cases():
    assert global_loss([upload(0, [0, 0, 0], 0.0, 7, loss=0.42)]) == pytest.approx(0.42)
    equal = [upload(0, [0, 0, 0], 0.0, 5, 0.2), upload(1, [0, 0, 0], 0.0, 5, 0.4)]
    assert global_loss(equal) == pytest.approx(0.3)
    weighted = [upload(0, [0, 0, 0], 0.0, 1, 0.0), upload(1, [0, 0, 0], 0.0, 3, 1.0)]
    assert global_loss(weighted) == pytest.approx(0.75)
    with pytest.raises(EmptyRound):
        global_loss([])


def test_run_round_single_domain_is_identity():
    agent = agent_with_pending(0, [0.4, 0.5, 0.6], 0.25)
    before = agent.params.copy()
    coordinator = Coordinator([0])
    fed_round = coordinator.run_round({0: agent})
    assert np.allclose(fed_round.global_params.kernel, before.kernel, atol=1e-12)
    assert fed_round.global_params.bias == pytest.approx(before.bias, abs=1e-12)


def test_run_round_broadcast_equalizes_exactly():
    agents = {d: agent_with_pending(d, [d, d * 2.0, -d], 0.1 * d) for d in range(4)}
    coordinator = Coordinator(agents.keys())
    fed_round = coordinator.run_round(agents)
    for agent in agents.values():
        assert np.array_equal(agent.params.kernel, fed_round.global_params.kernel)
        assert agent.params.bias == fed_round.global_params.bias
    # infinity-norm gap is exactly zero after broadcast
    gap = max(
        float(np.max(np.abs(a.params.kernel - fed_round.global_params.kernel)))
        for a in agents.values()
    )
    assert gap == 0.0


def test_run_round_missing_upload_aborts():
    agents = {0: agent_with_pending(0, [1, 1, 1], 0.0), 1: DomainAgent(1, PolicyParams(np.zeros(3), 0.0))}
    coordinator = Coordinator(agents.keys())
    before = agents[0].params.copy()
    with pytest.raises(MissingUpload) as exc:
        coordinator.run_round(agents)
    assert exc.value.domain_id == 1
    assert np.array_equal(agents[0].params.kernel, before.kernel)  # round left no trace
    assert coordinator.round_id == 0
    # after the lagging domain trains, the retried round succeeds
    agents[1] = agent_with_pending(1, [0, 0, 0], 0.0)
    assert coordinator.run_round(agents).round_id == 1


def test_two_round_trace_matches_hand_computation():
    # synthetic local step: move one quarter of the way toward kernel 2
    target = 2.0

    def local_step(agent):
        agent.params.kernel = agent.params.kernel - 0.25 * (agent.params.kernel - target)
        state = StateMatrix([0], np.ones((1, 3)), np.full((1, 3), 0.5))
        agent.add_trace(DecisionTrace([(state, 0, None)], 1.0))
        agent.train(0.0)

    agents = {
        0: DomainAgent(0, PolicyParams(np.zeros(3), 0.0)),
        1: DomainAgent(1, PolicyParams(np.full(3, 4.0), 0.0)),
    }
    coordinator = Coordinator(agents.keys())

    local_step(agents[0])  # 0   -> 0.5
    local_step(agents[1])  # 4   -> 3.5
    first = coordinator.run_round(agents)
    assert np.allclose(first.global_params.kernel, 2.0)  # equal counts: (0.5 + 3.5) / 2

    local_step(agents[0])  # 2 -> 2 (already at the optimum)
    local_step(agents[1])
    second = coordinator.run_round(agents)
    assert np.allclose(second.global_params.kernel, 2.0)
    assert second.round_id == 2


def test_assemble_snapshot():
    reports = [
        DomainReport(0, None, [3, 5], reward_sum=0.75, reward_mean=0.375, next_state=None),
        DomainReport(1, None, [], reward_sum=0.0, reward_mean=0.0, next_state=None),
    ]
    snapshot = assemble_snapshot(reports)
    assert snapshot.rewards == {0: 0.75, 1: 0.0}
    assert snapshot.actions == {0: [3, 5], 1: []}
    with pytest.raises(EmptyRound):
        assemble_snapshot([])


def test_snapshot_preserves_per_domain_rewards():
    rewards = [0.5, 0.25, 0.0, 1.0]
    reports = [
        DomainReport(d, None, [], reward_sum=r, reward_mean=r, next_state=None)
        for d, r in enumerate(rewards)
    ]
    snapshot = assemble_snapshot(reports)
    assert [snapshot.rewards[d] for d in range(4)] == rewards


def test_uploads_carry_only_parameter_messages():
    # the upload type is the whole cross-domain surface: params, count, loss
    field_names = {f.name for f in dataclasses.fields(ParamUpload)}
    assert field_names == {"domain_id", "params", "sample_count", "local_loss"}
