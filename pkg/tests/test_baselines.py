import numpy as np

from _helpers import make_substrate, make_vnr
from fedvne.baselines import NodeRankPolicy, RandomPolicy, noderank_scores, random_ranking


def scores_array(substrate):
    return np.array([rs.score for rs in noderank_scores(substrate)])


def test_symmetric_pair_scores_equal():
    sub = make_substrate([0, 0], [30.0, 30.0], [(0, 1, 20.0)])
    scores = scores_array(sub)
    assert scores[0] == scores[1]


def test_single_unlinked_node_scores_zero():
    sub = make_substrate([0], [30.0], [])
    assert scores_array(sub).tolist() == [0.0]


def test_star_center_outranks_leaves():
    # center 0 with four leaves, cpu 10 everywhere, bandwidth 5 per link.
    # base score: center 10*20=200, leaf 10*5=50. One spreading pass sends each
    # leaf's 50 to the center (total 200) and a quarter of the center's 200 to
    # each leaf (50); the second pass repeats it, so the hand result is stable.
    sub = make_substrate(
        [0] * 5,
        [10.0] * 5,
        [(0, 1, 5.0), (0, 2, 5.0), (0, 3, 5.0), (0, 4, 5.0)],
    )
    scores = scores_array(sub)
    assert scores[0] == 200.0
    assert np.allclose(scores[1:], 50.0)
    assert scores[0] > scores[1]


def test_scores_follow_availability():
    sub = make_substrate([0, 0, 0], [30.0] * 3, [(0, 1, 20.0), (1, 2, 20.0)])
    before = scores_array(sub)
    sub.allocate_node(2, 25.0)
    after = scores_array(sub)
    assert after[2] < before[2]


def test_permutation_equivariance():
    # relabel nodes of an asymmetric graph; scores must follow the relabeling
    domains = [0, 0, 1, 1]
    cpu = [10.0, 20.0, 30.0, 40.0]
    links = [(0, 1, 5.0), (1, 2, 7.0), (2, 3, 9.0), (0, 2, 11.0)]
    sub = make_substrate(domains, cpu, links, num_domains=2)
    perm = [2, 0, 3, 1]  # original i becomes perm[i]
    inverse = {perm[i]: i for i in range(4)}
    sub_permuted = make_substrate(
        [domains[inverse[j]] for j in range(4)],
        [cpu[inverse[j]] for j in range(4)],
        [(perm[a], perm[b], w) for a, b, w in links],
        num_domains=2,
    )
    base = scores_array(sub)
    permuted = scores_array(sub_permuted)
    for i in range(4):
        assert permuted[perm[i]] == base[i]


def test_random_ranking_determinism():
    sub = make_substrate([0, 0], [30.0, 30.0], [(0, 1, 20.0)])
    first = random_ranking(sub, 99)
    second = random_ranking(sub, 99)
    assert first == second
    different = random_ranking(sub, 100)
    assert different != first
    single = random_ranking(make_substrate([0], [30.0], []), 5)
    assert len(single) == 1


def test_policies_respect_provider_contract():
    sub = make_substrate([0, 0, 0], [30.0, 5.0, 30.0], [(0, 1, 20.0), (1, 2, 20.0)])
    vnr = make_vnr(node_demands=(10.0, 10.0))
    for policy in (NodeRankPolicy(), RandomPolicy(3)):
        candidates = policy(sub, vnr)
        assert len(candidates) == 2
        for ranked in candidates:
            assert 1 not in ranked  # node 1 cannot host the demand
            assert set(ranked) <= {0, 2}


def test_noderank_policy_is_pure_and_deterministic():
    sub = make_substrate([0, 0, 0], [30.0] * 3, [(0, 1, 20.0), (1, 2, 20.0)])
    vnr = make_vnr(node_demands=(10.0,))
    policy = NodeRankPolicy()
    before = sub.resource_vector()
    assert policy(sub, vnr) == policy(sub, vnr)
    assert sub.resource_vector().tobytes() == before.tobytes()
