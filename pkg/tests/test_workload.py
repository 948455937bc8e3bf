import dataclasses

import pytest

from fedvne import workload
from fedvne.config import ExperimentConfig
from fedvne.workload import (
    InfeasibleTopology,
    ParseError,
    ValidationError,
    generate_substrate,
    generate_vnr_stream,
    load_substrate,
    load_vnrs,
    rebase_stream,
    save_substrate,
    save_vnrs,
)


def small_config(**overrides):
    base = dict(
        num_domains=2,
        nodes_per_domain=5,
        num_links=16,
        vnr_count=40,
        train_count=20,
        test_count=20,
        vn_nodes_min=2,
        vn_nodes_max=4,
    )
    base.update(overrides)
    return dataclasses.replace(ExperimentConfig(), **base)


def test_generate_substrate_default_scale():
    cfg = ExperimentConfig()
    sub = generate_substrate(cfg, 11)
    assert sub.num_nodes == 100
    assert sub.num_links == 600
    assert sub.num_domains == 4
    for d in range(4):
        assert len(sub.domain_node_ids(d)) == 25
    kinds = {sub.link_kind(i) for i in range(sub.num_links)}
    assert kinds == {"intra", "inter"}
    assert all(50 <= c <= 100 for c in sub.cpu_capacity)
    assert all(50 <= b <= 100 for b in sub.bw_capacity)


def test_generate_substrate_minimal():
    cfg = small_config(num_domains=1, nodes_per_domain=2, num_links=1)
    sub = generate_substrate(cfg, 5)
    assert sub.num_nodes == 2 and sub.num_links == 1
    assert {int(x) for x in sub.link_ends[0]} == {0, 1}


def test_generate_substrate_deterministic(tmp_path):
    cfg = small_config()
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    save_substrate(a, generate_substrate(cfg, 3))
    save_substrate(b, generate_substrate(cfg, 3))
    assert a.read_bytes() == b.read_bytes()
    save_substrate(b, generate_substrate(cfg, 4))
    assert a.read_bytes() != b.read_bytes()


def test_generate_substrate_infeasible():
    with pytest.raises(InfeasibleTopology):
        generate_substrate(small_config(num_links=5), 1)  # below spanning minimum
    with pytest.raises(InfeasibleTopology):
        generate_substrate(small_config(num_links=100), 1)  # above simple-graph max


def test_vnr_stream_default_scale():
    cfg = ExperimentConfig()
    stream = generate_vnr_stream(cfg, 9)
    assert len(stream) == 2000
    assert all(1 <= d <= 50 for v in stream for d in v.node_demands)
    assert all(1 <= w <= 50 for v in stream for _, _, w in v.link_demands)
    assert all(a.t_s <= b.t_s for a, b in zip(stream, stream[1:]))
    assert all(v.t_e > v.t_s for v in stream)
    for v in stream:
        workload.validate_vnr(v)
    assert all(2 <= v.num_nodes <= 10 for v in stream)


def test_vnr_stream_empty():
    assert generate_vnr_stream(small_config(vnr_count=0, train_count=0, test_count=0), 1) == []


def test_inter_arrival_mean_close_to_rate_inverse():
    cfg = small_config(vnr_count=10001, train_count=0, test_count=0)
    stream = generate_vnr_stream(cfg, 123)
    gaps = [b.t_s - a.t_s for a, b in zip(stream, stream[1:])]
    mean = sum(gaps) / len(gaps)
    expected = 1.0 / cfg.arrival_rate
    assert abs(mean - expected) / expected < 0.05


def test_substrate_round_trip(tmp_path):
    sub = generate_substrate(small_config(), 21)
    path = tmp_path / "sub.txt"
    save_substrate(path, sub)
    loaded = load_substrate(path)
    assert loaded.num_nodes == sub.num_nodes
    assert loaded.num_links == sub.num_links
    assert loaded.resource_vector().tobytes() == sub.resource_vector().tobytes()
    assert (loaded.coords == sub.coords).all()
    assert (loaded.link_ends == sub.link_ends).all()
    path2 = tmp_path / "sub2.txt"
    save_substrate(path2, loaded)
    assert path.read_bytes() == path2.read_bytes()


def test_vnrs_round_trip(tmp_path):
    stream = generate_vnr_stream(small_config(), 22)
    path = tmp_path / "vnrs.txt"
    save_vnrs(path, stream)
    loaded = load_vnrs(path)
    assert loaded == stream


def test_load_vnrs_rejects_bad_lifecycle(tmp_path):
    path = tmp_path / "vnrs.txt"
    path.write_text("1\n0 5.0 5.0 1 0\n10.0\n")
    with pytest.raises(ValidationError):
        load_vnrs(path)


def test_load_substrate_rejects_dangling_endpoint(tmp_path):
    path = tmp_path / "sub.txt"
    path.write_text("2 1 1\n0 0 0.0 0.0 10.0\n1 0 1.0 0.0 10.0\n0 7 5.0\n")
    with pytest.raises(ValidationError):
        load_substrate(path)


def test_load_substrate_parse_error_carries_line(tmp_path):
    path = tmp_path / "sub.txt"
    path.write_text("2 1 1\n0 0 0.0 0.0 10.0\nnot a node line\n0 1 5.0\n")
    with pytest.raises(ParseError) as exc:
        load_substrate(path)
    assert exc.value.line_no == 3


def test_comment_lines_ignored(tmp_path):
    path = tmp_path / "sub.txt"
    path.write_text(
        "# substrate\n2 1 1\n# nodes\n0 0 0.0 0.0 10.0\n1 0 1.0 0.0 12.0\n0 1 5.0\n"
    )
    sub = load_substrate(path)
    assert sub.num_nodes == 2
    assert sub.cpu_capacity[1] == 12.0


def test_load_vnrs_rejects_disconnected_topology(tmp_path):
    path = tmp_path / "vnrs.txt"
    path.write_text("1\n0 0.0 5.0 3 1\n10.0\n10.0\n10.0\n0 1 4.0\n")
    with pytest.raises(ValidationError):
        load_vnrs(path)


def test_load_vnrs_rejects_unsorted_stream(tmp_path):
    path = tmp_path / "vnrs.txt"
    path.write_text("2\n0 5.0 9.0 1 0\n10.0\n1 1.0 2.0 1 0\n10.0\n")
    with pytest.raises(ValidationError):
        load_vnrs(path)


def test_rebase_stream_shifts_clock():
    stream = generate_vnr_stream(small_config(), 31)[10:]
    shifted = rebase_stream(stream)
    assert shifted[0].t_s == 0.0
    assert len(shifted) == len(stream)
    for before, after in zip(stream, shifted):
        assert after.t_e - after.t_s == pytest.approx(before.t_e - before.t_s)
    assert rebase_stream([]) == []
