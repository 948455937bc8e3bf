"""Discrete-event embedding engine.

Requests arrive in time order; at each arrival the engine flushes every
departure due at or before that instant, asks the policy provider for ranked
candidate nodes, then runs the two-stage embedding: greedy node placement
followed by minimum-hop link placement. A request is either fully embedded
or rolled back without trace.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .substrate import MultiDomainSubstrate


class EmbeddingFailure(Exception):
    pass


class NodeMappingFailed(EmbeddingFailure):
    def __init__(self, virtual_node: int, partial_map: dict[int, int]):
        super().__init__(f"no feasible candidate left for virtual node {virtual_node}")
        self.virtual_node = virtual_node
        self.partial_map = partial_map


class LinkMappingFailed(EmbeddingFailure):
    def __init__(self, virtual_link: tuple[int, int], partial_paths: dict):
        super().__init__(f"no feasible path for virtual link {virtual_link}")
        self.virtual_link = virtual_link
        self.partial_paths = partial_paths


@dataclass
class EmbeddingRecord:
    """Outcome of one embedding attempt.

    ``node_map`` assigns each virtual node a substrate node id and
    ``link_paths`` assigns each virtual link an ordered substrate-link path.
    The consumed demands are kept alongside so the record is self-contained
    for release. ``outstanding`` is True while the record holds resources.
    For rejected requests the maps retain the partial choices made before
    rollback; nothing is held.
    """

    vnr_id: int
    node_map: dict[int, int] = field(default_factory=dict)
    link_paths: dict[tuple[int, int], list[int]] = field(default_factory=dict)
    revenue: float = 0.0
    cost: float = 0.0
    accepted: bool = False
    cpu_demands: dict[int, float] = field(default_factory=dict)
    bw_demands: dict[tuple[int, int], float] = field(default_factory=dict)
    outstanding: bool = False


@dataclass(order=True)
class SimEvent:
    time: float
    vnr_id: int
    kind: str = field(compare=False)
    record: EmbeddingRecord | None = field(compare=False, default=None)


ARRIVAL = "arrival"
DEPARTURE = "departure"


def min_hop_path(
    substrate: MultiDomainSubstrate, src: int, dst: int, bw_demand: float
) -> list[int] | None:
    """Minimum-hop path over links with enough available bandwidth.

    Breadth-first search expanding neighbors in ascending node id, which
    yields the lexicographically smallest node sequence among minimum-hop
    paths. Returns the ordered link ids, or None when no path is feasible.
    """
    if src == dst:
        return []
    bw = substrate.bw_available
    parent: dict[int, tuple[int, int]] = {src: (-1, -1)}
    queue = deque([src])
    while queue:
        here = queue.popleft()
        for neighbor, link_id in substrate.adjacency[here]:
            if neighbor in parent or bw[link_id] < bw_demand:
                continue
            parent[neighbor] = (here, link_id)
            if neighbor == dst:
                path = []
                node = dst
                while node != src:
                    node, link_id = parent[node]
                    path.append(link_id)
                path.reverse()
                return path
            queue.append(neighbor)
    return None


def embed_nodes(
    substrate: MultiDomainSubstrate, vnr, ranked_candidates
) -> dict[int, int]:
    """Greedy node placement.

    Virtual nodes are processed in descending cpu demand; each takes the
    highest-priority candidate not already used by this request that still
    has enough cpu. Allocations are applied as they are made and rolled back
    in full on failure.
    """
    order = sorted(range(vnr.num_nodes), key=lambda v: (-vnr.node_demands[v], v))
    node_map: dict[int, int] = {}
    used: set[int] = set()
    applied: list[tuple[int, float]] = []
    for v in order:
        demand = vnr.node_demands[v]
        chosen = None
        for node_id in ranked_candidates[v]:
            if node_id not in used and substrate.cpu_available[node_id] >= demand:
                chosen = node_id
                break
        if chosen is None:
            for node_id, amount in reversed(applied):
                substrate.free_node(node_id, amount)
            raise NodeMappingFailed(v, node_map)
        substrate.allocate_node(chosen, demand)
        applied.append((chosen, demand))
        node_map[v] = chosen
        used.add(chosen)
    return node_map


def embed_links(
    substrate: MultiDomainSubstrate, vnr, node_map: dict[int, int]
) -> dict[tuple[int, int], list[int]]:
    """Minimum-hop link placement, one path per virtual link.

    Virtual links are processed in descending bandwidth demand. On failure
    every path this call allocated is freed before raising; the caller rolls
    back the node allocations.
    """
    order = sorted(
        range(vnr.num_links), key=lambda i: (-vnr.link_demands[i][2], i)
    )
    paths: dict[tuple[int, int], list[int]] = {}
    applied: list[tuple[list[int], float]] = []
    for i in order:
        a, b, demand = vnr.link_demands[i]
        path = min_hop_path(substrate, node_map[a], node_map[b], demand)
        if path is None:
            for done_path, amount in reversed(applied):
                substrate.free_path(done_path, amount)
            raise LinkMappingFailed((a, b), paths)
        substrate.allocate_path(path, demand)
        applied.append((path, demand))
        paths[(a, b)] = path
    return paths


def attempt_embedding(
    substrate: MultiDomainSubstrate, vnr, ranked_candidates
) -> EmbeddingRecord:
    """Run both stages; returns a record either fully applied or fully rolled back."""
    record = EmbeddingRecord(vnr_id=vnr.vnr_id)
    try:
        node_map = embed_nodes(substrate, vnr, ranked_candidates)
    except NodeMappingFailed as failure:
        record.node_map = dict(failure.partial_map)
        return record
    try:
        link_paths = embed_links(substrate, vnr, node_map)
    except LinkMappingFailed as failure:
        for v, node_id in node_map.items():
            substrate.free_node(node_id, vnr.node_demands[v])
        record.node_map = dict(node_map)
        record.link_paths = dict(failure.partial_paths)
        return record
    record.node_map = node_map
    record.link_paths = link_paths
    record.cpu_demands = {v: vnr.node_demands[v] for v in node_map}
    record.bw_demands = {(a, b): bw for a, b, bw in vnr.link_demands}
    record.accepted = True
    record.outstanding = True
    record.revenue = metrics.vnr_revenue(vnr)
    record.cost = metrics.vnr_cost(vnr, record)
    return record


def run_simulation(
    substrate: MultiDomainSubstrate,
    vnrs,
    policy_provider,
    ledger: metrics.MetricsLedger | None = None,
    on_record=None,
):
    """Drive the request lifecycle over a sorted stream.

    Departures due at or before an arrival are released first; all remaining
    departures are drained at end of run. Individual embedding failures are
    recorded, never raised. Returns (substrate, ledger, records).
    """
    if ledger is None:
        ledger = metrics.MetricsLedger()
    records: list[EmbeddingRecord] = []
    pending: list[SimEvent] = []
    last_t = None
    for vnr in vnrs:
        if last_t is not None and vnr.t_s < last_t:
            raise ValueError("vnr stream is not sorted by arrival time")
        last_t = vnr.t_s
        while pending and pending[0].time <= vnr.t_s:
            substrate.release(heapq.heappop(pending).record)
        record = attempt_embedding(substrate, vnr, policy_provider(substrate, vnr))
        ledger.record_vnr(vnr.t_s, record.revenue, record.cost, record.accepted)
        records.append(record)
        if record.accepted:
            heapq.heappush(pending, SimEvent(vnr.t_e, vnr.vnr_id, DEPARTURE, record))
        if on_record is not None:
            on_record(vnr, record)
    while pending:
        substrate.release(heapq.heappop(pending).record)
    return substrate, ledger, records


# -- independent constraint checking ---------------------------------------


def indicator_acceptance(vnr, record: EmbeddingRecord) -> int:
    """Product of per-node and per-link success indicators (1 or 0)."""
    for v in range(vnr.num_nodes):
        if v not in record.node_map:
            return 0
    for a, b, _ in vnr.link_demands:
        path = record.link_paths.get((a, b))
        if not path:
            return 0
    return 1


def replay_validate(
    initial: MultiDomainSubstrate,
    vnrs,
    records,
    final_vector: np.ndarray | None = None,
) -> list[str]:
    """Re-check every embedding constraint by replaying the decision log.

    Maintains its own availability arrays (independent of the substrate's
    allocation methods), applies each accepted record at its arrival and
    returns it at departure. Returns a list of violation messages; empty
    means the log is sound. When ``final_vector`` is given it is compared
    against the replayed end-of-run resource vector, which must match
    exactly.
    """
    violations: list[str] = []
    cpu = np.array(initial.cpu_capacity, dtype=np.float64)
    bw = np.array(initial.bw_capacity, dtype=np.float64)
    link_ends = initial.link_ends
    by_id = {v.vnr_id: v for v in vnrs}
    if len(records) > len(by_id):
        violations.append("decision log has more entries than the request stream")

    departures: list[tuple[float, int, EmbeddingRecord]] = []

    def release(record: EmbeddingRecord, vnr) -> None:
        for v, node_id in record.node_map.items():
            cpu[node_id] += vnr.node_demands[v]
        for (a, b), path in record.link_paths.items():
            demand = next(d for x, y, d in vnr.link_demands if (x, y) == (a, b))
            for link_id in path:
                bw[link_id] += demand

    for record in records:
        vnr = by_id.get(record.vnr_id)
        if vnr is None:
            violations.append(f"vnr {record.vnr_id}: not present in the request stream")
            continue
        while departures and departures[0][0] <= vnr.t_s:
            _, _, done = heapq.heappop(departures)
            release(done, by_id[done.vnr_id])
        if not record.accepted:
            continue

        mapped = sorted(record.node_map)
        if mapped != list(range(vnr.num_nodes)):
            violations.append(f"vnr {vnr.vnr_id}: not every virtual node is mapped exactly once")
            continue
        if len(set(record.node_map.values())) != vnr.num_nodes:
            violations.append(f"vnr {vnr.vnr_id}: node map is not injective")
            continue
        ok = True
        for v, node_id in record.node_map.items():
            if not (0 <= node_id < len(cpu)):
                violations.append(f"vnr {vnr.vnr_id}: mapped to missing node {node_id}")
                ok = False
                break
            if vnr.node_demands[v] > cpu[node_id]:
                violations.append(
                    f"vnr {vnr.vnr_id}: cpu demand of virtual node {v} exceeds availability "
                    f"on node {node_id}"
                )
                ok = False
                break
        if ok:
            for a, b, demand in vnr.link_demands:
                path = record.link_paths.get((a, b))
                if not path:
                    violations.append(f"vnr {vnr.vnr_id}: virtual link ({a}, {b}) has no path")
                    ok = False
                    break
                here = record.node_map[a]
                for link_id in path:
                    if not (0 <= link_id < len(bw)):
                        violations.append(f"vnr {vnr.vnr_id}: path uses missing link {link_id}")
                        ok = False
                        break
                    x, y = (int(e) for e in link_ends[link_id])
                    if here == x:
                        here = y
                    elif here == y:
                        here = x
                    else:
                        violations.append(
                            f"vnr {vnr.vnr_id}: path for ({a}, {b}) is not a connected walk"
                        )
                        ok = False
                        break
                if not ok:
                    break
                if here != record.node_map[b]:
                    violations.append(
                        f"vnr {vnr.vnr_id}: path for ({a}, {b}) does not reach the mapped endpoint"
                    )
                    ok = False
                    break
        if not ok:
            continue

        # joint bandwidth feasibility across this request's paths
        demand_on_link: dict[int, float] = {}
        for (a, b), path in record.link_paths.items():
            demand = next(d for x, y, d in vnr.link_demands if (x, y) == (a, b))
            for link_id in path:
                demand_on_link[link_id] = demand_on_link.get(link_id, 0.0) + demand
        for link_id, total in demand_on_link.items():
            if total > bw[link_id]:
                violations.append(
                    f"vnr {vnr.vnr_id}: joint bandwidth on link {link_id} exceeds availability"
                )
                ok = False
                break
        if not ok:
            continue

        for v, node_id in record.node_map.items():
            cpu[node_id] -= vnr.node_demands[v]
        for link_id, total in demand_on_link.items():
            bw[link_id] -= total
        if np.any(cpu < 0) or np.any(bw < 0):
            violations.append(f"vnr {vnr.vnr_id}: availability driven below zero")
        heapq.heappush(departures, (vnr.t_e, vnr.vnr_id, record))

    while departures:
        _, _, done = heapq.heappop(departures)
        release(done, by_id[done.vnr_id])

    if np.any(cpu > initial.cpu_capacity) or np.any(bw > initial.bw_capacity):
        violations.append("replayed releases exceed capacity")
    if final_vector is not None:
        replayed = np.concatenate([cpu, bw])
        if replayed.tobytes() != np.asarray(final_vector, dtype=np.float64).tobytes():
            violations.append("replayed resource vector differs from the run's final state")
    return violations


# -- decision log -----------------------------------------------------------

DECISION_LOG_HEADER = "vnr_id,t_s,accepted,revenue,cost,node_map,path_hops,link_paths"


def _format_node_map(record: EmbeddingRecord) -> str:
    return "|".join(f"{v}:{record.node_map[v]}" for v in sorted(record.node_map))


def _format_paths(record: EmbeddingRecord) -> tuple[str, str]:
    keys = sorted(record.link_paths)
    hops = "|".join(str(len(record.link_paths[k])) for k in keys)
    paths = "|".join(
        f"{a}-{b}:" + ">".join(str(l) for l in record.link_paths[(a, b)]) for a, b in keys
    )
    return hops, paths


def write_decision_log(path, records, vnrs) -> None:
    by_id = {v.vnr_id: v for v in vnrs}
    lines = [DECISION_LOG_HEADER]
    for record in records:
        hops, paths = _format_paths(record)
        lines.append(
            f"{record.vnr_id},{repr(by_id[record.vnr_id].t_s)},{int(record.accepted)},"
            f"{repr(record.revenue)},{repr(record.cost)},"
            f"{_format_node_map(record)},{hops},{paths}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_decision_log(path) -> list[EmbeddingRecord]:
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or lines[0] != DECISION_LOG_HEADER:
        raise ValueError(f"{path}: not a decision log")
    records = []
    for line in lines[1:]:
        fields = line.split(",")
        record = EmbeddingRecord(vnr_id=int(fields[0]))
        record.accepted = bool(int(fields[2]))
        record.revenue = float(fields[3])
        record.cost = float(fields[4])
        if fields[5]:
            for pair in fields[5].split("|"):
                v, node = pair.split(":")
                record.node_map[int(v)] = int(node)
        if fields[7]:
            for chunk in fields[7].split("|"):
                key, seq = chunk.split(":")
                a, b = (int(x) for x in key.split("-"))
                record.link_paths[(a, b)] = [int(x) for x in seq.split(">")] if seq else []
        records.append(record)
    return records
