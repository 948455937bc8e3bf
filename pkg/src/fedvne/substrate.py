"""Multi-domain physical network with CPU/bandwidth bookkeeping.

The substrate is mutated in place by a single owner (the simulation loop).
Policies and feature extractors may read the public arrays but must never
write them; node and link accessors return immutable snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INTRA = "intra"
INTER = "inter"


class SubstrateError(Exception):
    """Base class for resource-allocation failures."""


class InsufficientCpu(SubstrateError):
    def __init__(self, node_id: int, demand: float, available: float):
        super().__init__(
            f"node {node_id}: cpu demand {demand} exceeds available {available}"
        )
        self.node_id = node_id
        self.demand = demand
        self.available = available


class InsufficientBandwidth(SubstrateError):
    def __init__(self, link_id: int, demand: float, available: float):
        super().__init__(
            f"link {link_id}: bw demand {demand} exceeds available {available}"
        )
        self.link_id = link_id
        self.demand = demand
        self.available = available


class DoubleRelease(SubstrateError):
    pass


@dataclass(frozen=True)
class SubstrateNode:
    """Read-only snapshot of one physical node."""

    node_id: int
    domain_id: int
    coord: tuple[float, float]
    cpu_capacity: float
    cpu_available: float


@dataclass(frozen=True)
class SubstrateLink:
    """Read-only snapshot of one physical link."""

    link_id: int
    endpoint_a: int
    endpoint_b: int
    kind: str
    bw_capacity: float
    bw_available: float


class MultiDomainSubstrate:
    """Physical network partitioned into domains.

    Node ids are 0..num_nodes-1 and link ids 0..num_links-1 (the array index
    is the id). Every node belongs to exactly one domain; a link is "inter"
    exactly when its endpoints lie in different domains. Resource state lives
    in ``cpu_available`` / ``bw_available`` and changes only through the
    allocate/free/release methods.
    """

    def __init__(
        self,
        num_domains: int,
        node_domains,
        coords,
        cpu_capacity,
        link_ends,
        bw_capacity,
        cpu_available=None,
        bw_available=None,
    ):
        self.num_domains = int(num_domains)
        self.node_domain = np.asarray(node_domains, dtype=np.int64)
        n = len(self.node_domain)
        self.coords = np.asarray(coords, dtype=np.float64).reshape(n, 2)
        self.cpu_capacity = np.asarray(cpu_capacity, dtype=np.float64)
        self.link_ends = np.asarray(link_ends, dtype=np.int64).reshape(-1, 2)
        self.bw_capacity = np.asarray(bw_capacity, dtype=np.float64)
        if cpu_available is None:
            self.cpu_available = self.cpu_capacity.copy()
        else:
            self.cpu_available = np.asarray(cpu_available, dtype=np.float64).copy()
        if bw_available is None:
            self.bw_available = self.bw_capacity.copy()
        else:
            self.bw_available = np.asarray(bw_available, dtype=np.float64).copy()
        self._validate()
        self._build_indexes()

    # -- structure -----------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.node_domain)

    @property
    def num_links(self) -> int:
        return len(self.bw_capacity)

    def _validate(self) -> None:
        if self.num_domains < 1:
            raise ValueError("substrate needs at least one domain")
        if len(self.cpu_capacity) != self.num_nodes:
            raise ValueError("cpu capacity array does not match node count")
        if len(self.link_ends) != self.num_links:
            raise ValueError("link endpoint array does not match link count")
        if self.num_nodes == 0:
            raise ValueError("substrate needs at least one node")
        if self.node_domain.min() < 0 or self.node_domain.max() >= self.num_domains:
            raise ValueError("node domain id out of range")
        if np.any(self.cpu_capacity < 0) or np.any(self.bw_capacity < 0):
            raise ValueError("capacities must be non-negative")
        if np.any(self.cpu_available < 0) or np.any(self.cpu_available > self.cpu_capacity):
            raise ValueError("cpu availability outside [0, capacity]")
        if np.any(self.bw_available < 0) or np.any(self.bw_available > self.bw_capacity):
            raise ValueError("bw availability outside [0, capacity]")
        seen: set[tuple[int, int]] = set()
        for a, b in self.link_ends:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop link at node {a}")
            if not (0 <= a < self.num_nodes and 0 <= b < self.num_nodes):
                raise ValueError(f"link endpoint ({a}, {b}) out of range")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"duplicate link between nodes {key}")
            seen.add(key)
        self._check_connectivity()

    def _check_connectivity(self) -> None:
        parent = list(range(self.num_nodes))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        intra_parent = list(range(self.num_nodes))

        def find_intra(x: int) -> int:
            while intra_parent[x] != x:
                intra_parent[x] = intra_parent[intra_parent[x]]
                x = intra_parent[x]
            return x

        for a, b in self.link_ends:
            a, b = int(a), int(b)
            parent[find(a)] = find(b)
            if self.node_domain[a] == self.node_domain[b]:
                intra_parent[find_intra(a)] = find_intra(b)

        if self.num_nodes > 1:
            root = find(0)
            if any(find(i) != root for i in range(1, self.num_nodes)):
                raise ValueError("substrate graph is not connected")
        for d in range(self.num_domains):
            members = np.flatnonzero(self.node_domain == d)
            if len(members) > 1:
                root = find_intra(int(members[0]))
                if any(find_intra(int(i)) != root for i in members[1:]):
                    raise ValueError(f"domain {d} is not connected by intra-domain links")

    def _build_indexes(self) -> None:
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.num_nodes)]
        for lid, (a, b) in enumerate(self.link_ends):
            adj[int(a)].append((int(b), lid))
            adj[int(b)].append((int(a), lid))
        # sorted by neighbor id so that path searches are deterministic
        self.adjacency: list[list[tuple[int, int]]] = [sorted(e) for e in adj]
        self._domain_nodes = [
            np.flatnonzero(self.node_domain == d) for d in range(self.num_domains)
        ]
        if self.num_links:
            delta = self.coords[self.link_ends[:, 0]] - self.coords[self.link_ends[:, 1]]
            self.link_length = np.hypot(delta[:, 0], delta[:, 1])
        else:
            self.link_length = np.zeros(0)

    # -- accessors -----------------------------------------------------

    def node(self, node_id: int) -> SubstrateNode:
        return SubstrateNode(
            node_id=node_id,
            domain_id=int(self.node_domain[node_id]),
            coord=(float(self.coords[node_id, 0]), float(self.coords[node_id, 1])),
            cpu_capacity=float(self.cpu_capacity[node_id]),
            cpu_available=float(self.cpu_available[node_id]),
        )

    def link(self, link_id: int) -> SubstrateLink:
        a, b = (int(x) for x in self.link_ends[link_id])
        return SubstrateLink(
            link_id=link_id,
            endpoint_a=a,
            endpoint_b=b,
            kind=self.link_kind(link_id),
            bw_capacity=float(self.bw_capacity[link_id]),
            bw_available=float(self.bw_available[link_id]),
        )

    def link_kind(self, link_id: int) -> str:
        a, b = self.link_ends[link_id]
        return INTRA if self.node_domain[a] == self.node_domain[b] else INTER

    def domain_node_ids(self, domain_id: int) -> np.ndarray:
        return self._domain_nodes[domain_id]

    def available_bw_sums(self) -> np.ndarray:
        """Per node, the sum of available bandwidth on incident links."""
        if not self.num_links:
            return np.zeros(self.num_nodes)
        return np.bincount(
            self.link_ends.ravel(),
            weights=np.repeat(self.bw_available, 2),
            minlength=self.num_nodes,
        )

    def resource_vector(self) -> np.ndarray:
        """Concatenated cpu/bw availability, for conservation checks."""
        return np.concatenate([self.cpu_available, self.bw_available])

    def copy(self) -> "MultiDomainSubstrate":
        """Fresh availability state over the shared (immutable) topology."""
        clone = object.__new__(MultiDomainSubstrate)
        clone.__dict__.update(self.__dict__)
        clone.cpu_available = self.cpu_available.copy()
        clone.bw_available = self.bw_available.copy()
        return clone

    # -- resource operations --------------------------------------------

    def allocate_node(self, node_id: int, cpu_demand: float) -> None:
        available = self.cpu_available[node_id]
        if cpu_demand > available:
            raise InsufficientCpu(node_id, cpu_demand, float(available))
        self.cpu_available[node_id] = available - cpu_demand

    def allocate_path(self, path, bw_demand: float) -> None:
        """All-or-nothing allocation along an ordered list of link ids."""
        for link_id in path:
            available = self.bw_available[link_id]
            if bw_demand > available:
                raise InsufficientBandwidth(int(link_id), bw_demand, float(available))
        for link_id in path:
            self.bw_available[link_id] -= bw_demand

    def free_node(self, node_id: int, cpu_amount: float) -> None:
        restored = self.cpu_available[node_id] + cpu_amount
        if restored > self.cpu_capacity[node_id]:
            raise ValueError(f"freeing {cpu_amount} cpu on node {node_id} exceeds capacity")
        self.cpu_available[node_id] = restored

    def free_path(self, path, bw_amount: float) -> None:
        for link_id in path:
            restored = self.bw_available[link_id] + bw_amount
            if restored > self.bw_capacity[link_id]:
                raise ValueError(f"freeing {bw_amount} bw on link {link_id} exceeds capacity")
            self.bw_available[link_id] = restored

    def release(self, record) -> None:
        """Return every resource an applied embedding record consumed.

        The record must currently hold resources on this substrate; releasing
        twice (or releasing a record that was never applied) raises
        DoubleRelease.
        """
        if not getattr(record, "outstanding", False):
            raise DoubleRelease(f"record for vnr {record.vnr_id} holds no resources")
        for v_node, node_id in record.node_map.items():
            self.free_node(node_id, record.cpu_demands[v_node])
        for v_link, path in record.link_paths.items():
            self.free_path(path, record.bw_demands[v_link])
        record.outstanding = False
