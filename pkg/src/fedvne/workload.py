"""Workload generation and text-file ingestion.

Generators are pure functions of (config, seed): the same inputs always
produce the same substrate or request stream. File formats are plain
whitespace-separated text; lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .substrate import MultiDomainSubstrate


class ParseError(Exception):
    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class ValidationError(Exception):
    pass


class InfeasibleTopology(Exception):
    pass


@dataclass(frozen=True)
class VirtualNetworkRequest:
    """A virtual network plus the window [t_s, t_e] during which it holds resources."""

    vnr_id: int
    node_demands: tuple[float, ...]
    link_demands: tuple[tuple[int, int, float], ...]
    t_s: float
    t_e: float

    @property
    def num_nodes(self) -> int:
        return len(self.node_demands)

    @property
    def num_links(self) -> int:
        return len(self.link_demands)


def validate_vnr(vnr: VirtualNetworkRequest) -> None:
    if vnr.t_e <= vnr.t_s:
        raise ValidationError(f"vnr {vnr.vnr_id}: departure time must exceed arrival time")
    n = vnr.num_nodes
    if n < 1:
        raise ValidationError(f"vnr {vnr.vnr_id}: needs at least one virtual node")
    seen: set[tuple[int, int]] = set()
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b, bw in vnr.link_demands:
        if not (0 <= a < n and 0 <= b < n):
            raise ValidationError(f"vnr {vnr.vnr_id}: virtual link endpoint out of range")
        if a == b:
            raise ValidationError(f"vnr {vnr.vnr_id}: virtual self-loop at node {a}")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise ValidationError(f"vnr {vnr.vnr_id}: duplicate virtual link {key}")
        seen.add(key)
        if bw < 0:
            raise ValidationError(f"vnr {vnr.vnr_id}: negative bandwidth demand")
        parent[find(a)] = find(b)
    if any(d < 0 for d in vnr.node_demands):
        raise ValidationError(f"vnr {vnr.vnr_id}: negative cpu demand")
    if n > 1:
        root = find(0)
        if any(find(i) != root for i in range(1, n)):
            raise ValidationError(f"vnr {vnr.vnr_id}: virtual topology is not connected")


# -- generation ----------------------------------------------------------


def generate_substrate(config, seed: int) -> MultiDomainSubstrate:
    """Build a random multi-domain substrate.

    Each domain gets a random spanning tree plus random extra intra-domain
    links; a share of the link budget (``inter_link_ratio``, at least enough
    to connect all domains) is spent on inter-domain links.
    """
    rng = random.Random(seed)
    num_domains = config.num_domains
    per_domain = config.nodes_per_domain
    total_links = config.num_links
    n = num_domains * per_domain

    tree_links = num_domains * (per_domain - 1)
    domain_tree = num_domains - 1 if num_domains > 1 else 0
    if total_links < tree_links + domain_tree:
        raise InfeasibleTopology(
            f"{total_links} links cannot connect {num_domains} domains of {per_domain} nodes"
        )
    max_intra_per_domain = per_domain * (per_domain - 1) // 2
    max_inter = per_domain * per_domain * num_domains * (num_domains - 1) // 2
    if total_links > max_intra_per_domain * num_domains + max_inter:
        raise InfeasibleTopology(f"{total_links} links exceed the simple-graph maximum")

    node_domains = [d for d in range(num_domains) for _ in range(per_domain)]
    coords = [(rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0)) for _ in range(n)]
    cpu = [float(rng.randint(int(config.cpu_min), int(config.cpu_max))) for _ in range(n)]

    edges: set[tuple[int, int]] = set()
    link_ends: list[tuple[int, int]] = []

    def add_edge(a: int, b: int) -> None:
        key = (min(a, b), max(a, b))
        edges.add(key)
        link_ends.append(key)

    domain_ids = [list(range(d * per_domain, (d + 1) * per_domain)) for d in range(num_domains)]

    for d in range(num_domains):
        order = domain_ids[d][:]
        rng.shuffle(order)
        for i in range(1, len(order)):
            add_edge(rng.choice(order[:i]), order[i])

    used = len(link_ends)
    inter_target = 0
    if num_domains > 1:
        inter_target = max(domain_tree, round(total_links * config.inter_link_ratio))
        inter_target = min(inter_target, max_inter, total_links - used)
    intra_extra = total_links - used - inter_target

    # spread the extra intra links round-robin across domains
    capacity = [max_intra_per_domain - (per_domain - 1)] * num_domains
    quota = [0] * num_domains
    d = 0
    placed = 0
    while placed < intra_extra:
        if all(quota[i] >= capacity[i] for i in range(num_domains)):
            break
        if quota[d] < capacity[d]:
            quota[d] += 1
            placed += 1
        d = (d + 1) % num_domains
    inter_target += intra_extra - placed  # overflow goes to inter-domain links
    if inter_target > max_inter:
        raise InfeasibleTopology("link budget exceeds available node pairs")

    for d in range(num_domains):
        if quota[d] == 0:
            continue
        candidates = sorted(
            (a, b)
            for i, a in enumerate(domain_ids[d])
            for b in domain_ids[d][i + 1 :]
            if (a, b) not in edges
        )
        for a, b in rng.sample(candidates, quota[d]):
            add_edge(a, b)

    if num_domains > 1:
        for d in range(1, num_domains):
            other = rng.randrange(d)
            add_edge(rng.choice(domain_ids[other]), rng.choice(domain_ids[d]))
        remaining = inter_target - domain_tree
        if remaining > 0:
            candidates = sorted(
                (min(a, b), max(a, b))
                for da in range(num_domains)
                for db in range(da + 1, num_domains)
                for a in domain_ids[da]
                for b in domain_ids[db]
                if (min(a, b), max(a, b)) not in edges
            )
            for a, b in rng.sample(candidates, remaining):
                add_edge(a, b)

    bw = [float(rng.randint(int(config.bw_min), int(config.bw_max))) for _ in link_ends]
    return MultiDomainSubstrate(num_domains, node_domains, coords, cpu, link_ends, bw)


def generate_vnr_stream(config, seed: int) -> list[VirtualNetworkRequest]:
    """Draw a time-ordered request stream.

    Inter-arrival gaps are exponential(arrival_rate), lifetimes exponential
    with the configured mean, virtual topologies are edge-sampled with
    probability ``vlink_prob`` and patched to connectivity with uniformly
    chosen bridging edges.
    """
    rng = random.Random(seed)
    stream: list[VirtualNetworkRequest] = []
    t = 0.0
    for vnr_id in range(config.vnr_count):
        t += rng.expovariate(config.arrival_rate)
        lifetime = rng.expovariate(1.0 / config.mean_lifetime)
        n = rng.randint(config.vn_nodes_min, config.vn_nodes_max)
        edges = [
            (i, j)
            for i in range(n)
            for j in range(i + 1, n)
            if rng.random() < config.vlink_prob
        ]
        edges.extend(_bridge_components(n, edges, rng))
        cpu = tuple(
            float(rng.randint(int(config.vnode_cpu_min), int(config.vnode_cpu_max)))
            for _ in range(n)
        )
        links = tuple(
            (a, b, float(rng.randint(int(config.vlink_bw_min), int(config.vlink_bw_max))))
            for a, b in edges
        )
        stream.append(
            VirtualNetworkRequest(
                vnr_id=vnr_id, node_demands=cpu, link_demands=links, t_s=t, t_e=t + lifetime
            )
        )
    return stream


def _bridge_components(n: int, edges: list[tuple[int, int]], rng: random.Random):
    """Minimum extra edges joining the components of an edge-sampled graph."""
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        parent[find(a)] = find(b)
    components: dict[int, list[int]] = {}
    for i in range(n):
        components.setdefault(find(i), []).append(i)
    groups = [sorted(v) for _, v in sorted(components.items())]
    bridges = []
    merged = groups[0]
    for group in groups[1:]:
        a = rng.choice(merged)
        b = rng.choice(group)
        bridges.append((min(a, b), max(a, b)))
        merged = sorted(merged + group)
    return bridges


def rebase_stream(vnrs, origin: float | None = None) -> list[VirtualNetworkRequest]:
    """Shift arrival/departure times so the stream's clock starts at zero."""
    if not vnrs:
        return []
    base = vnrs[0].t_s if origin is None else origin
    return [
        VirtualNetworkRequest(
            vnr_id=v.vnr_id,
            node_demands=v.node_demands,
            link_demands=v.link_demands,
            t_s=v.t_s - base,
            t_e=v.t_e - base,
        )
        for v in vnrs
    ]


# -- text formats ----------------------------------------------------------


def _fmt(value: float) -> str:
    return repr(float(value))


def save_substrate(path, substrate: MultiDomainSubstrate) -> None:
    lines = [f"{substrate.num_nodes} {substrate.num_links} {substrate.num_domains}"]
    for i in range(substrate.num_nodes):
        x, y = substrate.coords[i]
        lines.append(
            f"{i} {int(substrate.node_domain[i])} {_fmt(x)} {_fmt(y)} "
            f"{_fmt(substrate.cpu_capacity[i])}"
        )
    for link_id, (a, b) in enumerate(substrate.link_ends):
        lines.append(f"{int(a)} {int(b)} {_fmt(substrate.bw_capacity[link_id])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _data_lines(path):
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            yield line_no, text.split()


def load_substrate(path) -> MultiDomainSubstrate:
    lines = _data_lines(path)
    path = str(path)

    def next_line(what: str):
        try:
            return next(lines)
        except StopIteration:
            raise ParseError(path, 0, f"unexpected end of file, expected {what}") from None

    line_no, header = next_line("header")
    if len(header) != 3:
        raise ParseError(path, line_no, "header must be '<nodes> <links> <domains>'")
    try:
        num_nodes, num_links, num_domains = (int(x) for x in header)
    except ValueError:
        raise ParseError(path, line_no, "header fields must be integers") from None

    node_domains, coords, cpu = [], [], []
    for i in range(num_nodes):
        line_no, fields = next_line("node line")
        if len(fields) != 5:
            raise ParseError(path, line_no, "node line must be '<id> <domain> <x> <y> <cpu>'")
        try:
            node_id = int(fields[0])
            domain = int(fields[1])
            x, y, capacity = (float(f) for f in fields[2:])
        except ValueError:
            raise ParseError(path, line_no, "malformed node line") from None
        if node_id != i:
            raise ValidationError(f"node ids must be sequential from 0, got {node_id} at position {i}")
        node_domains.append(domain)
        coords.append((x, y))
        cpu.append(capacity)

    link_ends, bw = [], []
    for _ in range(num_links):
        line_no, fields = next_line("link line")
        if len(fields) != 3:
            raise ParseError(path, line_no, "link line must be '<a> <b> <bw>'")
        try:
            a, b = int(fields[0]), int(fields[1])
            capacity = float(fields[2])
        except ValueError:
            raise ParseError(path, line_no, "malformed link line") from None
        if not (0 <= a < num_nodes and 0 <= b < num_nodes):
            raise ValidationError(f"link endpoint ({a}, {b}) refers to a missing node")
        link_ends.append((a, b))
        bw.append(capacity)

    try:
        return MultiDomainSubstrate(num_domains, node_domains, coords, cpu, link_ends, bw)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def save_vnrs(path, vnrs) -> None:
    lines = [str(len(vnrs))]
    for v in vnrs:
        lines.append(f"{v.vnr_id} {_fmt(v.t_s)} {_fmt(v.t_e)} {v.num_nodes} {v.num_links}")
        for demand in v.node_demands:
            lines.append(_fmt(demand))
        for a, b, bw in v.link_demands:
            lines.append(f"{a} {b} {_fmt(bw)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_vnrs(path) -> list[VirtualNetworkRequest]:
    lines = _data_lines(path)
    path = str(path)

    def next_line(what: str):
        try:
            return next(lines)
        except StopIteration:
            raise ParseError(path, 0, f"unexpected end of file, expected {what}") from None

    line_no, header = next_line("request count")
    try:
        count = int(header[0])
    except (ValueError, IndexError):
        raise ParseError(path, line_no, "first line must be the request count") from None

    stream = []
    for _ in range(count):
        line_no, fields = next_line("request header")
        if len(fields) != 5:
            raise ParseError(
                path, line_no, "request header must be '<id> <t_s> <t_e> <nodes> <links>'"
            )
        try:
            vnr_id = int(fields[0])
            t_s, t_e = float(fields[1]), float(fields[2])
            n, m = int(fields[3]), int(fields[4])
        except ValueError:
            raise ParseError(path, line_no, "malformed request header") from None
        demands = []
        for _ in range(n):
            line_no, fields = next_line("cpu demand")
            try:
                demands.append(float(fields[0]))
            except (ValueError, IndexError):
                raise ParseError(path, line_no, "malformed cpu demand") from None
        links = []
        for _ in range(m):
            line_no, fields = next_line("virtual link")
            if len(fields) != 3:
                raise ParseError(path, line_no, "virtual link must be '<a> <b> <bw>'")
            try:
                links.append((int(fields[0]), int(fields[1]), float(fields[2])))
            except ValueError:
                raise ParseError(path, line_no, "malformed virtual link") from None
        vnr = VirtualNetworkRequest(
            vnr_id=vnr_id,
            node_demands=tuple(demands),
            link_demands=tuple(links),
            t_s=t_s,
            t_e=t_e,
        )
        validate_vnr(vnr)
        stream.append(vnr)

    for earlier, later in zip(stream, stream[1:]):
        if later.t_s < earlier.t_s:
            raise ValidationError("request stream is not sorted by arrival time")
    return stream
