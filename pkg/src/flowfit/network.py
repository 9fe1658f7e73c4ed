"""Directed road network: volume-delay link times, shortest paths, skim matrices."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Rule-of-thumb BPR constants, used when the input does not set its own.
DEFAULT_ALPHA1 = 0.15
DEFAULT_ALPHA2 = 4.0

#: link_id -> traffic flow (veh/24h)
FlowMap = dict[str, float]
#: link_id -> travel time (minutes)
LinkTimes = dict[str, float]


class DisconnectedZonesError(ValueError):
    """Raised when a skim is requested between zones with no connecting path."""

    def __init__(self, origin_zone: str, destination_zone: str):
        self.origin_zone = origin_zone
        self.destination_zone = destination_zone
        super().__init__(
            f"no path from zone {origin_zone!r} to zone {destination_zone!r}"
        )


@dataclass(frozen=True)
class Node:
    node_id: str
    x: float = 0.0
    y: float = 0.0


@dataclass(frozen=True)
class Link:
    """Directed road section with a BPR congestion curve.

    t0 is the free-flow travel time in minutes, q_max the one-direction
    capacity in veh/24h. length (km) is carried for reporting only.
    """

    link_id: str
    from_node: str
    to_node: str
    t0: float
    q_max: float
    alpha1: float = DEFAULT_ALPHA1
    alpha2: float = DEFAULT_ALPHA2
    length: float | None = None


def volume_delay(link: Link, flow: float) -> float:
    """Travel time (minutes) on a link at the given daily flow.

    t(Q) = t0 * (1 + alpha1 * (Q / q_max) ** alpha2); non-decreasing in Q
    and equal to t0 at zero flow.
    """
    if flow < 0:
        raise ValueError(f"negative flow {flow!r} on link {link.link_id!r}")
    return link.t0 * (1.0 + link.alpha1 * (flow / link.q_max) ** link.alpha2)


@dataclass(frozen=True)
class Network:
    """Immutable road graph plus the anchor node of every zone."""

    nodes: dict[str, Node]
    links: dict[str, Link]
    zone_anchors: dict[str, str]

    @classmethod
    def from_parts(cls, nodes, links, zone_anchors: dict[str, str]) -> "Network":
        node_map: dict[str, Node] = {}
        for n in nodes:
            if n.node_id in node_map:
                raise ValueError(f"duplicate node_id {n.node_id!r}")
            node_map[n.node_id] = n
        link_map: dict[str, Link] = {}
        for l in links:
            if l.link_id in link_map:
                raise ValueError(f"duplicate link_id {l.link_id!r}")
            link_map[l.link_id] = l
        return cls(node_map, link_map, dict(zone_anchors))

    @cached_property
    def adjacency(self) -> dict[str, list[tuple[str, str]]]:
        """node -> sorted [(neighbor, link_id)]; sorting makes routing order-independent."""
        adj: dict[str, list[tuple[str, str]]] = {nid: [] for nid in self.nodes}
        for link in self.links.values():
            if link.from_node in adj and link.to_node in self.nodes:
                adj[link.from_node].append((link.to_node, link.link_id))
        for out in adj.values():
            out.sort()
        return adj

    @cached_property
    def reverse_adjacency(self) -> dict[str, list[tuple[str, str]]]:
        adj: dict[str, list[tuple[str, str]]] = {nid: [] for nid in self.nodes}
        for link in self.links.values():
            if link.from_node in adj and link.to_node in self.nodes:
                adj[link.to_node].append((link.from_node, link.link_id))
        for out in adj.values():
            out.sort()
        return adj


def free_flow_times(network: Network) -> LinkTimes:
    return {lid: link.t0 for lid, link in network.links.items()}


def congested_times(network: Network, flows: FlowMap) -> LinkTimes:
    return {
        lid: volume_delay(link, flows.get(lid, 0.0))
        for lid, link in network.links.items()
    }


@dataclass
class PathTree:
    """Single-origin shortest paths; dist is +inf on unreachable nodes."""

    origin: str
    dist: dict[str, float]
    pred: dict[str, tuple[str, str]]  # node -> (upstream node, link taken)

    def path_links(self, node: str) -> list[str] | None:
        """Link ids from the origin to node, or None if unreachable."""
        if node == self.origin:
            return []
        if math.isinf(self.dist.get(node, math.inf)):
            return None
        out: list[str] = []
        v = node
        while v != self.origin:
            u, lid = self.pred[v]
            out.append(lid)
            v = u
        out.reverse()
        return out


def shortest_path_tree(network: Network, link_times: LinkTimes, origin: str) -> PathTree:
    """Label-setting (Dijkstra) shortest paths from one origin node.

    Equal-cost ties resolve to the predecessor with the smallest
    (node_id, link_id) pair, so the tree depends only on the network
    content, never on input ordering.
    """
    if origin not in network.nodes:
        raise ValueError(f"unknown origin node {origin!r}")
    bad = [lid for lid, t in link_times.items() if not t > 0]
    if bad:
        raise ValueError(f"nonpositive travel time on link(s) {sorted(bad)[:5]}")

    dist = {nid: math.inf for nid in network.nodes}
    pred: dict[str, tuple[str, str]] = {}
    dist[origin] = 0.0
    settled: set[str] = set()
    heap: list[tuple[float, str]] = [(0.0, origin)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in settled:
            continue
        settled.add(u)
        for v, lid in network.adjacency[u]:
            nd = d + link_times[lid]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = (u, lid)
                heapq.heappush(heap, (nd, v))
            elif nd == dist[v] and v not in settled and (u, lid) < pred.get(v, (u, lid)):
                pred[v] = (u, lid)
    return PathTree(origin, dist, pred)


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Interzonal travel times (minutes), ordered by zone_ids."""

    zone_ids: tuple[str, ...]
    values: np.ndarray

    @cached_property
    def index(self) -> dict[str, int]:
        return {z: i for i, z in enumerate(self.zone_ids)}

    def cost(self, origin_zone: str, destination_zone: str) -> float:
        return float(self.values[self.index[origin_zone], self.index[destination_zone]])


def fill_intrazonal(values: np.ndarray) -> None:
    """Set each diagonal entry to half the smallest off-diagonal cost in its row.

    A 1x1 matrix has no off-diagonal information; its intrazonal cost is 0.
    """
    n = values.shape[0]
    for i in range(n):
        off = np.delete(values[i], i)
        values[i, i] = 0.5 * off.min() if off.size else 0.0


def skim_matrix(network: Network, link_times: LinkTimes) -> CostMatrix:
    """All-pairs interzonal shortest-path times between zone anchor nodes."""
    zone_ids = tuple(sorted(network.zone_anchors))
    anchors = [network.zone_anchors[z] for z in zone_ids]
    n = len(zone_ids)
    values = np.zeros((n, n))
    for i, zi in enumerate(zone_ids):
        tree = shortest_path_tree(network, link_times, anchors[i])
        for j, zj in enumerate(zone_ids):
            if i == j:
                continue
            d = tree.dist[anchors[j]]
            if math.isinf(d):
                raise DisconnectedZonesError(zi, zj)
            values[i, j] = d
    fill_intrazonal(values)
    values.setflags(write=False)
    return CostMatrix(zone_ids, values)


def _reachable(adjacency: dict[str, list[tuple[str, str]]], start: str) -> set[str]:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v, _ in adjacency[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def validate(network: Network) -> list[str]:
    """Diagnostics for every violated network invariant; empty when clean."""
    issues: list[str] = []
    refs_ok = True
    for lid in sorted(network.links):
        link = network.links[lid]
        for attr in ("from_node", "to_node"):
            nid = getattr(link, attr)
            if nid not in network.nodes:
                issues.append(f"link {lid!r}: {attr} {nid!r} is not a known node")
                refs_ok = False
        if link.from_node == link.to_node:
            issues.append(f"link {lid!r}: from_node equals to_node ({link.from_node!r})")
        if not link.t0 > 0:
            issues.append(f"link {lid!r}: t0 must be > 0, got {link.t0!r}")
        if not link.q_max > 0:
            issues.append(f"link {lid!r}: q_max must be > 0, got {link.q_max!r}")
        if link.alpha1 < 0:
            issues.append(f"link {lid!r}: alpha1 must be >= 0, got {link.alpha1!r}")
        if link.alpha2 < 1:
            issues.append(f"link {lid!r}: alpha2 must be >= 1, got {link.alpha2!r}")
    for zid in sorted(network.zone_anchors):
        anchor = network.zone_anchors[zid]
        if anchor not in network.nodes:
            issues.append(f"zone {zid!r}: anchor node {anchor!r} is not a known node")
            refs_ok = False

    if refs_ok and network.zone_anchors:
        zone_ids = sorted(network.zone_anchors)
        root_zone = zone_ids[0]
        root = network.zone_anchors[root_zone]
        forward = _reachable(network.adjacency, root)
        backward = _reachable(network.reverse_adjacency, root)
        for zid in zone_ids:
            anchor = network.zone_anchors[zid]
            if anchor not in forward:
                issues.append(
                    f"zone {zid!r}: anchor {anchor!r} unreachable from zone {root_zone!r}"
                )
            if anchor not in backward:
                issues.append(
                    f"zone {zid!r}: anchor {anchor!r} cannot reach zone {root_zone!r}"
                )
    return issues
