"""Network assignment: all-or-nothing loading and MSA congestion feedback."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .demand import (
    DEFAULT_FURNESS_MAX_ITER,
    DEFAULT_FURNESS_TOL,
    ODMatrix,
    distribute,
)
from .network import (
    CostMatrix,
    DisconnectedZonesError,
    FlowMap,
    LinkTimes,
    Network,
    fill_intrazonal,
    free_flow_times,
    shortest_path_tree,
    volume_delay,
)

DEFAULT_N_OUTER = 5
DEFAULT_GAP_TOL = 1e-3


class UnreachableODError(RuntimeError):
    """An OD pair demands trips but has no connecting path."""

    def __init__(self, origin_zone: str, destination_zone: str, trips: float):
        self.origin_zone = origin_zone
        self.destination_zone = destination_zone
        super().__init__(
            f"{trips:g} trips from zone {origin_zone!r} to zone "
            f"{destination_zone!r}, but no path connects them"
        )


class PathSet:
    """Anchor-to-anchor shortest paths under one fixed set of link times.

    Precomputes the link set of every OD pair's path once, so that repeated
    OD matrices (e.g. inside a calibration loop) can be loaded as a single
    matrix product against the path-link incidence.
    """

    def __init__(self, network: Network, link_times: LinkTimes):
        self.network = network
        self.zone_ids = tuple(sorted(network.zone_anchors))
        self.link_ids = tuple(sorted(network.links))
        self.link_index = {lid: k for k, lid in enumerate(self.link_ids)}
        n = len(self.zone_ids)
        m = len(self.link_ids)
        anchors = [network.zone_anchors[z] for z in self.zone_ids]
        self._costs = np.zeros((n, n))
        self._unreachable: list[tuple[int, int]] = []
        link_rows: list[int] = []
        pair_cols: list[int] = []
        for i in range(n):
            tree = shortest_path_tree(network, link_times, anchors[i])
            for j in range(n):
                if i == j:
                    continue
                d = tree.dist[anchors[j]]
                if math.isinf(d):
                    self._costs[i, j] = math.inf
                    self._unreachable.append((i, j))
                    continue
                self._costs[i, j] = d
                for lid in tree.path_links(anchors[j]):
                    link_rows.append(self.link_index[lid])
                    pair_cols.append(i * n + j)
        # links x OD-pairs incidence; loading an OD matrix is one matvec
        self._incidence = sparse.csr_matrix(
            (np.ones(len(link_rows)), (link_rows, pair_cols)), shape=(m, n * n)
        )

    def cost_matrix(self) -> CostMatrix:
        """Skim matrix over the same zones, intrazonal diagonal filled."""
        if self._unreachable:
            i, j = self._unreachable[0]
            raise DisconnectedZonesError(self.zone_ids[i], self.zone_ids[j])
        values = self._costs.copy()
        fill_intrazonal(values)
        values.setflags(write=False)
        return CostMatrix(self.zone_ids, values)

    def _aligned_trips(self, od: ODMatrix) -> np.ndarray:
        if od.zone_ids == self.zone_ids:
            return od.trips
        if set(od.zone_ids) != set(self.zone_ids):
            raise ValueError("OD matrix zones do not match network zones")
        perm = [od.index[z] for z in self.zone_ids]
        return od.trips[np.ix_(perm, perm)]

    def flow_vector(self, od: ODMatrix) -> np.ndarray:
        """Link flows (ordered by link_ids) from loading every OD pair's path."""
        T = self._aligned_trips(od)
        for i, j in self._unreachable:
            if T[i, j] > 0:
                raise UnreachableODError(self.zone_ids[i], self.zone_ids[j], T[i, j])
        interzonal = np.array(T, dtype=float)
        np.fill_diagonal(interzonal, 0.0)
        return self._incidence @ interzonal.ravel()

    def flow_map(self, vec: np.ndarray) -> FlowMap:
        return {lid: float(vec[k]) for k, lid in enumerate(self.link_ids)}


def assign_all_or_nothing(network: Network, link_times: LinkTimes, od: ODMatrix) -> FlowMap:
    """Load each OD pair's trips entirely onto its single shortest path.

    Intrazonal trips never touch the network. Ties between equal-cost paths
    follow the deterministic rule in shortest_path_tree.
    """
    paths = PathSet(network, link_times)
    return paths.flow_map(paths.flow_vector(od))


@dataclass
class AssignmentResult:
    flows: FlowMap
    per_stratum_flows: dict[str, FlowMap]
    link_times: LinkTimes
    iterations: int
    converged: bool
    relative_gap: float


def assign_iterative(
    network: Network,
    zones,
    strata,
    n_outer: int = DEFAULT_N_OUTER,
    *,
    gap_tol: float = DEFAULT_GAP_TOL,
    averaging: str = "msa",
    furness_tol: float = DEFAULT_FURNESS_TOL,
    furness_max_iter: int = DEFAULT_FURNESS_MAX_ITER,
) -> AssignmentResult:
    """Cycle skim -> distribution -> all-or-nothing -> MSA flow averaging.

    Iteration k averages the fresh all-or-nothing flows into the running
    mean with weight 1/k, then refreshes link times through the volume-delay
    curves. Redistribution inside the loop lets demand react to congestion.
    Stops after n_outer iterations, or earlier once the relative L1 change
    of total link flows drops below gap_tol. n_outer=1 is the one-off mode.
    """
    if n_outer < 1:
        raise ValueError("n_outer must be >= 1")
    if averaging != "msa":
        raise ValueError(f"unknown averaging scheme {averaging!r}")

    times = free_flow_times(network)
    link_ids = tuple(sorted(network.links))
    links = [network.links[lid] for lid in link_ids]
    avg: dict[str, np.ndarray] = {}
    total = np.zeros(len(link_ids))
    gap = math.inf
    converged = False
    iterations = 0
    for k in range(1, n_outer + 1):
        paths = PathSet(network, times)
        costs = paths.cost_matrix()
        fresh = {
            s.name: np.zeros(len(link_ids)) if s.mu == 0.0 else paths.flow_vector(
                distribute(
                    zones, s, costs,
                    furness_tol=furness_tol, furness_max_iter=furness_max_iter,
                )
            )
            for s in strata
        }
        if k == 1:
            avg = fresh
        else:
            avg = {name: avg[name] + (fresh[name] - avg[name]) / k for name in avg}
        prev_total = total
        total = sum(avg.values(), np.zeros(len(link_ids)))
        if k >= 2:
            gap = float(np.abs(total - prev_total).sum() / max(prev_total.sum(), 1e-12))
        times = {
            lid: volume_delay(link, float(total[idx]))
            for idx, (lid, link) in enumerate(zip(link_ids, links))
        }
        if not all(math.isfinite(t) for t in times.values()):
            raise ArithmeticError("volume-delay produced non-finite link times")
        iterations = k
        if k >= 2 and gap < gap_tol:
            converged = True
            break

    flows = {lid: float(total[idx]) for idx, lid in enumerate(link_ids)}
    per_stratum = {
        name: {lid: float(vec[idx]) for idx, lid in enumerate(link_ids)}
        for name, vec in avg.items()
    }
    return AssignmentResult(flows, per_stratum, times, iterations, converged, gap)


def total_link_flows(result: AssignmentResult) -> FlowMap:
    """Elementwise sum of the per-stratum flow maps; equals result.flows."""
    total: FlowMap = {lid: 0.0 for lid in result.flows}
    for flows in result.per_stratum_flows.values():
        for lid, q in flows.items():
            total[lid] += q
    return total
