"""Device-to-device caching in a unit-square cell tiled by square clusters.

Users land uniformly in the cell; each cluster of side r is a potential D2D
collaboration domain.  A cluster is active when some user's request sits in
another same-cluster user's cache (a request found in the user's own cache is
served locally and does not activate the cluster).  The module computes the
expected number of active clusters analytically for the deterministic caching
rule and by Monte Carlo for both caching rules, plus the collaboration-radius
and caching-exponent sweeps, scaling tables, and a random-geometric-graph
connectivity variant.

The analytic expression is an independent derivation (expectation over the
binomial cluster occupancy of one minus the all-miss product) and is validated
against this module's own Monte Carlo, not against published values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import binom

from .errors import InvalidParameterError
from .popularity import PopularityModel, catalog_size, sample_requests, zipf_model
from .rng import stream

logger = logging.getLogger(__name__)

STRATEGIES = ("deterministic", "random-zipf")
TILE_TOL = 1e-9
_CHUNK_ELEMENTS = 1 << 21  # keeps Monte Carlo chunking (and streams) stable


@dataclass(frozen=True)
class D2DScenario:
    """Cluster-model inputs; the cell is the unit square, r the cluster side."""

    n: int
    m: int
    M: int
    r: float
    gamma: float
    strategy: str = "deterministic"
    gamma1: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameterError("n must be >= 1")
        if self.m < 1:
            raise InvalidParameterError("m must be >= 1")
        if self.M < 0:
            raise InvalidParameterError("M must be >= 0")
        if not (0.0 < self.r <= 1.0):
            raise InvalidParameterError("r must lie in (0, 1]")
        if not math.isfinite(self.gamma) or self.gamma < 0:
            raise InvalidParameterError("gamma must be finite and >= 0")
        if self.strategy not in STRATEGIES:
            raise InvalidParameterError(
                f"strategy must be one of {STRATEGIES}, got {self.strategy!r}"
            )
        if self.strategy == "random-zipf":
            if self.gamma1 is None or not math.isfinite(self.gamma1) or self.gamma1 < 0:
                raise InvalidParameterError(
                    "random-zipf strategy needs a finite gamma1 >= 0"
                )
            if self.M > self.m:
                raise InvalidParameterError("random caches need M <= m")
        elif self.gamma1 is not None:
            raise InvalidParameterError(
                "gamma1 only applies to the random-zipf strategy"
            )

    def popularity(self) -> PopularityModel:
        return zipf_model(self.gamma, self.m)


@dataclass(frozen=True)
class ClusterStats:
    expected_active: float
    stderr: float
    K: int


def grid_side(r: float, exact: bool) -> tuple[int, bool]:
    """Clusters per cell edge.  1/r must be an integer when `exact`.

    Non-tiling r in Monte Carlo mode falls back to a floor(1/r) grid (slightly
    larger clusters) with a warning.
    """
    inv = 1.0 / r
    nearest = round(inv)
    if nearest >= 1 and abs(inv - nearest) <= TILE_TOL * max(1.0, inv):
        return int(nearest), True
    if exact:
        raise InvalidParameterError(
            f"1/r must be an integer for the analytic model; got r={r!r}"
            f" (nearest valid: 1/{max(nearest, 1)})"
        )
    return max(int(math.floor(inv)), 1), False


def cvc_deterministic(k: int, M: int, m: int) -> tuple[frozenset[int], ...]:
    """Caches of k co-located users: user j holds ranks (j-1)M+1 .. min(jM, m).

    The union is the min(kM, m) most popular files with no repetition; users
    past the catalog end hold nothing.
    """
    if k < 0:
        raise InvalidParameterError("k must be >= 0")
    if M < 0:
        raise InvalidParameterError("M must be >= 0")
    if m < 1:
        raise InvalidParameterError("m must be >= 1")
    caches = []
    for j in range(1, k + 1):
        lo = min((j - 1) * M, m)
        hi = min(j * M, m)
        caches.append(frozenset(range(lo + 1, hi + 1)))
    return tuple(caches)


def _random_caches(
    count: int, M: int, gamma1: float, m: int, rng: np.random.Generator
) -> np.ndarray:
    """(count, M) matrix of distinct ranks per row, drawn Zipf(gamma1) with
    duplicate rejection.  Rows fill in lockstep rounds, one candidate per
    incomplete row per round."""
    if M > m:
        raise InvalidParameterError("random caches need M <= m")
    out = np.zeros((count, M), dtype=np.int64)
    if M == 0 or count == 0:
        return out
    if M == m:
        return np.tile(np.arange(1, m + 1, dtype=np.int64), (count, 1))
    model = zipf_model(gamma1, m)
    if M == 1:
        out[:, 0] = sample_requests(model, rng, count)
        return out
    filled = np.zeros(count, dtype=np.int64)
    while True:
        rows = np.flatnonzero(filled < M)
        if rows.size == 0:
            return out
        draws = sample_requests(model, rng, rows.size)
        fresh = ~(out[rows] == draws[:, None]).any(axis=1)
        hit = rows[fresh]
        out[hit, filled[hit]] = draws[fresh]
        filled[hit] += 1


def cache_random(
    M: int, gamma1: float, m: int, rng: np.random.Generator
) -> frozenset[int]:
    """One user's random cache: M distinct ranks, Zipf(gamma1)-weighted."""
    return frozenset(int(v) for v in _random_caches(1, M, gamma1, m, rng)[0])


def cluster_active(caches, requests) -> bool:
    """True iff some user's request is held by a different user in the cluster."""
    if len(caches) != len(requests):
        raise InvalidParameterError("caches and requests must have equal length")
    for i, req in enumerate(requests):
        for j, cache in enumerate(caches):
            if j != i and req in cache:
                return True
    return False


def expected_active_analytic(
    scenario: D2DScenario, pop: PopularityModel
) -> ClusterStats:
    """Exact expected active clusters for the deterministic caching rule.

    By linearity the answer is K times the per-cluster activation probability:
    occupancy k is Binomial(n, 1/K), and given k the users' requests are
    independent, so P(active | k) = 1 - prod_j (1 - q_j) with q_j the mass of
    the cluster's cache union minus user j's own block.
    """
    if scenario.strategy != "deterministic":
        raise InvalidParameterError("the analytic model covers only deterministic caching")
    if pop.m != scenario.m:
        raise InvalidParameterError("popularity catalog must match the scenario")
    side, _ = grid_side(scenario.r, exact=True)
    K = side * side
    n, M, m = scenario.n, scenario.M, scenario.m
    if M == 0 or n < 2:
        return ClusterStats(expected_active=0.0, stderr=0.0, K=K)
    cdf0 = np.concatenate([[0.0], pop.cdf])
    p_cell = 1.0 / K
    k_lo = max(2, int(binom.ppf(1e-15, n, p_cell)))
    k_hi = min(n, int(binom.ppf(1.0 - 1e-15, n, p_cell)) + 1)
    ks = np.arange(k_lo, k_hi + 1)
    pk = binom.pmf(ks, n, p_cell)
    total = 0.0
    for k, weight in zip(ks, pk):
        if weight < 1e-18:
            continue
        head = cdf0[min(k * M, m)]
        j = np.arange(1, k + 1)
        lo = np.minimum((j - 1) * M, m)
        hi = np.minimum(j * M, m)
        q = head - (cdf0[hi] - cdf0[lo])
        total += weight * (1.0 - float(np.prod(1.0 - q)))
    return ClusterStats(expected_active=K * total, stderr=0.0, K=K)


def _chunk_counts(
    scenario: D2DScenario,
    pop: PopularityModel,
    rng: np.random.Generator,
    reps: int,
    side: int,
) -> np.ndarray:
    n, m, M = scenario.n, scenario.m, scenario.M
    K = side * side
    total = reps * n
    pos = rng.random((total, 2))
    cx = np.minimum((pos[:, 0] * side).astype(np.int64), side - 1)
    cy = np.minimum((pos[:, 1] * side).astype(np.int64), side - 1)
    gid = np.repeat(np.arange(reps, dtype=np.int64) * K, n) + cx * side + cy
    if scenario.strategy == "random-zipf":
        caches = _random_caches(total, M, scenario.gamma1, m, rng)
    requests = sample_requests(pop, rng, total)

    order = np.argsort(gid, kind="stable")
    g = gid[order]
    starts = np.flatnonzero(np.concatenate([[True], g[1:] != g[:-1]]))
    sizes = np.diff(np.append(starts, g.size))
    req = requests[order]

    if scenario.strategy == "deterministic":
        # Rank within the cluster decides which contiguous block a user holds.
        j = np.arange(g.size) - np.repeat(starts, sizes) + 1
        k = np.repeat(sizes, sizes)
        head = np.minimum(k * M, m)
        own_lo = np.minimum((j - 1) * M, m)
        own_hi = np.minimum(j * M, m)
        active = (req <= head) & ~((req > own_lo) & (req <= own_hi))
    else:
        if M == 0:
            active = np.zeros(g.size, dtype=bool)
        else:
            # Count holders of each requested rank inside the cluster, then
            # discount the requester's own copy.
            keys = np.sort((gid[:, None] * (m + 1) + caches).ravel())
            req_keys = g * (m + 1) + req
            holders = np.searchsorted(keys, req_keys, side="right") - np.searchsorted(
                keys, req_keys, side="left"
            )
            own = (caches[order] == req[:, None]).any(axis=1)
            active = (holders - own.astype(np.int64)) >= 1

    group_active = np.logical_or.reduceat(active, starts)
    rep_of_group = g[starts] // K
    return np.bincount(rep_of_group[group_active], minlength=reps).astype(float)


def simulate_active_clusters(
    scenario: D2DScenario,
    pop: PopularityModel,
    rng: np.random.Generator,
    reps: int,
) -> ClusterStats:
    """Monte Carlo active-cluster count: mean and standard error over `reps`.

    Draw order per replication batch: user positions, then caches (random
    strategy only), then one request per user.  Batching is sized by a fixed
    element budget so results per replication do not depend on `reps`.
    """
    if reps < 1:
        raise InvalidParameterError("reps must be >= 1")
    if pop.m != scenario.m:
        raise InvalidParameterError("popularity catalog must match the scenario")
    side, exact = grid_side(scenario.r, exact=False)
    if not exact:
        logger.warning(
            "r=%g does not tile the unit square; using a %d x %d cluster grid",
            scenario.r,
            side,
            side,
        )
    per_rep = scenario.n * max(scenario.M, 1)
    chunk = max(1, _CHUNK_ELEMENTS // per_rep)
    counts = np.empty(reps)
    done = 0
    while done < reps:
        take = min(chunk, reps - done)
        counts[done : done + take] = _chunk_counts(scenario, pop, rng, take, side)
        done += take
    mean = float(counts.mean())
    err = float(counts.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return ClusterStats(expected_active=mean, stderr=err, K=side * side)


@dataclass(frozen=True)
class D2DSweepRow:
    r: float
    gamma: float
    gamma1: float | None
    mean_active: float
    stderr: float
    K: int
    mode: str


def _evaluate(
    scenario: D2DScenario,
    pop: PopularityModel,
    reps: int,
    root_seed: int,
    mode: str,
) -> tuple[ClusterStats, str]:
    if mode not in ("auto", "analytic", "mc"):
        raise InvalidParameterError("mode must be 'auto', 'analytic', or 'mc'")
    if mode == "auto":
        analytic = scenario.strategy == "deterministic" and grid_side(
            scenario.r, exact=False
        )[1]
        mode = "analytic" if analytic else "mc"
    if mode == "analytic":
        return expected_active_analytic(scenario, pop), "analytic"
    # The stream key is the same for every sweep point on purpose: points see
    # identical positions and requests, so curves differ only by the parameter.
    rng = stream(root_seed, "d2d-mc")
    return simulate_active_clusters(scenario, pop, rng, reps), "mc"


def sweep_r(
    scenario: D2DScenario,
    r_values,
    pop: PopularityModel,
    reps: int,
    root_seed: int,
    mode: str = "auto",
) -> list[D2DSweepRow]:
    """Expected active clusters per collaboration distance r."""
    rows = []
    for r in r_values:
        sc = replace(scenario, r=float(r))
        stats, used = _evaluate(sc, pop, reps, root_seed, mode)
        rows.append(
            D2DSweepRow(
                r=float(r),
                gamma=scenario.gamma,
                gamma1=scenario.gamma1,
                mean_active=stats.expected_active,
                stderr=stats.stderr,
                K=stats.K,
                mode=used,
            )
        )
    return rows


def sweep_gamma1(
    scenario: D2DScenario,
    gamma1_values,
    r_values,
    pop: PopularityModel,
    reps: int,
    root_seed: int,
) -> list[D2DSweepRow]:
    """Active-cluster curves over the caching exponent, one curve per r."""
    if scenario.strategy != "random-zipf":
        raise InvalidParameterError("gamma1 sweeps need the random-zipf strategy")
    rows = []
    for r in r_values:
        for g1 in gamma1_values:
            sc = replace(scenario, r=float(r), gamma1=float(g1))
            stats, used = _evaluate(sc, pop, reps, root_seed, "mc")
            rows.append(
                D2DSweepRow(
                    r=float(r),
                    gamma=scenario.gamma,
                    gamma1=float(g1),
                    mean_active=stats.expected_active,
                    stderr=stats.stderr,
                    K=stats.K,
                    mode=used,
                )
            )
    return rows


@dataclass(frozen=True)
class ScalingRow:
    n: int
    m: int
    r: float
    K: int
    mean_active: float
    ratio: float  # mean_active / n
    stderr: float
    mode: str


def scaling_check(
    gamma: float,
    n_values=(250, 500, 1000, 2000),
    M: int = 1,
    scale: float = 50.0,
    reps: int = 2000,
    root_seed: int = 0,
    mode: str = "analytic",
) -> list[ScalingRow]:
    """Per-user active clusters across cell sizes, with r re-optimized per n.

    The catalog grows logarithmically with n (`scale` files per log unit).
    For each n the collaboration distance is chosen as the best 1/integer by
    the same evaluation mode used for the reported row.
    """
    if mode not in ("analytic", "mc"):
        raise InvalidParameterError("mode must be 'analytic' or 'mc'")
    rows = []
    for n in n_values:
        n = int(n)
        m = catalog_size(n, scale=scale)
        pop = zipf_model(gamma, m)
        best: tuple[ClusterStats, int] | None = None
        for side in range(1, int(math.ceil(2.0 * math.sqrt(n))) + 1):
            sc = D2DScenario(n=n, m=m, M=M, r=1.0 / side, gamma=gamma)
            if mode == "analytic":
                stats = expected_active_analytic(sc, pop)
            else:
                stats = simulate_active_clusters(
                    sc, pop, stream(root_seed, "scaling", n, side), reps
                )
            if best is None or stats.expected_active > best[0].expected_active:
                best = (stats, side)
        stats, side = best
        rows.append(
            ScalingRow(
                n=n,
                m=m,
                r=1.0 / side,
                K=stats.K,
                mean_active=stats.expected_active,
                ratio=stats.expected_active / n,
                stderr=stats.stderr,
                mode=mode,
            )
        )
    return rows


@dataclass(frozen=True, eq=False)
class RandomGeometricGraph:
    """Nodes in the unit square, undirected edges at distance <= radius."""

    positions: np.ndarray  # (n, 2)
    radius: float
    neighbor_lists: tuple[np.ndarray, ...]

    @property
    def n_nodes(self) -> int:
        return self.positions.shape[0]

    def degree(self) -> np.ndarray:
        return np.array([ids.size for ids in self.neighbor_lists], dtype=np.int64)

    @property
    def n_edges(self) -> int:
        return int(self.degree().sum()) // 2


def rgg_from_positions(positions, radius: float) -> RandomGeometricGraph:
    """Geometric graph on given positions; edges at distance exactly `radius`
    are kept.  Neighbor search buckets the square into a grid of cells at
    least `radius` wide, so only the 3x3 surrounding cells are scanned."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    if pos.size == 0:
        pos = pos.reshape(0, 2)
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise InvalidParameterError("positions must be an (n, 2) array")
    if not math.isfinite(radius) or radius <= 0:
        raise InvalidParameterError("radius must be finite and > 0")
    n = pos.shape[0]
    side = max(1, int(math.floor(1.0 / radius)))
    cx = np.minimum((pos[:, 0] * side).astype(np.int64), side - 1)
    cy = np.minimum((pos[:, 1] * side).astype(np.int64), side - 1)
    buckets: dict[tuple[int, int], list[int]] = {}
    for i in range(n):
        buckets.setdefault((int(cx[i]), int(cy[i])), []).append(i)
    bucket_arrays = {key: np.array(ids) for key, ids in buckets.items()}
    neighbor_lists = []
    for i in range(n):
        cands = [
            bucket_arrays[key]
            for dx in (-1, 0, 1)
            for dy in (-1, 0, 1)
            if (key := (int(cx[i]) + dx, int(cy[i]) + dy)) in bucket_arrays
        ]
        ids = np.concatenate(cands)
        d = np.hypot(pos[ids, 0] - pos[i, 0], pos[ids, 1] - pos[i, 1])
        keep = ids[(d <= radius) & (ids != i)]
        neighbor_lists.append(np.sort(keep))
    return RandomGeometricGraph(
        positions=pos, radius=float(radius), neighbor_lists=tuple(neighbor_lists)
    )


def rgg_build(n: int, r: float, rng: np.random.Generator) -> RandomGeometricGraph:
    """G(n, r): n uniform nodes in the unit square, edges at distance <= r."""
    if n < 0:
        raise InvalidParameterError("n must be >= 0")
    return rgg_from_positions(rng.random((n, 2)), r)


def rgg_served_users(graph: RandomGeometricGraph, caches, requests) -> int:
    """Nodes whose request some neighbor caches (own-cache hits excluded)."""
    n = graph.n_nodes
    if len(caches) != n or len(requests) != n:
        raise InvalidParameterError("caches and requests must have one entry per node")
    count = 0
    for i in range(n):
        req = requests[i]
        if req in caches[i]:
            continue
        if any(req in caches[v] for v in graph.neighbor_lists[i]):
            count += 1
    return count


def rgg_scheduled_links(
    graph: RandomGeometricGraph, caches, requests
) -> list[tuple[int, int]]:
    """Greedy interference-aware schedule: (receiver, transmitter) pairs.

    Receivers are visited in node order and matched to their nearest neighbor
    holding the requested file; a transmitter is admitted only if it is more
    than `radius` away from every already-admitted transmitter, and no node
    plays both roles.  One transmission per admitted pair.
    """
    n = graph.n_nodes
    if len(caches) != n or len(requests) != n:
        raise InvalidParameterError("caches and requests must have one entry per node")
    links: list[tuple[int, int]] = []
    tx_ids: list[int] = []
    rx_ids: set[int] = set()
    pos = graph.positions
    for u in range(n):
        if u in rx_ids or u in tx_ids:
            continue
        if requests[u] in caches[u]:
            continue
        holders = [
            v
            for v in graph.neighbor_lists[u]
            if requests[u] in caches[v] and v not in rx_ids and v not in tx_ids
        ]
        best = None
        for v in holders:
            if any(
                np.hypot(*(pos[v] - pos[t])) <= graph.radius for t in tx_ids
            ):
                continue
            d = float(np.hypot(*(pos[v] - pos[u])))
            if best is None or d < best[0]:
                best = (d, int(v))
        if best is not None:
            links.append((u, best[1]))
            tx_ids.append(best[1])
            rx_ids.add(u)
    return links
