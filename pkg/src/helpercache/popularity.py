"""Zipf request popularity: model construction, sampling, and trace fitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, InvalidParameterError

# Hard ceiling on catalog size so a typo cannot allocate tens of GB.
MAX_CATALOG = 10_000_000


@dataclass(frozen=True, eq=False)
class PopularityModel:
    """Popularity of a catalog of `m` files, most popular first.

    pmf[i] is the probability that a request asks for the file of rank i+1.
    Instances built by `zipf_model` satisfy pmf[i] proportional to (i+1)**-gamma.
    """

    gamma: float
    m: int
    pmf: np.ndarray
    cdf: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.m < 1:
            raise InvalidParameterError("catalog size m must be >= 1")
        pmf = np.asarray(self.pmf, dtype=float)
        if pmf.shape != (self.m,):
            raise InvalidParameterError("pmf length must equal m")
        if not np.all(pmf > 0):
            raise InvalidParameterError("pmf entries must be positive")
        if abs(float(pmf.sum()) - 1.0) > 1e-12:
            raise InvalidParameterError("pmf must sum to 1 within 1e-12")
        if np.any(np.diff(pmf) > 0):
            raise InvalidParameterError("pmf must be non-increasing in rank")
        object.__setattr__(self, "pmf", pmf)
        cdf = np.cumsum(pmf)
        cdf[-1] = 1.0  # guard against accumulated rounding at the tail
        object.__setattr__(self, "cdf", cdf)


def zipf_model(gamma: float, m: int, max_catalog: int = MAX_CATALOG) -> PopularityModel:
    """Build a Zipf(gamma) popularity model over ranks 1..m.

    gamma=0 gives the uniform distribution.  m is capped at `max_catalog`.
    """
    if not math.isfinite(gamma) or gamma < 0:
        raise InvalidParameterError("gamma must be finite and >= 0")
    if m < 1:
        raise InvalidParameterError("catalog size m must be >= 1")
    if m > max_catalog:
        raise InvalidParameterError(
            f"catalog size {m} exceeds the cap of {max_catalog}"
        )
    ranks = np.arange(1, m + 1, dtype=float)
    weights = np.power(ranks, -gamma)
    pmf = weights / weights.sum()
    return PopularityModel(gamma=float(gamma), m=int(m), pmf=pmf)


def sample_requests(
    model: PopularityModel, rng: np.random.Generator, size: int
) -> np.ndarray:
    """Draw `size` i.i.d. request ranks (1-based) by inverse-CDF lookup."""
    if size < 0:
        raise InvalidParameterError("size must be >= 0")
    u = rng.random(size)
    return np.searchsorted(model.cdf, u, side="right").astype(np.int64) + 1


def sample_request(model: PopularityModel, rng: np.random.Generator) -> int:
    """Draw one request rank in 1..m."""
    return int(sample_requests(model, rng, 1)[0])


def head_mass(model: PopularityModel, k: int) -> float:
    """Total probability of the k most popular files (k=0 gives 0.0)."""
    if not 0 <= k <= model.m:
        raise InvalidParameterError(f"k must be in [0, {model.m}], got {k}")
    if k == 0:
        return 0.0
    return float(model.cdf[k - 1])


def catalog_size(n_users: int, scale: float = 1.0) -> int:
    """Catalog size that grows logarithmically with the user population.

    Returns max(1, round(scale * ln(n_users))).
    """
    if n_users < 1:
        raise InvalidParameterError("n_users must be >= 1")
    if not math.isfinite(scale) or scale <= 0:
        raise InvalidParameterError("scale must be finite and > 0")
    return max(1, round(scale * math.log(n_users)))


@dataclass(frozen=True)
class RequestTrace:
    """Observed request counts per file id.

    Only files with at least one request are retained; `total_requests` is the
    sum of the retained counts.
    """

    counts: tuple[tuple[int, int], ...]
    total_requests: int

    @classmethod
    def from_pairs(cls, pairs) -> "RequestTrace":
        kept = []
        seen = set()
        for file_id, count in pairs:
            file_id = int(file_id)
            count = int(count)
            if file_id in seen:
                raise InvalidParameterError(f"duplicate file id {file_id} in trace")
            seen.add(file_id)
            if count >= 1:
                kept.append((file_id, count))
        return cls(counts=tuple(kept), total_requests=sum(c for _, c in kept))


def trace_from_samples(ranks: np.ndarray) -> RequestTrace:
    """Aggregate sampled ranks into a trace (file id = rank)."""
    ids, counts = np.unique(np.asarray(ranks, dtype=np.int64), return_counts=True)
    return RequestTrace.from_pairs(zip(ids.tolist(), counts.tolist()))


def read_trace_csv(path) -> RequestTrace:
    """Read a `file_id,count` CSV (header required) into a RequestTrace."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["file_id", "count"]:
            raise InvalidParameterError("trace CSV must start with header file_id,count")
        pairs = []
        for row in reader:
            if not row:
                continue
            pairs.append((int(row[0]), int(row[1])))
    return RequestTrace.from_pairs(pairs)


def fit_zipf(trace: RequestTrace) -> tuple[float, int]:
    """Fit (gamma_hat, m_hat) from a request trace.

    Files are ranked by descending count (ties broken by ascending file id) and
    gamma_hat is minus the slope of the ordinary least-squares line of
    log(count) against log(rank).  m_hat is the number of distinct files.
    """
    if len(trace.counts) < 2:
        raise InsufficientDataError("need at least two distinct files to fit")
    ordered = sorted(trace.counts, key=lambda fc: (-fc[1], fc[0]))
    counts = np.array([c for _, c in ordered], dtype=float)
    ranks = np.arange(1, len(ordered) + 1, dtype=float)
    slope, _ = np.polyfit(np.log(ranks), np.log(counts), 1)
    return -float(slope), len(ordered)
