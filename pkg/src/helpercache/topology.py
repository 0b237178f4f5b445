"""Cell geometry, link-rate model, and user/helper connectivity."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError


@dataclass(frozen=True)
class LinkRateModel:
    """Log-distance Shannon rate with a hard cap.

    rate(d) = min(max_rate_bps,
                  bandwidth_hz * log2(1 + reference_snr * (max(d, d0_m)/d0_m)**-alpha))

    `reference_snr` is the linear SNR at the reference distance `d0_m`.
    `helper_radius_m` is the coverage radius used when building connectivity
    (ignored for the base-station model, which reaches the whole cell).
    """

    bandwidth_hz: float
    reference_snr: float
    d0_m: float
    pathloss_exponent: float
    max_rate_bps: float
    helper_radius_m: float

    def __post_init__(self):
        for name in (
            "bandwidth_hz",
            "reference_snr",
            "d0_m",
            "pathloss_exponent",
            "max_rate_bps",
            "helper_radius_m",
        ):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise InvalidParameterError(f"{name} must be finite and > 0")


# Desk-scale calibration defaults.  The helper link saturates at its cap over the
# whole 60 m disc; the base-station rate falls from the same cap near the center
# to ~3 Mb/s at a 400 m cell edge, so an in-range helper is never slower than
# the base station (required for non-negative delay-savings weights).
DEFAULT_HELPER_MODEL = LinkRateModel(
    bandwidth_hz=20e6,
    reference_snr=1e8,
    d0_m=1.0,
    pathloss_exponent=3.5,
    max_rate_bps=30e6,
    helper_radius_m=60.0,
)
DEFAULT_MACRO_MODEL = LinkRateModel(
    bandwidth_hz=10e6,
    reference_snr=3e8,
    d0_m=1.0,
    pathloss_exponent=3.5,
    max_rate_bps=30e6,
    helper_radius_m=800.0,
)


def link_rate(distance_m, model: LinkRateModel):
    """Rate in bit/s at the given distance(s).  Accepts scalars or arrays."""
    d = np.maximum(np.asarray(distance_m, dtype=float), model.d0_m)
    snr = model.reference_snr * (d / model.d0_m) ** (-model.pathloss_exponent)
    rate = np.minimum(model.max_rate_bps, model.bandwidth_hz * np.log2(1.0 + snr))
    if rate.ndim == 0:
        return float(rate)
    return rate


@dataclass(frozen=True, eq=False)
class CellLayout:
    """Positions of one base station, the helpers, and the users in a disc cell."""

    cell_radius: float
    helpers: np.ndarray  # (n_helpers, 2)
    users: np.ndarray  # (n_users, 2)
    bs_position: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not math.isfinite(self.cell_radius) or self.cell_radius <= 0:
            raise InvalidParameterError("cell_radius must be finite and > 0")
        helpers = np.atleast_2d(np.asarray(self.helpers, dtype=float))
        users = np.atleast_2d(np.asarray(self.users, dtype=float))
        if helpers.size == 0:
            helpers = helpers.reshape(0, 2)
        if users.size == 0:
            users = users.reshape(0, 2)
        for name, arr in (("helpers", helpers), ("users", users)):
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise InvalidParameterError(f"{name} must be an (k, 2) array")
            radii = np.hypot(
                arr[:, 0] - self.bs_position[0], arr[:, 1] - self.bs_position[1]
            )
            if arr.size and radii.max() > self.cell_radius * (1 + 1e-9):
                raise InvalidParameterError(f"{name} positions must lie within the cell")
        object.__setattr__(self, "helpers", helpers)
        object.__setattr__(self, "users", users)

    @property
    def n_helpers(self) -> int:
        return self.helpers.shape[0]

    @property
    def n_users(self) -> int:
        return self.users.shape[0]


def place_uniform(
    count: int, cell_radius: float, rng: np.random.Generator, center=(0.0, 0.0)
) -> np.ndarray:
    """`count` i.i.d. uniform points on the disc, by rejection from the square."""
    if count < 0:
        raise InvalidParameterError("count must be >= 0")
    if not math.isfinite(cell_radius) or cell_radius <= 0:
        raise InvalidParameterError("cell_radius must be finite and > 0")
    out = np.empty((count, 2))
    have = 0
    while have < count:
        batch = max(16, int(1.35 * (count - have)) + 8)
        pts = rng.uniform(-cell_radius, cell_radius, size=(batch, 2))
        keep = pts[np.hypot(pts[:, 0], pts[:, 1]) <= cell_radius]
        take = min(count - have, keep.shape[0])
        out[have : have + take] = keep[:take]
        have += take
    return out + np.asarray(center, dtype=float)


def place_helpers(
    count: int,
    mode: str,
    cell_radius: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Helper positions, either on a centered square lattice or uniform random.

    Grid mode is deterministic: the lattice pitch shrinks until at least `count`
    cell centers fall inside the disc, then the `count` farthest from the
    center are kept (ties broken lexicographically by (x, y)).  Dropping the
    innermost lattice points keeps the outer rings complete, where the base
    station signal is weakest.
    """
    if count < 0:
        raise InvalidParameterError("count must be >= 0")
    if count == 0:
        return np.zeros((0, 2))
    if mode == "uniform":
        if rng is None:
            raise InvalidParameterError("uniform helper placement needs an rng")
        return place_uniform(count, cell_radius, rng)
    if mode != "grid":
        raise InvalidParameterError(f"unknown helper placement mode {mode!r}")
    side = max(1, math.isqrt(count - 1) + 1)
    while True:
        pitch = 2.0 * cell_radius / side
        coords = -cell_radius + pitch * (np.arange(side) + 0.5)
        xx, yy = np.meshgrid(coords, coords, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        inside = pts[np.hypot(pts[:, 0], pts[:, 1]) <= cell_radius + 1e-9]
        if inside.shape[0] >= count:
            order = np.lexsort(
                (inside[:, 1], inside[:, 0], -np.hypot(inside[:, 0], inside[:, 1]))
            )
            return inside[order[:count]]
        side += 1


@dataclass(frozen=True, eq=False)
class ConnectivityGraph:
    """Bipartite user/helper link rates plus the per-user base-station rate.

    rates[u, h] is the helper link rate in bit/s, or 0.0 when user u is out of
    helper h's coverage.  bs_rate[u] is always positive.
    """

    rates: np.ndarray  # (n_users, n_helpers)
    bs_rate: np.ndarray  # (n_users,)

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float)
        bs = np.asarray(self.bs_rate, dtype=float)
        if rates.ndim != 2:
            raise InvalidParameterError("rates must be a 2-D array")
        if bs.shape != (rates.shape[0],):
            raise InvalidParameterError("bs_rate length must match the user count")
        if not np.all(np.isfinite(rates)) or np.any(rates < 0):
            raise InvalidParameterError("link rates must be finite and >= 0")
        if not np.all(np.isfinite(bs)) or np.any(bs <= 0):
            raise InvalidParameterError("base-station rates must be finite and > 0")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "bs_rate", bs)

    @property
    def n_users(self) -> int:
        return self.rates.shape[0]

    @property
    def n_helpers(self) -> int:
        return self.rates.shape[1]

    def neighbors(self, user: int) -> np.ndarray:
        """Indices of helpers covering `user`."""
        return np.flatnonzero(self.rates[user] > 0)

    def users_of(self, helper: int) -> np.ndarray:
        """Indices of users inside helper `helper`'s coverage."""
        return np.flatnonzero(self.rates[:, helper] > 0)


def build_connectivity(
    layout: CellLayout,
    helper_model: LinkRateModel = DEFAULT_HELPER_MODEL,
    macro_model: LinkRateModel = DEFAULT_MACRO_MODEL,
) -> ConnectivityGraph:
    """Connect every user to the helpers within `helper_model.helper_radius_m`.

    An edge at exactly the radius is kept.  Base-station rates use `macro_model`
    and the distance to `layout.bs_position`.
    """
    users = layout.users
    helpers = layout.helpers
    if users.shape[0] == 0:
        return ConnectivityGraph(
            rates=np.zeros((0, helpers.shape[0])), bs_rate=np.zeros((0,))
        )
    diff = users[:, None, :] - helpers[None, :, :]
    dists = np.hypot(diff[..., 0], diff[..., 1]) if helpers.size else np.zeros(
        (users.shape[0], 0)
    )
    in_range = dists <= helper_model.helper_radius_m
    rates = np.where(in_range, link_rate(dists, helper_model), 0.0) if helpers.size else dists
    d_bs = np.hypot(users[:, 0] - layout.bs_position[0], users[:, 1] - layout.bs_position[1])
    bs = np.asarray(link_rate(d_bs, macro_model), dtype=float).reshape(-1)
    return ConnectivityGraph(rates=rates, bs_rate=bs)


def layout_to_json(layout: CellLayout) -> str:
    """Serialize a layout with the base station translated to the origin."""
    bx, by = layout.bs_position
    doc = {
        "cell_radius": layout.cell_radius,
        "helpers": [[x - bx, y - by] for x, y in layout.helpers.tolist()],
        "users": [[x - bx, y - by] for x, y in layout.users.tolist()],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def layout_from_json(text: str) -> CellLayout:
    doc = json.loads(text)
    try:
        return CellLayout(
            cell_radius=float(doc["cell_radius"]),
            helpers=np.asarray(doc["helpers"], dtype=float).reshape(-1, 2),
            users=np.asarray(doc["users"], dtype=float).reshape(-1, 2),
        )
    except KeyError as exc:
        raise InvalidParameterError(f"layout JSON missing key {exc}") from exc
