"""Physical-layer abstraction and traffic generation.

The link model is log-distance path loss with per-transmission log-normal
shadowing, mapped to a packet reception ratio through a sensitivity margin.
The margin is calibrated so the configured transmission range is the 50%-PRR
distance; beyond twice the range reception is impossible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class TrafficKind(str, Enum):
    STEADY = "steady"
    BURSTY = "bursty"
    SCRIPTED = "scripted"


@dataclass
class ChannelModel:
    """Log-normal shadowing channel over a disc of radius 2 * tx_range_m."""

    tx_range_m: float = 30.0
    path_loss_exponent: float = 3.0
    shadowing_sigma_db: float = 14.0
    reference_distance_m: float = 1.0
    # None = physical model; a float forces that reception probability on
    # every link (1.0 makes the data plane lossless and consumes no RNG).
    prr_override: float | None = None

    def __post_init__(self) -> None:
        if self.tx_range_m <= 0:
            raise ValueError("tx_range_m must be positive")
        if self.shadowing_sigma_db < 0:
            raise ValueError("shadowing_sigma_db must be >= 0")

    @property
    def cutoff_m(self) -> float:
        return 2.0 * self.tx_range_m

    def mean_path_loss_db(self, distance_m: float) -> float:
        d = max(distance_m, self.reference_distance_m)
        return 10.0 * self.path_loss_exponent * math.log10(d / self.reference_distance_m)

    @property
    def margin_db(self) -> float:
        # a frame is received when loss + shadowing stays under this margin;
        # anchoring it at the mean loss at tx_range makes PRR(tx_range) = 0.5
        return self.mean_path_loss_db(self.tx_range_m)

    def link_prr(self, distance_m: float) -> float:
        """Probability that one frame crosses a link of the given length."""
        if distance_m <= 0:
            raise ValueError(f"distance must be positive, got {distance_m}")
        if self.prr_override is not None:
            return 0.0 if distance_m > self.cutoff_m else float(self.prr_override)
        if distance_m > self.cutoff_m:
            return 0.0
        headroom = self.margin_db - self.mean_path_loss_db(distance_m)
        if self.shadowing_sigma_db == 0:
            return 1.0 if headroom >= 0 else 0.0
        z = headroom / self.shadowing_sigma_db
        return 0.5 * math.erfc(-z / math.sqrt(2.0))

    def transmission_succeeds(
        self, distance_m: float, rng: np.random.Generator
    ) -> bool:
        """Sample one transmission; shadowing is redrawn per attempt."""
        if distance_m > self.cutoff_m:
            return False
        if self.prr_override is not None:
            if self.prr_override >= 1.0:
                return True
            if self.prr_override <= 0.0:
                return False
            return rng.random() < self.prr_override
        shadow = rng.normal(0.0, self.shadowing_sigma_db)
        return self.mean_path_loss_db(distance_m) + shadow <= self.margin_db


@dataclass
class TrafficProfile:
    """Per-node data generation. Rates are packets per second; a slotframe of
    duration T then carries a Poisson(rate * T) count per node.

    Scripted profiles replay exact per-slotframe counts (node -> frame ->
    count) and never touch any RNG stream.
    """

    kind: TrafficKind = TrafficKind.BURSTY
    base_rate_pps: float = 0.1
    burst_rate_pps: float = 6.0
    burst_duration_slots: int = 100
    burst_period_slotframes: int = 40
    script: dict[int, dict[int, int]] | None = None

    def burst_frames(self, slots_per_frame: int) -> int:
        return max(1, -(-self.burst_duration_slots // slots_per_frame))

    def burst_phase(self, node_id: int) -> int:
        # deterministic per-node offset so bursts are not network-synchronous;
        # Knuth multiplicative hash keeps this independent of any RNG stream
        return (node_id * 2654435761) % max(1, self.burst_period_slotframes)

    def mean_for(
        self, node_id: int, slotframe_index: int, slotframe_s: float, slots_per_frame: int
    ) -> float:
        if self.kind == TrafficKind.STEADY:
            return self.base_rate_pps * slotframe_s
        if self.kind == TrafficKind.BURSTY:
            period = max(1, self.burst_period_slotframes)
            in_burst = (slotframe_index + self.burst_phase(node_id)) % period < (
                self.burst_frames(slots_per_frame)
            )
            rate = self.burst_rate_pps if in_burst else self.base_rate_pps
            return rate * slotframe_s
        raise ValueError("scripted profiles have no rate; read the script")


def packets_this_slotframe(
    profile: TrafficProfile,
    node_id: int,
    slotframe_index: int,
    rng: np.random.Generator | None,
    *,
    slotframe_s: float = 1.0,
    slots_per_frame: int = 100,
) -> int:
    """Number of packets a node generates during one slotframe."""
    if profile.kind == TrafficKind.SCRIPTED:
        if not profile.script:
            return 0
        return int(profile.script.get(node_id, {}).get(slotframe_index, 0))
    mean = profile.mean_for(node_id, slotframe_index, slotframe_s, slots_per_frame)
    if mean <= 0:
        return 0
    if rng is None:
        raise ValueError("random traffic profiles need an RNG stream")
    return int(rng.poisson(mean))


def place_nodes(
    count: int,
    area_m: tuple[float, float],
    cutoff_m: float,
    rng: np.random.Generator,
    max_attempts: int = 500,
) -> list[tuple[float, float]]:
    """Drop the root at the area centre and the others uniformly at random,
    resampling until the reachability graph (links up to ``cutoff_m``) is
    connected."""
    width, height = area_m
    root = (width / 2.0, height / 2.0)
    if count == 1:
        return [root]
    for _ in range(max_attempts):
        xs = rng.uniform(0.0, width, size=count - 1)
        ys = rng.uniform(0.0, height, size=count - 1)
        positions = [root] + [(float(x), float(y)) for x, y in zip(xs, ys)]
        if _connected(positions, cutoff_m):
            return positions
    raise RuntimeError(
        f"no connected placement of {count} nodes in {width}x{height} m "
        f"within {max_attempts} attempts; enlarge the range or shrink the area"
    )


def _connected(positions: list[tuple[float, float]], cutoff_m: float) -> bool:
    n = len(positions)
    seen = [False] * n
    seen[0] = True
    stack = [0]
    limit = cutoff_m * cutoff_m
    while stack:
        i = stack.pop()
        xi, yi = positions[i]
        for j in range(n):
            if seen[j]:
                continue
            dx = xi - positions[j][0]
            dy = yi - positions[j][1]
            if dx * dx + dy * dy <= limit:
                seen[j] = True
                stack.append(j)
    return all(seen)
