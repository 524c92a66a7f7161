"""Per-node DODAG state machine.

Nodes join by listening for DODAG advertisements (DIO), solicit them when
silent (DIS), and confirm upward routes toward the root (DAO / DAO-ACK).
Advertisements carry the sender's rank plus its propagated queue occupancy and
congestion level, which children cache per candidate parent. At each
slotframe boundary a node samples its own occupancy, folds in the parent's
advertised value, refreshes its congestion estimate and re-evaluates its
parent choice.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .config import Strategy
from .metrics import (
    KEEP,
    EstimatorParams,
    LinkStats,
    ParentView,
    QofHistory,
    SwapDecision,
    beta_ewqof,
    beta_maxqof,
    local_qof,
    propagated_qof,
    select_parent,
)


class ControlKind(str, Enum):
    DIS = "dis"
    DIO = "dio"
    DAO = "dao"
    DAO_ACK = "dao_ack"


@dataclass
class ControlMessage:
    kind: ControlKind
    sender: int
    # DIO payload
    rank: int | None = None
    qof: float | None = None
    beta: float | None = None
    version: int = 1
    # DAO payload
    target: int | None = None


class Trickle:
    """Adaptive advertisement timer.

    Each interval I picks a fire point uniformly in [I/2, I); hearing more
    than ``redundancy`` consistent advertisements inside the interval
    suppresses the emission. Intervals double up to i_min * 2**doublings and
    snap back to i_min on any inconsistency (reset).

    ``epoch`` increments whenever new fire/interval-end times are drawn, so an
    event scheduler can discard stale timers after a reset.
    """

    def __init__(
        self,
        i_min: float,
        doublings: int,
        redundancy: int,
        rng: np.random.Generator,
    ) -> None:
        self.i_min = i_min
        self.i_max = i_min * (2**doublings)
        self.redundancy = redundancy
        self._rng = rng
        self.interval = i_min
        self.counter = 0
        self.epoch = 0
        self.scheduled_epoch = -1
        self.running = False
        self.fire_time = math.inf
        self.boundary_time = math.inf

    def _begin(self, start: float) -> None:
        self.epoch += 1
        span = self.interval
        self.fire_time = start + span * (0.5 + 0.5 * float(self._rng.random()))
        self.boundary_time = start + span

    def reset(self, now: float) -> None:
        self.interval = self.i_min
        self.counter = 0
        self.running = True
        self._begin(now)

    def advance(self, now: float) -> None:
        """Interval ended without inconsistency: double and start the next."""
        self.interval = min(self.interval * 2.0, self.i_max)
        self.counter = 0
        self._begin(now)

    def heard_consistent(self) -> None:
        self.counter += 1

    def should_emit(self) -> bool:
        return self.counter <= self.redundancy


class Node:
    """One DODAG participant; the root is a Node with is_root=True."""

    def __init__(
        self,
        node_id: int,
        position: tuple[float, float],
        *,
        queue_capacity: int,
        history_k: int,
        trickle: Trickle,
        is_root: bool = False,
    ) -> None:
        self.node_id = node_id
        self.position = position
        self.is_root = is_root
        self.rank: int | None = 1 if is_root else None
        self.current_parent: int | None = None
        self.parent_set: dict[int, ParentView] = {}
        self.queue_capacity = queue_capacity
        self.tx_queue: deque = deque()
        self.link_stats: dict[int, LinkStats] = {}
        self.qof_history = QofHistory(history_k)
        self.trickle = trickle
        self.swap_count = 0
        self.energy_mj = 0.0
        self.beta = 0.0
        self.congestion_crossed = False
        self.blackout_until = -1.0
        self.joined_at: float | None = 0.0 if is_root else None
        self.dodag_version = 1

    @property
    def joined(self) -> bool:
        return self.rank is not None

    # ------------------------------------------------------------------ state

    def occupancy(self) -> float:
        return local_qof(len(self.tx_queue), self.queue_capacity)

    def propagated_occupancy(self) -> float:
        """Occupancy folded with the current parent's advertised value."""
        own = self.occupancy()
        if self.current_parent is None:
            return propagated_qof(own, None)
        return propagated_qof(own, self.parent_set[self.current_parent].advertised_qof)

    def build_dio(self) -> ControlMessage:
        """Advertisement reflecting this node's state at emission time."""
        return ControlMessage(
            kind=ControlKind.DIO,
            sender=self.node_id,
            rank=self.rank,
            qof=self.propagated_occupancy(),
            beta=self.beta,
            version=self.dodag_version,
        )

    # --------------------------------------------------------------- handlers

    def handle_dis(self, msg: ControlMessage, now: float) -> list[ControlMessage]:
        """A solicitation makes a joined node re-advertise promptly."""
        if not self.joined:
            return []
        self.trickle.reset(now)
        return [self.build_dio()]

    def handle_dio(self, msg: ControlMessage, now: float) -> ControlMessage | None:
        """Cache the sender as a candidate parent; join if still unjoined.

        Joining adopts the sender, takes rank sender+1 and answers with a DAO
        toward the root. Advertisements from nodes at equal or higher rank are
        discarded to keep upward routes loop-free.
        """
        assert msg.rank is not None
        if not self.joined:
            self.rank = msg.rank + 1
            self.current_parent = msg.sender
            self._upsert_view(msg)
            self.joined_at = now
            self.trickle.reset(now)
            return ControlMessage(
                kind=ControlKind.DAO, sender=self.node_id, target=self.node_id
            )
        self.trickle.heard_consistent()
        if msg.rank < self.rank:
            self._upsert_view(msg)
        return None

    def _upsert_view(self, msg: ControlMessage) -> None:
        link = self.link_stats.setdefault(msg.sender, LinkStats())
        self.parent_set[msg.sender] = ParentView(
            parent_id=msg.sender,
            rank=msg.rank,
            advertised_qof=msg.qof or 0.0,
            advertised_beta=msg.beta or 0.0,
            link=link,
        )

    def emit_dio_on_trickle(self, now: float) -> ControlMessage | None:
        """Advertisement due at a trickle fire point, unless suppressed."""
        if not self.joined or not self.trickle.should_emit():
            return None
        return self.build_dio()

    # ------------------------------------------------------------ slot frames

    def slotframe_tick(
        self,
        params: EstimatorParams,
        strategy: Strategy,
        *,
        worst_etx: float,
        warmup_min: int,
    ) -> SwapDecision:
        """Boundary work: sample occupancy, refresh beta, re-evaluate the parent.

        Sets ``congestion_crossed`` when the fresh estimate moves across
        theta_th in either direction, which callers treat as a trickle
        inconsistency so neighbours learn promptly. Swap decisions are
        suppressed until the window holds at least ``warmup_min`` samples.
        """
        self.qof_history.append(self.propagated_occupancy())
        previous = self.beta
        if strategy == Strategy.EWQOF:
            self.beta = beta_ewqof(self.qof_history, params.alpha)
        else:
            self.beta = beta_maxqof(self.qof_history)
        self.congestion_crossed = (previous <= params.theta_th) != (
            self.beta <= params.theta_th
        )
        if self.is_root or not self.joined or self.current_parent is None:
            return KEEP
        if len(self.qof_history) < warmup_min:
            return KEEP
        current_view = self.parent_set[self.current_parent]
        candidates = [
            v for pid, v in sorted(self.parent_set.items()) if pid != self.current_parent
        ]
        decision = select_parent(current_view, candidates, params, worst_etx=worst_etx)
        if decision.swap:
            self._apply_swap(decision.new_parent)
        return decision

    def _apply_swap(self, new_parent: int) -> None:
        view = self.parent_set[new_parent]
        self.current_parent = new_parent
        self.rank = view.rank + 1
        # candidates that no longer sit strictly below us are stale routes
        self.parent_set = {
            pid: v for pid, v in self.parent_set.items() if v.rank < self.rank
        }
        self.swap_count += 1
