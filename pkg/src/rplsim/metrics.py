"""Routing and congestion metrics used for parent selection and swapping.

Everything in this module is a pure function of its arguments: no node state,
no RNG, no clock. The simulator calls into these at slotframe boundaries; the
test suite exercises them in isolation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

# ETX assigned to a link that has attempts but zero successes, so scores stay
# finite. 16 is a conventional retransmission cap.
DEFAULT_WORST_ETX = 16.0


class MetricError(ValueError):
    """Base class for domain errors raised by metric computations."""


class DivisionByZeroHistory(MetricError):
    """Link has transmissions recorded but zero successes; ETX is undefined."""


class InvalidQueue(MetricError):
    """Queue occupancy inputs are inconsistent (zero-length queue or overfull)."""


class EmptyHistory(MetricError):
    """A congestion estimator was evaluated on an empty sample window."""


@dataclass
class LinkStats:
    """Transmission counters for one (child, parent) link.

    tnop counts every data-frame transmission attempt on the link, tnopss the
    successful ones; tnopss <= tnop always.
    """

    tnop: int = 0
    tnopss: int = 0


@dataclass(frozen=True)
class EstimatorParams:
    """Thresholds and weights for the congestion estimator and swap rule."""

    alpha: float = 0.5
    theta_th: float = 0.5
    delta_th: float = 0.5
    eta: float = 0.25

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise MetricError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.theta_th < 1.0:
            raise MetricError(f"theta_th must be in (0, 1), got {self.theta_th}")
        if self.delta_th < 0.0:
            raise MetricError(f"delta_th must be >= 0, got {self.delta_th}")
        if self.eta <= 0.0:
            raise MetricError(f"eta must be > 0, got {self.eta}")


@dataclass
class ParentView:
    """A child's cached snapshot of one candidate parent.

    rank, advertised_qof and advertised_beta come from the parent's most
    recent DIO; link is the child-side transmission bookkeeping toward that
    parent.
    """

    parent_id: int
    rank: int
    advertised_qof: float = 0.0
    advertised_beta: float = 0.0
    link: LinkStats = field(default_factory=LinkStats)


@dataclass(frozen=True)
class SwapDecision:
    """Outcome of one parent evaluation: keep the current parent or swap."""

    swap: bool
    new_parent: int | None = None


KEEP = SwapDecision(swap=False)


class QofHistory:
    """Sliding window of the most recent queue-occupancy samples.

    Holds at most ``k`` values, oldest first; appending beyond capacity drops
    the oldest sample.
    """

    def __init__(self, k: int) -> None:
        if k < 1:
            raise MetricError(f"window size k must be >= 1, got {k}")
        self.k = k
        self._window: deque[float] = deque(maxlen=k)

    def append(self, value: float) -> None:
        if not 0.0 <= value <= 1.0:
            raise MetricError(f"occupancy sample out of [0, 1]: {value}")
        self._window.append(value)

    def values(self) -> tuple[float, ...]:
        return tuple(self._window)

    def clear(self) -> None:
        self._window.clear()

    def __len__(self) -> int:
        return len(self._window)

    def __iter__(self):
        return iter(self._window)

    def __repr__(self) -> str:
        return f"QofHistory(k={self.k}, window={list(self._window)})"


def rank_from_hops(hop_distance: int) -> int:
    """Rank of a node that is ``hop_distance`` hops from the root (root = 1)."""
    if hop_distance < 0:
        raise MetricError(f"hop distance must be >= 0, got {hop_distance}")
    return hop_distance + 1


def etx(link: LinkStats) -> float:
    """Expected transmission count of a link: attempts over successes.

    A link with no attempts yet gets the optimistic prior 1.0. A link with
    attempts but zero successes raises DivisionByZeroHistory; callers that
    need a finite score use :func:`etx_or_worst`.
    """
    if link.tnopss > link.tnop:
        raise MetricError(f"tnopss {link.tnopss} exceeds tnop {link.tnop}")
    if link.tnop == 0:
        return 1.0
    if link.tnopss == 0:
        raise DivisionByZeroHistory(
            f"link has {link.tnop} attempts and zero successes"
        )
    return link.tnop / link.tnopss


def etx_or_worst(link: LinkStats, worst_etx: float = DEFAULT_WORST_ETX) -> float:
    """ETX with zero-success links clamped to ``worst_etx`` instead of raising."""
    try:
        return etx(link)
    except DivisionByZeroHistory:
        return worst_etx


def local_qof(nontp: int, ql: int) -> float:
    """Queue occupancy factor: untransmitted packets over queue capacity."""
    if ql <= 0:
        raise InvalidQueue(f"queue length must be positive, got {ql}")
    if nontp < 0 or nontp > ql:
        raise InvalidQueue(f"queued packet count {nontp} outside [0, {ql}]")
    return nontp / ql


def propagated_qof(own: float, parent_qof: float | None = None) -> float:
    """Occupancy folded up the routing path: max of own and the parent's value.

    The root has no parent and reports its own occupancy (pass None).
    """
    if parent_qof is None:
        return own
    return max(own, parent_qof)


def beta_ewqof(history: QofHistory | Sequence[float], alpha: float) -> float:
    """Exponentially weighted congestion level over an occupancy window.

    Folds the window oldest-first: b <- q1, then b <- (1-alpha)*q + alpha*b for
    each later sample. The implied weights (alpha^(k-1) on the oldest sample,
    (1-alpha)*alpha^(k-j) on sample j) sum to exactly one, so a constant window
    reproduces its value and the result always lies in [0, 1].
    """
    if not 0.0 < alpha < 1.0:
        raise MetricError(f"alpha must be in (0, 1), got {alpha}")
    samples = _window_values(history)
    if not samples:
        raise EmptyHistory("cannot estimate congestion from an empty window")
    b = samples[0]
    for q in samples[1:]:
        b = (1.0 - alpha) * q + alpha * b
    return b


def beta_maxqof(history: QofHistory | Sequence[float]) -> float:
    """Baseline congestion level: the maximum occupancy in the window."""
    samples = _window_values(history)
    if not samples:
        raise EmptyHistory("cannot estimate congestion from an empty window")
    return max(samples)


def _window_values(history: QofHistory | Sequence[float]) -> Sequence[float]:
    if isinstance(history, QofHistory):
        return history.values()
    return history


def hdlac(view: ParentView, worst_etx: float = DEFAULT_WORST_ETX) -> float:
    """Hop-distance link assessment: parent rank plus link ETX.

    Zero-success links score with the configured worst-case ETX rather than
    failing, so a parent is never un-rankable.
    """
    return view.rank + etx_or_worst(view.link, worst_etx)


def parent_score(
    view: ParentView, eta: float, worst_etx: float = DEFAULT_WORST_ETX
) -> float:
    """Full parent score: hdlac plus the weighted advertised occupancy."""
    return hdlac(view, worst_etx) + eta * view.advertised_qof


def select_parent(
    current: ParentView,
    candidates: Iterable[ParentView],
    params: EstimatorParams,
    worst_etx: float = DEFAULT_WORST_ETX,
) -> SwapDecision:
    """Decide whether to leave the current parent, and for which candidate.

    The current parent must be congested (advertised congestion level strictly
    above theta_th) before any candidate is considered. Eligible candidates
    must undercut the current parent's hdlac by more than delta_th; among
    those the lowest parent score wins, ties broken by lower rank then lower
    node id. Callers pass only loop-safe candidates (rank below their own)
    and never include the current parent.
    """
    if not current.advertised_beta > params.theta_th:
        return KEEP
    current_hdlac = hdlac(current, worst_etx)
    best: tuple[float, int, int] | None = None
    best_id: int | None = None
    for cand in candidates:
        if current_hdlac - hdlac(cand, worst_etx) <= params.delta_th:
            continue
        key = (parent_score(cand, params.eta, worst_etx), cand.rank, cand.parent_id)
        if best is None or key < best:
            best = key
            best_id = cand.parent_id
    if best_id is None:
        return KEEP
    return SwapDecision(swap=True, new_parent=best_id)
