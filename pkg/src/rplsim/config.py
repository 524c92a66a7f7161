"""Run configuration: defaults, YAML loading, validation, and hashing.

Defaults follow the standard indoor-industrial parameter set this simulator
targets: 200 m x 200 m area, 30 m range, log-normal shadowing with a 14 dB
deviation, 250 kb/s radio, 100 B packets, 100 slots of 10 ms per slotframe,
10-packet buffers, a 3 s minimum trickle interval and the estimator settings
alpha = theta_th = delta_th = 0.5, eta = 0.25, k = 4.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import yaml

from .channel import ChannelModel, TrafficKind, TrafficProfile


class Strategy(str, Enum):
    EWQOF = "ewqof"
    MAXQOF = "maxqof"


@dataclass
class EnergyModel:
    """Energy charged per radio event, in millijoules.

    Data-frame costs scale a 0.0006 mJ/bit figure to the 800-bit payload;
    control frames are budgeted at half a data frame. These are configuration,
    not measurements.
    """

    e_tx_data: float = 0.48
    e_rx_data: float = 0.40
    e_tx_ctrl: float = 0.24
    e_rx_ctrl: float = 0.20
    e_idle_slot: float = 0.01


@dataclass
class PresetNode:
    """Fixed node placement, optionally pre-joined to a parent.

    Node 0 is always the root (parent None). For other nodes, parent None
    means the node starts unjoined and must discover the DODAG itself.
    """

    id: int
    x: float
    y: float
    parent: int | None = None


@dataclass
class SimConfig:
    node_count: int = 20
    area_m: tuple[float, float] = (200.0, 200.0)
    tx_range_m: float = 30.0
    data_rate_kbps: float = 250.0
    packet_bytes: int = 100
    slotframe_slots: int = 100
    slot_ms: float = 10.0
    queue_capacity: int = 10
    i_min_s: float = 3.0
    trickle_doublings: int = 8
    trickle_redundancy: int = 3
    theta_th: float = 0.5
    alpha: float = 0.5
    delta_th: float = 0.5
    eta: float = 0.25
    k: int = 4
    k_max: int = 32
    strategy: Strategy = Strategy.EWQOF
    traffic: TrafficProfile = field(default_factory=TrafficProfile)
    channel: ChannelModel = field(default_factory=ChannelModel)
    energy: EnergyModel = field(default_factory=EnergyModel)
    seeds: list[int] = field(default_factory=lambda: list(range(1, 11)))
    duration_slotframes: int = 600
    drain_slotframes: int = 50
    max_retries: int = 3
    worst_etx: float = 16.0
    dis_interval_s: float = 1.0
    formation_timeout_s: float = 120.0
    control_range_factor: float = 2.0
    preset: list[PresetNode] | None = None

    @property
    def slotframe_s(self) -> float:
        return self.slotframe_slots * self.slot_ms / 1000.0

    @property
    def control_range_m(self) -> float:
        return self.control_range_factor * self.tx_range_m

    def replace(self, **overrides: Any) -> "SimConfig":
        clone = copy.deepcopy(self)
        for key, value in overrides.items():
            if not hasattr(clone, key):
                raise KeyError(f"unknown config field: {key}")
            setattr(clone, key, value)
        # channel range always tracks the top-level range
        clone.channel.tx_range_m = clone.tx_range_m
        return clone

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["strategy"] = self.strategy.value
        data["area_m"] = list(self.area_m)
        data["traffic"]["kind"] = self.traffic.kind.value
        if self.traffic.script is not None:
            data["traffic"]["script"] = {
                str(node): {str(f): int(c) for f, c in frames.items()}
                for node, frames in self.traffic.script.items()
            }
        if self.preset is not None:
            data["preset"] = [asdict(p) for p in self.preset]
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimConfig":
        cfg = cls()
        known = set(cfg.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown config fields: {sorted(unknown)}")
        plain = {
            k: v
            for k, v in data.items()
            if k not in ("traffic", "channel", "energy", "preset", "strategy", "area_m", "seeds")
        }
        for key, value in plain.items():
            setattr(cfg, key, value)
        if "area_m" in data:
            cfg.area_m = (float(data["area_m"][0]), float(data["area_m"][1]))
        if "seeds" in data:
            cfg.seeds = [int(s) for s in data["seeds"]]
        if "strategy" in data:
            cfg.strategy = Strategy(str(data["strategy"]).lower())
        if "traffic" in data and data["traffic"] is not None:
            cfg.traffic = _traffic_from_dict(data["traffic"])
        if "channel" in data and data["channel"] is not None:
            cfg.channel = ChannelModel(**{**asdict(cfg.channel), **data["channel"]})
        if "energy" in data and data["energy"] is not None:
            cfg.energy = EnergyModel(**{**asdict(cfg.energy), **data["energy"]})
        if "preset" in data and data["preset"] is not None:
            cfg.preset = [PresetNode(**p) for p in data["preset"]]
            cfg.node_count = len(cfg.preset)
        cfg.channel.tx_range_m = cfg.tx_range_m
        return cfg


def _traffic_from_dict(data: dict[str, Any]) -> TrafficProfile:
    fields = dict(data)
    kind = TrafficKind(str(fields.pop("kind", "bursty")).lower())
    script = fields.pop("script", None)
    if script is not None:
        script = {
            int(node): {int(f): int(c) for f, c in frames.items()}
            for node, frames in script.items()
        }
    return TrafficProfile(kind=kind, script=script, **fields)


def load_config(path: str | Path) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a mapping")
    return SimConfig.from_dict(data)


def dump_config(cfg: SimConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True)


def config_hash(cfg: SimConfig, seed: int) -> str:
    """Digest of one fully resolved run: the configuration plus its seed.

    Two runs with equal hashes produce byte-identical reports.
    """
    payload = cfg.to_dict()
    payload.pop("seeds", None)
    payload["seed"] = int(seed)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass
class ValidationResult:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations


def validate_config(cfg: SimConfig) -> ValidationResult:
    """Check a configuration against the model's hard constraints.

    Violations make a run refuse to start; warnings are advisory.
    """
    result = ValidationResult()
    bad = result.violations.append
    warn = result.warnings.append

    if cfg.node_count < 1:
        bad(f"node_count must be >= 1, got {cfg.node_count}")
    if cfg.node_count - 1 > cfg.slotframe_slots:
        bad(
            f"{cfg.node_count} nodes need {cfg.node_count - 1} transmit slots "
            f"but the slotframe has only {cfg.slotframe_slots}"
        )
    if cfg.queue_capacity < 1:
        bad(f"queue_capacity must be >= 1, got {cfg.queue_capacity}")
    if not 0.0 < cfg.alpha < 1.0:
        bad(f"alpha must be in (0, 1), got {cfg.alpha}")
    if not 0.0 < cfg.theta_th < 1.0:
        bad(f"theta_th must be in (0, 1), got {cfg.theta_th}")
    if cfg.delta_th < 0:
        bad(f"delta_th must be >= 0, got {cfg.delta_th}")
    if cfg.eta <= 0:
        bad(f"eta must be > 0, got {cfg.eta}")
    elif cfg.eta <= 1.0:
        warn(
            f"eta = {cfg.eta} <= 1 gives the occupancy term little weight in the "
            "parent score; the reference experiments nevertheless use 0.25"
        )
    if cfg.k < 1:
        bad(f"k must be >= 1, got {cfg.k}")
    elif cfg.k > cfg.k_max:
        bad(f"k = {cfg.k} exceeds the resource bound k_max = {cfg.k_max}")
    if not cfg.k * cfg.slotframe_s > cfg.i_min_s:
        bad(
            f"k * T = {cfg.k * cfg.slotframe_s:g} s must strictly exceed "
            f"I_min = {cfg.i_min_s:g} s so the occupancy window outlives one "
            "advertisement interval"
        )
    if cfg.duration_slotframes < 1:
        bad(f"duration_slotframes must be >= 1, got {cfg.duration_slotframes}")
    if cfg.slot_ms <= 0 or cfg.slotframe_slots < 1:
        bad("slot_ms and slotframe_slots must be positive")
    frame_airtime_ms = cfg.packet_bytes * 8 / cfg.data_rate_kbps if cfg.data_rate_kbps > 0 else float("inf")
    if frame_airtime_ms > cfg.slot_ms:
        bad(
            f"a {cfg.packet_bytes} B frame needs {frame_airtime_ms:.2f} ms on air "
            f"at {cfg.data_rate_kbps} kb/s and does not fit a {cfg.slot_ms} ms slot"
        )
    if cfg.traffic.kind == TrafficKind.BURSTY and cfg.traffic.burst_rate_pps < cfg.traffic.base_rate_pps:
        bad("bursty traffic needs burst_rate_pps >= base_rate_pps")
    if cfg.max_retries < 0:
        bad(f"max_retries must be >= 0, got {cfg.max_retries}")
    if cfg.worst_etx < 1.0:
        bad(f"worst_etx must be >= 1, got {cfg.worst_etx}")
    if not cfg.seeds:
        bad("seeds must not be empty")

    if cfg.preset is not None:
        _validate_preset(cfg, result)
    return result


def _validate_preset(cfg: SimConfig, result: ValidationResult) -> None:
    bad = result.violations.append
    nodes = cfg.preset or []
    ids = [p.id for p in nodes]
    if len(set(ids)) != len(ids):
        bad("preset node ids must be unique")
        return
    if 0 not in ids:
        bad("preset must include node 0 as the root")
        return
    by_id = {p.id: p for p in nodes}
    if by_id[0].parent is not None:
        bad("preset node 0 is the root and must have no parent")
    for p in nodes:
        if p.parent is None:
            continue
        if p.parent not in by_id:
            bad(f"preset node {p.id} names unknown parent {p.parent}")
            continue
        # walk up; a cycle never reaches the root
        seen = {p.id}
        cur = p.parent
        while cur is not None:
            if cur in seen:
                bad(f"preset parent chain starting at node {p.id} loops")
                break
            seen.add(cur)
            cur = by_id[cur].parent
    if cfg.node_count != len(nodes):
        bad(
            f"node_count {cfg.node_count} disagrees with preset size {len(nodes)}"
        )
