"""Semantic state bus shared by the two robots.

The bus holds the latest semantic packet per robot, a per-category anchor
memory of best object evidence, the current role assignment (each
robot's remaining subtask chain, opaque to the bus), and the dialogue log. All updates are functional:
``publish`` and ``record_dialogue`` return new values and never mutate, so any
previously taken reference doubles as an immutable snapshot.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Mapping

from .world import Cell

logger = logging.getLogger(__name__)

ROBOTS = ("FH", "SH")


def partner_of(robot_id: str) -> str:
    if robot_id not in ROBOTS:
        raise ValueError(f"unknown robot {robot_id!r}")
    return ROBOTS[1] if robot_id == ROBOTS[0] else ROBOTS[0]


@dataclass(frozen=True)
class Observation:
    category: str
    cell: Cell
    score: float

    def to_dict(self) -> dict:
        return {"category": self.category, "cell": list(self.cell), "score": self.score}

    @staticmethod
    def from_dict(d: dict) -> "Observation":
        return Observation(d["category"], (int(d["cell"][0]), int(d["cell"][1])), float(d["score"]))


@dataclass(frozen=True)
class SemanticPacket:
    robot_id: str
    ts: int
    current_room: str
    observations: tuple[Observation, ...]
    stage: str
    carrying: bool
    stopped: bool

    def __post_init__(self) -> None:
        if self.ts < 0:
            raise ValueError("packet ts must be non-negative")
        for obs in self.observations:
            if not 0.0 <= obs.score <= 1.0:
                raise ValueError("observation scores must lie in [0, 1]")

    def to_dict(self) -> dict:
        # wire schema: fixed field set, observations sorted for canonical bytes
        return {
            "robot_id": self.robot_id,
            "ts": self.ts,
            "current_room": self.current_room,
            "observations": [o.to_dict() for o in self.observations],
            "stage": self.stage,
            "carrying": self.carrying,
            "stopped": self.stopped,
        }

    @staticmethod
    def from_dict(d: dict) -> "SemanticPacket":
        return SemanticPacket(
            robot_id=d["robot_id"],
            ts=int(d["ts"]),
            current_room=d["current_room"],
            observations=tuple(Observation.from_dict(o) for o in d["observations"]),
            stage=d["stage"],
            carrying=bool(d["carrying"]),
            stopped=bool(d["stopped"]),
        )


@dataclass(frozen=True)
class AnchorEntry:
    cell: Cell
    score: float
    ts: int
    source: str


@dataclass(frozen=True)
class DialogueRecord:
    tick: int
    trigger: str
    initiator: str
    summary: str
    decision: dict

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "trigger": self.trigger,
            "initiator": self.initiator,
            "summary": self.summary,
            "decision": self.decision,
        }


@dataclass(frozen=True)
class ComposedContext:
    self_state: SemanticPacket
    partner_state: SemanticPacket | None
    partner_stale: bool
    anchors: Mapping[str, AnchorEntry]
    roles: Mapping[str, tuple]


@dataclass(frozen=True)
class BusState:
    packets: Mapping[str, SemanticPacket]
    anchors: Mapping[str, AnchorEntry]
    roles: Mapping[str, tuple]
    dialogue: tuple[DialogueRecord, ...]


def empty_bus(roles: Mapping[str, tuple] | None = None) -> BusState:
    return BusState(packets={}, anchors={}, roles=dict(roles or {}), dialogue=())


def _anchor_wins(new: AnchorEntry, old: AnchorEntry) -> bool:
    """Total, order-independent replacement rule: higher score, then newer
    timestamp, then canonical robot order, then cell order."""
    if new.score != old.score:
        return new.score > old.score
    if new.ts != old.ts:
        return new.ts > old.ts
    if new.source != old.source:
        return new.source < old.source
    return new.cell < old.cell


def merge_anchors(
    anchors: Mapping[str, AnchorEntry], packet: SemanticPacket
) -> dict[str, AnchorEntry]:
    merged = dict(anchors)
    for obs in packet.observations:
        cand = AnchorEntry(cell=obs.cell, score=obs.score, ts=packet.ts, source=packet.robot_id)
        cur = merged.get(obs.category)
        if cur is None or _anchor_wins(cand, cur):
            merged[obs.category] = cand
    return merged


def publish(bus: BusState, packet: SemanticPacket) -> BusState:
    """Store the packet and fold its observations into anchor memory.

    A packet older than the stored one for the same robot is dropped with a
    warning and the bus is returned unchanged.
    """
    prev = bus.packets.get(packet.robot_id)
    if prev is not None and packet.ts < prev.ts:
        logger.warning(
            "dropping out-of-order packet from %s (ts=%d < stored %d)",
            packet.robot_id,
            packet.ts,
            prev.ts,
        )
        return bus
    packets = dict(bus.packets)
    packets[packet.robot_id] = packet
    return replace(bus, packets=packets, anchors=merge_anchors(bus.anchors, packet))


def compose_context(bus: BusState, self_id: str, now: int, tau: int) -> ComposedContext:
    """Build a robot's decision context; the partner packet is included iff
    its age ``now - ts`` is at most ``tau`` (boundary inclusive)."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    self_packet = bus.packets.get(self_id)
    if self_packet is None:
        raise ValueError(f"no packet published for {self_id}")
    partner = bus.packets.get(partner_of(self_id))
    fresh = partner is not None and (now - partner.ts) <= tau
    return ComposedContext(
        self_state=self_packet,
        partner_state=partner if fresh else None,
        partner_stale=not fresh,
        anchors=dict(bus.anchors),
        roles={k: tuple(v) for k, v in bus.roles.items()},
    )


def compose_muted(bus: BusState, self_id: str, now: int) -> ComposedContext:
    """Context with the partner withheld and partner-sourced anchors dropped;
    used by the no-coordination baseline policy."""
    self_packet = bus.packets.get(self_id)
    if self_packet is None:
        raise ValueError(f"no packet published for {self_id}")
    return ComposedContext(
        self_state=self_packet,
        partner_state=None,
        partner_stale=True,
        anchors={k: v for k, v in bus.anchors.items() if v.source == self_id},
        roles={k: tuple(v) for k, v in bus.roles.items()},
    )


def record_dialogue(bus: BusState, record: DialogueRecord) -> BusState:
    if bus.dialogue and record.tick < bus.dialogue[-1].tick:
        raise ValueError("dialogue ticks must be non-decreasing")
    return replace(bus, dialogue=bus.dialogue + (record,))


def snapshot(bus: BusState) -> BusState:
    """The bus is immutable-by-construction, so a snapshot is the value itself."""
    return bus
