"""Event-driven replanning: event extraction, filtering, and role swapping.

Per tick each robot turns fresh observations and its composed bus context
into events, deduplicates them against recently admitted history, and
derives at most one replanning decision. Subtask reassignment uses a
symmetric makespan-first cost rule so both robots reach the same conclusion
from the same inputs; an exhaustive true-map oracle of the same rule exists
for verification and is implemented independently on purpose.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .bus import AnchorEntry, BusState, ComposedContext, DialogueRecord, Observation, partner_of
from .config import TriggerConfig
from .tasks import Subtask, rebind_target
from .world import Cell, NEIGHBORS_4, bfs_distance_field

STAGE_COMPLETE = "StageComplete"
TARGET_DISCOVERED = "TargetDiscovered"
CONFLICT = "Conflict"
STAGNATION = "Stagnation"
PATH_BLOCKED = "PathBlocked"

EVENT_KINDS = frozenset(
    {STAGE_COMPLETE, TARGET_DISCOVERED, CONFLICT, STAGNATION, PATH_BLOCKED}
)

# admission ordering: higher urgency first, ties by tick
EVENT_PRIORITY = {
    PATH_BLOCKED: 0,
    CONFLICT: 1,
    TARGET_DISCOVERED: 2,
    STAGE_COMPLETE: 3,
    STAGNATION: 4,
}

KEEP_ASSIGNMENT = "KeepAssignment"
SWAP_SUBTASKS = "SwapSubtasks"
REORDER_SUBGOALS = "ReorderSubgoals"
UPDATE_ANCHOR_TARGET = "UpdateAnchorTarget"

Payload = tuple[tuple[str, object], ...]


def make_payload(**kwargs) -> Payload:
    """Canonical (sorted, hashable) payload tuple from keyword fields."""
    return tuple(sorted(kwargs.items()))


def _jsonable(value):
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    return value


@dataclass(frozen=True)
class Event:
    kind: str
    tick: int
    robot_id: str
    payload: Payload = ()

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.tick < 0:
            raise ValueError("event tick must be non-negative")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "tick": self.tick,
            "robot_id": self.robot_id,
            "payload": {k: _jsonable(v) for k, v in self.payload},
        }


@dataclass(frozen=True)
class ReplanDecision:
    kind: str
    payload: Payload = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "payload": {k: _jsonable(v) for k, v in self.payload},
        }


KEEP = ReplanDecision(KEEP_ASSIGNMENT)


@dataclass(frozen=True)
class PolicyContext:
    """One robot's plan-shaping state carried between ticks."""

    robot_id: str
    target_category: str
    chain: tuple[Subtask, ...]
    priorities: tuple[int, ...]
    anchors: Mapping[str, AnchorEntry] = field(default_factory=dict)
    last_progress_tick: int = 0
    target_found: bool = False

    def validate(self) -> None:
        if sorted(self.priorities) != list(range(len(self.chain))):
            raise ValueError("priorities must be a permutation of chain indices")

    def active_subtask(self) -> Subtask | None:
        if not self.chain:
            return None
        return self.chain[self.priorities[0]]


def identity_priorities(chain: tuple[Subtask, ...]) -> tuple[int, ...]:
    return tuple(range(len(chain)))


@dataclass(frozen=True)
class AgentSignals:
    """What one robot's sensing and progress tracking produced this tick."""

    sightings: tuple[Observation, ...] = ()
    completed_subtask: str | None = None
    newly_blocked_edges: tuple[tuple[Cell, Cell], ...] = ()


def extract_events(
    prev: PolicyContext,
    ctx: ComposedContext,
    signals: AgentSignals,
    now: int,
    cfg: TriggerConfig,
    room_of: Callable[[Cell], str],
) -> list[Event]:
    """Derive this tick's candidate events for one robot. Pure.

    Discovery fires on the first target evidence scoring at least theta_rec,
    whether sensed directly or read from anchor memory; conflict fires when
    the partner's packet places the target in a different room than this
    robot's held anchor view.
    """
    events: list[Event] = []
    rid = prev.robot_id
    cat = prev.target_category

    if signals.completed_subtask is not None:
        events.append(
            Event(STAGE_COMPLETE, now, rid, make_payload(subtask=signals.completed_subtask))
        )

    if not prev.target_found:
        best: Observation | None = None
        for obs in signals.sightings:
            if obs.category == cat and obs.score >= cfg.theta_rec:
                if best is None or obs.score > best.score:
                    best = obs
        if best is not None:
            events.append(
                Event(
                    TARGET_DISCOVERED,
                    now,
                    rid,
                    make_payload(category=cat, cell=best.cell, score=best.score, source="self"),
                )
            )
        else:
            anchor = ctx.anchors.get(cat)
            if anchor is not None and anchor.score >= cfg.theta_rec:
                events.append(
                    Event(
                        TARGET_DISCOVERED,
                        now,
                        rid,
                        make_payload(
                            category=cat,
                            cell=anchor.cell,
                            score=anchor.score,
                            source=anchor.source,
                        ),
                    )
                )

    if ctx.partner_state is not None:
        local = prev.anchors.get(cat)
        if local is not None:
            for obs in ctx.partner_state.observations:
                if obs.category != cat:
                    continue
                local_room = room_of(local.cell)
                partner_room = room_of(obs.cell)
                if partner_room != local_room:
                    events.append(
                        Event(
                            CONFLICT,
                            now,
                            rid,
                            make_payload(
                                category=cat,
                                local_room=local_room,
                                local_cell=local.cell,
                                local_score=local.score,
                                partner_room=partner_room,
                                partner_cell=obs.cell,
                                partner_score=obs.score,
                            ),
                        )
                    )
                    break

    if now - prev.last_progress_tick >= cfg.n_stag:
        events.append(Event(STAGNATION, now, rid, make_payload(since=prev.last_progress_tick)))

    for edge in signals.newly_blocked_edges:
        events.append(Event(PATH_BLOCKED, now, rid, make_payload(edge=edge)))

    return events


def filter_events(events: list[Event], history: list[Event], cfg: TriggerConfig) -> list[Event]:
    """Drop events whose (kind, payload) matches one admitted within the
    cooldown window, then order survivors by priority, ties by tick."""
    admitted: list[Event] = []
    for event in events:
        dup = any(
            h.kind == event.kind
            and h.payload == event.payload
            and event.tick - h.tick <= cfg.cooldown
            for h in history
        ) or any(a.kind == event.kind and a.payload == event.payload for a in admitted)
        if not dup:
            admitted.append(event)
    admitted.sort(key=lambda e: (EVENT_PRIORITY[e.kind], e.tick))
    return admitted


# --- reassignment cost test -----------------------------------------------


@dataclass(frozen=True)
class SwapInputs:
    """The symmetric reassignment rule's inputs: per-robot traversability
    (believed or true), positions, the two remaining chains, and whether the
    item currently rests at a static waypoint."""

    passable: Mapping[str, np.ndarray]
    positions: Mapping[str, Cell]
    chains: Mapping[str, tuple[Subtask, ...]]
    item_static: bool
    resolution: float = 0.25


def _chain_cost(
    passable: np.ndarray, start: Cell, chain: tuple[Subtask, ...], resolution: float
) -> float:
    """Geodesic sum along the chain's bound waypoints; infinite when any leg
    is unreachable. Unbound waypoints contribute nothing."""
    total_steps = 0
    cur = start
    for st in chain:
        if st.waypoint is None or st.waypoint == cur:
            continue
        steps = bfs_distance_field(~passable, cur)[st.waypoint[1], st.waypoint[0]]
        if steps < 0:
            return math.inf
        total_steps += int(steps)
        cur = st.waypoint
    return total_steps * resolution


def evaluate_swap(inputs: SwapInputs, cfg: TriggerConfig) -> ReplanDecision:
    """Decide between keeping and exchanging the two remaining chains.

    Makespan-first: swap iff the worse of the two swapped costs undercuts the
    worse kept cost by more than the hysteresis margin; equal makespans fall
    back to the cost sum under the same margin. While the item is carried the
    assignment is never exchanged.
    """
    if not inputs.item_static:
        return KEEP
    robots = sorted(inputs.chains)
    if len(robots) != 2:
        raise ValueError("swap evaluation needs exactly two robots")
    a, b = robots
    keep = {
        r: _chain_cost(inputs.passable[r], inputs.positions[r], inputs.chains[r], inputs.resolution)
        for r in robots
    }
    swap = {
        a: _chain_cost(inputs.passable[a], inputs.positions[a], inputs.chains[b], inputs.resolution),
        b: _chain_cost(inputs.passable[b], inputs.positions[b], inputs.chains[a], inputs.resolution),
    }
    max_keep, max_swap = max(keep.values()), max(swap.values())
    take = False
    if max_swap + cfg.epsilon_hyst < max_keep:
        take = True
    elif max_swap == max_keep and not math.isinf(max_swap):
        take = sum(swap.values()) + cfg.epsilon_hyst < sum(keep.values())
    if take:
        return ReplanDecision(
            SWAP_SUBTASKS,
            make_payload(
                keep_cost=round(max_keep, 6) if not math.isinf(max_keep) else "inf",
                swap_cost=round(max_swap, 6),
            ),
        )
    return KEEP


def swap_oracle(
    scene,
    positions: Mapping[str, Cell],
    chains: Mapping[str, tuple[Subtask, ...]],
    item_static: bool,
    cfg: TriggerConfig,
) -> ReplanDecision:
    """Ground-truth reassignment decision by exhaustive evaluation.

    Same decision rule as :func:`evaluate_swap` but re-derived from scratch:
    distances come from a Dijkstra over the true occupancy grid rather than
    the shared wavefront helper, and the comparison inequalities are restated
    literally, so the two implementations genuinely check each other.
    """
    if not item_static:
        return ReplanDecision(KEEP_ASSIGNMENT)

    blocked = scene.grid.blocked
    h, w = blocked.shape

    def dijkstra_steps(a: Cell, b: Cell) -> float:
        if a == b:
            return 0.0
        if blocked[a[1], a[0]] or blocked[b[1], b[0]]:
            return math.inf
        dist: dict[Cell, float] = {a: 0.0}
        heap: list[tuple[float, Cell]] = [(0.0, a)]
        while heap:
            d, cur = heapq.heappop(heap)
            if cur == b:
                return d
            if d > dist.get(cur, math.inf):
                continue
            for dx, dy in NEIGHBORS_4:
                nxt = (cur[0] + dx, cur[1] + dy)
                if 0 <= nxt[0] < w and 0 <= nxt[1] < h and not blocked[nxt[1], nxt[0]]:
                    nd = d + 1.0
                    if nd < dist.get(nxt, math.inf):
                        dist[nxt] = nd
                        heapq.heappush(heap, (nd, nxt))
        return math.inf

    def assignment_cost(robot: str, chain: tuple[Subtask, ...]) -> float:
        cur = positions[robot]
        steps = 0.0
        for st in chain:
            if st.waypoint is None or st.waypoint == cur:
                continue
            leg = dijkstra_steps(cur, st.waypoint)
            if math.isinf(leg):
                return math.inf
            steps += leg
            cur = st.waypoint
        return steps * scene.grid.resolution

    robots = sorted(chains)
    if len(robots) != 2:
        raise ValueError("swap evaluation needs exactly two robots")
    a, b = robots
    keep_a = assignment_cost(a, chains[a])
    keep_b = assignment_cost(b, chains[b])
    swap_a = assignment_cost(a, chains[b])
    swap_b = assignment_cost(b, chains[a])
    max_keep = keep_a if keep_a >= keep_b else keep_b
    max_swap = swap_a if swap_a >= swap_b else swap_b
    if max_swap + cfg.epsilon_hyst < max_keep:
        swap_it = True
    elif max_swap == max_keep and not math.isinf(max_swap):
        swap_it = (swap_a + swap_b) + cfg.epsilon_hyst < (keep_a + keep_b)
    else:
        swap_it = False
    if swap_it:
        return ReplanDecision(
            SWAP_SUBTASKS,
            make_payload(
                keep_cost=round(max_keep, 6) if not math.isinf(max_keep) else "inf",
                swap_cost=round(max_swap, 6),
            ),
        )
    return ReplanDecision(KEEP_ASSIGNMENT)


# --- picking and applying a decision --------------------------------------


def decide(
    admitted: list[Event],
    ctx: PolicyContext,
    swap_inputs: SwapInputs | None,
    cfg: TriggerConfig,
) -> ReplanDecision:
    """Derive this tick's decision from the admitted events, honoring their
    priority order. Blockage and stagnation put the assignment itself in
    question (when ``swap_inputs`` is available: item at rest, partner
    context fresh); conflict and discovery re-point the target anchor."""
    for event in admitted:
        payload = dict(event.payload)
        if event.kind in (PATH_BLOCKED, STAGNATION):
            if swap_inputs is not None:
                decision = evaluate_swap(swap_inputs, cfg)
                if decision.kind == SWAP_SUBTASKS:
                    return ReplanDecision(
                        SWAP_SUBTASKS,
                        decision.payload + make_payload(initiator=ctx.robot_id),
                    )
        elif event.kind == CONFLICT:
            if payload["partner_score"] > payload["local_score"]:
                return ReplanDecision(
                    UPDATE_ANCHOR_TARGET,
                    make_payload(
                        category=payload["category"],
                        cell=payload["partner_cell"],
                        score=payload["partner_score"],
                    ),
                )
        elif event.kind == TARGET_DISCOVERED:
            return ReplanDecision(
                UPDATE_ANCHOR_TARGET,
                make_payload(
                    category=payload["category"],
                    cell=payload["cell"],
                    score=payload["score"],
                ),
            )
    return KEEP


def exchange_roles(roles: Mapping[str, tuple]) -> dict[str, tuple]:
    if len(roles) != 2:
        raise ValueError("role exchange needs exactly two robots")
    a, b = sorted(roles)
    return {a: tuple(roles[b]), b: tuple(roles[a])}


def rewrite_policy_context(
    ctx: PolicyContext,
    admitted: list[Event],
    decision: ReplanDecision,
    bus: BusState,
) -> tuple[PolicyContext, list[DialogueRecord]]:
    """Apply a decision to one robot's context.

    Returns the rewritten context and the dialogue records to append to the
    bus; the caller owns committing the records and, for a swap, exchanging
    ``bus.roles`` and mirroring the partner's context. A decision
    inconsistent with the current roles is rejected: the context is returned
    unchanged with an error record.
    """
    if not admitted:
        return ctx, []
    rid = ctx.robot_id
    partner = partner_of(rid)
    trigger = admitted[0].kind
    tick = admitted[0].tick
    records: list[DialogueRecord] = []
    new_ctx = ctx
    payload = dict(decision.payload)

    if decision.kind == SWAP_SUBTASKS:
        mine = tuple(bus.roles.get(rid, ()))
        theirs = tuple(bus.roles.get(partner, ()))
        if not mine or not theirs or mine != ctx.chain:
            records.append(
                DialogueRecord(
                    tick=tick,
                    trigger=trigger,
                    initiator=rid,
                    summary=f"{rid} swap rejected: assignment inconsistent with roles",
                    decision=KEEP.to_dict(),
                )
            )
            return ctx, records
        new_ctx = replace(new_ctx, chain=theirs, priorities=identity_priorities(theirs))
        if payload.get("initiator", rid) == rid:
            records.append(
                DialogueRecord(
                    tick=tick,
                    trigger=trigger,
                    initiator=rid,
                    summary=(
                        f"{rid} proposes swapping remaining subtasks with {partner}; "
                        "symmetric cost test agrees"
                    ),
                    decision=decision.to_dict(),
                )
            )
    elif decision.kind == UPDATE_ANCHOR_TARGET:
        cell = tuple(payload["cell"])
        rebound = rebind_target(ctx.chain, cell)
        new_ctx = replace(new_ctx, chain=rebound)
        if new_ctx != ctx:
            records.append(
                DialogueRecord(
                    tick=tick,
                    trigger=trigger,
                    initiator=rid,
                    summary=f"{rid} anchors {ctx.target_category} at {list(cell)}",
                    decision=decision.to_dict(),
                )
            )
    elif decision.kind == REORDER_SUBGOALS:
        order = tuple(int(i) for i in payload["order"])
        if sorted(order) != list(range(len(ctx.chain))):
            records.append(
                DialogueRecord(
                    tick=tick,
                    trigger=trigger,
                    initiator=rid,
                    summary=f"{rid} reorder rejected: not a permutation of the remaining subgoals",
                    decision=KEEP.to_dict(),
                )
            )
            return ctx, records
        if order != ctx.priorities:
            new_ctx = replace(new_ctx, priorities=order)
            records.append(
                DialogueRecord(
                    tick=tick,
                    trigger=trigger,
                    initiator=rid,
                    summary=f"{rid} reorders subgoal priorities to {list(order)}",
                    decision=decision.to_dict(),
                )
            )

    # first reliable discovery is remembered even when nothing rebinds
    if any(e.kind == TARGET_DISCOVERED for e in admitted) and not new_ctx.target_found:
        new_ctx = replace(new_ctx, target_found=True)
    return new_ctx, records
