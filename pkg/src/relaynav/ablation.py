"""Blockage ablation: build a suite where mid-run corridor closures matter.

Each suite entry is a verified relay episode plus one corridor blockage
scheduled on the first-half robot's ground-truth route before the robot
reaches it. Blockages are chosen structurally, from true-map geometry only:
either the detour to the pickup grows by a margin (so rerouting without
coordination costs real distance and ticks) or the pickup becomes outright
unreachable for the first-half robot while staying reachable for its
partner. Every entry carries a tick budget proportional to its own
unblocked completion time, so an uncoordinated detour can push an episode
past its budget while a subtask swap keeps it inside.

Running the suite under both policies ("deconav" with the semantic bus and
event-driven replanning, "static" with coordination muted) yields the
paired comparison: both-success rates overall and on the swap-fired subset,
and per-episode combined path lengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .config import RolloutConfig
from .engine import RolloutResult, run_lockstep
from .episodes import EpisodeSpec, generate_episode
from .scenegen import generate_scene
from .seeds import derive_seed
from .world import (
    Cell,
    SceneGraph,
    apply_blockage,
    bfs_distance_field,
    geodesic_distance,
)

KIND_DETOUR = "detour"
KIND_CUT = "cut"


class SuiteBuildError(RuntimeError):
    pass


@dataclass(frozen=True)
class BlockagePlan:
    corridor_id: str
    tick: int
    kind: str
    detour_extra_m: float
    swap_critical_m: float

    def to_dict(self) -> dict:
        return {
            "corridor_id": self.corridor_id,
            "tick": self.tick,
            "kind": self.kind,
            "detour_extra_m": (
                round(self.detour_extra_m, 6)
                if math.isfinite(self.detour_extra_m)
                else "inf"
            ),
            "swap_critical_m": round(self.swap_critical_m, 6),
        }


@dataclass(frozen=True)
class SuiteParams:
    n_episodes: int = 200
    seed: int = 0
    per_scene: int = 8
    cut_fraction: float = 0.05
    min_detour_extra_m: float = 12.0
    taker_slack_m: float = 4.0
    handoff_slack_m: float = 4.0
    carry_slack_m: float = 2.0
    reposition_slack_m: float = 12.0
    budget_extra_ticks: int = 110
    est_margin_ticks: int = 70
    max_scene_draws: int = 4000
    rollout: RolloutConfig = field(default_factory=RolloutConfig)


@dataclass(frozen=True)
class SuiteEntry:
    episode: EpisodeSpec
    plan: BlockagePlan
    t_max: int
    unblocked_ticks: int


@dataclass
class BlockageSuite:
    params: SuiteParams
    scenes: dict[str, SceneGraph]
    entries: list[SuiteEntry]

    def overrides(self) -> dict:
        """Per-episode settings in the run command's overrides-file format."""
        return {
            e.episode.episode_id: {
                "blockages": [[e.plan.tick, e.plan.corridor_id]],
                "t_max": e.t_max,
            }
            for e in self.entries
        }


def _dist_from(scene: SceneGraph, src: Cell):
    field_ = bfs_distance_field(scene.grid.blocked, src)
    res = scene.grid.resolution

    def dist(dst: Cell) -> float:
        steps = field_[dst[1], dst[0]]
        return math.inf if steps < 0 else float(steps) * res

    return dist


def pick_route_blockage(
    scene: SceneGraph,
    episode: EpisodeSpec,
    params: SuiteParams,
    stats: dict[str, int] | None = None,
) -> BlockagePlan | None:
    """Choose a corridor on the FH robot's pickup leg worth closing.

    Requirements, all on true maps: the gate sits strictly between the FH
    start and the target along the ground-truth path; after closing it the
    partner can still run the entire relay (pickup, handoff, and delivery
    all mutually reachable from its side); either the FH detour to the
    pickup lengthens by ``min_detour_extra_m`` or the pickup becomes
    outright unreachable for FH; the partner stays a competitive taker for
    the pickup even after drifting for ``tick`` steps (its start-based
    distance plus the worst-case drift must undercut the FH detour); and
    FH's own access to the handoff is essentially unharmed, so the swapped
    assignment stays cheap. Among qualifying corridors the one costing FH
    the most is returned, with the closure scheduled halfway to the gate.
    """
    grid = scene.grid
    target_cell = scene.objects[episode.target_object_id].cell
    path = list(episode.gt_path_fh)
    if target_cell not in path:
        return None
    prefix = path[: path.index(target_cell) + 1]
    start_fh = prefix[0]
    start_sh = grid.cell_of(episode.start_pose_sh.x, episode.start_pose_sh.y)
    handoff = grid.cell_of(episode.handoff_waypoint.x, episode.handoff_waypoint.y)
    delivery = grid.cell_of(episode.delivery_waypoint.x, episode.delivery_waypoint.y)
    keep_free = {start_fh, start_sh, target_cell, handoff, delivery}

    d_direct = geodesic_distance(scene, start_fh, target_cell)
    best: tuple[float, BlockagePlan] | None = None
    tally = stats if stats is not None else {}
    for cid in sorted(scene.corridors):
        gate = scene.corridors[cid].gate_cells
        if gate & keep_free:
            continue
        steps_to = next(
            (i for i, cell in enumerate(prefix) if cell in gate), None
        )
        if steps_to is None or steps_to < 2:
            continue
        tally["on_route"] = tally.get("on_route", 0) + 1
        blocked = apply_blockage(scene, cid)
        d_post = geodesic_distance(blocked, start_fh, target_cell)
        if math.isinf(d_post):
            kind, extra = KIND_CUT, math.inf
        elif d_post >= d_direct + params.min_detour_extra_m:
            kind, extra = KIND_DETOUR, d_post - d_direct
        else:
            tally["detour_too_short"] = tally.get("detour_too_short", 0) + 1
            continue
        from_sh = _dist_from(blocked, start_sh)
        from_target = _dist_from(blocked, target_cell)
        from_handoff = _dist_from(blocked, handoff)
        partner_ok = all(
            math.isfinite(d)
            for d in (
                from_sh(target_cell),
                from_target(handoff),
                from_handoff(delivery),
                from_sh(handoff),
            )
        )
        if not partner_ok:
            tally["partner_cut_off"] = tally.get("partner_cut_off", 0) + 1
            continue
        tick = max(1, steps_to // 2)
        res = grid.resolution
        # the partner must stay the cheaper taker for the pickup even after
        # walking away from its start for up to `tick` steps
        drift = tick * res
        if from_sh(target_cell) + drift + res > d_post:
            tally["taker_not_cheaper"] = tally.get("taker_not_cheaper", 0) + 1
            continue
        if from_sh(target_cell) > d_direct + params.taker_slack_m:
            tally["taker_too_far"] = tally.get("taker_too_far", 0) + 1
            continue
        # the partner's natural route to the pickup must not run through the
        # closed gate: a blocked-map taker trip much longer than the open-map
        # one means it would discover the closure mid-route and pay for it
        d_sh_tgt_pre = geodesic_distance(scene, start_sh, target_cell)
        if from_sh(target_cell) > d_sh_tgt_pre + params.carry_slack_m:
            tally["taker_route_hit"] = tally.get("taker_route_hit", 0) + 1
            continue
        # the carry leg itself must survive the closure: whoever holds the
        # item still has to walk pickup -> handoff, so the gate must not sit
        # on that route either
        d_carry_pre = geodesic_distance(scene, target_cell, handoff)
        if from_target(handoff) > d_carry_pre + params.carry_slack_m:
            tally["carry_leg_hit"] = tally.get("carry_leg_hit", 0) + 1
            continue
        # FH's post-swap leg to the handoff must dodge the closed gate cheaply
        d_fh_handoff_pre = geodesic_distance(scene, start_fh, handoff)
        d_fh_handoff_post = geodesic_distance(blocked, start_fh, handoff)
        if d_fh_handoff_post > d_fh_handoff_pre + params.handoff_slack_m:
            tally["handoff_leg_hit"] = tally.get("handoff_leg_hit", 0) + 1
            continue
        # post-swap repositioning overhead: FH's trip to the handoff replaces
        # the partner's own (usually shorter) approach, and both robots burn
        # up to `tick` cells walking the wrong way before the closure fires;
        # that combined overhead must stay well under the detour savings or
        # the realized-path comparison degenerates into a coin flip
        reposition = d_fh_handoff_post - from_sh(handoff) + 4.0 * drift
        if reposition > params.reposition_slack_m:
            tally["reposition_cost"] = tally.get("reposition_cost", 0) + 1
            continue
        # worst-case post-swap critical path: FH repositions to the handoff
        # while the partner backtracks its drift, fetches the item, and
        # carries it in; then the item travels on to the delivery point
        critical = (
            max(
                d_fh_handoff_post,
                2.0 * drift + from_sh(target_cell) + from_target(handoff),
            )
            + from_handoff(delivery)
        )
        tally["qualified"] = tally.get("qualified", 0) + 1
        score = extra if math.isfinite(extra) else 1e9
        plan = BlockagePlan(cid, tick, kind, extra, critical)
        if best is None or score > best[0]:
            best = (score, plan)
    return best[1] if best else None


def build_blockage_suite(params: SuiteParams) -> BlockageSuite:
    """Deterministically assemble the suite from (seed, params) alone."""
    base = replace(params.rollout, policy="deconav", blockage_schedule=(), mode="lockstep")
    want_cuts = round(params.n_episodes * params.cut_fraction)
    scenes: dict[str, SceneGraph] = {}
    entries: list[SuiteEntry] = []
    cuts = 0
    for draw in range(params.max_scene_draws):
        if len(entries) >= params.n_episodes:
            break
        scene = generate_scene(derive_seed(params.seed, "suite-scene", draw))
        for k in range(params.per_scene):
            if len(entries) >= params.n_episodes:
                break
            drawn = generate_episode(
                scene, derive_seed(params.seed, "suite-episode", draw, k)
            )
            if not isinstance(drawn, EpisodeSpec):
                continue
            plan = pick_route_blockage(scene, drawn, params)
            if plan is None:
                continue
            if plan.kind == KIND_CUT and cuts >= want_cuts:
                continue
            nominal, _ = run_lockstep(scene, drawn, base)
            if not nominal.both_success:
                continue
            if plan.tick >= nominal.ticks:
                continue
            t_max = min(base.t_max, nominal.ticks + params.budget_extra_ticks)
            # oracle estimate of the swapped relay's finish tick: closure
            # tick, then the critical path at one cell per tick with a 30%
            # allowance for turning in place, plus handshake overhead; the
            # margin keeps the swapped run finishing well before the budget
            # so a timed-out baseline has kept walking in the meantime
            res = scene.grid.resolution
            est = plan.tick + int(plan.swap_critical_m / res * 1.3) + 25
            if est > t_max - params.est_margin_ticks:
                continue
            entries.append(SuiteEntry(drawn, plan, t_max, nominal.ticks))
            scenes[scene.scene_id] = scene
            if plan.kind == KIND_CUT:
                cuts += 1
    if len(entries) < params.n_episodes:
        raise SuiteBuildError(
            f"only {len(entries)} of {params.n_episodes} suite episodes found "
            f"within {params.max_scene_draws} scene draws"
        )
    return BlockageSuite(params, scenes, entries)


def run_suite(suite: BlockageSuite, policy: str) -> dict[str, RolloutResult]:
    """Lockstep rollouts of every entry under one policy, keyed by episode."""
    out: dict[str, RolloutResult] = {}
    for entry in suite.entries:
        cfg = replace(
            suite.params.rollout,
            mode="lockstep",
            policy=policy,
            t_max=entry.t_max,
            blockage_schedule=((entry.plan.tick, entry.plan.corridor_id),),
        )
        scene = suite.scenes[entry.episode.scene_id]
        result, _ = run_lockstep(scene, entry.episode, cfg)
        out[entry.episode.episode_id] = result
    return out


def ablation_report(
    deconav: dict[str, RolloutResult], static: dict[str, RolloutResult]
) -> dict:
    """Directional comparison: BSR ordering plus paths on swap-fired episodes."""
    if set(deconav) != set(static):
        raise ValueError("policy runs cover different episode sets")
    ids = sorted(deconav)
    n = len(ids)
    if n == 0:
        raise ValueError("empty suite")

    def bsr(results: dict[str, RolloutResult], subset) -> float:
        picked = [results[i] for i in subset]
        return sum(1 for r in picked if r.both_success) / len(picked) if picked else 0.0

    swap_fired = [i for i in ids if deconav[i].swap_count > 0]
    path_lower = [
        i
        for i in swap_fired
        if (deconav[i].path_len_fh_m + deconav[i].path_len_sh_m)
        < (static[i].path_len_fh_m + static[i].path_len_sh_m)
    ]
    frac_lower = len(path_lower) / len(swap_fired) if swap_fired else 0.0
    report = {
        "n_episodes": n,
        "n_swap_fired": len(swap_fired),
        "bsr_deconav": bsr(deconav, ids),
        "bsr_static": bsr(static, ids),
        "bsr_deconav_swap_fired": bsr(deconav, swap_fired),
        "bsr_static_swap_fired": bsr(static, swap_fired),
        "path_lower_count": len(path_lower),
        "path_lower_fraction": round(frac_lower, 6),
        "swap_fired_ids": swap_fired,
    }
    report["criteria"] = {
        "bsr_overall": report["bsr_deconav"] >= report["bsr_static"],
        "bsr_swap_fired_strict": bool(swap_fired)
        and report["bsr_deconav_swap_fired"] > report["bsr_static_swap_fired"],
        "path_lower_90pct": bool(swap_fired) and frac_lower >= 0.9,
    }
    return report
