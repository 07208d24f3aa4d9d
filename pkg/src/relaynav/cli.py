"""Command-line pipelines: generate, adjudicate, run, evaluate, compare.

Every artifact-producing subcommand resolves its full configuration up
front, fans all randomness out from one root seed by stable derivation, and
writes a manifest holding that resolved config plus content hashes of every
input and output. ``replay`` re-executes any such manifest and verifies the
regenerated bytes. Episodes inside a run may execute in parallel workers;
results and traces are merged in episode_id order, so the output bytes do
not depend on scheduling.

Exit codes: 0 success; 2 usage error; 3 episode generation produced only
rejections; 4 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from multiprocessing import Pool
from pathlib import Path

from .config import (
    RolloutConfig,
    SceneParams,
    SensorConfig,
    TransportConfig,
    TriggerConfig,
    config_to_dict,
)
from .engine import RolloutResult, run_distributed, run_lockstep
from .episodes import (
    EpisodeRejection,
    EpisodeSpec,
    dataset_stats,
    generate_episode,
    load_episodes,
    save_episodes,
)
from .labeling import (
    AdjudicationItem,
    LabelVote,
    SeededNoisyClassifier,
    apply_adjudication,
    export_adjudication,
    import_adjudication,
    label_quality,
    run_labeling,
    scene_truth_lookup,
)
from .manifest import (
    MANIFEST_NAME,
    RunManifest,
    load_manifest,
    make_manifest,
    save_manifest,
    verify_outputs,
)
from .metrics import (
    aggregate,
    compare,
    format_compare,
    format_report,
    score_episode,
)
from .scenegen import generate_scene
from .seeds import derive_seed
from .trace import Trace
from .serialize import canonical_dumps, read_json, write_canonical, write_jsonl, read_jsonl
from .world import SceneGraph, load_scene, save_scene

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_REJECTED = 3
EXIT_RUNTIME = 4

CONFIG_ENV_VAR = "RELAYNAV_CONFIG"
RESULTS_NAME = "results.jsonl"
REPORT_NAME = "report.json"
EPISODE_RESULTS_NAME = "episode_results.jsonl"
PENDING_NAME = "pending.json"
ADJUDICATION_CSV = "adjudication.csv"


class UsageError(ValueError):
    pass


class RejectionOnly(RuntimeError):
    pass


# --- config resolution ----------------------------------------------------


def load_config_file(path: str | Path) -> dict:
    data = read_json(path)
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    known = {"rollout", "sensor", "trigger", "transport", "scene"}
    unknown = set(data) - known
    if unknown:
        raise UsageError(f"unknown config sections: {', '.join(sorted(unknown))}")
    return data


def _build_section(cls, file_section: dict, overrides: dict):
    fields = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
    bad = set(file_section) - fields
    if bad:
        raise UsageError(f"unknown {cls.__name__} keys: {', '.join(sorted(bad))}")
    merged = dict(file_section)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return cls(**merged)


def resolve_run_config(
    file_cfg: dict, rollout_overrides: dict, transport_overrides: dict
) -> tuple[RolloutConfig, TransportConfig | None]:
    sensor = _build_section(SensorConfig, file_cfg.get("sensor", {}), {})
    trigger = _build_section(TriggerConfig, file_cfg.get("trigger", {}), {})
    rollout = _build_section(
        RolloutConfig,
        {
            k: v
            for k, v in file_cfg.get("rollout", {}).items()
            if k not in ("sensor", "trigger", "blockage_schedule")
        },
        rollout_overrides,
    )
    rollout = replace(rollout, sensor=sensor, trigger=trigger)
    rollout.validate()
    transport: TransportConfig | None = None
    if rollout.mode == "distributed":
        transport = _build_section(
            TransportConfig, file_cfg.get("transport", {}), transport_overrides
        )
        transport.validate()
    elif any(v is not None for v in transport_overrides.values()):
        raise UsageError("transport flags require --mode distributed")
    return rollout, transport


def run_config_snapshot(
    rollout: RolloutConfig, transport: TransportConfig | None
) -> dict:
    snap = {"rollout": config_to_dict(rollout)}
    snap["transport"] = config_to_dict(transport) if transport is not None else None
    return snap


# --- shared artifact helpers ----------------------------------------------


_NON_SCENE_FILES = frozenset({MANIFEST_NAME, PENDING_NAME, REPORT_NAME})


def _scene_files(scenes_dir: str | Path) -> list[Path]:
    base = Path(scenes_dir)
    if not base.is_dir():
        raise UsageError(f"scene directory {base} does not exist")
    return sorted(p for p in base.glob("*.json") if p.name not in _NON_SCENE_FILES)


def _load_scenes(scenes_dir: str | Path) -> list[SceneGraph]:
    return [load_scene(p) for p in _scene_files(scenes_dir)]


def _out_dir(path: str | Path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- gen-scenes -----------------------------------------------------------


def do_gen_scenes(
    count: int, seed: int, out_dir: str | Path, params: SceneParams | None = None
) -> RunManifest:
    if count < 0:
        raise UsageError("--count must be non-negative")
    params = params or SceneParams()
    out = _out_dir(out_dir)
    outputs: dict[str, Path] = {}
    for i in range(count):
        scene = generate_scene(derive_seed(seed, "scene", i), params)
        path = out / f"{scene.scene_id}.json"
        save_scene(scene, path)
        outputs[path.name] = path
    manifest = make_manifest(
        "gen-scenes",
        seed,
        {"count": count, "scene": config_to_dict(params)},
        output_files=outputs,
    )
    save_manifest(manifest, out)
    return manifest


# --- gen-episodes ---------------------------------------------------------


def rejects_path_for(out_file: str | Path) -> Path:
    out = Path(out_file)
    return out.with_name(out.name + ".rejects.jsonl")


def manifest_path_for(out_file: str | Path) -> Path:
    out = Path(out_file)
    return out.with_name(out.name + ".manifest.json")


def do_gen_episodes(
    scenes_dir: str | Path, per_scene: int, seed: int, out_file: str | Path
) -> tuple[RunManifest, int, int]:
    if per_scene < 0:
        raise UsageError("--per-scene must be non-negative")
    scene_paths = _scene_files(scenes_dir)
    out = Path(out_file)
    out.parent.mkdir(parents=True, exist_ok=True)
    episodes: list[EpisodeSpec] = []
    rejects: list[dict] = []
    for path in scene_paths:
        scene = load_scene(path)
        for k in range(per_scene):
            drawn = generate_episode(scene, derive_seed(seed, "episode", scene.scene_id, k))
            if isinstance(drawn, EpisodeSpec):
                episodes.append(drawn)
            else:
                rejects.append(
                    {
                        "scene_id": drawn.scene_id,
                        "seed": drawn.seed,
                        "stop": drawn.stop,
                        "tallies": drawn.tallies,
                    }
                )
    save_episodes(episodes, out)
    rej_path = rejects_path_for(out)
    write_jsonl(rej_path, rejects)
    manifest = make_manifest(
        "gen-episodes",
        seed,
        {"per_scene": per_scene, "scenes_dir": str(scenes_dir)},
        inputs={p.name: p for p in scene_paths},
        output_files={out.name: out, rej_path.name: rej_path},
    )
    save_manifest(manifest, manifest_path_for(out))
    if rejects and not episodes:
        raise RejectionOnly(
            f"all {len(rejects)} sampled episodes were rejected; see {rej_path}"
        )
    return manifest, len(episodes), len(rejects)


# --- adjudication ---------------------------------------------------------


def do_adjudicate_export(
    scenes_dir: str | Path,
    out_dir: str | Path,
    seed: int,
    acc_a: float,
    acc_b: float,
) -> tuple[RunManifest, int]:
    scenes = _load_scenes(scenes_dir)
    truth = scene_truth_lookup(scenes)
    client_a = SeededNoisyClassifier("classifier_a", acc_a, derive_seed(seed, "a"), truth)
    client_b = SeededNoisyClassifier("classifier_b", acc_b, derive_seed(seed, "b"), truth)
    out = _out_dir(out_dir)
    outputs: dict[str, Path] = {}
    pending: list[AdjudicationItem] = []
    for scene in scenes:
        labeled = run_labeling(scene, client_a, client_b)
        path = out / f"{labeled.scene.scene_id}.json"
        save_scene(labeled.scene, path)
        outputs[path.name] = path
        pending.extend(labeled.items)
    csv_path = out / ADJUDICATION_CSV
    export_adjudication(pending, csv_path)
    pending_path = out / PENDING_NAME
    write_canonical(
        pending_path,
        [
            {
                "scene_id": item.scene_id,
                "region_id": item.region_id,
                "votes": [
                    {"source": v.source, "label": v.label, "confidence": v.confidence}
                    for v in item.votes
                ],
            }
            for item in sorted(pending, key=lambda i: (i.scene_id, i.region_id))
        ],
        indent=2,
    )
    outputs[ADJUDICATION_CSV] = csv_path
    outputs[PENDING_NAME] = pending_path
    manifest = make_manifest(
        "adjudicate-export",
        seed,
        {"scenes_dir": str(scenes_dir), "acc_a": acc_a, "acc_b": acc_b},
        inputs={p.name: p for p in _scene_files(scenes_dir)},
        output_files=outputs,
    )
    save_manifest(manifest, out)
    return manifest, len(pending)


def _load_pending(pending_dir: str | Path) -> list[AdjudicationItem]:
    path = Path(pending_dir) / PENDING_NAME
    if not path.exists():
        raise UsageError(f"{path} not found; run adjudicate export first")
    return [
        AdjudicationItem(
            scene_id=rec["scene_id"],
            region_id=rec["region_id"],
            votes=tuple(
                LabelVote(v["source"], v["label"], float(v["confidence"]))
                for v in rec["votes"]
            ),
        )
        for rec in read_json(path)
    ]


def do_adjudicate_auto(
    pending_dir: str | Path, truth_scenes_dir: str | Path, out_csv: str | Path
) -> int:
    """Resolve every pending item from generator ground truth (oracle annotator)."""
    import csv as _csv

    pending = _load_pending(pending_dir)
    truth = scene_truth_lookup(_load_scenes(truth_scenes_dir))
    src = Path(pending_dir) / ADJUDICATION_CSV
    if not src.exists():
        raise UsageError(f"{src} not found; run adjudicate export first")
    with open(src, newline="", encoding="utf-8") as fh:
        reader = _csv.reader(fh)
        rows = list(reader)
    header, body = rows[0], rows[1:]
    filled = [header]
    for row in body:
        scene_id, region_id = row[0], row[1]
        row = list(row)
        row[-1] = truth(scene_id, region_id)
        filled.append(row)
    resolved_ids = {(r[0], r[1]) for r in body}
    missing = [i for i in pending if (i.scene_id, i.region_id) not in resolved_ids]
    if missing:
        raise RuntimeError(f"{len(missing)} pending items absent from {src}")
    out = Path(out_csv)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        _csv.writer(fh).writerows(filled)
    return len(body)


def do_adjudicate_import(
    pending_dir: str | Path, csv_path: str | Path, out_dir: str | Path
) -> tuple[RunManifest, int]:
    pending = _load_pending(pending_dir)
    resolutions = import_adjudication(csv_path, pending)
    out = _out_dir(out_dir)
    outputs: dict[str, Path] = {}
    for scene in _load_scenes(pending_dir):
        final = apply_adjudication(scene, resolutions)
        path = out / f"{final.scene_id}.json"
        save_scene(final, path)
        outputs[path.name] = path
    manifest = make_manifest(
        "adjudicate-import",
        0,
        {"pending_dir": str(pending_dir), "csv": str(csv_path)},
        inputs={Path(csv_path).name: csv_path},
        output_files=outputs,
    )
    save_manifest(manifest, out)
    return manifest, len(resolutions)


def do_adjudicate_stats(scenes_dir: str | Path) -> dict:
    return label_quality(_load_scenes(scenes_dir))


# --- run ------------------------------------------------------------------


def _load_overrides(path: str | Path | None) -> dict:
    if path is None:
        return {}
    data = read_json(path)
    if not isinstance(data, dict):
        raise UsageError(f"overrides file {path} must map episode_id to settings")
    out = {}
    for eid, rec in data.items():
        blockages = tuple(
            (int(t), str(c)) for t, c in rec.get("blockages", [])
        )
        out[eid] = {"blockages": blockages, "t_max": rec.get("t_max")}
    return out


def _episode_rollout_config(
    base: RolloutConfig, overrides: dict, episode_id: str
) -> RolloutConfig:
    rec = overrides.get(episode_id)
    if rec is None:
        return base
    cfg = replace(base, blockage_schedule=rec["blockages"])
    if rec["t_max"] is not None:
        cfg = replace(cfg, t_max=int(rec["t_max"]))
    return cfg


def rollout_episode(
    scene: SceneGraph,
    episode: EpisodeSpec,
    rollout: RolloutConfig,
    transport: TransportConfig | None,
) -> tuple[RolloutResult, Trace]:
    if rollout.mode == "distributed":
        if transport is None:
            transport = TransportConfig()
        per_ep = replace(
            transport, seed=derive_seed(transport.seed, "transport", episode.episode_id)
        )
        return run_distributed(scene, episode, rollout, per_ep)
    return run_lockstep(scene, episode, rollout)


def rollout_config_from_dict(d: dict) -> RolloutConfig:
    return RolloutConfig(
        **{
            k: v
            for k, v in d.items()
            if k not in ("sensor", "trigger", "blockage_schedule")
        },
        blockage_schedule=tuple((int(t), str(c)) for t, c in d["blockage_schedule"]),
        sensor=SensorConfig(**d["sensor"]),
        trigger=TriggerConfig(**d["trigger"]),
    )


def _worker(payload: tuple) -> tuple[str, dict, bytes]:
    scene_path, episode_dict, rollout_dict, transport_dict, override = payload
    scene = load_scene(scene_path)
    episode = EpisodeSpec.from_dict(episode_dict)
    rollout = rollout_config_from_dict(rollout_dict)
    transport = TransportConfig(**transport_dict) if transport_dict else None
    cfg = _episode_rollout_config(
        rollout, {episode.episode_id: override} if override else {}, episode.episode_id
    )
    result, trace = rollout_episode(scene, episode, cfg, transport)
    return episode.episode_id, result.to_dict(), trace.to_bytes()


def do_run(
    episodes_path: str | Path,
    scenes_dir: str | Path,
    out_dir: str | Path,
    rollout: RolloutConfig,
    transport: TransportConfig | None,
    overrides_path: str | Path | None = None,
    jobs: int = 1,
) -> RunManifest:
    episodes = load_episodes(episodes_path)
    overrides = _load_overrides(overrides_path)
    unknown = sorted(set(overrides) - {ep.episode_id for ep in episodes})
    if unknown:
        raise UsageError(f"overrides reference unknown episodes: {', '.join(unknown)}")
    scene_paths = {p.stem: p for p in _scene_files(scenes_dir)}
    missing = sorted({ep.scene_id for ep in episodes} - set(scene_paths))
    if missing:
        raise RuntimeError(f"scenes missing from {scenes_dir}: {', '.join(missing)}")

    out = _out_dir(out_dir)
    order = sorted(episodes, key=lambda ep: ep.episode_id)
    rollout_dict = config_to_dict(rollout)
    transport_dict = config_to_dict(transport) if transport is not None else None

    produced: dict[str, tuple[dict, bytes]] = {}
    if jobs > 1:
        payloads = [
            (
                str(scene_paths[ep.scene_id]),
                ep.to_dict(),
                rollout_dict,
                transport_dict,
                overrides.get(ep.episode_id),
            )
            for ep in order
        ]
        with Pool(jobs) as pool:
            for eid, result_dict, trace_bytes in pool.imap_unordered(_worker, payloads):
                produced[eid] = (result_dict, trace_bytes)
    else:
        scene_cache: dict[str, SceneGraph] = {}
        for ep in order:
            scene = scene_cache.get(ep.scene_id)
            if scene is None:
                scene = load_scene(scene_paths[ep.scene_id])
                scene_cache[ep.scene_id] = scene
            cfg = _episode_rollout_config(rollout, overrides, ep.episode_id)
            result, trace = rollout_episode(scene, ep, cfg, transport)
            produced[ep.episode_id] = (result.to_dict(), trace.to_bytes())

    outputs: dict[str, Path] = {}
    results_rows = []
    for ep in order:
        result_dict, trace_bytes = produced[ep.episode_id]
        trace_path = out / f"trace_{ep.episode_id}.jsonl"
        trace_path.write_bytes(trace_bytes)
        outputs[trace_path.name] = trace_path
        results_rows.append(result_dict)
    results_path = out / RESULTS_NAME
    write_jsonl(results_path, results_rows)
    outputs[RESULTS_NAME] = results_path

    inputs = {Path(episodes_path).name: episodes_path}
    for sid in sorted({ep.scene_id for ep in episodes}):
        inputs[scene_paths[sid].name] = scene_paths[sid]
    if overrides_path is not None:
        inputs[Path(overrides_path).name] = overrides_path
    manifest = make_manifest(
        "run",
        rollout.seed,
        {
            **run_config_snapshot(rollout, transport),
            "episodes": str(episodes_path),
            "scenes_dir": str(scenes_dir),
            "overrides": str(overrides_path) if overrides_path else None,
        },
        inputs=inputs,
        output_files=outputs,
    )
    save_manifest(manifest, out)
    return manifest


# --- eval / compare / stats -----------------------------------------------


def eval_results_dir(results_dir: str | Path):
    base = Path(results_dir)
    manifest = load_manifest(base)
    if manifest.command != "run":
        raise RuntimeError(f"{base} holds a {manifest.command} manifest, not a run")
    episodes_path = manifest.config["episodes"]
    if not Path(episodes_path).exists():
        raise RuntimeError(f"episodes file {episodes_path} referenced by manifest is gone")
    episodes = {ep.episode_id: ep for ep in load_episodes(episodes_path)}
    rows = read_jsonl(base / RESULTS_NAME)
    scored = []
    for row in rows:
        result = RolloutResult.from_dict(row)
        episode = episodes.get(result.episode_id)
        if episode is None:
            raise RuntimeError(f"result {result.episode_id} missing from episodes file")
        scored.append(score_episode(result, episode))
    report = aggregate(scored)
    return report, scored


def do_eval(results_dir: str | Path):
    base = Path(results_dir)
    report, scored = eval_results_dir(base)
    write_canonical(base / REPORT_NAME, report.to_dict(), indent=2)
    write_jsonl(base / EPISODE_RESULTS_NAME, [er.to_dict() for er in scored])
    return report


def do_compare(dir_a: str | Path, dir_b: str | Path, out_file: str | Path | None):
    report_a, _ = eval_results_dir(dir_a)
    report_b, _ = eval_results_dir(dir_b)
    delta = compare(report_a, report_b)
    if out_file is not None:
        Path(out_file).parent.mkdir(parents=True, exist_ok=True)
        write_canonical(out_file, delta, indent=2)
    return delta


# --- replay ---------------------------------------------------------------


def do_replay(manifest_path: str | Path, out_dir: str | Path) -> RunManifest:
    manifest = load_manifest(manifest_path)
    cfg = manifest.config
    if manifest.command == "gen-scenes":
        scene_cfg = SceneParams(
            **{
                k: tuple(v) if isinstance(v, list) else v
                for k, v in cfg["scene"].items()
            }
        )
        redone = do_gen_scenes(cfg["count"], manifest.seed, out_dir, scene_cfg)
    elif manifest.command == "gen-episodes":
        out_names = [n for n in manifest.outputs if not n.endswith(".rejects.jsonl")]
        if len(out_names) != 1:
            raise RuntimeError("gen-episodes manifest must list one episode file")
        target = _out_dir(out_dir) / out_names[0]
        redone, _, _ = do_gen_episodes(
            cfg["scenes_dir"], cfg["per_scene"], manifest.seed, target
        )
    elif manifest.command == "run":
        rollout = rollout_config_from_dict(cfg["rollout"])
        transport = (
            TransportConfig(**cfg["transport"]) if cfg.get("transport") else None
        )
        redone = do_run(
            cfg["episodes"],
            cfg["scenes_dir"],
            out_dir,
            rollout,
            transport,
            overrides_path=cfg.get("overrides"),
        )
    else:
        raise RuntimeError(f"manifest command {manifest.command!r} is not replayable")

    mismatched = [
        name
        for name, rec in sorted(manifest.outputs.items())
        if redone.outputs.get(name, {}).get("sha256") != rec["sha256"]
    ]
    extra = sorted(set(redone.outputs) - set(manifest.outputs))
    if mismatched or extra:
        raise RuntimeError(
            "replay diverged — mismatched: "
            f"{', '.join(mismatched) or 'none'}; unexpected: {', '.join(extra) or 'none'}"
        )
    return redone


# --- argument parsing -----------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relaynav",
        description="Dual-robot relay navigation benchmark pipelines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scenes", help="generate procedural scenes")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen-episodes", help="sample verified relay episodes")
    p.add_argument("--scenes", required=True)
    p.add_argument("--per-scene", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("adjudicate", help="room-label adjudication pipeline")
    adj = p.add_subparsers(dest="adj_command", required=True)
    pe = adj.add_parser("export", help="relabel scenes, export unresolved items")
    pe.add_argument("--scenes", required=True)
    pe.add_argument("--out", required=True)
    pe.add_argument("--seed", type=int, default=0)
    pe.add_argument("--acc-a", type=float, default=0.9)
    pe.add_argument("--acc-b", type=float, default=0.85)
    pa = adj.add_parser("auto", help="fill resolutions from generator truth")
    pa.add_argument("--pending", required=True)
    pa.add_argument("--truth-scenes", required=True)
    pa.add_argument("--out", required=True)
    pi = adj.add_parser("import", help="apply resolved labels, write final scenes")
    pi.add_argument("--pending", required=True)
    pi.add_argument("--csv", required=True)
    pi.add_argument("--out", required=True)
    ps = adj.add_parser("stats", help="coverage/correctness vs generator truth")
    ps.add_argument("--scenes", required=True)

    p = sub.add_parser("run", help="roll out episodes, write traces + results")
    p.add_argument("--episodes", required=True)
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("lockstep", "distributed"), default=None)
    p.add_argument("--policy", choices=("deconav", "static"), default=None)
    p.add_argument("--tau", type=int, default=None)
    p.add_argument("--t-max", type=int, default=None)
    p.add_argument("--r-succ", type=float, default=None)
    p.add_argument("--r-int", type=float, default=None)
    p.add_argument("--knowledge", choices=("known", "discover"), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--latency", type=int, default=None)
    p.add_argument("--jitter", type=int, default=None)
    p.add_argument("--drop-prob", type=float, default=None)
    p.add_argument("--transport-seed", type=int, default=None)
    p.add_argument("--overrides", default=None,
                   help="JSON: episode_id -> {blockages: [[tick, corridor]...], t_max}")
    p.add_argument("--config", default=None,
                   help=f"JSON config file (or set ${CONFIG_ENV_VAR})")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("eval", help="score a run directory")
    p.add_argument("--results", required=True)

    p = sub.add_parser("compare", help="A/B delta between two run directories")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("stats", help="dataset statistics for an episode file")
    p.add_argument("--episodes", required=True)

    p = sub.add_parser("replay", help="re-execute a manifest and verify bytes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)

    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "gen-scenes":
        manifest = do_gen_scenes(args.count, args.seed, args.out)
        print(f"wrote {len(manifest.outputs)} scenes to {args.out}")
        return EXIT_OK

    if args.command == "gen-episodes":
        manifest, n_ok, n_rej = do_gen_episodes(
            args.scenes, args.per_scene, args.seed, args.out
        )
        print(f"wrote {n_ok} episodes ({n_rej} rejected) to {args.out}")
        return EXIT_OK

    if args.command == "adjudicate":
        if args.adj_command == "export":
            _, n = do_adjudicate_export(
                args.scenes, args.out, args.seed, args.acc_a, args.acc_b
            )
            print(f"exported {n} unresolved items to {args.out}")
        elif args.adj_command == "auto":
            n = do_adjudicate_auto(args.pending, args.truth_scenes, args.out)
            print(f"auto-resolved {n} items into {args.out}")
        elif args.adj_command == "import":
            _, n = do_adjudicate_import(args.pending, args.csv, args.out)
            print(f"applied {n} resolutions; final scenes in {args.out}")
        else:
            stats = do_adjudicate_stats(args.scenes)
            print(canonical_dumps(stats, indent=2))
        return EXIT_OK

    if args.command == "run":
        config_path = args.config or os.environ.get(CONFIG_ENV_VAR)
        file_cfg = load_config_file(config_path) if config_path else {}
        rollout, transport = resolve_run_config(
            file_cfg,
            {
                "mode": args.mode,
                "policy": args.policy,
                "tau": args.tau,
                "t_max": args.t_max,
                "r_succ": args.r_succ,
                "r_int": args.r_int,
                "knowledge": args.knowledge,
                "seed": args.seed,
            },
            {
                "latency": args.latency,
                "jitter": args.jitter,
                "drop_prob": args.drop_prob,
                "seed": args.transport_seed,
            },
        )
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        manifest = do_run(
            args.episodes, args.scenes, args.out, rollout, transport,
            overrides_path=args.overrides, jobs=args.jobs,
        )
        n_traces = sum(1 for n in manifest.outputs if n.startswith("trace_"))
        print(f"ran {n_traces} episodes into {args.out}")
        return EXIT_OK

    if args.command == "eval":
        report = do_eval(args.results)
        print(format_report(report))
        return EXIT_OK

    if args.command == "compare":
        delta = do_compare(args.a, args.b, args.out)
        print(format_compare(delta))
        if args.out is None:
            print(canonical_dumps(delta, indent=2))
        return EXIT_OK

    if args.command == "stats":
        stats = dataset_stats(load_episodes(args.episodes))
        print(canonical_dumps(stats.to_dict(), indent=2))
        return EXIT_OK

    if args.command == "replay":
        do_replay(args.manifest, args.out)
        print(f"replay verified against {args.manifest}")
        return EXIT_OK

    raise UsageError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return int(exc.code or 0)
    try:
        return _dispatch(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RejectionOnly as exc:
        print(f"no episodes generated: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except Exception as exc:  # pragma: no cover - defensive catch-all
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
