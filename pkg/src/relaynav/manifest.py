"""Run manifests: resolved config + hashed inputs and outputs per command.

Every artifact-producing command drops a manifest next to its outputs. The
manifest records enough — command name, tool version, root seed, the fully
resolved configuration, and content hashes of every input and output — to
re-execute the command elsewhere and verify the regenerated bytes match.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .serialize import read_json, sha256_file, write_canonical

MANIFEST_NAME = "manifest.json"


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class RunManifest:
    command: str
    tool_version: str
    seed: int
    config: dict
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "tool_version": self.tool_version,
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
        }

    @staticmethod
    def from_dict(d: dict) -> "RunManifest":
        for key in ("command", "tool_version", "seed", "config"):
            if key not in d:
                raise ManifestError(f"manifest missing field {key!r}")
        return RunManifest(
            command=str(d["command"]),
            tool_version=str(d["tool_version"]),
            seed=int(d["seed"]),
            config=dict(d["config"]),
            inputs=dict(d.get("inputs", {})),
            outputs=dict(d.get("outputs", {})),
        )


def make_manifest(
    command: str,
    seed: int,
    config: dict,
    inputs: dict[str, str | Path] | None = None,
    output_files: dict[str, str | Path] | None = None,
) -> RunManifest:
    """Hash the named input and output files into a manifest record."""
    return RunManifest(
        command=command,
        tool_version=__version__,
        seed=seed,
        config=config,
        inputs={
            name: {"path": str(path), "sha256": sha256_file(path)}
            for name, path in sorted((inputs or {}).items())
        },
        outputs={
            name: {"sha256": sha256_file(path)}
            for name, path in sorted((output_files or {}).items())
        },
    )


def save_manifest(manifest: RunManifest, path: str | Path) -> Path:
    """Write to ``path`` directly, or ``path/manifest.json`` for a directory."""
    target = Path(path)
    if target.is_dir():
        target = target / MANIFEST_NAME
    write_canonical(target, manifest.to_dict(), indent=2)
    return target


def load_manifest(path: str | Path) -> RunManifest:
    target = Path(path)
    if target.is_dir():
        target = target / MANIFEST_NAME
    if not target.exists():
        raise ManifestError(f"no manifest at {target}")
    return RunManifest.from_dict(read_json(target))


def verify_outputs(manifest: RunManifest, out_dir: str | Path) -> list[str]:
    """Names of outputs whose bytes under ``out_dir`` differ from the record."""
    mismatched = []
    base = Path(out_dir)
    for name, rec in sorted(manifest.outputs.items()):
        path = base / name
        if not path.exists() or sha256_file(path) != rec["sha256"]:
            mismatched.append(name)
    return mismatched
