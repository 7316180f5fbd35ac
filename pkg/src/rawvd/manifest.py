"""Run manifests: resolved settings plus content digests of inputs and outputs.

Re-running a command with the manifest's settings and seed must reproduce
the recorded output digests exactly.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def digest_tree(root) -> dict[str, str]:
    """Per-file sha256 of a directory, keyed by sorted relative path.

    ``manifest.json`` at the root is excluded so a dataset's manifest can
    describe the directory it lives in.
    """
    root = Path(root)
    if root.is_file():
        return {root.name: sha256_file(root)}
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file() and path.relative_to(root) != Path("manifest.json"):
            out[path.relative_to(root).as_posix()] = sha256_file(path)
    return out


def tree_digest(root) -> str:
    """Single digest summarizing a file or directory tree."""
    files = digest_tree(root)
    h = hashlib.sha256()
    for rel, digest in files.items():
        h.update(f"{rel}:{digest}\n".encode())
    return h.hexdigest()


def digest_entry(path) -> dict:
    path = Path(path)
    entry = {"path": str(path), "digest": tree_digest(path)}
    if path.is_dir():
        entry["files"] = digest_tree(path)
    return entry


def build_manifest(command: str, settings: dict, *, seed,
                   inputs: dict, outputs: dict, timings: dict) -> dict:
    from . import __version__

    return {
        "tool": "rawvd",
        "tool_version": __version__,
        "command": command,
        "seed": seed,
        "settings": {k: _jsonable(v) for k, v in sorted(settings.items())},
        "inputs": {name: digest_entry(p) for name, p in inputs.items()},
        "outputs": {name: digest_entry(p) for name, p in outputs.items()},
        "timings": timings,
    }


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def load_manifest(path) -> dict:
    with open(path) as f:
        return json.load(f)
