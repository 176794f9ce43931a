"""Versioned artifact bundle: a directory of canonical JSON documents plus a
manifest with content hashes. Bundles are diffable, language-neutral and
byte-reproducible from (config, input file)."""

from __future__ import annotations

import hashlib
import json
import shutil
from pathlib import Path

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_bundle(out_dir, documents: dict, reports: dict | None = None):
    """Write artifact documents (name -> json-able) and text reports.

    Everything lands under `out_dir`; the manifest carries a sha256 per file.
    On any failure the partially written directory is removed.
    """
    out = Path(out_dir)
    created = not out.exists()
    out.mkdir(parents=True, exist_ok=True)
    try:
        hashes = {}
        for name, obj in documents.items():
            text = canonical_json(obj)
            (out / name).write_text(text, encoding="utf-8")
            hashes[name] = sha256_text(text)
        for name, text in (reports or {}).items():
            path = out / name
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
            hashes[name] = sha256_text(text)
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "artifacts": hashes,
        }
        (out / MANIFEST_NAME).write_text(canonical_json(manifest),
                                         encoding="utf-8")
    except Exception:
        if created:
            shutil.rmtree(out, ignore_errors=True)
        else:
            for name in list(documents) + list(reports or {}):
                (out / name).unlink(missing_ok=True)
            (out / MANIFEST_NAME).unlink(missing_ok=True)
        raise
    return out


def read_document(bundle_dir, name: str):
    path = Path(bundle_dir) / name
    return json.loads(path.read_text(encoding="utf-8"))


def verify_bundle(bundle_dir) -> bool:
    """Recompute hashes and compare against the manifest."""
    bundle_dir = Path(bundle_dir)
    manifest = read_document(bundle_dir, MANIFEST_NAME)
    for name, digest in manifest["artifacts"].items():
        text = (bundle_dir / name).read_text(encoding="utf-8")
        if sha256_text(text) != digest:
            return False
    return True
