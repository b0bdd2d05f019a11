"""Access to the JSON schema shipped with the package."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

KINDS = ("trace", "check", "witness", "explore", "symmetry", "sweep_report")


@lru_cache(maxsize=None)
def load_schema() -> dict:
    return json.loads(resources.files("anonelect").joinpath("schemas/v1.json").read_text())


def schema_for(kind: str) -> dict:
    """Self-contained schema for one document kind (a ``$ref`` into ``$defs``)."""
    if kind not in KINDS:
        raise ValueError(f"unknown document kind {kind!r}")
    root = load_schema()
    return {"$schema": root["$schema"], "$defs": root["$defs"], "$ref": f"#/$defs/{kind}"}
