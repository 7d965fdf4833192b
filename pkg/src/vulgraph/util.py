"""Small shared helpers."""

from __future__ import annotations

import json


def dump_json(obj, indent: int | None = None) -> str:
    """Canonical JSON text: sorted keys, fixed separators, trailing newline.

    Every report and artifact the package writes goes through here so that
    identical inputs yield identical bytes.
    """
    if indent is None:
        text = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    else:
        text = json.dumps(obj, sort_keys=True, indent=indent, ensure_ascii=True)
    return text + "\n"
