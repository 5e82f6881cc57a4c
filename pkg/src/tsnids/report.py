"""Human-readable and key=value renderings of run results."""
from __future__ import annotations

import json

from . import __version__


def flatten(d: dict, prefix: str = "") -> dict[str, object]:
    out: dict[str, object] = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        elif isinstance(v, list) and v and all(isinstance(e, dict) for e in v):
            for i, e in enumerate(v):
                out.update(flatten(e, f"{key}.{i}."))
        else:
            out[key] = v
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return json.dumps(list(v))
    if v is None:
        return "none"
    return str(v)


def render(kind: str, results: dict, config: dict | None = None, fmt: str = "text") -> str:
    """Render ``results`` (nested dict) with the config snapshot and version.

    ``kv`` output is one ``key=value`` line per leaf, sorted, stable across
    runs; ``text`` is an indented summary for people.
    """
    doc = {"report": kind, "version": __version__, "results": results}
    if config is not None:
        doc["config"] = config
    if fmt == "kv":
        flat = flatten(doc)
        return "".join(f"{k}={_fmt(flat[k])}\n" for k in sorted(flat))
    if fmt == "json":
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    lines = [f"== {kind} (tsnids {__version__}) =="]
    lines += _text_block(results, 0)
    if config is not None:
        lines.append("-- config --")
        lines += _text_block(config, 1)
    return "\n".join(lines) + "\n"


def _text_block(d: dict, depth: int) -> list[str]:
    pad = "  " * depth
    out = []
    for k, v in d.items():
        if isinstance(v, dict):
            out.append(f"{pad}{k}:")
            out += _text_block(v, depth + 1)
        elif isinstance(v, list) and v and all(isinstance(e, dict) for e in v):
            out.append(f"{pad}{k}:")
            for e in v:
                out.append(pad + "  - " + ", ".join(f"{ek}={_short(ev)}" for ek, ev in e.items()))
        else:
            out.append(f"{pad}{k}: {_short(v)}")
    return out


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return _fmt(v)
