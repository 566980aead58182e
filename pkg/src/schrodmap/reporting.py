"""Run manifests and deterministic result persistence.

Result files (CSV rows, JSON summaries) are byte-identical across repeated
runs with the same seed and configuration; anything wall-clock-dependent
lives only in the manifest, which is the documented non-deterministic
companion of a run directory.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time

from .estimates import ProbeRow

MANIFEST_NAME = "manifest.json"

_MANIFEST_REQUIRED = ("command", "config", "code_version", "grid", "seed", "outputs", "wall_time_s")


def write_manifest(out_dir: str, command: str, config: dict, grid: dict, seed: int,
                   outputs: list[str], wall_time_s: float) -> str:
    from . import __version__

    manifest = {
        "command": command,
        "config": config,
        "code_version": __version__,
        "grid": grid,
        "seed": seed,
        "outputs": sorted(outputs),
        "wall_time_s": wall_time_s,
        "created_unix": time.time(),
    }
    validate_manifest(manifest)
    path = os.path.join(out_dir, MANIFEST_NAME)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def validate_manifest(manifest: dict) -> None:
    missing = [k for k in _MANIFEST_REQUIRED if k not in manifest]
    if missing:
        raise ValueError(f"manifest missing keys: {missing}")
    if not isinstance(manifest["outputs"], list):
        raise ValueError("manifest outputs must be a list")


def load_manifest(run_dir: str) -> dict:
    with open(os.path.join(run_dir, MANIFEST_NAME)) as fh:
        manifest = json.load(fh)
    validate_manifest(manifest)
    return manifest


_PROBE_COLUMNS = (
    "estimate_id", "run_label", "param_index", "trial", "seed",
    "k", "k1", "k2", "k3", "kmax", "j", "j1", "j2", "kp", "l", "s",
    "sigma", "leps", "variant", "kind", "mprof",
    "lhs", "rhs", "ratio", "skipped", "note", "extras",
)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def probe_rows_to_csv(rows: list[ProbeRow]) -> str:
    """Deterministic CSV encoding of probe rows (fixed column set, repr floats)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_PROBE_COLUMNS)
    for r in rows:
        rec = {
            "estimate_id": r.estimate_id,
            "run_label": r.run_label,
            "param_index": r.param_index,
            "trial": r.trial,
            "seed": r.seed,
            "lhs": _fmt(r.lhs),
            "rhs": _fmt(r.rhs),
            "ratio": _fmt(r.ratio) if not r.skipped else "",
            "skipped": int(r.skipped),
            "note": r.note,
            "extras": json.dumps(r.extras, sort_keys=True, default=str) if r.extras else "",
        }
        for key in ("k", "k1", "k2", "k3", "kmax", "j", "j1", "j2", "kp", "l", "s",
                    "sigma", "leps", "variant", "kind", "mprof"):
            rec[key] = _fmt(r.params.get(key))
        writer.writerow([rec[c] for c in _PROBE_COLUMNS])
    return buf.getvalue()


def summary_to_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True, default=str) + "\n"


def trace_to_csv(trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iter", "increment_l2", "ratio", "increment_fnorm"])
    for row in trace.rows():
        writer.writerow([row["iter"], _fmt(row["increment_l2"]), _fmt(row["ratio"]),
                         _fmt(row["increment_fnorm"])])
    writer.writerow(["final_residual", _fmt(trace.residual), "", ""])
    return buf.getvalue()


def write_text(path: str, text: str) -> str:
    with open(path, "w") as fh:
        fh.write(text)
    return path


def report_runs(base_dir: str) -> list[dict]:
    """Collect manifests under base_dir (one run per subdirectory)."""
    out = []
    for name in sorted(os.listdir(base_dir)):
        sub = os.path.join(base_dir, name)
        if os.path.isdir(sub) and os.path.exists(os.path.join(sub, MANIFEST_NAME)):
            try:
                out.append({"run": name, **load_manifest(sub)})
            except (ValueError, json.JSONDecodeError) as e:
                out.append({"run": name, "error": str(e)})
    return out
