"""Trajectory serialization and run manifests.

Numbers are written as the shortest decimal string that parses back to
the identical double, so every read/write pair is a bit-exact inverse.
CSV files are UTF-8 with LF line endings and the header
``t,congestion,adoption``; JSON files carry the samples plus provenance
and diagnostics. Writes are atomic (write-temp-then-rename).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import warnings
from datetime import datetime, timezone

import numpy as np

from .errors import ParseError, ValidationError
from .integrate import Diagnostics, IntegratorConfig, Trajectory
from .model import ModelParams

CSV_HEADER = ("t", "congestion", "adoption")
FORMATS = ("csv", "json")


def format_float(x: float) -> str:
    """Shortest decimal string that round-trips to exactly ``x``."""
    s = repr(float(x))
    if s.endswith(".0"):
        trimmed = s[:-2]
        if float(trimmed) == x:
            return trimmed
    return s


def write_text_atomic(path, text: str) -> int:
    """Write UTF-8 text via a temp file + rename; returns bytes written."""
    data = text.encode("utf-8")
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return len(data)


def trajectory_to_csv(traj: Trajectory) -> str:
    lines = [",".join(CSV_HEADER)]
    for i in range(len(traj)):
        lines.append(
            f"{format_float(traj.times[i])},"
            f"{format_float(traj.congestion[i])},"
            f"{format_float(traj.adoption[i])}"
        )
    return "\n".join(lines) + "\n"


def _provenance_dict(traj: Trajectory) -> dict:
    params = None
    if traj.params is not None:
        params = {
            "k1": traj.params.k1,
            "k2": traj.params.k2,
            "k3": traj.params.k3,
            "k4": traj.params.k4,
            "a_max": traj.params.a_max,
        }
    integrator = None
    if traj.integrator is not None:
        integrator = {
            "method": traj.integrator.method,
            "step": traj.integrator.step,
            "rtol": traj.integrator.rtol,
            "atol": traj.integrator.atol,
            "max_steps": traj.integrator.max_steps,
        }
    return {"scenario_name": traj.scenario_name, "params": params, "integrator": integrator}


def trajectory_to_json(traj: Trajectory) -> str:
    diagnostics = None
    if traj.diagnostics is not None:
        diagnostics = {
            "congestion_went_negative": traj.diagnostics.congestion_went_negative,
            "adoption_went_negative": traj.diagnostics.adoption_went_negative,
            "steps": traj.diagnostics.steps,
            "rejected_steps": traj.diagnostics.rejected_steps,
        }
    doc = {
        "manifest": _provenance_dict(traj),
        "times": [float(v) for v in traj.times],
        "congestion": [float(v) for v in traj.congestion],
        "adoption": [float(v) for v in traj.adoption],
        "diagnostics": diagnostics,
    }
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_trajectory(traj: Trajectory, fmt: str, destination) -> int:
    """Write a trajectory as ``csv`` or ``json``; returns bytes written."""
    if fmt not in FORMATS:
        raise ValidationError(f"format must be one of {', '.join(FORMATS)}; got {fmt!r}")
    text = trajectory_to_csv(traj) if fmt == "csv" else trajectory_to_json(traj)
    return write_text_atomic(destination, text)


def _parse_csv(text: str) -> Trajectory:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty trajectory CSV", line=1)
    header = [cell.strip() for cell in lines[0].split(",")]
    if tuple(header[:3]) != CSV_HEADER:
        raise ParseError(
            f"CSV header must start with {','.join(CSV_HEADER)!r}; got {lines[0]!r}", line=1
        )
    if len(header) > 3:
        warnings.warn(
            f"trajectory CSV has {len(header) - 3} extra column(s); ignored",
            stacklevel=3,
        )
    times = []
    congestion = []
    adoption = []
    for row_index, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) < 3:
            raise ParseError(
                f"row {row_index} has {len(cells)} column(s); expected at least 3",
                line=row_index,
            )
        row = []
        for col, cell in enumerate(cells[:3]):
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(
                    f"non-numeric value {cell!r} in row {row_index}, column {col + 1}",
                    line=row_index,
                    column=col + 1,
                ) from None
            if not math.isfinite(value):
                raise ValidationError(
                    f"non-finite value {cell!r} in row {row_index}, column {col + 1}"
                )
            row.append(value)
        times.append(row[0])
        congestion.append(row[1])
        adoption.append(row[2])
    if not times:
        raise ParseError("trajectory CSV has no data rows", line=2)
    return Trajectory(
        times=np.array(times), congestion=np.array(congestion), adoption=np.array(adoption)
    )


def _number_list(doc: dict, key: str) -> list[float]:
    values = doc.get(key)
    if not isinstance(values, list):
        raise ValidationError(f"trajectory JSON key {key!r} must be an array")
    out = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ValidationError(f"{key}[{i}] must be a finite number, got {v!r}")
        out.append(float(v))
    return out


def _parse_json(text: str) -> Trajectory:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid trajectory JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            line=exc.lineno,
            column=exc.colno,
        ) from None
    if not isinstance(doc, dict):
        raise ValidationError("trajectory JSON must be an object")
    unknown = sorted(set(doc) - {"manifest", "times", "congestion", "adoption", "diagnostics"})
    if unknown:
        raise ValidationError(f"unknown key(s) in trajectory JSON: {', '.join(unknown)}")
    times = _number_list(doc, "times")
    congestion = _number_list(doc, "congestion")
    adoption = _number_list(doc, "adoption")

    manifest = doc.get("manifest") or {}
    scenario_name = manifest.get("scenario_name", "") if isinstance(manifest, dict) else ""
    params = None
    if isinstance(manifest, dict) and isinstance(manifest.get("params"), dict):
        p = manifest["params"]
        params = ModelParams(
            k1=p.get("k1", 0.0),
            k2=p.get("k2", 0.0),
            k3=p.get("k3", 0.0),
            k4=p.get("k4", 0.0),
            a_max=p.get("a_max", 100.0),
        )
    integrator = None
    if isinstance(manifest, dict) and isinstance(manifest.get("integrator"), dict):
        g = manifest["integrator"]
        integrator = IntegratorConfig(
            method=g.get("method", "fixed-rk4"),
            step=g.get("step", 0.01),
            rtol=g.get("rtol", 1e-8),
            atol=g.get("atol", 1e-10),
            max_steps=g.get("max_steps", 10_000_000),
        )
    diagnostics = None
    d = doc.get("diagnostics")
    if isinstance(d, dict):
        diagnostics = Diagnostics(
            congestion_went_negative=bool(d.get("congestion_went_negative", False)),
            adoption_went_negative=bool(d.get("adoption_went_negative", False)),
            steps=int(d.get("steps", 0)),
            rejected_steps=int(d.get("rejected_steps", 0)),
        )
    return Trajectory(
        times=np.array(times),
        congestion=np.array(congestion),
        adoption=np.array(adoption),
        scenario_name=scenario_name,
        params=params,
        integrator=integrator,
        diagnostics=diagnostics,
    )


def read_trajectory(source, fmt: str) -> Trajectory:
    """Read a trajectory from a path. ``fmt`` is ``csv`` or ``json``."""
    if fmt not in FORMATS:
        raise ValidationError(f"format must be one of {', '.join(FORMATS)}; got {fmt!r}")
    with open(source, "r", encoding="utf-8") as handle:
        text = handle.read()
    return _parse_csv(text) if fmt == "csv" else _parse_json(text)


def parse_trajectory(text: str, fmt: str) -> Trajectory:
    """Parse trajectory text without touching the filesystem."""
    if fmt not in FORMATS:
        raise ValidationError(f"format must be one of {', '.join(FORMATS)}; got {fmt!r}")
    return _parse_csv(text) if fmt == "csv" else _parse_json(text)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def build_manifest(scenario_doc: dict, output_name: str, content: bytes) -> dict:
    """Run manifest: resolved scenario, artifact version, timestamp, hash."""
    from . import __version__

    return {
        "artifact_version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "scenario": scenario_doc,
        "output": {"file": output_name, "sha256": sha256_hex(content)},
    }


def write_manifest(path, manifest: dict) -> int:
    return write_text_atomic(path, json.dumps(manifest, indent=2, allow_nan=False) + "\n")
