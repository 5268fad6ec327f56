"""
Plain-text trial container and estimated-trajectory tables.

A trial file is line oriented::

    ckfdist-trial v1
    [meta]
    {"preset": "walk", ...}
    [dims]
    pelvis_width 0.2295
    ...
    [truth_pos] rows=3000 cols=mp_x,mp_y,...
    0 0 0.9 ...

Every per-frame section lists its row count and column names and holds one
whitespace separated row per frame. Floats are written with 17 significant
digits so a save/load cycle reproduces every value bit for bit.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .body import BodyDimensions
from .errors import SchemaError, VersionMismatch
from .metrics import ANGLE_NAMES
from .simulate import TrialData

MAGIC = "ckfdist-trial"
VERSION = "v1"

_POINTS = ("mp", "la", "ra")
_SEGMENTS = ("pelvis", "lshank", "rshank")
_XYZ = [f"{p}_{a}" for p in _POINTS for a in "xyz"]
_QUAT = [f"{s}_{c}" for s in _SEGMENTS for c in "wxyz"]

# section name -> (TrialData attribute, column names, required)
_COLUMNS = {
    "time": ("time", ["t"], True),
    "truth_pos": ("truth_pos", _XYZ, True),
    "truth_quat": ("truth_quat", _QUAT, True),
    "truth_angles": ("truth_angles", list(ANGLE_NAMES), True),
    "contacts": ("contacts", ["left", "right"], True),
    "truth_accel": ("truth_accel", _XYZ, True),
    "accel": ("accel", _XYZ, False),
    "quat": ("quat", _QUAT, False),
    "dist": ("dist", ["left", "right"], False),
}
_STREAMS = ("accel", "quat", "dist")


def _fmt(v: float) -> str:
    return "%.17g" % v


def save_trial(trial: TrialData, path: str | Path) -> None:
    """Write `trial` to `path` in the v1 text format."""
    lines = [f"{MAGIC} {VERSION}", "[meta]",
             json.dumps({**trial.meta, "sample_rate": trial.sample_rate, "floor_z": trial.floor_z},
                        sort_keys=True),
             "[dims]"]
    lines += [f"{k} {_fmt(v)}" for k, v in trial.dims.as_dict().items()]
    for name, (attr, cols, _) in _COLUMNS.items():
        data = getattr(trial, attr)
        if data is None:
            continue
        data = np.asarray(data).reshape(len(trial), -1)
        lines.append(f"[{name}] rows={len(data)} cols={','.join(cols)}")
        if data.dtype == bool:
            lines += [" ".join("1" if v else "0" for v in row) for row in data]
        else:
            lines += [" ".join(_fmt(v) for v in row) for row in data]
    Path(path).write_text("\n".join(lines) + "\n")


def load_trial(path: str | Path) -> TrialData:
    """
    Read a trial written by :func:`save_trial`.

    Raises
    ------
    VersionMismatch
        If the header names another format version.
    SchemaError
        For a missing section, a wrong column layout or an unparsable value;
        the message carries the line number.
    """
    text = Path(path).read_text().splitlines()
    if not text:
        raise SchemaError(f"{path}: empty file")
    head = text[0].split()
    if len(head) != 2 or head[0] != MAGIC:
        raise SchemaError(f"{path}:1: not a ckfdist trial file")
    if head[1] != VERSION:
        raise VersionMismatch(f"{path}:1: format {head[1]!r}, this reader handles {VERSION!r}")

    sections = _split_sections(text, path)
    for name in ("meta", "dims"):
        if name not in sections:
            raise SchemaError(f"{path}: missing section [{name}]")

    _, meta_lines, meta_line0 = sections["meta"]
    try:
        meta = json.loads("\n".join(meta_lines))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{meta_line0 + exc.lineno}: bad [meta] JSON: {exc.msg}") from None

    dims = _parse_dims(sections["dims"], path)
    arrays = {}
    for name, (attr, cols, required) in _COLUMNS.items():
        if name not in sections:
            if required:
                raise SchemaError(f"{path}: missing section [{name}]")
            continue
        arrays[attr] = _parse_table(name, cols, sections[name], path)
    present = [s for s in _STREAMS if s in arrays]
    if present and len(present) != len(_STREAMS):
        missing = next(s for s in _STREAMS if s not in arrays)
        raise SchemaError(f"{path}: missing section [{missing}]")
    n = len(arrays["time"])
    for attr, arr in arrays.items():
        if len(arr) != n:
            raise SchemaError(f"{path}: section [{attr}] has {len(arr)} rows, [time] has {n}")

    sample_rate = float(meta.pop("sample_rate", 0.0))
    floor_z = float(meta.pop("floor_z", 0.0))
    if not sample_rate > 0:
        raise SchemaError(f"{path}: [meta] lacks a positive sample_rate")
    return TrialData(
        sample_rate=sample_rate, dims=dims, time=arrays["time"][:, 0],
        truth_pos=arrays["truth_pos"], truth_quat=arrays["truth_quat"],
        truth_angles=arrays["truth_angles"], contacts=arrays["contacts"].astype(bool),
        truth_accel=arrays["truth_accel"], accel=arrays.get("accel"), quat=arrays.get("quat"),
        dist=arrays.get("dist"), floor_z=floor_z, meta=meta)


def _split_sections(lines: list[str], path) -> dict[str, tuple[str, list[str], int]]:
    """Section name -> (header attributes, body lines, line number of the header)."""
    sections: dict[str, tuple[str, list[str], int]] = {}
    current = None
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("["):
            end = line.find("]")
            if end < 0:
                raise SchemaError(f"{path}:{lineno}: malformed section header")
            current = line[1:end]
            if current in sections:
                raise SchemaError(f"{path}:{lineno}: duplicate section [{current}]")
            sections[current] = (line[end + 1:].strip(), [], lineno)
        elif line.strip():
            if current is None:
                raise SchemaError(f"{path}:{lineno}: data before the first section")
            sections[current][1].append(line)
    return sections


def _parse_dims(section, path) -> BodyDimensions:
    _, body, line0 = section
    values = {}
    for i, line in enumerate(body, start=line0 + 1):
        parts = line.split()
        try:
            values[parts[0]] = float(parts[1])
        except (IndexError, ValueError):
            raise SchemaError(f"{path}:{i}: expected 'name value' in [dims]") from None
    try:
        return BodyDimensions(**values)
    except TypeError as exc:
        raise SchemaError(f"{path}:{line0}: bad [dims] fields: {exc}") from None


def _parse_table(name: str, cols: list[str], section, path) -> NDArray:
    attrs, body, line0 = section
    fields = dict(item.split("=", 1) for item in attrs.split() if "=" in item)
    if fields.get("cols", "").split(",") != cols:
        raise SchemaError(f"{path}:{line0}: [{name}] columns must be {','.join(cols)}")
    try:
        rows = int(fields["rows"])
    except (KeyError, ValueError):
        raise SchemaError(f"{path}:{line0}: [{name}] lacks a valid rows= count") from None
    if len(body) != rows:
        raise SchemaError(f"{path}:{line0}: [{name}] declares {rows} rows, found {len(body)}")
    out = np.empty((rows, len(cols)))
    for i, line in enumerate(body):
        parts = line.split()
        if len(parts) != len(cols):
            raise SchemaError(f"{path}:{line0 + 1 + i}: [{name}] expects {len(cols)} values, got {len(parts)}")
        try:
            out[i] = [float(v) for v in parts]
        except ValueError:
            raise SchemaError(f"{path}:{line0 + 1 + i}: [{name}] has a non-numeric value") from None
    return out


# --------------------------------------------------------------------------- trajectories

TRAJECTORY_COLUMNS = ("t", *_XYZ, *(f"{n}_deg" for n in ANGLE_NAMES))


def save_trajectory(path: str | Path, time: NDArray, positions: NDArray, angles: NDArray) -> None:
    """Positions (N, 9) in m and joint angles (N, 8) in rad as a CSV, angles in degrees."""
    data = np.column_stack([time, positions, np.rad2deg(angles)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        w.writerows([[_fmt(v) for v in row] for row in data])


def load_trajectory(path: str | Path) -> tuple[NDArray, NDArray, NDArray]:
    """Inverse of :func:`save_trajectory`; angles are returned in radians."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRAJECTORY_COLUMNS:
        raise SchemaError(f"{path}:1: trajectory header must be {','.join(TRAJECTORY_COLUMNS)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(TRAJECTORY_COLUMNS))
    except ValueError:
        raise SchemaError(f"{path}: trajectory holds a non-numeric or short row") from None
    return data[:, 0], data[:, 1:10], np.deg2rad(data[:, 10:])
