"""Run logs: JSON Lines records per control tick, channel access, CSV.

One record per logged tick:

    {"t": ..., "phase": ..., "arms": {role: {"pose": [x, y, z, yaw],
     "twist": [6], "wrench_S": [6], "command": [6]}},
     "nmpc": {role: {...}} (present during optimizer-driven phases),
     "contacts": {"count": n, "max_force_n": f}}

Channels are addressed as dotted names like `yielding.pose.y` or
`driving.wrench_S.fy`; `t` and `phase` are always available.  Writing is
plain json.dumps with Python float repr, so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import json
from typing import Any, Dict, Iterable, List, Tuple

__all__ = [
    "ChannelError",
    "write_runlog",
    "read_runlog",
    "available_channels",
    "extract_channel",
    "export_csv",
    "phase_transitions",
]

_POSE_AXES = {"x": 0, "y": 1, "z": 2, "yaw": 3}
_TWIST_AXES = {"vx": 0, "vy": 1, "vz": 2, "wx": 3, "wy": 4, "wz": 5}
_WRENCH_AXES = {"fx": 0, "fy": 1, "fz": 2, "mx": 3, "my": 4, "mz": 5}
_FIELD_AXES = {
    "pose": _POSE_AXES,
    "twist": _TWIST_AXES,
    "wrench_S": _WRENCH_AXES,
    "command": _TWIST_AXES,
}


class ChannelError(KeyError):
    """Unknown channel name; the message lists what is available."""


def write_runlog(records: Iterable[Dict[str, Any]], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")))
            fh.write("\n")


def read_runlog(path) -> List[Dict[str, Any]]:
    records = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: bad JSON record: {exc}") from exc
    return records


def available_channels(records: List[Dict[str, Any]]) -> List[str]:
    names = ["t", "phase"]
    roles = sorted(records[0].get("arms", {})) if records else []
    for role in roles:
        for fname, axes in _FIELD_AXES.items():
            names.extend(f"{role}.{fname}.{axis}" for axis in axes)
    return names


def extract_channel(records: List[Dict[str, Any]], channel: str) -> List[Any]:
    """Channel values, one per record, by dotted name."""
    if channel == "t":
        return [rec["t"] for rec in records]
    if channel == "phase":
        return [rec["phase"] for rec in records]
    parts = channel.split(".")
    if len(parts) == 3:
        role, fname, axis = parts
        axes = _FIELD_AXES.get(fname)
        if (
            axes is not None
            and axis in axes
            and records
            and role in records[0].get("arms", {})
        ):
            idx = axes[axis]
            return [rec["arms"][role][fname][idx] for rec in records]
    raise ChannelError(
        f"unknown channel '{channel}'; available: {', '.join(available_channels(records))}"
    )


def export_csv(records: List[Dict[str, Any]], channels: List[str], path) -> None:
    """Write (t, channel...) rows for the requested channels."""
    if not records:
        raise ValueError("run log is empty")
    columns = [extract_channel(records, "t")]
    header = ["t"]
    for ch in channels:
        if ch == "t":
            continue
        columns.append(extract_channel(records, ch))
        header.append(ch)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(zip(*columns))


def phase_transitions(records: List[Dict[str, Any]]) -> List[Tuple[str, float]]:
    """(phase, first logged t) for every phase change, in order."""
    out: List[Tuple[str, float]] = []
    last = None
    for rec in records:
        if rec["phase"] != last:
            out.append((rec["phase"], rec["t"]))
            last = rec["phase"]
    return out
