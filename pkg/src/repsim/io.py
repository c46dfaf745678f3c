"""CSV reading and writing.  Comma separated, LF line endings, no quoting."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

from .estimation import ScoredObservation


class DataError(ValueError):
    pass


def fmt(x, full: bool = False) -> str:
    """Number to text: 12 significant digits, or shortest round-trip repr.
    ``None`` and nan become an empty cell."""
    if x is None:
        return ""
    if isinstance(x, (bool,)):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return ""
    if full:
        return repr(x)
    return format(x, ".12g")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], full: bool = False):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v, full) for v in row) + "\n")


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise DataError(f"{path}: file is empty")
    return rows[0], rows[1:]


OBS_BINARY = ["expert_id", "topic_id", "t", "forecast", "outcome", "prior"]
OBS_GAUSSIAN = ["expert_id", "topic_id", "t", "report", "outcome", "prior"]


def write_observations(path: Path, obs: Sequence[ScoredObservation], full: bool = False):
    binary = not obs or obs[0].forecast is not None
    header = OBS_BINARY if binary else OBS_GAUSSIAN
    write_csv(path, header, (
        (o.expert_id, o.topic_id, o.t, o.forecast if binary else o.report, o.outcome, o.prior)
        for o in obs
    ), full)


def read_observations(path: Path) -> tuple[str, list[ScoredObservation]]:
    """Returns ``(mode, observations)`` with mode ``binary`` or ``gaussian``."""
    header, rows = read_csv(path)
    if header == OBS_BINARY:
        mode = "binary"
    elif header == OBS_GAUSSIAN:
        mode = "gaussian"
    else:
        raise DataError(
            f"{path}: header must be {','.join(OBS_BINARY)} or {','.join(OBS_GAUSSIAN)}"
        )
    out = []
    for lineno, row in enumerate(rows, 2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            eid, topic, t, value, outcome, prior = row
            if not eid:
                raise ValueError("empty expert_id")
            v = float(value)
            kw = {"forecast": v} if mode == "binary" else {"report": v}
            out.append(ScoredObservation(
                eid, int(topic), int(t), outcome=float(outcome),
                prior=float(prior) if prior else None, **kw,
            ))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    if not out:
        raise DataError(f"{path}: no observations")
    return mode, out
