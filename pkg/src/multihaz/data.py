"""Observed cohorts, risk sets and CSV ingestion.

A :class:`Cohort` holds right-censored survival data: one row per subject with
treatment arm, a categorical stratum, follow-up time and an event indicator.
:func:`build_risk_table` reduces it to event and at-risk counts per
``(event time, arm, stratum)`` cell, which is all the hazard estimators need.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._validation import ValidationError, check_binary_array

COLUMNS = ("id", "arm", "stratum", "time", "event")


class CohortFormatError(ValidationError):
    """A cohort file could not be parsed. ``line`` is 1-based (header is line 1)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class SubjectRecord:
    id: int
    arm: int
    stratum: object
    followup_time: float
    event: int


def _sorted_labels(labels: Iterable) -> tuple:
    labels = set(labels)
    try:
        return tuple(sorted(labels))
    except TypeError:
        return tuple(sorted(labels, key=str))


@dataclass(frozen=True, eq=False)
class Cohort:
    """Column-oriented cohort. Build with :meth:`from_arrays` or :meth:`from_records`."""

    ids: np.ndarray
    arm: np.ndarray
    stratum: np.ndarray  # integer codes into ``strata``
    time: np.ndarray
    event: np.ndarray
    strata: tuple
    grid: np.ndarray

    @classmethod
    def from_arrays(cls, ids, arm, stratum, time, event, strata: Sequence | None = None) -> "Cohort":
        ids = np.asarray(ids)
        n = ids.shape[0] if ids.ndim == 1 else -1
        if n < 0:
            raise ValidationError("ids must be one-dimensional")
        arrays = {"arm": arm, "stratum": stratum, "time": time, "event": event}
        for name, values in arrays.items():
            if len(values) != n:
                raise ValidationError(f"{name} has length {len(values)}, expected {n}")
        if n and not np.issubdtype(ids.dtype, np.integer):
            raise ValidationError("ids must be integers")
        ids = ids.astype(np.int64)
        if (ids < 0).any():
            raise ValidationError(f"ids must be non-negative, found {ids[ids < 0][0]}")
        uniq, counts = np.unique(ids, return_counts=True)
        if (counts > 1).any():
            raise ValidationError(f"duplicate id {uniq[counts > 1][0]}")
        arm = check_binary_array(arm, "arm")
        event = check_binary_array(event, "event")
        time = np.asarray(time, dtype=float)
        if n and not (time > 0).all():
            raise ValidationError(f"followup time must be positive, found {time[~(time > 0)][0]}")

        labels = np.asarray(list(stratum), dtype=object)
        if strata is None:
            strata = _sorted_labels(labels.tolist())
        else:
            strata = tuple(strata)
            if len(set(strata)) != len(strata):
                raise ValidationError("declared strata contain duplicates")
        index = {label: k for k, label in enumerate(strata)}
        try:
            codes = np.fromiter((index[label] for label in labels), dtype=np.int64, count=n)
        except KeyError as exc:
            raise ValidationError(f"stratum {exc.args[0]!r} not among declared strata {strata}") from None

        grid = np.unique(time[event == 1])
        for a in (ids, arm, codes, time, event, grid):
            a.setflags(write=False)
        return cls(ids, arm, codes, time, event, strata, grid)

    @classmethod
    def from_records(cls, records: Iterable[SubjectRecord], strata: Sequence | None = None) -> "Cohort":
        records = list(records)
        return cls.from_arrays(
            [r.id for r in records],
            [r.arm for r in records],
            [r.stratum for r in records],
            [r.followup_time for r in records],
            [r.event for r in records],
            strata=strata,
        )

    @property
    def m(self) -> int:
        return int(self.ids.shape[0])

    @property
    def J(self) -> int:
        return int(self.grid.shape[0])

    @property
    def stratum_labels(self) -> np.ndarray:
        return np.asarray(self.strata, dtype=object)[self.stratum]

    @property
    def records(self) -> tuple[SubjectRecord, ...]:
        labels = self.stratum_labels
        return tuple(
            SubjectRecord(int(i), int(z), x, float(t), int(e))
            for i, z, x, t, e in zip(self.ids, self.arm, labels, self.time, self.event)
        )

    def __len__(self) -> int:
        return self.m


@dataclass(frozen=True, eq=False)
class RiskTable:
    """Event and at-risk counts, indexed ``[j, z, x]`` over grid time, arm and stratum."""

    times: np.ndarray
    strata: tuple
    events: np.ndarray
    at_risk: np.ndarray
    stratum_sizes: np.ndarray

    @property
    def m(self) -> int:
        return int(self.stratum_sizes.sum())

    @property
    def J(self) -> int:
        return int(self.times.shape[0])

    def stratum_index(self, x) -> int:
        try:
            return self.strata.index(x)
        except ValueError:
            raise ValidationError(f"unknown stratum {x!r}; known strata are {self.strata}") from None

    def d(self, j: int, z: int, x) -> int:
        """Events at the ``j``-th grid time (0-based) in arm ``z``, stratum ``x``."""
        return int(self.events[j, z, self.stratum_index(x)])

    def r(self, j: int, z: int, x) -> int:
        return int(self.at_risk[j, z, self.stratum_index(x)])

    def m_x(self, x) -> int:
        return int(self.stratum_sizes[self.stratum_index(x)])


def build_risk_table(cohort: Cohort) -> RiskTable:
    """Count events ``d`` and subjects at risk ``r`` in every (time, arm, stratum) cell.

    A subject is at risk at ``t`` when its follow-up time is ``>= t``, so a
    censoring tied with an event time still counts in that risk set.
    """
    grid = cohort.grid
    J, S = grid.shape[0], len(cohort.strata)
    events = np.zeros((J, 2, S), dtype=np.int64)
    at_risk = np.zeros((J, 2, S), dtype=np.int64)

    # index of the first grid time strictly greater than the follow-up time:
    # the subject is at risk at grid positions [0, pos)
    pos = np.searchsorted(grid, cohort.time, side="right")
    exits = np.zeros((J + 1, 2, S), dtype=np.int64)
    np.add.at(exits, (pos, cohort.arm, cohort.stratum), 1)
    total = exits.sum(axis=0)
    at_risk[:] = total[None] - np.cumsum(exits, axis=0)[:J]

    ev = cohort.event == 1
    np.add.at(events, (pos[ev] - 1, cohort.arm[ev], cohort.stratum[ev]), 1)

    sizes = np.bincount(cohort.stratum, minlength=S).astype(np.int64)
    for a in (events, at_risk, sizes):
        a.setflags(write=False)
    return RiskTable(grid, cohort.strata, events, at_risk, sizes)


def _parse_binary(raw: str, column: str, line: int) -> int:
    raw = raw.strip()
    if raw not in ("0", "1"):
        raise CohortFormatError(f"{column} must be 0 or 1, got {raw!r}", line)
    return int(raw)


def load_cohort(path, schema: Mapping[str, str] | None = None) -> Cohort:
    """Read a cohort CSV.

    ``schema`` maps the canonical column names (``id, arm, stratum, time,
    event``) to the headers actually used in the file.
    """
    schema = {name: name for name in COLUMNS} | dict(schema or {})
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CohortFormatError("empty file: header row required") from None
        missing = [schema[c] for c in COLUMNS if schema[c] not in header]
        if missing:
            raise CohortFormatError(f"missing column(s) {', '.join(missing)}", 1)
        col = {c: header.index(schema[c]) for c in COLUMNS}

        ids, arms, strata, times, events = [], [], [], [], []
        seen: dict[int, int] = {}
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise CohortFormatError(f"expected {len(header)} fields, got {len(row)}", line)
            try:
                sid = int(row[col["id"]])
            except ValueError:
                raise CohortFormatError(f"id must be an integer, got {row[col['id']]!r}", line) from None
            if sid < 0:
                raise CohortFormatError(f"id must be non-negative, got {sid}", line)
            if sid in seen:
                raise CohortFormatError(f"duplicate id {sid} (first seen on line {seen[sid]})", line)
            seen[sid] = line
            arm = _parse_binary(row[col["arm"]], "arm", line)
            event = _parse_binary(row[col["event"]], "event", line)
            try:
                t = float(row[col["time"]])
            except ValueError:
                raise CohortFormatError(f"time must be a number, got {row[col['time']]!r}", line) from None
            if not t > 0 or not np.isfinite(t):
                raise CohortFormatError(f"time must be positive and finite, got {t}", line)
            label = row[col["stratum"]].strip()
            if not label:
                raise CohortFormatError("stratum is empty", line)
            ids.append(sid)
            arms.append(arm)
            strata.append(label)
            times.append(t)
            events.append(event)

    if not ids:
        raise CohortFormatError("empty cohort: no data rows")
    if not any(events):
        raise CohortFormatError("empty event grid: no record has event=1")
    return Cohort.from_arrays(np.array(ids, dtype=np.int64), arms, strata, times, events)


def write_cohort(cohort: Cohort, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for rec in cohort.records:
            writer.writerow([rec.id, rec.arm, rec.stratum, repr(rec.followup_time), rec.event])
