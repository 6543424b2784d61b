"""Discrete-time hazard estimators on a :class:`~multihaz.data.RiskTable`.

Four increment kinds are available for an arm ``z``:

* ``marginal`` -- pooled Nelson-Aalen increment ignoring strata.
* ``cct`` -- standardized-population hazard: numerator and denominator are each
  stratum-weighted by stratum size before taking the ratio.
* ``icp`` -- stratum-size-weighted average of the per-stratum hazards.
* ``conditional`` -- the hazard within one stratum.

``cct`` and ``icp`` agree within each stratum but differ once strata are pooled:
``icp`` is a weighted mean of conditional hazards (collapsible), ``cct`` is not.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import ValidationError, check_arm
from .data import Cohort, RiskTable, build_risk_table

KINDS = ("marginal", "cct", "icp", "conditional")


@dataclass(frozen=True)
class EstimationWarning:
    """A cell where the hazard is not identified (empty risk set)."""

    time: float
    arm: int
    stratum: object
    message: str = "empty risk set"

    def to_dict(self) -> dict:
        return {"time": self.time, "arm": self.arm, "stratum": self.stratum, "message": self.message}


@dataclass(frozen=True, eq=False)
class HazardCurve:
    kind: str
    arm: int
    times: np.ndarray
    increments: np.ndarray
    warnings: tuple[EstimationWarning, ...] = ()
    stratum: object = None

    def __post_init__(self):
        if self.times.shape != self.increments.shape:
            raise ValidationError("times and increments must have equal length")
        if ((self.increments < 0) | (self.increments > 1)).any():
            raise ValidationError("hazard increments must lie in [0, 1]")

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.increments)

    def at(self, times) -> np.ndarray:
        """Increments at arbitrary times; zero away from the grid."""
        lookup = dict(zip(self.times.tolist(), self.increments.tolist()))
        return np.array([lookup.get(float(t), 0.0) for t in np.atleast_1d(times)])

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "arm": self.arm,
            "times": self.times.tolist(),
            "increments": self.increments.tolist(),
            "warnings": [w.to_dict() for w in self.warnings],
        }
        if self.stratum is not None:
            out["stratum"] = self.stratum
        return out

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["time", "increment", "cumulative"])
            for t, inc, cum in zip(self.times, self.increments, self.cumulative):
                writer.writerow([repr(float(t)), repr(float(inc)), repr(float(cum))])


@dataclass(frozen=True)
class SummaryMeasures:
    cumulative: float
    average: float
    horizon: float
    n_times: int


@dataclass(frozen=True, eq=False)
class CollapsibilityGap:
    times: np.ndarray
    cct: np.ndarray
    icp: np.ndarray


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def _empty_cell_warnings(table: RiskTable, z: int, strata_idx=None) -> tuple[EstimationWarning, ...]:
    cells = table.at_risk[:, z, :]
    idx = range(len(table.strata)) if strata_idx is None else [strata_idx]
    return tuple(
        EstimationWarning(float(table.times[j]), z, table.strata[x])
        for j in range(table.J)
        for x in idx
        if cells[j, x] == 0
    )


def marginal_nelson_aalen(table: RiskTable, z: int) -> HazardCurve:
    z = check_arm(z)
    inc = _ratio(table.events[:, z, :].sum(axis=1), table.at_risk[:, z, :].sum(axis=1))
    return HazardCurve("marginal", z, table.times, inc)


def cct_hazard(table: RiskTable, z: int) -> HazardCurve:
    z = check_arm(z)
    w = table.stratum_sizes
    num = (table.events[:, z, :] * w).sum(axis=1)
    den = (table.at_risk[:, z, :] * w).sum(axis=1)
    return HazardCurve("cct", z, table.times, _ratio(num, den))


def _conditional_matrix(table: RiskTable, z: int) -> np.ndarray:
    return _ratio(table.events[:, z, :], table.at_risk[:, z, :])


def icp_hazard(table: RiskTable, z: int) -> HazardCurve:
    """Stratum-weighted average of conditional hazards.

    Cells with nobody at risk contribute zero but keep their weight; they are
    listed in ``warnings``.
    """
    z = check_arm(z)
    weights = table.stratum_sizes / table.m if table.m else table.stratum_sizes.astype(float)
    inc = _conditional_matrix(table, z) @ weights
    # guard against rounding drifting a sum of probabilities above one
    inc = np.clip(inc, 0.0, 1.0)
    return HazardCurve("icp", z, table.times, inc, _empty_cell_warnings(table, z))


def conditional_hazard(table: RiskTable, z: int, x) -> HazardCurve:
    z = check_arm(z)
    k = table.stratum_index(x)
    inc = _conditional_matrix(table, z)[:, k]
    return HazardCurve("conditional", z, table.times, inc, _empty_cell_warnings(table, z, k), stratum=x)


def hazard_curve(table: RiskTable, kind: str, z: int, stratum=None) -> HazardCurve:
    if kind == "marginal":
        return marginal_nelson_aalen(table, z)
    if kind == "cct":
        return cct_hazard(table, z)
    if kind == "icp":
        return icp_hazard(table, z)
    if kind == "conditional":
        if stratum is None:
            raise ValidationError("conditional hazards need a stratum")
        return conditional_hazard(table, z, stratum)
    raise ValidationError(f"unknown hazard kind {kind!r}; expected one of {KINDS}")


def summarize(curve: HazardCurve, tau: float) -> SummaryMeasures:
    """Cumulative and average hazard over grid times ``<= tau``."""
    mask = curve.times <= tau
    n = int(mask.sum())
    if n == 0:
        first = curve.times[0] if len(curve.times) else None
        raise ValidationError(f"tau={tau} precedes the first event time {first}; no event times in window")
    cumulative = float(curve.increments[mask].sum())
    return SummaryMeasures(cumulative, cumulative / n, float(tau), n)


def actual_risk(cohort: Cohort, z: int, tau: float) -> float:
    """Proportion of arm ``z`` observed to die by ``tau``.

    Only defined when nobody in the arm is censored before ``tau``.
    """
    z = check_arm(z)
    in_arm = cohort.arm == z
    n = int(in_arm.sum())
    if n == 0:
        raise ValidationError(f"arm {z} has no subjects")
    censored_early = in_arm & (cohort.event == 0) & (cohort.time < tau)
    if censored_early.any():
        raise ValidationError("risk undefined under censoring; use simulated truth")
    deaths = int((in_arm & (cohort.event == 1) & (cohort.time <= tau)).sum())
    return deaths / n


def collapsibility_gap(table: RiskTable, z: int) -> CollapsibilityGap:
    """Distance of the cCT and iCP increments from the weighted mean of conditional hazards."""
    z = check_arm(z)
    if len(table.strata) < 2:
        raise ValidationError("collapsibility gap needs at least two strata")
    weighted = _conditional_matrix(table, z) @ (table.stratum_sizes / table.m)
    return CollapsibilityGap(
        table.times,
        cct_hazard(table, z).increments - weighted,
        icp_hazard(table, z).increments - weighted,
    )


def _as_cohort(X, y) -> Cohort:
    if isinstance(X, Cohort):
        return X
    if y is None:
        raise ValidationError("y with columns (time, event) is required unless X is a Cohort")
    if hasattr(X, "columns"):
        arm = np.asarray(X["arm"])
        stratum = np.asarray(X["stratum"]) if "stratum" in X.columns else np.zeros(len(X), dtype=int)
    else:
        X = np.asarray(X, dtype=object)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] not in (1, 2):
            raise ValidationError("X must have columns (arm[, stratum])")
        arm = X[:, 0]
        stratum = X[:, 1] if X.shape[1] == 2 else np.zeros(len(X), dtype=int)
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[1] != 2 or y.shape[0] != len(arm):
        raise ValidationError("y must have shape (n_samples, 2) holding (time, event)")
    try:
        arm = arm.astype(np.int64)
    except (TypeError, ValueError):
        raise ValidationError("arm column must be 0/1") from None
    return Cohort.from_arrays(np.arange(len(arm)), arm, stratum.tolist(), y[:, 0], y[:, 1].astype(np.int64))


class CounterfactualHazard(BaseEstimator):
    """Estimator wrapper around the hazard increments for both arms.

    Parameters
    ----------
    kind : {"icp", "cct", "marginal", "conditional"}
    stratum : label, optional
        Required when ``kind="conditional"``.

    Attributes
    ----------
    risk_table_ : RiskTable
    curves_ : dict mapping arm to HazardCurve
    times_ : ndarray of event times
    warnings_ : tuple of EstimationWarning over both arms
    """

    def __init__(self, kind: str = "icp", stratum=None):
        self.kind = kind
        self.stratum = stratum

    def fit(self, X, y=None):
        """Fit from a :class:`Cohort`, or from ``X=(arm, stratum)`` and ``y=(time, event)``."""
        if self.kind not in KINDS:
            raise ValidationError(f"unknown hazard kind {self.kind!r}; expected one of {KINDS}")
        cohort = _as_cohort(X, y)
        table = build_risk_table(cohort)
        self.risk_table_ = table
        self.times_ = table.times
        self.curves_ = {z: hazard_curve(table, self.kind, z, self.stratum) for z in (0, 1)}
        self.warnings_ = self.curves_[0].warnings + self.curves_[1].warnings
        return self

    def predict(self, X) -> np.ndarray:
        """Cumulative hazard for each query row ``(arm, tau)``."""
        check_is_fitted(self, "curves_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2:
            raise ValidationError("X must have columns (arm, tau)")
        out = np.empty(X.shape[0])
        for row, (z, tau) in enumerate(X):
            if z not in (0, 1):
                raise ValidationError(f"arm must be 0 or 1, got {z!r}")
            curve = self.curves_[int(z)]
            out[row] = curve.increments[curve.times <= tau].sum()
        return out

    def summarize(self, z: int, tau: float) -> SummaryMeasures:
        check_is_fitted(self, "curves_")
        return summarize(self.curves_[check_arm(z)], tau)
