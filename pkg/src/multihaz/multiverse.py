"""Possible-world semantics for the interventional hazard.

A :class:`PotentialOutcomeLattice` records, for every subject ``i`` and event
time ``t_j``, whether the subject dies in the ``j``-th possible world: the
world identical to the actual one at baseline in which nobody is dead just
before ``t_j`` and deaths can only happen at ``t_j``. The coupling with the
actual world is:

* before its actual death index ``k_i`` a subject survives every world,
* it dies in world ``k_i``,
* in later worlds it receives a potential outcome (it may die again),
* a subject who never dies in the actual world dies in no world.

Under this coupling the actual-world risk is bracketed by the average and the
cumulative world risk, which :func:`verify_bounds` checks.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import InvariantError, ValidationError, check_arm, check_increasing
from .data import Cohort, build_risk_table
from .estimators import icp_hazard, marginal_nelson_aalen

NO_DEATH = -1


@dataclass(frozen=True, eq=False)
class PotentialOutcomeLattice:
    """Per-subject, per-world death indicators.

    ``death_index`` is 0-based with ``NO_DEATH`` for subjects surviving the
    whole grid; ``deaths[i, j] == 1`` means subject ``i`` dies in world ``j``.
    ``frailty`` is an optional latent class kept only for simulation.
    """

    times: np.ndarray
    ids: np.ndarray
    arm: np.ndarray
    stratum: np.ndarray
    strata: tuple
    death_index: np.ndarray
    deaths: np.ndarray
    frailty: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        m, J = len(self.ids), len(self.times)
        if self.deaths.shape != (m, J):
            raise ValidationError(f"deaths matrix has shape {self.deaths.shape}, expected {(m, J)}")
        for name in ("arm", "stratum", "death_index"):
            if len(getattr(self, name)) != m:
                raise ValidationError(f"{name} must have one entry per subject")
        if not np.isin(self.deaths, (0, 1)).all():
            raise ValidationError("deaths matrix must be binary")
        if not np.isin(self.arm, (0, 1)).all():
            raise ValidationError("arm must be binary")
        k = self.death_index
        if ((k < NO_DEATH) | (k >= J)).any():
            raise ValidationError("actual death index out of range")
        if len(np.unique(self.ids)) != m:
            raise ValidationError("subject ids must be unique")

    @classmethod
    def from_arrays(cls, times, arm, stratum, death_index, deaths, ids=None, strata=None, frailty=None):
        times = check_increasing(times)
        arm = np.asarray(arm, dtype=np.int8)
        deaths = np.asarray(deaths, dtype=np.int8).reshape(len(arm), len(times))
        ids = np.arange(len(arm), dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
        labels = list(stratum)
        if strata is None:
            strata = tuple(sorted(set(labels), key=str))
        index = {s: k for k, s in enumerate(strata)}
        codes = np.array([index[s] for s in labels], dtype=np.int64)
        k = np.array([NO_DEATH if v is None else int(v) for v in death_index], dtype=np.int64)
        return cls(times, ids, arm, codes, tuple(strata), k, deaths, frailty)

    @property
    def m(self) -> int:
        return int(len(self.ids))

    @property
    def J(self) -> int:
        return int(len(self.times))

    def violations(self) -> list[tuple[int, int, str]]:
        """Cells ``(subject id, 1-based world, reason)`` breaking the coupling rules."""
        J = self.J
        k = self.death_index
        cols = np.arange(J)[None, :]
        dead = k[:, None]
        early = (self.deaths == 1) & ((cols < dead) | (dead == NO_DEATH))
        missing = (self.deaths == 0) & (cols == dead)
        out = []
        for i, j in zip(*np.nonzero(early)):
            reason = "death in a world before the actual death" if k[i] != NO_DEATH else "death of a subject who never dies"
            out.append((int(self.ids[i]), int(j) + 1, reason))
        for i, j in zip(*np.nonzero(missing)):
            out.append((int(self.ids[i]), int(j) + 1, "no death in the world of the actual death"))
        return sorted(out)

    def check(self) -> "PotentialOutcomeLattice":
        bad = self.violations()
        if bad:
            i, j, reason = bad[0]
            raise InvariantError(f"lattice invariant violated at subject {i}, world {j}: {reason} ({len(bad)} cell(s) total)")
        return self

    def actual_deaths(self, mask=None) -> np.ndarray:
        """Actual-world death counts per grid time."""
        k = self.death_index if mask is None else self.death_index[mask]
        return np.bincount(k[k != NO_DEATH], minlength=self.J)[: self.J]

    def to_cohort(self) -> Cohort:
        """The uncensored actual world; survivors are followed to the last grid time."""
        dies = self.death_index != NO_DEATH
        time = np.where(dies, self.times[np.where(dies, self.death_index, 0)], self.times[-1])
        labels = [self.strata[c] for c in self.stratum]
        return Cohort.from_arrays(self.ids, self.arm, labels, time, dies.astype(np.int8), strata=self.strata)

    def reordered(self, order) -> "PotentialOutcomeLattice":
        order = np.asarray(order)
        frailty = None if self.frailty is None else self.frailty[order]
        return PotentialOutcomeLattice(
            self.times, self.ids[order], self.arm[order], self.stratum[order], self.strata,
            self.death_index[order], self.deaths[order], frailty,
        )


@dataclass(frozen=True)
class PossibleWorld:
    index: int
    time: float
    death_set: tuple[int, ...]
    deaths: int
    deaths_by_arm: tuple[int, int]
    size: int
    size_by_arm: tuple[int, int]

    @property
    def risk(self) -> float:
        return self.deaths / self.size if self.size else 0.0

    def arm_risk(self, z: int) -> float:
        z = check_arm(z)
        n = self.size_by_arm[z]
        return self.deaths_by_arm[z] / n if n else 0.0


def world(lattice: PotentialOutcomeLattice, j: int) -> PossibleWorld:
    """The ``j``-th possible world (1-based). Only column ``j`` of the lattice is read."""
    if not 1 <= j <= lattice.J:
        raise ValidationError(f"world index {j} out of range 1..{lattice.J}")
    col = lattice.deaths[:, j - 1]
    dead = col == 1
    by_arm = tuple(int((dead & (lattice.arm == z)).sum()) for z in (0, 1))
    sizes = tuple(int((lattice.arm == z).sum()) for z in (0, 1))
    return PossibleWorld(
        j, float(lattice.times[j - 1]), tuple(int(i) for i in np.sort(lattice.ids[dead])),
        int(dead.sum()), by_arm, lattice.m, sizes,
    )


@dataclass(frozen=True)
class GroupSummary:
    """World and actual-world quantities for one arm, or for both arms pooled."""

    size: int
    world_deaths: tuple[int, ...]
    actual_deaths: tuple[int, ...]
    cumulative: float
    average: float
    actual_risk: float
    lower_bound_holds: bool
    upper_bound_holds: bool
    actual_within_world: tuple[bool, ...]
    world_within_prior: tuple[bool, ...]

    @property
    def holds(self) -> bool:
        return (
            self.lower_bound_holds
            and self.upper_bound_holds
            and all(self.actual_within_world)
            and all(self.world_within_prior)
        )


@dataclass(frozen=True)
class MultiverseReport:
    tau: float
    n_worlds: int
    times: tuple[float, ...]
    groups: dict

    @property
    def holds(self) -> bool:
        return all(g.holds for g in self.groups.values())

    def __getitem__(self, key) -> GroupSummary:
        return self.groups[key]

    def to_dict(self) -> dict:
        groups = {}
        for key, g in self.groups.items():
            groups[str(key)] = {
                "size": g.size,
                "cumulative_hazard": g.cumulative,
                "average_hazard": g.average,
                "actual_risk": g.actual_risk,
                "world_deaths": list(g.world_deaths),
                "actual_deaths": list(g.actual_deaths),
                "flags": {
                    "average_le_risk": g.lower_bound_holds,
                    "risk_le_cumulative": g.upper_bound_holds,
                    "actual_le_world": list(g.actual_within_world),
                    "world_le_prior_actual": list(g.world_within_prior),
                },
            }
        return {"tau": self.tau, "n_worlds": self.n_worlds, "times": list(self.times), "holds": self.holds, "groups": groups}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text


def _window(lattice: PotentialOutcomeLattice, tau: float) -> int:
    n = int((lattice.times <= tau).sum())
    if n == 0:
        raise ValidationError(f"tau={tau} precedes the first event time {lattice.times[0]}")
    return n


def _group_summary(lattice: PotentialOutcomeLattice, mask: np.ndarray, n: int) -> GroupSummary:
    size = int(mask.sum())
    world_d = lattice.deaths[mask, :n].sum(axis=0).astype(np.int64)
    actual_d = lattice.actual_deaths(mask)[:n].astype(np.int64)
    total_world, total_actual = int(world_d.sum()), int(actual_d.sum())
    prior = np.cumsum(actual_d)
    # comparisons on integer counts keep equality cases exact
    return GroupSummary(
        size=size,
        world_deaths=tuple(int(v) for v in world_d),
        actual_deaths=tuple(int(v) for v in actual_d),
        cumulative=total_world / size if size else 0.0,
        average=total_world / (size * n) if size else 0.0,
        actual_risk=total_actual / size if size else 0.0,
        lower_bound_holds=total_world <= n * total_actual,
        upper_bound_holds=total_actual <= total_world,
        actual_within_world=tuple(bool(v) for v in actual_d <= world_d),
        world_within_prior=tuple(bool(v) for v in world_d <= prior),
    )


def multiverse_summary(lattice: PotentialOutcomeLattice, tau: float) -> MultiverseReport:
    """Cumulative and average world risk against the actual risk, per arm and pooled."""
    n = _window(lattice, tau)
    groups = {"pooled": _group_summary(lattice, np.ones(lattice.m, dtype=bool), n)}
    for z in (0, 1):
        groups[z] = _group_summary(lattice, lattice.arm == z, n)
    return MultiverseReport(float(tau), n, tuple(float(t) for t in lattice.times[:n]), groups)


@dataclass(frozen=True)
class BoundCheck:
    passed: bool
    violations: tuple[tuple[int, int, str], ...]
    failures: tuple[str, ...]
    reports: tuple[MultiverseReport, ...]


def verify_bounds(lattice: PotentialOutcomeLattice, tau: float | None = None) -> BoundCheck:
    """Check the coupling rules and the risk bounds at ``tau`` (every grid time if omitted)."""
    taus = lattice.times if tau is None else [tau]
    reports = tuple(multiverse_summary(lattice, t) for t in taus)
    failures = []
    for rep in reports:
        for key, g in rep.groups.items():
            if not g.lower_bound_holds:
                failures.append(f"tau={rep.tau} group={key}: average hazard {g.average} exceeds actual risk {g.actual_risk}")
            if not g.upper_bound_holds:
                failures.append(f"tau={rep.tau} group={key}: actual risk {g.actual_risk} exceeds cumulative hazard {g.cumulative}")
            for j, ok in enumerate(g.actual_within_world, 1):
                if not ok:
                    failures.append(f"tau={rep.tau} group={key} world={j}: actual deaths exceed world deaths")
            for j, ok in enumerate(g.world_within_prior, 1):
                if not ok:
                    failures.append(f"tau={rep.tau} group={key} world={j}: world deaths exceed actual deaths up to t_j")
    violations = tuple(lattice.violations())
    return BoundCheck(not violations and not failures, violations, tuple(failures), reports)


@dataclass(frozen=True, eq=False)
class OracleCheck:
    """World risks against estimates from the derived actual-world cohort, per arm."""

    times: np.ndarray
    world_risk: dict
    icp: dict
    marginal: dict
    tolerance: float

    def discrepancy(self, z: int, kind: str = "icp") -> np.ndarray:
        est = self.icp if kind == "icp" else self.marginal
        return np.abs(self.world_risk[z] - est[z])

    @property
    def max_discrepancy(self) -> float:
        return float(max(self.discrepancy(z).max(initial=0.0) for z in (0, 1)))

    @property
    def passed(self) -> bool:
        return self.max_discrepancy < self.tolerance


def standardized_world_risk(lattice: PotentialOutcomeLattice, z: int) -> np.ndarray:
    """World risk of arm ``z`` per stratum, re-weighted to the whole-sample stratum mix.

    With one stratum this is simply the arm's world risk ``d_j(z) / m_z``.
    """
    z = check_arm(z)
    S = len(lattice.strata)
    weights = np.bincount(lattice.stratum, minlength=S) / lattice.m
    in_arm = lattice.arm == z
    risk = np.zeros(lattice.J)
    for x in range(S):
        cell = in_arm & (lattice.stratum == x)
        n = int(cell.sum())
        if n:
            risk += weights[x] * lattice.deaths[cell].sum(axis=0) / n
    return risk


def estimator_oracle_check(lattice: PotentialOutcomeLattice, tolerance: float) -> OracleCheck:
    """Compare each world's risk with the iCP increment estimated from the actual world."""
    table = build_risk_table(lattice.to_cohort())
    world_risk, icp, marginal = {}, {}, {}
    for z in (0, 1):
        world_risk[z] = standardized_world_risk(lattice, z)
        icp[z] = icp_hazard(table, z).at(lattice.times)
        marginal[z] = marginal_nelson_aalen(table, z).at(lattice.times)
    return OracleCheck(lattice.times, world_risk, icp, marginal, float(tolerance))


def write_lattice(lattice: PotentialOutcomeLattice, path) -> None:
    """CSV with a leading ``# times=`` comment, then id, arm, stratum, actual_death_index, w1..wJ."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("# times=" + ",".join(repr(float(t)) for t in lattice.times) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "arm", "stratum", "actual_death_index"] + [f"w{j}" for j in range(1, lattice.J + 1)])
        for i in range(lattice.m):
            k = lattice.death_index[i]
            writer.writerow(
                [int(lattice.ids[i]), int(lattice.arm[i]), lattice.strata[lattice.stratum[i]], "" if k == NO_DEATH else int(k) + 1]
                + lattice.deaths[i].tolist()
            )


def read_lattice(path) -> PotentialOutcomeLattice:
    """Parse a lattice CSV. Without a ``# times=`` line the grid defaults to 1..J."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    times = None
    if lines and lines[0].startswith("#"):
        head = lines.pop(0).lstrip("#").strip()
        if head.startswith("times="):
            try:
                times = [float(v) for v in head[len("times="):].split(",")]
            except ValueError:
                raise ValidationError("malformed '# times=' line") from None
    rows = list(csv.reader(lines))
    if not rows:
        raise ValidationError("lattice file has no header")
    header = [h.strip() for h in rows[0]]
    if header[:4] != ["id", "arm", "stratum", "actual_death_index"]:
        raise ValidationError("lattice header must start with id, arm, stratum, actual_death_index")
    world_cols = header[4:]
    J = len(world_cols)
    if world_cols != [f"w{j}" for j in range(1, J + 1)] or J == 0:
        raise ValidationError("lattice world columns must be w1..wJ")
    if times is None:
        times = list(range(1, J + 1))
    if len(times) != J:
        raise ValidationError(f"times line lists {len(times)} times but file has {J} worlds")

    ids, arm, stratum, k, deaths = [], [], [], [], []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValidationError(f"lattice row {n}: expected {len(header)} fields, got {len(row)}")
        try:
            ids.append(int(row[0]))
            arm.append(int(row[1]))
            stratum.append(row[2].strip())
            k.append(None if row[3].strip() == "" else int(row[3]) - 1)
            deaths.append([int(v) for v in row[4:]])
        except ValueError as exc:
            raise ValidationError(f"lattice row {n}: {exc}") from None
    if not ids:
        raise ValidationError("lattice file has no subjects")
    return PotentialOutcomeLattice.from_arrays(times, arm, stratum, k, deaths, ids=ids)
