"""Simulated ground truth: potential-outcome lattices and the cohorts observed from them.

Every random quantity is drawn from a stream keyed by ``(seed, purpose)`` and
indexed by ``(subject, time)``: element ``(i, j)`` of a purpose stream is the
``i * J + j``-th output of a counter-based Philox generator, so any single draw
can be reproduced on its own (see :func:`keyed_uniform`) and the output does
not depend on evaluation order.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from ._validation import ValidationError, check_increasing, check_probability, check_probability_array
from .data import Cohort
from .multiverse import NO_DEATH, PotentialOutcomeLattice

PURPOSES = {"stratum": 0, "frailty": 1, "assignment": 2, "event": 3, "re-death": 4, "censor": 5}


class ConfigError(ValidationError):
    pass


@dataclass(frozen=True)
class Frailty:
    """Latent binary class: a ``prevalence`` share of subjects has hazards scaled by ``multiplier``."""

    prevalence: float
    multiplier: float


@dataclass(frozen=True)
class DGPConfig:
    """Data-generating process.

    ``hazards[x][z][j]`` is the discrete hazard at ``times[j]`` for arm ``z`` in
    stratum ``strata[x]``. ``treatment_prob`` is a single probability of arm 1
    for randomized assignment, or one probability per stratum for confounded
    assignment. ``censoring[j]`` is the chance of dropping out just before
    ``times[j]``.
    """

    m: int
    times: tuple
    hazards: tuple
    strata: tuple = ("A",)
    strata_probs: tuple = (1.0,)
    assignment: str = "randomized"
    treatment_prob: float | tuple = 0.5
    frailty: Frailty | None = None
    censoring: tuple | None = None
    seed: int = 0

    @property
    def J(self) -> int:
        return len(self.times)

    def hazard_array(self) -> np.ndarray:
        return np.asarray(self.hazards, dtype=float)

    def treatment_probs(self) -> np.ndarray:
        if self.assignment == "randomized":
            return np.full(len(self.strata), float(self.treatment_prob))
        return np.asarray(self.treatment_prob, dtype=float)

    def validate(self) -> "DGPConfig":
        if isinstance(self.m, bool) or not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise ConfigError(f"m must be a positive integer, got {self.m!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        try:
            times = check_increasing(self.times, "times")
        except (ValidationError, ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        if times.size == 0 or not (times > 0).all():
            raise ConfigError("times must be non-empty and positive")
        S, J = len(self.strata), len(times)
        if len(set(self.strata)) != S or S == 0:
            raise ConfigError("strata must be non-empty and distinct")
        try:
            probs = check_probability_array(self.strata_probs, "strata_probs")
            h = check_probability_array(self.hazards, "hazards")
        except ValidationError as exc:
            raise ConfigError(str(exc)) from None
        if probs.shape != (S,) or abs(probs.sum() - 1.0) > 1e-9:
            raise ConfigError(f"strata_probs must have {S} entries summing to 1")
        if h.shape != (S, 2, J):
            raise ConfigError(f"hazards must have shape (strata, arms, times) = {(S, 2, J)}, got {h.shape}")
        if self.assignment not in ("randomized", "confounded"):
            raise ConfigError(f"assignment must be 'randomized' or 'confounded', got {self.assignment!r}")
        try:
            p = check_probability_array(self.treatment_probs(), "treatment_prob")
        except ValidationError as exc:
            raise ConfigError(str(exc)) from None
        if p.shape != (S,):
            raise ConfigError(f"confounded assignment needs one treatment probability per stratum ({S})")
        if self.frailty is not None:
            try:
                check_probability(self.frailty.prevalence, "frailty.prevalence")
            except ValidationError as exc:
                raise ConfigError(str(exc)) from None
            if not self.frailty.multiplier >= 0:
                raise ConfigError("frailty.multiplier must be non-negative")
            if (h * self.frailty.multiplier > 1).any():
                raise ConfigError("frailty.multiplier pushes an effective hazard above 1")
        if self.censoring is not None:
            try:
                c = check_probability_array(self.censoring, "censoring")
            except ValidationError as exc:
                raise ConfigError(str(exc)) from None
            if c.shape != (J,):
                raise ConfigError(f"censoring must list one probability per time ({J})")
        return self

    def replace(self, **changes) -> "DGPConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "m": int(self.m),
            "times": [float(t) for t in self.times],
            "strata": list(self.strata),
            "strata_probs": [float(p) for p in self.strata_probs],
            "assignment": self.assignment,
            "treatment_prob": (
                float(self.treatment_prob)
                if self.assignment == "randomized"
                else [float(p) for p in self.treatment_prob]
            ),
            "hazards": self.hazard_array().tolist(),
            "frailty": None if self.frailty is None else dataclasses.asdict(self.frailty),
            "censoring": None if self.censoring is None else [float(c) for c in self.censoring],
            "seed": int(self.seed),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    @classmethod
    def from_dict(cls, data: Mapping) -> "DGPConfig":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        for name in ("m", "times", "hazards"):
            if name not in data:
                raise ConfigError(f"missing required field {name!r}")
        try:
            times = tuple(float(t) for t in data["times"])
        except (TypeError, ValueError):
            raise ConfigError("times must be a list of numbers") from None
        strata = tuple(data.get("strata", ("A",)))
        data["times"] = times
        data["strata"] = strata
        data.setdefault("strata_probs", [1.0 / len(strata)] * len(strata))
        data["strata_probs"] = tuple(data["strata_probs"])
        data["hazards"] = _expand_hazards(data["hazards"], strata, len(times))
        tp = data.get("treatment_prob", 0.5)
        data["treatment_prob"] = tuple(tp) if isinstance(tp, (list, tuple)) else tp
        if data.get("frailty") is not None:
            fr = data["frailty"]
            try:
                data["frailty"] = Frailty(float(fr["prevalence"]), float(fr["multiplier"]))
            except (KeyError, TypeError, ValueError):
                raise ConfigError("frailty needs numeric 'prevalence' and 'multiplier'") from None
        cens = data.get("censoring")
        if cens is not None:
            data["censoring"] = tuple([float(cens)] * len(times)) if np.isscalar(cens) else tuple(cens)
        return cls(**data).validate()

    @classmethod
    def from_json(cls, path) -> "DGPConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


def _expand_hazards(raw, strata: tuple, J: int) -> tuple:
    """Accept a scalar, a per-stratum mapping ``{x: {"0": .., "1": ..}}`` or a nested list."""
    S = len(strata)
    if isinstance(raw, Mapping):
        out = []
        for x in strata:
            if x not in raw:
                raise ConfigError(f"hazards missing stratum {x!r}")
            arms = raw[x]
            if not isinstance(arms, Mapping):
                arms = {"0": arms, "1": arms}
            row = []
            for z in ("0", "1"):
                v = arms.get(z, arms.get(int(z)))
                if v is None:
                    raise ConfigError(f"hazards[{x!r}] missing arm {z}")
                row.append([v] * J if np.isscalar(v) else list(v))
            out.append(row)
        raw = out
    try:
        h = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("hazards must be numeric") from None
    if h.ndim == 0:
        h = np.full((S, 2, J), float(h))
    return tuple(tuple(tuple(float(v) for v in arm) for arm in x) for x in h.tolist()) if h.ndim == 3 else h.tolist()


def _stream(seed: int, purpose: str) -> Generator:
    return Generator(Philox(SeedSequence([int(seed), PURPOSES[purpose]])))


def keyed_uniforms(seed: int, purpose: str, m: int, J: int) -> np.ndarray:
    """Uniforms ``u[i, j]`` for every subject and time of one purpose stream."""
    return _stream(seed, purpose).random((m, J))


def keyed_uniform(seed: int, purpose: str, i: int, j: int, J: int) -> float:
    """The single draw ``u[i, j]`` of :func:`keyed_uniforms`, without generating the rest."""
    n = i * J + j
    bitgen = Philox(SeedSequence([int(seed), PURPOSES[purpose]]))
    # Philox emits four 64-bit words per counter step
    bitgen.advance(n // 4)
    return float(Generator(bitgen).random(n % 4 + 1)[-1])


def generate_lattice(config: DGPConfig) -> PotentialOutcomeLattice:
    """Draw subjects and their full potential-death lattice."""
    config.validate()
    m, J, S = config.m, config.J, len(config.strata)
    seed = config.seed
    h = config.hazard_array()

    cum = np.cumsum(config.strata_probs)
    x = np.minimum(np.searchsorted(cum, keyed_uniforms(seed, "stratum", m, 1)[:, 0], side="right"), S - 1)
    if config.frailty is not None:
        frail = keyed_uniforms(seed, "frailty", m, 1)[:, 0] < config.frailty.prevalence
        scale = np.where(frail, config.frailty.multiplier, 1.0)
    else:
        frail = None
        scale = np.ones(m)
    arm = (keyed_uniforms(seed, "assignment", m, 1)[:, 0] < config.treatment_probs()[x]).astype(np.int8)

    hazard = h[x, arm, :] * scale[:, None]
    if (hazard > 1).any() or (hazard < 0).any():
        raise ConfigError("effective hazard outside [0, 1]")
    first = keyed_uniforms(seed, "event", m, J) < hazard
    dies = first.any(axis=1)
    k = np.where(dies, first.argmax(axis=1), NO_DEATH)

    again = keyed_uniforms(seed, "re-death", m, J) < hazard
    cols = np.arange(J)[None, :]
    kk = k[:, None]
    deaths = np.where(cols == kk, 1, np.where((kk != NO_DEATH) & (cols > kk), again, 0)).astype(np.int8)

    return PotentialOutcomeLattice(
        np.asarray(config.times, dtype=float),
        np.arange(m, dtype=np.int64),
        arm,
        x.astype(np.int64),
        tuple(config.strata),
        k.astype(np.int64),
        deaths,
        frail,
    )


def observe(lattice: PotentialOutcomeLattice, config: DGPConfig, reveal_frailty: bool = False) -> Cohort:
    """Derive the observed cohort, applying independent censoring.

    A subject censored at ``t_j`` drops out midway between ``t_{j-1}`` and
    ``t_j`` (with ``t_0 = 0``), i.e. before the deaths at ``t_j``. Survivors are
    administratively censored at the last grid time. The latent frailty class
    is omitted unless ``reveal_frailty`` is set, in which case it is folded
    into the stratum label as ``"<stratum>:frail"`` / ``"<stratum>:robust"``.
    """
    m, J = lattice.m, lattice.J
    times = lattice.times
    k = lattice.death_index
    exit_at = np.where(k == NO_DEATH, J - 1, k)

    if config.censoring is not None:
        c = np.asarray(config.censoring, dtype=float)
        hit = keyed_uniforms(config.seed, "censor", m, J) < c[None, :]
        hit &= np.arange(J)[None, :] <= exit_at[:, None]
        censored = hit.any(axis=1)
        jc = hit.argmax(axis=1)
    else:
        censored = np.zeros(m, dtype=bool)
        jc = np.zeros(m, dtype=np.int64)

    prev = np.concatenate([[0.0], times[:-1]])
    mid = (prev + times) / 2
    dies = k != NO_DEATH
    time = np.where(censored, mid[jc], times[exit_at])
    event = (dies & ~censored).astype(np.int8)

    labels = [lattice.strata[c] for c in lattice.stratum]
    strata = lattice.strata
    if reveal_frailty:
        if lattice.frailty is None:
            raise ValidationError("lattice carries no frailty classes")
        labels = [f"{x}:{'frail' if f else 'robust'}" for x, f in zip(labels, lattice.frailty)]
        strata = tuple(f"{x}:{c}" for x in lattice.strata for c in ("frail", "robust"))
    return Cohort.from_arrays(lattice.ids, lattice.arm, labels, time, event, strata=strata)


def simulate(config: DGPConfig, reveal_frailty: bool = False) -> tuple[PotentialOutcomeLattice, Cohort]:
    lattice = generate_lattice(config)
    return lattice, observe(lattice, config, reveal_frailty=reveal_frailty)


def _constant(value: float, J: int) -> tuple:
    return tuple([float(value)] * J)


def scenario_noncollapsible(
    m: int = 50000,
    seed: int = 0,
    low: float = 0.05,
    high: float = 0.5,
    effect: float = 0.8,
    J: int = 5,
    **overrides,
) -> DGPConfig:
    """Two equally likely strata with very different hazards, randomized treatment, no frailty.

    ``effect`` multiplies the hazard of arm 1 in both strata. The high-hazard
    stratum is depleted quickly, so the standardized-population hazard drifts
    below the stratum-weighted average of conditional hazards.
    """
    hazards = tuple(
        (_constant(base, J), _constant(base * effect, J)) for base in (low, high)
    )
    cfg = DGPConfig(
        m=m,
        times=tuple(float(t) for t in range(1, J + 1)),
        hazards=hazards,
        strata=("A", "B"),
        strata_probs=(0.5, 0.5),
        assignment="randomized",
        treatment_prob=0.5,
        seed=seed,
    )
    return cfg.replace(**overrides).validate()


def scenario_selection_bias(
    m: int = 50000,
    seed: int = 0,
    control_hazard: float = 0.15,
    hazard_ratio: float = 0.15,
    prevalence: float = 0.5,
    multiplier: float = 4.0,
    J: int = 5,
    **overrides,
) -> DGPConfig:
    """Beneficial treatment in a population mixing a robust and a frail latent class.

    Within each class the arm-1 to arm-0 hazard ratio is ``hazard_ratio`` at
    every time. Frail controls die out faster than frail treated subjects, so
    the surviving control group grows healthier and the unadjusted hazard
    ratio drifts toward 1.
    """
    hazards = ((_constant(control_hazard, J), _constant(control_hazard * hazard_ratio, J)),)
    cfg = DGPConfig(
        m=m,
        times=tuple(float(t) for t in range(1, J + 1)),
        hazards=hazards,
        frailty=Frailty(prevalence, multiplier),
        seed=seed,
    )
    return cfg.replace(**overrides).validate()


def scenario_baseline(m: int = 2000, seed: int = 0, **overrides) -> DGPConfig:
    """Randomized two-stratum cohort with constant hazards, used by default for verification."""
    J = 3
    cfg = DGPConfig(
        m=m,
        times=(1.0, 2.0, 3.0),
        hazards=((_constant(0.1, J), _constant(0.07, J)), (_constant(0.2, J), _constant(0.14, J))),
        strata=("A", "B"),
        strata_probs=(0.5, 0.5),
        seed=seed,
    )
    return cfg.replace(**overrides).validate()


def scenario_oracle(m: int = 10000, seed: int = 0, hazard: float = 0.1, J: int = 3, **overrides) -> DGPConfig:
    """Single stratum, randomized, constant hazard in both arms."""
    cfg = DGPConfig(
        m=m,
        times=tuple(float(t) for t in range(1, J + 1)),
        hazards=((_constant(hazard, J), _constant(hazard, J)),),
        seed=seed,
    )
    return cfg.replace(**overrides).validate()


PRESETS = {
    "baseline": scenario_baseline,
    "noncollapsible": scenario_noncollapsible,
    "selection-bias": scenario_selection_bias,
    "oracle": scenario_oracle,
}


def preset(name: str, **overrides) -> DGPConfig:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
    return factory(**overrides)
