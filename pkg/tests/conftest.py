import random

import numpy as np
import pytest
from hypothesis import strategies as st

from multihaz import Cohort, PotentialOutcomeLattice

# id, arm, stratum, time, event
E1_ROWS = [
    (1, 1, "A", 1.0, 1),
    (2, 1, "A", 3.0, 0),
    (3, 1, "B", 2.0, 1),
    (4, 1, "B", 3.0, 0),
    (5, 0, "A", 2.0, 1),
    (6, 0, "A", 3.0, 0),
    (7, 0, "B", 1.5, 0),
    (8, 0, "B", 1.0, 1),
]


def cohort_from_rows(rows):
    ids, arm, stratum, time, event = zip(*rows)
    return Cohort.from_arrays(np.array(ids), arm, stratum, time, event)


def write_rows(path, rows, header=("id", "arm", "stratum", "time", "event")):
    lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def e1_rows():
    return list(E1_ROWS)


@pytest.fixture
def e1():
    return cohort_from_rows(E1_ROWS)


@pytest.fixture
def e1_csv(tmp_path):
    return write_rows(tmp_path / "e1.csv", E1_ROWS)


def random_rows(rng: random.Random, m: int, n_strata: int, times=(1, 2, 3, 4, 5, 2.5)):
    """Random small cohort with at least one event."""
    labels = "ABCD"[:n_strata]
    rows = [
        (i, rng.randint(0, 1), rng.choice(labels), float(rng.choice(times)), rng.randint(0, 1))
        for i in range(m)
    ]
    if not any(r[4] for r in rows):
        i = rng.randrange(m)
        rows[i] = rows[i][:4] + (1,)
    return rows


def small_corpus(n: int = 300, max_m: int = 10, seed: int = 2024):
    rng = random.Random(seed)
    corpus = [list(E1_ROWS), [(0, 1, "A", 1.0, 1)]]
    for _ in range(n):
        corpus.append(random_rows(rng, rng.randint(1, max_m), rng.randint(1, 4)))
    return corpus


@st.composite
def cohort_rows(draw, max_m=50, max_strata=4):
    m = draw(st.integers(1, max_m))
    n_strata = draw(st.integers(1, max_strata))
    labels = "ABCD"[:n_strata]
    rows = []
    for i in range(m):
        rows.append((
            i,
            draw(st.integers(0, 1)),
            draw(st.sampled_from(labels)),
            float(draw(st.sampled_from([1, 2, 3, 4, 5, 6, 1.5, 3.25]))),
            draw(st.integers(0, 1)),
        ))
    if not any(r[4] for r in rows):
        rows[0] = rows[0][:4] + (1,)
    return rows


def random_lattice(rng: np.random.Generator, m: int, J: int, n_strata: int = 2) -> PotentialOutcomeLattice:
    """Valid lattice with arbitrary death pattern obeying the coupling rules."""
    k = rng.integers(-1, J, size=m)
    free = rng.random((m, J)) < rng.random()
    cols = np.arange(J)[None, :]
    deaths = np.where(cols == k[:, None], 1, np.where((k[:, None] >= 0) & (cols > k[:, None]), free, 0))
    arm = rng.integers(0, 2, size=m)
    strata = [("A", "B", "C")[v] for v in rng.integers(0, n_strata, size=m)]
    return PotentialOutcomeLattice.from_arrays(
        np.arange(1, J + 1, dtype=float), arm, strata, [None if v < 0 else v for v in k], deaths
    )


@st.composite
def lattices(draw, max_m=20, max_J=6):
    m = draw(st.integers(1, max_m))
    J = draw(st.integers(1, max_J))
    k = [draw(st.one_of(st.none(), st.integers(0, J - 1))) for _ in range(m)]
    arm = [draw(st.integers(0, 1)) for _ in range(m)]
    deaths = []
    for i in range(m):
        row = []
        for j in range(J):
            if k[i] is None or j < k[i]:
                row.append(0)
            elif j == k[i]:
                row.append(1)
            else:
                row.append(draw(st.integers(0, 1)))
        deaths.append(row)
    return PotentialOutcomeLattice.from_arrays(np.arange(1, J + 1, dtype=float), arm, ["A"] * m, k, deaths)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; call with the verdict and a short detail string."""

    def record(ok: bool, detail: str = ""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {request.node.name}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
