"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

import pytest

CRITERIA = {
    1: "coupling equivalence",
    2: "marginal recovery",
    3: "two-species table regression",
    4: "attractiveness verdicts",
    5: "exchange criterion",
    6: "discrepancy algebra",
    7: "macroscopic stability",
    8: "order preservation and coupling marginals",
    9: "stationary currents",
    10: "irreducibility suite",
    11: "stick-process Riemann hydrodynamics",
    12: "thermal-bath Riemann hydrodynamics",
    13: "envelope solver vs finite volumes",
}

OUTCOMES: dict[int, list] = {}


@pytest.fixture
def record():
    def _record(criterion: int, part: str, ok: bool, detail: str) -> bool:
        OUTCOMES.setdefault(criterion, []).append((part, bool(ok), detail))
        return bool(ok)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num, title in CRITERIA.items():
        parts = OUTCOMES.get(num)
        if not parts:
            tr.write_line(f"SKIP {num:2d} {title}: not run")
            continue
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{p} {'ok' if ok else 'FAILED'} ({d})" for p, ok, d in parts)
        tr.write_line(f"{status} {num:2d} {title}: {detail}")
