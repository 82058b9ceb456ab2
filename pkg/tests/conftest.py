import pytest

ACCEPTANCE_TITLES = {
    1: "Catalan segment counts",
    2: "segment/tree/ES round trips",
    3: "staging identity",
    4: "decompose/reinsert and fiber bijection",
    5: "laminarity and classification",
    6: "segment-mass bound",
    7: "gamma estimation",
    8: "kappa estimation",
    9: "cut and rod densities",
    10: "stop probability",
    11: "strategy soundness",
    12: "rod structure",
    13: "return-pattern combinatorics",
    14: "determinism",
}

_results: dict = {}


@pytest.fixture
def record():
    """record(k, ok, detail) stores the verdict for acceptance criterion k."""

    def rec(k, ok, detail):
        _results[k] = (bool(ok), detail)
        return bool(ok)

    return rec


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k, title in ACCEPTANCE_TITLES.items():
        if k in _results:
            ok, detail = _results[k]
            tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {k:2d} {title}: {detail}")
        else:
            tr.write_line(f"[NOT RUN] {k:2d} {title}")
