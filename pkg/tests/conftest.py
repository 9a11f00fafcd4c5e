import numpy as np
import pytest

_ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record_acceptance():
    """Store a one-line verdict for an acceptance criterion."""

    def record(number, title, ok, detail=''):
        prev = _ACCEPTANCE.get(number)
        ok = bool(ok) and (prev is None or prev[1])
        details = detail if prev is None else prev[2] + '; ' + detail
        _ACCEPTANCE[number] = (title, ok, details)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section('acceptance criteria')
    for number in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line('criterion %d %-28s %s  %s'
                                    % (number, title, 'PASS' if ok else 'FAIL', detail))
