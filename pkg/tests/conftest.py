"""Shared pytest plumbing.

The acceptance tests register one human-readable PASS/FAIL line per
criterion; those lines are echoed in the terminal summary so the outcome of
every criterion is visible even when output capturing is on.
"""

acceptance_lines = []


def record_criterion(criterion, ok, detail):
    """Register a criterion outcome, then assert it."""
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} — {detail}"
    acceptance_lines.append(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
