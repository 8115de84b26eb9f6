"""Shared pytest plumbing.

Acceptance tests record one line per criterion; the hook below prints
them in the terminal summary so the pass/fail panel is visible even
with output capture on.
"""

ACCEPTANCE_LINES = []


def record(line):
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
