"""Shared pytest plumbing: collects one-line verdicts from the acceptance
suite and prints them as a summary block at the end of the run."""

from __future__ import annotations

ACCEPTANCE_LOG: list[tuple[str, bool, str]] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LOG.append((name, ok, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LOG:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LOG:
        verdict = "PASS" if ok else "FAIL"
        tr.write_line(f"[{verdict}] {name}: {detail}")
