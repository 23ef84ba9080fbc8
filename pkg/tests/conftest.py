"""Shared pytest plumbing: collects acceptance verdicts and prints them
as one block at the end of the run."""

_criterion_lines = []


def record_criterion(num: int, ok: bool, detail: str) -> bool:
    """Register a one-line verdict for acceptance criterion `num`."""
    tag = "PASS" if ok else "FAIL"
    _criterion_lines.append((num, f"[{tag}] criterion {num:2d}: {detail}"))
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_criterion_lines):
        terminalreporter.write_line(line)
