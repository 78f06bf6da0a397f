from __future__ import annotations

import json
from pathlib import Path

FIXTURES = Path(__file__).parent / "fixtures"

# Acceptance verdict lines are printed inside captured test stdout; mirror
# them into the terminal summary so they survive default capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def load_program_corpus() -> list[dict]:
    with open(FIXTURES / "program_corpus.json", encoding="utf-8") as fh:
        return json.load(fh)["programs"]
