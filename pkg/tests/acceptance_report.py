"""Registry for per-criterion acceptance results.

Tests record one line per criterion here; the conftest terminal-summary hook
prints them after the run so they appear even without ``-s``.
"""

LINES = []


def record(criterion, detail):
    line = f"ACCEPTANCE {criterion}: PASS - {detail}"
    LINES.append((criterion, line))
    print(f"\n{line}")
