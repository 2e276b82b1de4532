import re

_CRITERION = re.compile(r"test_acceptance\.py::test_c(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    results = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if m and rep.when in ("call", "setup"):
                key = (int(m.group(1)), m.group(2))
                if outcome != "passed" or key not in results:
                    results[key] = "PASS" if outcome == "passed" else "FAIL"
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for (n, name), verdict in sorted(results.items()):
        terminalreporter.write_line(f"criterion {n:2d} {name.replace('_', ' ')}: {verdict}")
