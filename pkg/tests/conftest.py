def pytest_terminal_summary(terminalreporter):
    """Print the acceptance lines collected by ``test_acceptance.py``."""
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULT_LINES", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
