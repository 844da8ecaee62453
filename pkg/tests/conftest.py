def pytest_terminal_summary(terminalreporter):
    # acceptance verdict lines, one per criterion, collected by test_acceptance.gate
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "GATE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
