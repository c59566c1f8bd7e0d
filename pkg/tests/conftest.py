"""Prints one PASS/FAIL line per acceptance criterion after the run."""

CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion this test decides")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = CRITERIA.setdefault(number, {"title": title, "ok": True, "detail": []})
    if call.when == "call" and call.excinfo is not None:
        entry["ok"] = False
    elif call.when == "setup" and call.excinfo is not None:
        entry["ok"] = False
    for name, value in item.user_properties:
        if name == "detail" and value not in entry["detail"]:
            entry["detail"].append(value)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        e = CRITERIA[number]
        detail = "; ".join(e["detail"])
        line = f"criterion {number:2d} {'PASS' if e['ok'] else 'FAIL'}  {e['title']}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
