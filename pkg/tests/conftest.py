import contextlib
import time

CRITERIA: dict[int, str] = {}


@contextlib.contextmanager
def criterion(number: int, title: str):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        CRITERIA[number] = f"FAIL  criterion {number:2d}  {title}  ({type(exc).__name__})"
        raise
    if not CRITERIA.get(number, "").startswith("FAIL"):
        CRITERIA[number] = f"PASS  criterion {number:2d}  {title}  [{time.perf_counter() - t0:.1f} s]"


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[n])
