import numpy as np
import pytest

from iconannot.corpus import BoundingBox, IconAnnotation, IconClass, UISample, VHNode


def box(*v):
    return BoundingBox(*v)


@pytest.fixture
def tiny_sample():
    pixels = np.zeros((40, 80, 3), np.uint8)
    pixels[:, 40:] = 200
    leaves = (
        VHNode("android.widget.ImageButton", "com.app:id/btn_menu", box(0.0, 0.0, 0.25, 0.5)),
        VHNode("android.widget.TextView", None, box(0.5, 0.5, 1.0, 1.0)),
    )
    anns = (IconAnnotation(box(0.0, 0.0, 0.25, 0.5), IconClass.MENU, True),)
    return UISample("tiny", pixels, leaves, anns, (0, 0, 160, 80))


def write_vh(path, tree):
    import json

    path.write_text(json.dumps(tree))
    return path


# --------------------------------------------------------------------------
# Acceptance summary: one pass/fail line per criterion at the end of the run.

_ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of an acceptance criterion: criterion(n, passed, detail)."""
    results = request.config.stash[_ACCEPTANCE]

    def record(number, passed, detail):
        results[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        passed, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'} | {detail}")
