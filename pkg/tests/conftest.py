import pytest

from capinfer import kernels
from capinfer.corpus import Document, Kind

BACKENDS = [kernels.pure] + ([kernels.compiled] if kernels.compiled is not None else [])


@pytest.fixture(params=BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def backend(request):
    return request.param


def doc(doc_id, title="", tags=(), body="", kind=Kind.QUESTION, thread_id=None):
    return Document(doc_id, doc_id if thread_id is None else thread_id, kind, title, tuple(tags), body)


SCREENSHOT_BODY = (
    "void get_screenshot(COLORREF** img, const Rectangle &bounds) {\n"
    "    // get the screen DC\n"
    "    HDC hdc_screen = GetDC(NULL);\n"
    "    // memory DC so we don't have to constantly poll the screen DC\n"
    "    HDC hdc_memory = CreateCompatibleDC(hdc_screen);\n"
    "    // bitmap handle\n"
    "    HBITMAP hbitmap = CreateCompatibleBitmap(hdc_screen, bounds.width, bounds.height);\n"
    "    // select the bitmap handle\n"
    "    SelectObject(hdc_memory, hbitmap);\n"
    "    // paint onto the bitmap\n"
    "    BitBlt(hdc_memory, bounds.x, bounds.y, bounds.width, bounds.height, hdc_screen, bounds.x, bounds.y, SRCPAINT);\n"
    "    // release the screen DC\n"
    "    ReleaseDC(NULL, hdc_screen);\n"
    "}\n"
)


@pytest.fixture
def screenshot_docs():
    return [
        doc(3, "Drawing a window", ["winapi"], "Call BeginPaint then EndPaint."),
        doc(5, "Capturing screenshot", ["winapi", "screenshot"], SCREENSHOT_BODY),
        doc(8, "Screenshot of a window", ["screenshot", "printwindow"], "Use PrintWindow with FindWindow."),
        doc(9, "Unrelated", ["python"], "BitBlt is mentioned here but the post is not about screenshots"),
    ]


# Acceptance criteria report lines, printed at the end of the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
