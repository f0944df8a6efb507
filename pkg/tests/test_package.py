import importlib
from pathlib import Path

import pytest

import utmost

PACKAGE_ROOT = Path(utmost.__file__).parent
MODULES = sorted(p for p in PACKAGE_ROOT.rglob("*.py") if not p.name.startswith("__"))


def module_name(path):
    return ".".join(("utmost",) + path.relative_to(PACKAGE_ROOT).with_suffix("").parts)


@pytest.mark.parametrize("path", MODULES, ids=lambda p: p.relative_to(PACKAGE_ROOT).as_posix())
def test_module_has_path_header_and_docstring(path):
    header = path.read_text().splitlines()[0]
    assert header == f"# utmost/{path.relative_to(PACKAGE_ROOT).as_posix()}"
    doc = importlib.import_module(module_name(path)).__doc__
    assert doc and doc.strip()
