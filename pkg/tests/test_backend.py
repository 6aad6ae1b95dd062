import subprocess
import sys

import pytest

from lexhmm import backend


def test_env_override(monkeypatch):
    monkeypatch.setenv("LEXHMM_BACKEND", "python")
    assert backend.default_backend() == "python"
    assert backend.kernel_class().__module__ == "lexhmm._kernel_py"
    monkeypatch.setenv("LEXHMM_BACKEND", "fortran")
    with pytest.raises(ValueError):
        backend.default_backend()


def test_default_prefers_compiled(monkeypatch):
    monkeypatch.delenv("LEXHMM_BACKEND", raising=False)
    assert backend.default_backend() == ("compiled" if backend.have_compiled() else "python")
    with pytest.raises(ImportError):
        backend.kernel_class("gpu")


def test_python_fallback_when_extension_hidden():
    code = ("import sys; sys.modules['lexhmm._kernel'] = None\n"
            "import lexhmm; print(lexhmm.default_backend(), lexhmm.have_compiled())")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "False"]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "lexhmm", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "train" in out.stdout
