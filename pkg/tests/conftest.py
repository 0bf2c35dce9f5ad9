import os

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(autouse=True)
def _output_dir(tmp_path, monkeypatch):
    """Keep CLI output out of the working tree."""
    monkeypatch.setenv("GAMMAHOM_OUTPUT_DIR", str(tmp_path / "out"))
