import importlib.resources

import pytest


@pytest.fixture(scope="session")
def examples():
    return importlib.resources.files("vptomo_plots") / "examples"
