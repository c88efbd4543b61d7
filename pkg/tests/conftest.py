import logging
from pathlib import Path

import numpy as np
import pytest

from gkverify.space import load_space

CATALOG = Path(__file__).resolve().parent.parent / "catalog"

STANDARD_F = """
F[1][2] = "-1"
F[2][1] = "1"
F[3][4] = "-1"
F[4][3] = "1"
"""


def space_text(dimension: int, components: dict, extra: str = "", name: str = "test") -> str:
    lines = [f'name = "{name}"', f"dimension = {dimension}"]
    for key, value in components.items():
        lines.append(f'{key} = "{value}"')
    return "\n".join(lines) + "\n" + extra


def identity_metric(dimension: int) -> dict:
    return {f"g[{i}][{i}]": "1" for i in range(1, dimension + 1)}


@pytest.fixture
def catalog() -> Path:
    return CATALOG


@pytest.fixture
def flat_gk1():
    return load_space((CATALOG / "flat_gk1.space").read_text(), "flat_gk1.space")


@pytest.fixture
def torsion_space():
    return load_space((CATALOG / "torsion_kind1_fail.space").read_text(), "torsion_kind1_fail.space")


@pytest.fixture
def polar():
    return load_space((CATALOG / "polar.space").read_text(), "polar.space")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _drop_log_handlers():
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_gkverify", False):
            root.removeHandler(handler)
            handler.close()
