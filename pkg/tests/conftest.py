import sys

import numpy as np
import pytest
from hypothesis import settings

from bdris.scattering import RisConfig

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# one representative per leaf of the classification tree
ALL_CONFIGS = [
    RisConfig(8, "reflective", "single"),
    RisConfig(8, "reflective", "group", 2),
    RisConfig(8, "reflective", "group", 4),
    RisConfig(8, "reflective", "fully"),
    RisConfig(8, "reflective", "dynamic_group", 2),
    RisConfig(8, "reflective", "non_diagonal"),
    RisConfig(8, "hybrid", "single"),
    RisConfig(8, "hybrid", "group", 4),
    RisConfig(8, "hybrid", "fully"),
    RisConfig(8, "hybrid", "dynamic_group", 4),
    RisConfig(16, "multi_sector", "single", sectors=4),
    RisConfig(16, "multi_sector", "group", 8, sectors=4),
    RisConfig(16, "multi_sector", "fully", sectors=4),
    RisConfig(16, "multi_sector", "dynamic_group", 8, sectors=4),
]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.REPORT, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
