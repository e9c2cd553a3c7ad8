import numpy as np
import pytest

from absfsim.config import ScenarioConfig
from absfsim.deployment import Kind, Node, Scenario

DATA = __import__("pathlib").Path(__file__).resolve().parent.parent / "data"


def place(mues, henbs, fues=None, **cfg) -> Scenario:
    """Scenario from explicit coordinates; FUEs default to 2 m off their HeNB."""
    fues = fues if fues is not None else [(x + 2.0, y + 2.0) for x, y in henbs]
    config = ScenarioConfig(num_mues=len(mues), num_henbs=len(henbs), num_runs=1, **cfg)
    nodes = [Node("MeNB", Kind.MENB, (0.0, 0.0))]
    nodes += [Node(f"MUE-{i + 1}", Kind.MUE, tuple(map(float, p)), False, "MeNB") for i, p in enumerate(mues)]
    nodes += [Node(f"HeNB-{i + 1}", Kind.HENB, tuple(map(float, p)), True) for i, p in enumerate(henbs)]
    nodes += [Node(f"FUE-{i + 1}", Kind.FUE, tuple(map(float, p)), True, f"HeNB-{i + 1}")
              for i, p in enumerate(fues)]
    return Scenario(config, tuple(nodes))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
