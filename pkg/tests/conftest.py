import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from arrowbf.config import ExperimentConfig, SceneSettings
from arrowbf.experiment import build_scene

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


def small_config(**kw) -> ExperimentConfig:
    """Two-second scenes so tests stay fast."""
    base = dict(seed=7, num_scenes=1, t60=(0.0,), sir=(0.0,),
                scene=SceneSettings(clip_seconds=2.0, speech_seconds=1.2))
    base.update(kw)
    return ExperimentConfig(**base)


def make_scene(index=0, **kw):
    return build_scene(small_config(**kw), index)[0]


@pytest.fixture(scope="session")
def anechoic_scene():
    return make_scene(0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance verdict lines, printed once at the end of the run
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
