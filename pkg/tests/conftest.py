import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from concaveroc.mcmc import ChainConfig
from concaveroc.models import base as model_base

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Every ModelFit built anywhere in the suite passes through this check, so the
# concavity invariant is enforced on every retained ROC draw of every concave fit.
CONCAVITY = {"fits": 0, "curves": 0, "violations": 0}
ACCEPTANCE_LINES: list[str] = []

_original_post_init = model_base.ModelFit.__post_init__


def _checked_post_init(self):
    _original_post_init(self)
    if self.model in model_base.CONCAVE_MODELS:
        CONCAVITY["fits"] += 1
        CONCAVITY["curves"] += int(self.roc_draws.shape[0])
        CONCAVITY["violations"] += int(self.concavity_violations)
        assert self.concavity_violations == 0, f"{self.model}: {self.concavity_violations} non-concave ROC draws"


model_base.ModelFit.__post_init__ = _checked_post_init


@pytest.fixture
def fast_chains():
    return ChainConfig(n_chains=2, burn_in=300, keep=1000, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance_line():
    def emit(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
    if CONCAVITY["fits"]:
        terminalreporter.write_line(
            f"concavity check: {CONCAVITY['fits']} concave fits, {CONCAVITY['curves']} ROC draws, "
            f"{CONCAVITY['violations']} violations"
        )
