import math

import numpy as np
import pytest

from optochaos.config import resolve_config_path
from optochaos.params import SystemParams, load_params


@pytest.fixture(scope="session")
def regime_params():
    """Shipped regime configs as ``{name: (params, seed)}``."""
    out = {}
    for name in ("periodic", "intermittent", "chaotic"):
        out[name] = load_params(resolve_config_path(f"regimes/{name}.cfg"))
    return out


@pytest.fixture
def small_params():
    """A fast, well-conditioned parameter set in units where omega_m = 1."""
    return SystemParams(delta=-0.5, kappa=1.0, kappa_ex=0.5, omega_m=1.0, gamma_m=0.01, g0=1.0,
                        drive_amplitude=0.2, dt=0.02, t_transient=0.0, t_record=50.0, decimation=5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def sine(f0, fs, n, amplitude=1.0, phase=0.0):
    return amplitude * np.sin(2 * math.pi * f0 * np.arange(n) / fs + phase)


@pytest.fixture(scope="session")
def regime_trajectories(regime_params):
    """Unstimulated records of the shipped regime configs."""
    from optochaos.model import integrate

    return {name: integrate(p, seed=seed) for name, (p, seed) in regime_params.items()}


_CRITERIA_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_CRITERIA_KEY] = []


@pytest.fixture
def criterion(request):
    """``criterion(n, title, passed, detail)`` logs one acceptance line and returns ``passed``."""
    log = request.config.stash[_CRITERIA_KEY]

    def record(n, title, passed, detail=""):
        line = f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        log.append((n, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_CRITERIA_KEY, [])
    if log:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(log):
            terminalreporter.write_line(line)
