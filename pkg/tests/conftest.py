import numpy as np
import pytest

from simcf.assoc import aga, distance_tensor
from simcf.channel import build_propagation, sample_channels
from simcf.scenario import ScenarioConfig, build_scenario, rng_stream


class Instance:
    """A physical instance with random phases, powers and association."""

    def __init__(self, config, trial=0, random_power=True):
        self.config = config
        self.layout = build_scenario(config, trial)
        self.prop = build_propagation(self.layout, config)
        self.channels = sample_channels(self.layout, config, rng_stream(config.seed, trial, "channel"))
        rng = rng_stream(config.seed, trial, "test-extras")
        self.phases = rng.uniform(0, 2 * np.pi, size=(config.L, config.M, config.N))
        if random_power:
            raw = rng.uniform(0.0, 1.0, size=(config.L, config.U))
            self.P = config.P_max * raw / raw.sum(axis=1, keepdims=True) * rng.uniform(0.3, 1.0, size=(config.L, 1))
        else:
            self.P = np.full((config.L, config.U), config.P_max / config.U)
        # random feasible association: cover every UE once, the rest at random
        A = np.zeros((config.L, config.U, config.K), dtype=int)
        slots = rng.permutation(config.L * config.U)
        choice = np.empty(config.L * config.U, dtype=int)
        choice[slots[: config.K]] = np.arange(config.K)
        choice[slots[config.K:]] = rng.integers(0, config.K, size=config.L * config.U - config.K)
        A[np.unravel_index(np.arange(config.L * config.U), (config.L, config.U)) + (choice,)] = 1
        self.A = A
        self.A_aga = aga(distance_tensor(self.layout))
        self.sigma2 = config.noise_power

    @property
    def args(self):
        return self.channels, self.phases, self.prop, self.A, self.P, self.sigma2


def small_config(**kw):
    base = dict(L=2, U=2, K=2, M=2, Nx=2, Ny=2, seed=11)
    base.update(kw)
    return ScenarioConfig(**base)


@pytest.fixture
def small():
    return Instance(small_config())


@pytest.fixture
def desk():
    return Instance(ScenarioConfig(seed=3), random_power=False)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("abcd")), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
