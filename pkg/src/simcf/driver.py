"""Scheme runner (association x optimiser) and Monte-Carlo aggregation."""

from __future__ import annotations

import enum
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assoc import aga, distance_tensor, nua
from .channel import build_propagation, sample_channels
from .pga import TWO_PI, pga_optimize
from .popt import power_control
from .rate import RateReport, build_stacked, sum_rate
from .scenario import ScenarioConfig, build_scenario, rng_stream


class Association(enum.Enum):
    AGA = "aga"
    NUA = "nua"


class Optimizer(enum.Enum):
    AO = "ao"
    SIM_OPT = "sim"
    POWER_OPT = "power"
    RP_EP = "rp-ep"


@dataclass(frozen=True, order=True)
class SchemeId:
    association: Association
    optimizer: Optimizer

    @classmethod
    def parse(cls, token: str) -> "SchemeId":
        token = token.strip().lower()
        head, _, tail = token.partition("-")
        try:
            return cls(Association(head), Optimizer(tail))
        except ValueError:
            raise ValueError(f"unknown scheme '{token}'; expected one of {', '.join(SCHEME_TOKENS)}") from None

    @property
    def token(self) -> str:
        return f"{self.association.value}-{self.optimizer.value}"

    def __str__(self) -> str:
        return self.token


SCHEME_TOKENS = [f"{a.value}-{o.value}" for a in Association for o in Optimizer]


@dataclass
class RunReport:
    scheme: SchemeId
    rate_report: RateReport
    ao_trace: list
    iterations: dict
    wall_time: float
    seed: int
    trial: int
    phases: np.ndarray = None
    power: np.ndarray = None
    association: np.ndarray = None
    # (stage, outer_iter, inner_iter, sum_rate) rows
    trace_rows: list = field(default_factory=list)

    @property
    def sum_rate(self) -> float:
        return self.rate_report.sum_rate


@dataclass(frozen=True)
class TrialSetup:
    config: ScenarioConfig
    trial: int
    channels: object
    prop: object
    D: np.ndarray
    phases0: np.ndarray
    sigma2: float


def prepare_trial(config: ScenarioConfig, trial: int) -> TrialSetup:
    layout = build_scenario(config, trial)
    prop = build_propagation(layout, config)
    channels = sample_channels(layout, config, rng_stream(config.seed, trial, "channel"))
    phases0 = rng_stream(config.seed, trial, "phases").uniform(0.0, TWO_PI, size=(config.L, config.M, config.N))
    return TrialSetup(config, trial, channels, prop, distance_tensor(layout), phases0, config.noise_power)


def run_scheme(config: ScenarioConfig, trial: int, scheme: SchemeId | str, setup: TrialSetup | None = None) -> RunReport:
    """Run one scheme on one trial. Deterministic in (config, trial, scheme).

    All schemes of a trial share the layout, channels, initial random phases
    and restart stream, so differences between them come from the optimiser.
    """
    if isinstance(scheme, str):
        scheme = SchemeId.parse(scheme)
    started = time.perf_counter()
    if setup is None:
        setup = prepare_trial(config, trial)
    A = aga(setup.D) if scheme.association is Association.AGA else nua(setup.D)
    ch, prop, sigma2 = setup.channels, setup.prop, setup.sigma2
    phases = setup.phases0.copy()
    P = np.full((config.L, config.U), config.P_max / config.U)
    restarts = rng_stream(config.seed, trial, "multistart")

    R0 = sum_rate(ch, phases, prop, A, P, sigma2).sum_rate
    ao_trace = [R0]
    rows = [("init", 0, 0, R0)]
    iters = {"outer": 0, "power": 0, "pga": 0}

    def power_stage(outer):
        nonlocal P
        st = build_stacked(ch, phases, prop, A, P)
        res = power_control(st.p_vec, st, config, sigma2)
        P = st.to_power(res.p_vec)
        iters["power"] += res.iterations
        rows.extend(("power", outer, i, r) for i, r in enumerate(res.trace))
        return res.sum_rate

    def phase_stage(outer, multistart):
        nonlocal phases
        res = pga_optimize(phases, ch, prop, A, P, sigma2, config, rng=restarts, multistart=multistart)
        phases = res.phases
        iters["pga"] += res.iterations
        rows.extend(("pga", outer, i, r) for i, r in enumerate(res.trace))
        return res.sum_rate

    opt = scheme.optimizer
    if opt is Optimizer.POWER_OPT:
        iters["outer"] = 1
        ao_trace.append(power_stage(1))
    elif opt is Optimizer.SIM_OPT:
        iters["outer"] = 1
        ao_trace.append(phase_stage(1, config.multistart))
    elif opt is Optimizer.AO:
        R = R0
        for outer in range(1, config.ao_max + 1):
            iters["outer"] = outer
            power_stage(outer)
            # random restarts only on the first pass; later passes refine the incumbent
            Rn = phase_stage(outer, config.multistart if outer == 1 else 1)
            ao_trace.append(Rn)
            gain = (Rn - R) / abs(R) if R != 0 else np.inf
            R = Rn
            if gain < config.ao_rel_tol:
                break

    report = sum_rate(ch, phases, prop, A, P, sigma2)
    return RunReport(
        scheme=scheme,
        rate_report=report,
        ao_trace=ao_trace,
        iterations=iters,
        wall_time=time.perf_counter() - started,
        seed=config.seed,
        trial=trial,
        phases=phases,
        power=P,
        association=A,
        trace_rows=rows,
    )


def _run_trial(args):
    config, trial, schemes = args
    setup = prepare_trial(config, trial)
    return [run_scheme(config, trial, s, setup) for s in schemes]


def worker_count(default: int = 1) -> int:
    raw = os.environ.get("SIMCF_THREADS")
    if raw is None or raw.strip() == "":
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"SIMCF_THREADS must be a positive integer, got {raw!r}") from None


@dataclass
class MonteCarloResult:
    reports: list  # RunReport, sorted by (scheme order, trial)
    schemes: list

    def for_scheme(self, scheme) -> list:
        scheme = SchemeId.parse(scheme) if isinstance(scheme, str) else scheme
        return [r for r in self.reports if r.scheme == scheme]

    def mean(self, scheme) -> float:
        return float(np.mean([r.sum_rate for r in self.for_scheme(scheme)]))

    def std(self, scheme) -> float:
        rates = [r.sum_rate for r in self.for_scheme(scheme)]
        return float(np.std(rates, ddof=1)) if len(rates) > 1 else 0.0


def monte_carlo(config: ScenarioConfig, schemes, trials: int, first_trial: int = 0,
                workers: int | None = None) -> MonteCarloResult:
    """Run every scheme on trials ``first_trial .. first_trial + trials - 1``.

    Trials run in worker processes when ``workers`` (or SIMCF_THREADS) > 1;
    results are re-sorted by trial so output does not depend on scheduling.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    schemes = [SchemeId.parse(s) if isinstance(s, str) else s for s in schemes]
    workers = worker_count() if workers is None else workers
    jobs = [(config, t, schemes) for t in range(first_trial, first_trial + trials)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            batches = list(pool.map(_run_trial, jobs))
    else:
        batches = [_run_trial(job) for job in jobs]
    order = {s: i for i, s in enumerate(schemes)}
    reports = sorted((r for batch in batches for r in batch), key=lambda r: (order[r.scheme], r.trial))
    return MonteCarloResult(reports=reports, schemes=schemes)


def outer_iterations_to_converge(trace, rel: float = 0.01) -> int:
    """First outer iteration whose sum rate is within ``rel`` of the final value."""
    final = trace[-1]
    for i, value in enumerate(trace[1:], start=1):
        if value >= (1.0 - rel) * final:
            return i
    return len(trace) - 1
