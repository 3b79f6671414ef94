"""Phase-shift optimisation by projected gradient ascent on the sum rate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, PropagationSet, cascade_all
from .rate import amplitudes, antenna_gains, coupling_from_gains, log2_1p, sinr_from_coupling
from .scenario import ScenarioConfig

LOG2E = 1.0 / np.log(2.0)
TWO_PI = 2.0 * np.pi
MIN_STEP = 1e-12


def wrap(phases):
    """Map phases into [0, 2*pi)."""
    out = np.mod(phases, TWO_PI)
    # mod can round up to exactly 2*pi for tiny negative inputs
    return np.where(out >= TWO_PI, 0.0, out)


@dataclass(frozen=True)
class PartialCascades:
    """Suffix products B[m] and prefix products Qc[m] so that G = B[m] Phi_m Qc[m].

    Index m is 0-based here: B[M-1] = I and Qc[0] = I.
    """

    B: np.ndarray  # (..., M, N, N)
    Qc: np.ndarray  # (..., M, N, N)


def partial_cascades(phases: np.ndarray, prop: PropagationSet, l: int | None = None) -> PartialCascades:
    """Prefix/suffix cascade products for one AP (``l`` given, phases (M, N)) or all APs (phases (L, M, N))."""
    phases = np.asarray(phases)
    if l is not None:
        W = prop.W_layer[l]
    else:
        W = prop.W_layer
    theta = np.exp(1j * phases)
    *batch, M, N = theta.shape
    eye = np.broadcast_to(np.eye(N, dtype=complex), (*batch, N, N))
    B = np.empty((*batch, M, N, N), dtype=complex)
    Qc = np.empty((*batch, M, N, N), dtype=complex)
    B[..., M - 1, :, :] = eye
    for m in range(M - 2, -1, -1):
        # B_m = B_{m+1} Phi_{m+1} W_{m+1}; W_{m+1} (1-based m+2) lives at W[..., m, :, :]
        B[..., m, :, :] = (B[..., m + 1, :, :] * theta[..., m + 1, None, :]) @ W[..., m, :, :]
    Qc[..., 0, :, :] = eye
    for m in range(1, M):
        Qc[..., m, :, :] = W[..., m - 1, :, :] @ (theta[..., m - 1, :, None] * Qc[..., m - 1, :, :])
    return PartialCascades(B=B, Qc=Qc)


def cascade_from_partials(pc: PartialCascades, phases: np.ndarray) -> np.ndarray:
    """G assembled at layer 0 (any layer gives the same matrix)."""
    theta = np.exp(1j * np.asarray(phases))
    return (pc.B[..., 0, :, :] * theta[..., 0, None, :]) @ pc.Qc[..., 0, :, :]


def grad_sum_rate(phases, channels: ChannelSet, prop: PropagationSet, A, P, sigma2: float) -> np.ndarray:
    """Analytic d R_sum / d phi[l, m, n] in bit/s/Hz per radian, shape (L, M, N).

    With c[k, j] the received coefficient of stream j at UE k, the phase of
    atom n enters c linearly through exp(j phi) x[k, n] y[n, j], where x is
    the UE channel seen through the suffix cascade and y the antenna feed
    pushed through the prefix cascade. Then d|c|^2/d phi = 2 Im(c conj(z)).
    """
    phases = np.asarray(phases, dtype=float)
    A = np.asarray(A)
    s = amplitudes(P)
    theta = np.exp(1j * phases)
    pc = partial_cascades(phases, prop)
    M = phases.shape[1]
    G = (pc.B[:, M - 1] * theta[:, M - 1, None, :]) @ pc.Qc[:, M - 1]

    C = coupling_from_gains(antenna_gains(channels, G, prop), A, s)
    power = np.abs(C) ** 2
    total = power.sum(axis=1) + sigma2
    desired = np.diag(power)
    gamma = desired / (total - desired)
    delta = 1.0 / total
    K = C.shape[0]
    weight = np.where(np.eye(K, dtype=bool), 1.0, -gamma[:, None]) * delta[:, None]
    omega = weight * C  # (K, K)

    x = np.einsum("lkn,lmnp->lmkp", channels.h_sim.conj(), pc.B)  # (L, M, K, N)
    feed = prop.W_input @ (s[:, :, None] * A)  # (L, N, K)
    y = pc.Qc @ feed[:, None]  # (L, M, N, K)
    t = y.conj() @ omega.T  # (L, M, N, K)
    inner = np.einsum("lmkn,lmnk->lmn", x.conj(), t)
    return 2.0 * LOG2E * np.imag(theta.conj() * inner)


class RateEvaluator:
    """Sum rate as a function of the phases for fixed channels, powers and association."""

    def __init__(self, channels: ChannelSet, prop: PropagationSet, A, P, sigma2: float):
        self.channels = channels
        self.prop = prop
        self.A = np.asarray(A)
        self.P = np.asarray(P, dtype=float)
        self.s = amplitudes(self.P)
        self.sigma2 = sigma2
        self.evaluations = 0

    def __call__(self, phases) -> float:
        self.evaluations += 1
        F = antenna_gains(self.channels, cascade_all(phases, self.prop), self.prop)
        gamma = sinr_from_coupling(coupling_from_gains(F, self.A, self.s), self.sigma2)
        return float(log2_1p(gamma).sum())

    def gradient(self, phases) -> np.ndarray:
        return grad_sum_rate(phases, self.channels, self.prop, self.A, self.P, self.sigma2)


@dataclass
class PGAResult:
    phases: np.ndarray
    sum_rate: float
    trace: list = field(default_factory=list)
    iterations: int = 0
    start_rates: list = field(default_factory=list)


def ascend(phases0, objective: RateEvaluator, config: ScenarioConfig) -> PGAResult:
    """Single-start gradient ascent with backtracking on the step length.

    Each iteration moves every phase along the gradient, scaled so that the
    largest phase change equals the trial step (first pga_init_step * pi rad),
    and halves (pga_decay) the step until the sum rate strictly increases.
    """
    phi = wrap(np.asarray(phases0, dtype=float))
    R = objective(phi)
    trace = [R]
    iterations = 0
    for _ in range(config.pga_max):
        iterations += 1
        g = objective.gradient(phi)
        peak = np.max(np.abs(g))
        if not np.isfinite(peak):
            raise FloatingPointError("non-finite phase gradient")
        if peak == 0.0:
            break
        direction = g / peak
        step = config.pga_init_step * np.pi
        accepted = False
        while step >= MIN_STEP:
            cand = wrap(phi + step * direction)
            Rc = objective(cand)
            if Rc > R:
                accepted = True
                break
            step *= config.pga_decay
        if not accepted:
            break
        gain = (Rc - R) / abs(R) if R != 0 else np.inf
        phi, R = cand, Rc
        trace.append(R)
        if gain < config.inner_rel_tol:
            break
    return PGAResult(phases=phi, sum_rate=R, trace=trace, iterations=iterations, start_rates=[R])


def pga_optimize(phases0, channels: ChannelSet, prop: PropagationSet, A, P, sigma2: float,
                 config: ScenarioConfig, rng: np.random.Generator | None = None,
                 multistart: int | None = None) -> PGAResult:
    """Best of ``multistart`` ascents: one from ``phases0`` and the rest from uniform random phases.

    Keeping the supplied phases as a start guarantees the result is no worse
    than the input, which the outer alternating loop relies on.
    """
    count = config.multistart if multistart is None else multistart
    objective = RateEvaluator(channels, prop, A, P, sigma2)
    phases0 = np.asarray(phases0, dtype=float)
    starts = [phases0]
    if count > 1:
        if rng is None:
            raise ValueError("random restarts need an rng stream")
        starts += [rng.uniform(0.0, TWO_PI, size=phases0.shape) for _ in range(count - 1)]
    best = None
    finals = []
    for start in starts:
        res = ascend(start, objective, config)
        finals.append(res.sum_rate)
        if best is None or res.sum_rate > best.sum_rate:
            best = res
    best.start_rates = finals
    return best
