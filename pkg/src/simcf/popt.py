"""Per-antenna power control by the quadratic transform.

For fixed auxiliary weights t the surrogate

    f(p, t) = sum_k log2(1 + 2 t_k |d_k(p)| - t_k^2 (I_k(p) + sigma^2))

lower-bounds the sum rate and touches it at t_k = |d_k| / (I_k + sigma^2),
where d_k is UE k's desired received coefficient and I_k its interference
power. Alternating the closed-form t update with an ascent step on p
therefore never lowers the sum rate. ``p`` here is the stacked amplitude
vector sqrt(p_{l,u}).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rate import StackedSystem, log2_1p, sinr_from_coupling
from .scenario import ScenarioConfig

MIN_STEP = 1e-12


def _terms(stacked: StackedSystem, p_vec):
    C = stacked.coupling(p_vec)
    power = np.abs(C) ** 2
    desired = np.diag(C)
    interference = power.sum(axis=1) - np.abs(desired) ** 2
    return C, desired, interference


def optimal_t(p_vec, stacked: StackedSystem, sigma2: float) -> np.ndarray:
    _, desired, interference = _terms(stacked, p_vec)
    return np.abs(desired) / (interference + sigma2)


def surrogate(p_vec, t, stacked: StackedSystem, sigma2: float) -> float:
    """Quadratic-transform objective; -inf where a log argument is not positive."""
    _, desired, interference = _terms(stacked, p_vec)
    x = 2.0 * t * np.abs(desired) - t**2 * (interference + sigma2)
    if np.any(x <= -1.0):
        return -np.inf
    return float(log2_1p(x).sum())


def surrogate_gradient(p_vec, t, stacked: StackedSystem, sigma2: float) -> np.ndarray:
    """Gradient of the surrogate with respect to the (real) amplitude vector."""
    gains = stacked.gains  # (K, UL)
    S = stacked.A_sel  # (K, UL)
    C = (gains * p_vec[None, :]) @ S.T
    desired = np.diag(C)
    interference = (np.abs(C) ** 2).sum(axis=1) - np.abs(desired) ** 2
    arg = 1.0 + 2.0 * t * np.abs(desired) - t**2 * (interference + sigma2)

    # d|d_k|/dp_i = Re(conj(d_k) g_ki S_ki) / |d_k|, zero where d_k = 0
    mag = np.abs(desired)
    safe = np.where(mag > 0, mag, 1.0)
    d_abs = np.where(mag[:, None] > 0, np.real(desired.conj()[:, None] * gains * S) / safe[:, None], 0.0)
    # d I_k/dp_i = 2 Re(conj(c_kj) g_ki) for the stream j that antenna i carries, j != k
    stream = np.argmax(S, axis=0)  # (UL,)
    c_own = C[:, stream]  # (K, UL): coefficient of the stream antenna i carries, at UE k
    cross = np.arange(C.shape[0])[:, None] != stream[None, :]
    d_int = np.where(cross, 2.0 * np.real(c_own.conj() * gains), 0.0)

    d_arg = 2.0 * t[:, None] * d_abs - (t**2)[:, None] * d_int
    return (d_arg / arg[:, None]).sum(axis=0) / np.log(2.0)


def project(p_vec, stacked: StackedSystem, P_max: float) -> np.ndarray:
    """Euclidean projection onto {p >= 0, ||E_l p||^2 <= P_max for every AP}."""
    p = np.maximum(np.asarray(p_vec, dtype=float), 0.0)
    L = stacked.E.shape[0]
    blocks = p.reshape(L, -1)
    norms = np.sqrt((blocks**2).sum(axis=1))
    limit = np.sqrt(P_max)
    scale = np.where(norms > limit, limit / np.where(norms > 0, norms, 1.0), 1.0)
    return (blocks * scale[:, None]).ravel()


@dataclass
class PowerResult:
    p_vec: np.ndarray
    sum_rate: float
    trace: list = field(default_factory=list)
    iterations: int = 0
    inner_iterations: int = 0


def update_power(p_vec, t, stacked: StackedSystem, config: ScenarioConfig, sigma2: float):
    """Projected gradient ascent on the surrogate for fixed t.

    Returns ``(p_vec, inner_iterations)``. The returned point is feasible and
    its surrogate value is at least that of the (projected) starting point.
    """
    p = project(p_vec, stacked, config.P_max)
    t = np.asarray(t, dtype=float)
    value = surrogate(p, t, stacked, sigma2)
    if not np.any(t):
        return p, 0
    scale = np.sqrt(config.P_max)
    step = scale
    used = 0
    for _ in range(config.power_max):
        used += 1
        g = surrogate_gradient(p, t, stacked, sigma2)
        norm = np.linalg.norm(g)
        if not np.isfinite(norm):
            raise FloatingPointError("non-finite power gradient")
        if norm == 0.0:
            break
        direction = g / norm
        accepted = False
        while step >= MIN_STEP * scale:
            cand = project(p + step * direction, stacked, config.P_max)
            cv = surrogate(cand, t, stacked, sigma2)
            if cv > value:
                accepted = True
                break
            step *= config.pga_decay
        if not accepted:
            break
        gain = (cv - value) / abs(value) if value != 0 else np.inf
        p, value = cand, cv
        # let the step grow back after a success
        step = min(2.0 * step, scale)
        if gain < config.inner_rel_tol:
            break
    return p, used


def power_control(p_vec, stacked: StackedSystem, config: ScenarioConfig, sigma2: float) -> PowerResult:
    """Alternate the closed-form t update and the surrogate ascent until the sum rate settles."""
    p = project(p_vec, stacked, config.P_max)

    def rate(v):
        return float(log2_1p(sinr_from_coupling(stacked.coupling(v), sigma2)).sum())

    R = rate(p)
    trace = [R]
    outer = inner = 0
    for _ in range(config.power_max):
        outer += 1
        t = optimal_t(p, stacked, sigma2)
        cand, used = update_power(p, t, stacked, config, sigma2)
        inner += used
        Rc = rate(cand)
        if Rc < R:
            # surrogate ascent guarantees Rc >= R up to rounding; keep the better point
            break
        gain = (Rc - R) / abs(R) if R != 0 else (np.inf if Rc > R else 0.0)
        p, R = cand, Rc
        trace.append(R)
        if gain < config.inner_rel_tol:
            break
    return PowerResult(p_vec=p, sum_rate=R, trace=trace, iterations=outer, inner_iterations=inner)
