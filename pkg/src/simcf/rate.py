"""SINR and sum-rate evaluation in the per-AP and the stacked (all-AP) forms.

Powers are carried in watts as an (L, U) array; the antenna amplitude is
sqrt(p). Associations are (L, U, K) 0/1 arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, PropagationSet, cascade_all, compute_cascade


def log2_1p(x):
    """log2(1 + x) without losing the low bits of small x."""
    return np.log1p(x) / np.log(2.0)


@dataclass(frozen=True)
class RateReport:
    gamma: np.ndarray
    rate: np.ndarray
    sum_rate: float

    @classmethod
    def from_sinr(cls, gamma) -> "RateReport":
        gamma = np.asarray(gamma, dtype=float)
        rate = log2_1p(gamma)
        return cls(gamma=gamma, rate=rate, sum_rate=float(rate.sum()))


def amplitudes(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if np.any(P < 0):
        raise ValueError("powers must be non-negative")
    return np.sqrt(P)


def antenna_gains(channels: ChannelSet, G: np.ndarray, prop: PropagationSet) -> np.ndarray:
    """F[l, k, u] = (h_sim[l,k]^H G_l W_{l,1})_u for precomputed cascades ``G`` (L, N, N)."""
    return (channels.h_sim.conj() @ G) @ prop.W_input


def coupling_from_gains(F: np.ndarray, A: np.ndarray, s: np.ndarray) -> np.ndarray:
    """C[k, j] = sum_l sum_u F[l,k,u] s[l,u] a[l,u,j]: UE k's received coefficient on stream j."""
    return np.einsum("lku,lu,luj->kj", F, s, A, optimize=True)


def coupling(channels: ChannelSet, phases: np.ndarray, prop: PropagationSet, A: np.ndarray, P: np.ndarray) -> np.ndarray:
    F = antenna_gains(channels, cascade_all(phases, prop), prop)
    return coupling_from_gains(F, A, amplitudes(P))


def sinr_from_coupling(C: np.ndarray, sigma2: float) -> np.ndarray:
    power = np.abs(C) ** 2
    desired = np.diag(power)
    interference = power.sum(axis=1) - desired
    return desired / (interference + sigma2)


def sinr(k: int, channels: ChannelSet, phases, prop: PropagationSet, A, P, sigma2: float) -> float:
    """SINR of UE k evaluated term by term, AP by AP."""
    if sigma2 <= 0:
        raise ValueError("noise power must be positive")
    A = np.asarray(A)
    s = amplitudes(P)
    L, _, K = A.shape
    received = np.zeros(K, dtype=complex)
    for l in range(L):
        G = compute_cascade(phases[l], prop, l)
        row = channels.h_sim[l, k].conj() @ G @ prop.W_input[l]  # 1 x U
        for j in range(K):
            received[j] += row @ (s[l] * A[l, :, j])
    power = np.abs(received) ** 2
    return float(power[k] / (power.sum() - power[k] + sigma2))


def sum_rate(channels: ChannelSet, phases, prop: PropagationSet, A, P, sigma2: float) -> RateReport:
    C = coupling(channels, phases, prop, A, P)
    return RateReport.from_sinr(sinr_from_coupling(C, sigma2))


@dataclass(frozen=True)
class StackedSystem:
    """All APs stacked into one linear model.

    h: (K, N*L) stacked SIM channels; Q: (N*L, U*L) block diagonal with
    blocks G_l W_{l,1}; A_sel: (K, U*L) diagonals of the per-UE selectors;
    p_vec: (U*L,) amplitudes; E: (L, U*L) diagonals of the per-AP selectors.
    """

    h: np.ndarray
    Q: np.ndarray
    A_sel: np.ndarray
    p_vec: np.ndarray
    E: np.ndarray

    @property
    def gains(self) -> np.ndarray:
        """Row k holds h_k^H Q, shape (K, U*L)."""
        return self.h.conj() @ self.Q

    def coupling(self, p_vec=None) -> np.ndarray:
        p = self.p_vec if p_vec is None else p_vec
        return (self.gains * p[None, :]) @ self.A_sel.T

    def to_power(self, p_vec=None) -> np.ndarray:
        p = self.p_vec if p_vec is None else p_vec
        L = self.E.shape[0]
        return (np.asarray(p) ** 2).reshape(L, -1)


def build_stacked(channels: ChannelSet, phases, prop: PropagationSet, A, P) -> StackedSystem:
    A = np.asarray(A)
    P = np.asarray(P, dtype=float)
    L, U, K = A.shape
    N = prop.N
    if channels.h_sim.shape != (L, K, N) or P.shape != (L, U) or np.shape(phases)[:1] != (L,):
        raise ValueError("dimension mismatch between channels, phases, association and powers")
    G = cascade_all(phases, prop)
    Q = np.zeros((N * L, U * L), dtype=complex)
    for l in range(L):
        Q[l * N:(l + 1) * N, l * U:(l + 1) * U] = G[l] @ prop.W_input[l]
    h = channels.h_sim.transpose(1, 0, 2).reshape(K, L * N)
    A_sel = A.transpose(2, 0, 1).reshape(K, L * U).astype(float)
    E = np.kron(np.eye(L), np.ones(U))
    return StackedSystem(h=h, Q=Q, A_sel=A_sel, p_vec=amplitudes(P).ravel(), E=E)


def stacked_sinr(stacked: StackedSystem, sigma2: float, p_vec=None) -> np.ndarray:
    return sinr_from_coupling(stacked.coupling(p_vec), sigma2)


def interference_free_bound(channels: ChannelSet, phases, prop: PropagationSet, A, P_max: float, sigma2: float) -> float:
    """Sum rate with every antenna at full AP power and all cross terms dropped.

    Uses |sum_i x_i| <= sum_i |x_i| and per-AP amplitudes at most sqrt(P_max),
    so it bounds the rate for the given phases over all feasible powers.
    """
    F = antenna_gains(channels, cascade_all(phases, prop), prop)
    A = np.asarray(A)
    s = np.full(A.shape[:2], np.sqrt(P_max))
    peak = np.einsum("lku,lu,luk->k", np.abs(F), s, A) ** 2
    return float(log2_1p(peak / sigma2).sum())
