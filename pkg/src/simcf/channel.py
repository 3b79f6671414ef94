"""Diffraction matrices of the metasurface stack and correlated Rayleigh channels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Layout, ScenarioConfig, path_loss


@dataclass(frozen=True)
class PropagationSet:
    """Fixed transmission coefficients of every SIM.

    ``W_input[l]`` maps the U antenna feeds onto layer 1 (N x U) and
    ``W_layer[l, m - 2]`` maps layer m-1 onto layer m (N x N) for m = 2..M.
    """

    W_input: np.ndarray  # (L, N, U)
    W_layer: np.ndarray  # (L, M-1, N, N)

    @property
    def L(self) -> int:
        return self.W_input.shape[0]

    @property
    def N(self) -> int:
        return self.W_input.shape[1]

    @property
    def U(self) -> int:
        return self.W_input.shape[2]

    @property
    def M(self) -> int:
        return self.W_layer.shape[1] + 1


@dataclass(frozen=True)
class ChannelSet:
    h_sim: np.ndarray  # (L, K, N), last layer of SIM l -> UE k
    beta: np.ndarray  # (L, K)
    R: np.ndarray  # (N, N)


def diffraction_coefficient(d, gap: float, area: float, wavelength: float):
    """Rayleigh-Sommerfeld coefficient between two elements on parallel planes.

    ``d`` is the element distance, ``gap`` the plane separation (so the
    obliquity factor is gap/d) and ``area`` the element area dx*dy.
    """
    d = np.asarray(d, dtype=float)
    cos_chi = gap / d
    return (area * cos_chi / d) * (1.0 / (2 * np.pi * d) - 1j / wavelength) * np.exp(2j * np.pi * d / wavelength)


def _pairwise(rx: np.ndarray, tx: np.ndarray) -> np.ndarray:
    return np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=-1)


def build_propagation(layout: Layout, config: ScenarioConfig) -> PropagationSet:
    lam = config.wavelength
    gap = config.layer_gap
    area = (config.element_spacing * lam) ** 2
    atoms = layout.meta_atom_offsets
    ant = layout.antenna_offsets.copy()

    d_in = _pairwise(atoms[0], ant)
    if np.any(d_in <= 0):
        raise ValueError("coincident antenna and meta-atom")
    w_in = diffraction_coefficient(d_in, gap, area, lam)

    w_layers = np.empty((config.M - 1, config.N, config.N), dtype=complex)
    for m in range(1, config.M):
        d = _pairwise(atoms[m], atoms[m - 1])
        if np.any(d <= 0):
            raise ValueError(f"coincident meta-atoms between layers {m} and {m + 1}")
        w_layers[m - 1] = diffraction_coefficient(d, gap, area, lam)

    # identical stacks at every AP
    L = config.L
    return PropagationSet(
        W_input=np.repeat(w_in[None], L, axis=0),
        W_layer=np.repeat(w_layers[None], L, axis=0),
    )


def sinc(x):
    """Normalised sinc, exactly zero at nonzero integers and one at zero."""
    x = np.asarray(x, dtype=float)
    out = np.sinc(x)
    nearest = np.rint(x)
    on_int = (np.abs(x - nearest) <= 1e-12 * np.maximum(1.0, np.abs(x))) & (nearest != 0)
    out = np.where(on_int, 0.0, out)
    return np.where(x == 0, 1.0, out)


def build_correlation(config: ScenarioConfig) -> np.ndarray:
    """Isotropic-scattering correlation of the output layer, R[n, n'] = sinc(2 d / lambda)."""
    ix, iy = np.meshgrid(np.arange(config.Nx), np.arange(config.Ny), indexing="ij")
    idx = np.stack([ix.ravel(), iy.ravel()], axis=1).astype(float)
    # distances in wavelengths straight from integer index offsets keeps sinc args exact
    diff = idx[:, None, :] - idx[None, :, :]
    d_lambda = config.element_spacing * np.sqrt((diff**2).sum(axis=-1))
    return sinc(2.0 * d_lambda)


def correlation_factor(R: np.ndarray, rel_floor: float = 1e-12) -> np.ndarray:
    """F with F @ F^H = R after clamping tiny or negative eigenvalues to zero."""
    if not np.all(np.isfinite(R)):
        raise np.linalg.LinAlgError("correlation matrix has non-finite entries")
    vals, vecs = np.linalg.eigh(R)
    cutoff = rel_floor * max(vals.max(), 0.0)
    vals = np.where(vals < cutoff, 0.0, vals)
    return vecs * np.sqrt(vals)[None, :]


def link_distances(layout: Layout) -> np.ndarray:
    """3-D AP-to-UE distances, shape (L, K)."""
    return _pairwise(layout.ap_positions, layout.ue_positions)


def draw_correlated(F: np.ndarray, beta, rng: np.random.Generator, size=()) -> np.ndarray:
    """Samples of CN(0, beta * F F^H), shape (*size, N); ``beta`` broadcasts against ``size``."""
    N = F.shape[0]
    size = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
    shape = (*size, N)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return np.sqrt(np.asarray(beta, dtype=float))[..., None] * (z @ F.T)


def sample_channels(layout: Layout, config: ScenarioConfig, rng: np.random.Generator, R=None) -> ChannelSet:
    if R is None:
        R = build_correlation(config)
    beta = np.atleast_2d(path_loss(link_distances(layout), config))
    h = draw_correlated(correlation_factor(R), beta, rng, size=beta.shape)
    return ChannelSet(h_sim=h, beta=beta, R=R)


def compute_cascade(phases: np.ndarray, prop: PropagationSet, l: int) -> np.ndarray:
    """G_l = Phi_M W_M ... Phi_2 W_2 Phi_1 for one AP; ``phases`` has shape (M, N)."""
    phases = np.asarray(phases)
    G = np.diag(np.exp(1j * phases[0]))
    for m in range(1, phases.shape[0]):
        G = np.exp(1j * phases[m])[:, None] * (prop.W_layer[l, m - 1] @ G)
    return G


def cascade_all(phases: np.ndarray, prop: PropagationSet) -> np.ndarray:
    """Batched cascade for all APs; ``phases`` has shape (L, M, N), result (L, N, N)."""
    theta = np.exp(1j * np.asarray(phases))
    L, M, N = theta.shape
    G = np.zeros((L, N, N), dtype=complex)
    G[:, np.arange(N), np.arange(N)] = theta[:, 0]
    for m in range(1, M):
        G = theta[:, m, :, None] * (prop.W_layer[:, m - 1] @ G)
    return G


def effective_channel(channels: ChannelSet, phases: np.ndarray, prop: PropagationSet, l: int, k: int) -> np.ndarray:
    """Antenna-domain channel h_{l,k} = W_{l,1}^H G_l^H h_sim[l, k] (length U)."""
    G = compute_cascade(phases[l], prop, l)
    return prop.W_input[l].conj().T @ (G.conj().T @ channels.h_sim[l, k])
