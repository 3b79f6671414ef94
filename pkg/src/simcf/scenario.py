"""Scenario configuration, deployment geometry and seeded random streams."""

from __future__ import annotations

import dataclasses
import math
import zlib
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class InvalidConfig(ValueError):
    """Raised when a configuration field violates its invariant."""

    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason
        super().__init__(f"invalid config field '{key}': {reason}")


@dataclass(frozen=True)
class ScenarioConfig:
    # counts
    L: int = 6
    U: int = 2
    K: int = 4
    M: int = 2
    Nx: int = 5
    Ny: int = 5
    # radio
    carrier_freq: float = 28e9
    bandwidth: float = 10e6
    noise_density: float = -174.0
    P_max: float = 0.2
    # geometry
    area_side: float = 200.0
    ap_height: float = 15.0
    ue_height: float = 1.65
    sim_thickness: float = 5.0
    element_spacing: float = 0.5
    # path loss
    pathloss_exponent: float = 3.5
    d0: float = 1.0
    # optimizer
    ao_rel_tol: float = 1e-3
    inner_rel_tol: float = 1e-4
    fd_step: float = 1e-6
    ao_max: int = 20
    pga_max: int = 100
    power_max: int = 100
    pga_init_step: float = 0.1
    pga_decay: float = 0.5
    multistart: int = 3
    seed: int = 0

    def __post_init__(self):
        self.validate()

    @property
    def N(self) -> int:
        return self.Nx * self.Ny

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def layer_gap(self) -> float:
        """Distance between adjacent planes of the stack (antennas included), in m."""
        return self.sim_thickness * self.wavelength / self.M

    @property
    def noise_power(self) -> float:
        return noise_power(self.noise_density, self.bandwidth)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def validate(self) -> None:
        for key in ("L", "U", "K", "M", "Nx", "Ny", "ao_max", "pga_max", "power_max", "multistart"):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InvalidConfig(key, f"expected an integer, got {value!r}")
            if value < 1:
                raise InvalidConfig(key, f"must be >= 1, got {value}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise InvalidConfig("seed", f"expected an integer, got {self.seed!r}")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed", "must fit in an unsigned 64-bit integer")
        positive = (
            "carrier_freq", "bandwidth", "P_max", "d0", "sim_thickness", "element_spacing",
            "ao_rel_tol", "inner_rel_tol", "fd_step", "pga_init_step",
        )
        for key in positive:
            value = getattr(self, key)
            if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
                raise InvalidConfig(key, f"expected a finite number, got {value!r}")
            if value <= 0:
                raise InvalidConfig(key, f"must be > 0, got {value}")
        if not self.pathloss_exponent > 2:
            raise InvalidConfig("pathloss_exponent", f"must be > 2, got {self.pathloss_exponent}")
        if not 0 < self.pga_decay < 1:
            raise InvalidConfig("pga_decay", f"must lie in (0, 1), got {self.pga_decay}")
        if self.area_side < 0:
            raise InvalidConfig("area_side", "must be >= 0")
        if not math.isfinite(self.noise_density):
            raise InvalidConfig("noise_density", "must be finite")


@dataclass(frozen=True)
class Layout:
    """Positions in metres. Antenna and meta-atom offsets are in the SIM's local frame."""

    ap_positions: np.ndarray  # (L, 3)
    ue_positions: np.ndarray  # (K, 3)
    antenna_offsets: np.ndarray  # (U, 3), same for every AP
    meta_atom_offsets: np.ndarray  # (M, N, 3)

    @property
    def antenna_positions(self) -> np.ndarray:
        """Absolute antenna positions, shape (L, U, 3)."""
        return self.ap_positions[:, None, :] + self.antenna_offsets[None, :, :]


# Stable integer ids for stream purposes; new tags hash by CRC32.
_TAGS = {"layout": 1, "channel": 2, "phases": 3, "multistart": 4}


def rng_stream(seed: int, trial: int, tag: str, *extra: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, trial, tag, *extra)``.

    Streams with different keys are statistically independent, so trials can
    be evaluated in any order or in parallel with identical results.
    """
    tag_id = _TAGS.get(tag)
    if tag_id is None:
        tag_id = zlib.crc32(tag.encode()) + 1000
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial), tag_id, *map(int, extra)))
    return np.random.Generator(np.random.Philox(seq))


def noise_power(noise_density: float, bandwidth: float) -> float:
    """Noise power in watts for a density in dBm/Hz over ``bandwidth`` Hz."""
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth}")
    return 10.0 ** ((noise_density + 10.0 * math.log10(bandwidth) - 30.0) / 10.0)


def reference_gain(config: ScenarioConfig) -> float:
    """Free-space gain at the reference distance, (lambda / (4 pi d0))^2."""
    return (config.wavelength / (4.0 * math.pi * config.d0)) ** 2


def path_loss(d, config: ScenarioConfig):
    """Large-scale gain beta = C0 * (d / d0)^(-exponent), for d > d0.

    Accepts a scalar or an array of distances.
    """
    d_arr = np.asarray(d, dtype=float)
    if np.any(~(d_arr > config.d0)):
        raise ValueError(f"distance must exceed the reference distance d0={config.d0} m")
    beta = reference_gain(config) * (d_arr / config.d0) ** (-config.pathloss_exponent)
    return float(beta) if beta.ndim == 0 else beta


def grid_offsets(Nx: int, Ny: int, spacing: float) -> np.ndarray:
    """Centred Nx-by-Ny planar grid in the z=0 plane, x-major ordering, shape (Nx*Ny, 2)."""
    xs = (np.arange(Nx) - (Nx - 1) / 2) * spacing
    ys = (np.arange(Ny) - (Ny - 1) / 2) * spacing
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def build_scenario(config: ScenarioConfig, trial: int = 0) -> Layout:
    """Drop APs and UEs uniformly over the square area and lay out the SIM stack.

    The stack geometry is local to each AP: antennas sit on a uniform linear
    array at z=0 and layer m (1-based) at z = m * layer_gap.
    """
    config.validate()
    rng = rng_stream(config.seed, trial, "layout")
    side = config.area_side
    ap_xy = rng.uniform(0.0, 1.0, size=(config.L, 2)) * side
    ue_xy = rng.uniform(0.0, 1.0, size=(config.K, 2)) * side
    ap = np.column_stack([ap_xy, np.full(config.L, config.ap_height)])
    ue = np.column_stack([ue_xy, np.full(config.K, config.ue_height)])

    lam = config.wavelength
    spacing = config.element_spacing * lam
    ant = np.zeros((config.U, 3))
    ant[:, 0] = (np.arange(config.U) - (config.U - 1) / 2) * spacing

    plane = grid_offsets(config.Nx, config.Ny, spacing)
    atoms = np.zeros((config.M, config.N, 3))
    for m in range(config.M):
        atoms[m, :, :2] = plane
        atoms[m, :, 2] = (m + 1) * config.layer_gap
    return Layout(ap_positions=ap, ue_positions=ue, antenna_offsets=ant, meta_atom_offsets=atoms)


# ---------------------------------------------------------------------------
# scenario files

_FILE_SCHEMA = {
    "counts": {"L": "L", "U": "U", "K": "K", "M": "M", "Nx": "Nx", "Ny": "Ny"},
    "radio": {
        "carrier_freq_hz": "carrier_freq",
        "bandwidth_hz": "bandwidth",
        "noise_density_dbm_hz": "noise_density",
        "p_max_w": "P_max",
    },
    "geometry": {
        "area_side_m": "area_side",
        "ap_height_m": "ap_height",
        "ue_height_m": "ue_height",
        "sim_thickness_lambda": "sim_thickness",
        "element_spacing_lambda": "element_spacing",
    },
    "pathloss": {"exponent": "pathloss_exponent", "d0_m": "d0"},
    "opt": {
        "ao_rel_tol": "ao_rel_tol",
        "inner_rel_tol": "inner_rel_tol",
        "ao_max": "ao_max",
        "pga_max": "pga_max",
        "power_max": "power_max",
        "pga_init_step": "pga_init_step",
        "pga_decay": "pga_decay",
        "multistart": "multistart",
    },
}
# accepted but not required
_OPTIONAL = {"opt": {"fd_step": "fd_step"}}


def config_from_dict(data: dict) -> ScenarioConfig:
    """Parse the nested scenario-file mapping. Missing sections fall back to defaults."""
    if not isinstance(data, dict):
        raise InvalidConfig("<root>", "scenario file must hold a JSON object")
    allowed = set(_FILE_SCHEMA) | {"seed"}
    for key in data:
        if key not in allowed:
            raise InvalidConfig(key, "unknown top-level key")
    kwargs = {}
    for section, fields in _FILE_SCHEMA.items():
        if section not in data:
            continue
        block = data[section]
        if not isinstance(block, dict):
            raise InvalidConfig(section, "expected an object")
        known = dict(fields, **_OPTIONAL.get(section, {}))
        for key, value in block.items():
            if key not in known:
                raise InvalidConfig(f"{section}.{key}", "unknown key")
            if value is None or isinstance(value, (bool, str, list, dict)):
                raise InvalidConfig(f"{section}.{key}", f"expected a number, got {value!r}")
            kwargs[known[key]] = value
    if "seed" in data:
        kwargs["seed"] = data["seed"]
    try:
        return ScenarioConfig(**kwargs)
    except InvalidConfig as exc:
        raise InvalidConfig(_file_key(exc.key), exc.reason) from None


def config_to_dict(config: ScenarioConfig) -> dict:
    out = {}
    for section, fields in _FILE_SCHEMA.items():
        known = dict(fields, **_OPTIONAL.get(section, {}))
        out[section] = {key: getattr(config, attr) for key, attr in known.items()}
    out["seed"] = config.seed
    return out


def _file_key(attr: str) -> str:
    for section, fields in _FILE_SCHEMA.items():
        for key, name in dict(fields, **_OPTIONAL.get(section, {})).items():
            if name == attr:
                return f"{section}.{key}"
    return attr
