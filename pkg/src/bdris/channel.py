"""Propagation scenario: Rician fading over free-space path loss, blocked direct link."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .scattering import ConfigError, Mode, RisConfig

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watts(dbm: float) -> float:
    return 10 ** ((dbm - 30) / 10)


@dataclass(frozen=True)
class SceneConfig:
    N: int = 4
    K: int = 4
    carrier_frequency: float = 2.4e9
    d_tx_ris: float = 100.0
    d_ris_user: float = 10.0
    rician_factor: float = 1.0  # linear, 0 dB
    tx_power: float = 1.0  # W, 30 dBm
    noise_power: float = 1e-11  # W, -80 dBm
    path_loss_exponent: float = 2.0

    def __post_init__(self):
        for name in ("N", "K"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        for name in ("carrier_frequency", "d_tx_ris", "d_ris_user", "noise_power"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        # zero power and a pure-Rayleigh (kappa = 0) scene are legitimate corner cases
        if self.tx_power < 0 or self.rician_factor < 0 or self.path_loss_exponent < 0:
            raise ConfigError("tx_power, rician_factor and path_loss_exponent must be non-negative")

    def check_compatible(self, config: RisConfig):
        if self.K % config.L:
            raise ConfigError(f"K={self.K} users cannot be spread evenly over L={config.L} sectors")


def path_loss(d: float, f: float, exponent: float = 2.0) -> float:
    """Friis free-space gain referenced to 1 m: ``(c / (4 pi f))**2 * d**-exponent``."""
    if d < 1:
        raise ValueError(f"path loss model needs d >= 1 m, got {d}")
    if f <= 0:
        raise ValueError("carrier frequency must be positive")
    return (SPEED_OF_LIGHT / (4 * math.pi * f)) ** 2 * d ** (-exponent)


def antenna_gain(mode: Mode | RisConfig, sectors: int | None = None) -> float:
    """Ideal-sector gain of one RIS antenna covering ``4 pi / L`` (half space when reflective)."""
    if isinstance(mode, RisConfig):
        L, mode = mode.L, mode.mode
    else:
        mode = Mode(mode)
        L = {Mode.REFLECTIVE: 1, Mode.HYBRID: 2}.get(mode, sectors)
        if L is None:
            raise ConfigError("multi-sector gain needs the sector count")
    return float(max(L, 2))


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One draw of the cascaded channel.

    ``G`` maps the transmitter to the sector-1 antennas (``M_s x N``);
    row ``k`` of ``h`` maps the antennas of sector ``sector_of_user[k]``
    to user ``k``.  The received signal of user ``k`` is
    ``h[k]^H Phi_l G x``.
    """

    G: np.ndarray
    h: np.ndarray
    sector_of_user: np.ndarray
    noise_power: float

    @property
    def n_users(self) -> int:
        return self.h.shape[0]

    def scaled(self, c: float) -> ChannelRealization:
        """Scale the transmitter-side hop by ``c`` and the noise by ``c**2``."""
        return ChannelRealization(self.G * c, self.h, self.sector_of_user, self.noise_power * c * c)

    def to_dict(self) -> dict:
        cplx = lambda a: np.stack([a.real, a.imag], axis=-1).tolist()
        return {
            "G": cplx(self.G),
            "h": cplx(self.h),
            "sector_of_user": [int(s) for s in self.sector_of_user],
            "noise_power": self.noise_power,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ChannelRealization:
        cplx = lambda a: np.asarray(a, dtype=float)[..., 0] + 1j * np.asarray(a, dtype=float)[..., 1]
        return cls(cplx(d["G"]), cplx(d["h"]), np.asarray(d["sector_of_user"], dtype=int),
                   float(d["noise_power"]))

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> ChannelRealization:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def steering_vector(n: int, angle: float) -> np.ndarray:
    """Half-wavelength ULA response, unit-modulus entries."""
    return np.exp(1j * math.pi * np.arange(n) * math.sin(angle))


def user_sectors(K: int, L: int) -> np.ndarray:
    # user k (1-based) sits in sector ceil(k L / K)
    return np.array([math.ceil((k + 1) * L / K) - 1 for k in range(K)], dtype=int)


def _rician_weights(kappa: float) -> tuple[float, float]:
    if math.isinf(kappa):
        return 1.0, 0.0
    return math.sqrt(kappa / (1 + kappa)), math.sqrt(1 / (1 + kappa))


def small_scale(rows: int, cols: int, kappa: float, rng: np.random.Generator,
                los: np.ndarray | None = None) -> np.ndarray:
    """Unit-power Rician matrix; ``los`` defaults to a random-angle rank-one ULA product."""
    w_los, w_nlos = _rician_weights(kappa)
    if los is None:
        a = steering_vector(rows, rng.uniform(-math.pi / 2, math.pi / 2))
        b = steering_vector(cols, rng.uniform(-math.pi / 2, math.pi / 2))
        los = np.outer(a, b.conj())
    nlos = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / math.sqrt(2)
    return w_los * los + w_nlos * nlos


def large_scale(scene: SceneConfig, config: RisConfig) -> tuple[float, float]:
    """Power gains of the transmitter->RIS and RIS->user hops."""
    g_ris = antenna_gain(config)
    f, n = scene.carrier_frequency, scene.path_loss_exponent
    return (path_loss(scene.d_tx_ris, f, n) * g_ris, path_loss(scene.d_ris_user, f, n) * g_ris)


def realize(scene: SceneConfig, config: RisConfig, rng) -> ChannelRealization:
    scene.check_compatible(config)
    rng = np.random.default_rng(rng)
    Ms, N, K = config.sector_size, scene.N, scene.K
    beta_g, beta_h = large_scale(scene, config)
    G = math.sqrt(beta_g) * small_scale(Ms, N, scene.rician_factor, rng)
    h = np.stack([
        math.sqrt(beta_h) * small_scale(Ms, 1, scene.rician_factor, rng)[:, 0]
        for _ in range(K)
    ])
    return ChannelRealization(G, h, user_sectors(K, config.L), scene.noise_power)
