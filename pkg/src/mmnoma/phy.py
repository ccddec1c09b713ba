"""Single-path LoS mmWave channel, steering vectors and analog beams."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

BOLTZMANN_DBM_HZ = -174.0


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


def lin_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def db_to_lin(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def thermal_noise_watt(bandwidth_hz: float, noise_figure_db: float = 9.0) -> float:
    """Receiver noise power in Watts over ``bandwidth_hz``."""
    dbm = BOLTZMANN_DBM_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db
    return float(dbm_to_watt(dbm))


@dataclass(frozen=True)
class PhyConfig:
    num_antennas: int = 16
    antenna_spacing_ratio: float = 0.5
    num_paths: int = 1
    pathloss_exponent: float = 2.0
    gain_variance: float = 1.0
    carrier_frequency: float = 30e9
    bandwidth: float = 20e6
    noise_figure_db: float = 9.0
    noise_variance: float | None = None

    def __post_init__(self):
        if self.num_antennas < 1:
            raise ConfigError("num_antennas", "must be >= 1")
        if self.antenna_spacing_ratio <= 0:
            raise ConfigError("antenna_spacing_ratio", "must be > 0")
        if self.num_paths < 1:
            raise ConfigError("num_paths", "must be >= 1")
        if self.pathloss_exponent < 0:
            raise ConfigError("pathloss_exponent", "must be >= 0")
        if self.gain_variance <= 0:
            raise ConfigError("gain_variance", "must be > 0")
        if self.bandwidth <= 0:
            raise ConfigError("bandwidth", "must be > 0")
        if self.noise_variance is not None and self.noise_variance <= 0:
            raise ConfigError("noise_variance", "must be > 0")

    @property
    def noise(self) -> float:
        """Noise variance in Watts; derived from thermal noise when unset."""
        if self.noise_variance is not None:
            return self.noise_variance
        return thermal_noise_watt(self.bandwidth, self.noise_figure_db)


@dataclass(frozen=True)
class LinkGeometry:
    distance: float
    aod: float

    def __post_init__(self):
        if self.distance < 0:
            raise ValueError("distance must be non-negative")


@dataclass(frozen=True)
class ChannelVector:
    coeffs: np.ndarray
    complex_gain: complex


@dataclass(frozen=True)
class BeamformingWeight:
    coeffs: np.ndarray


def steering_vector(aod: float, phy: PhyConfig) -> np.ndarray:
    """ULA response ``exp(-i 2 pi m (D/lambda) sin(aod))`` for m = 0..M-1."""
    m = np.arange(phy.num_antennas)
    return np.exp(-1j * 2.0 * np.pi * m * phy.antenna_spacing_ratio * np.sin(aod))


def pathloss_amplitude(distance, phy: PhyConfig):
    """Amplitude attenuation ``1 / (sqrt(L) (1 + d^eta))``."""
    d = np.asarray(distance, dtype=float)
    return 1.0 / (math.sqrt(phy.num_paths) * (1.0 + d ** phy.pathloss_exponent))


def channel_vector(geom: LinkGeometry, gain: complex, phy: PhyConfig) -> ChannelVector:
    coeffs = steering_vector(geom.aod, phy) * (gain * pathloss_amplitude(geom.distance, phy))
    return ChannelVector(coeffs=coeffs, complex_gain=complex(gain))


def draw_complex_gain(rng: np.random.Generator, phy: PhyConfig, size=None):
    """Circularly-symmetric complex normal draw(s) with variance ``gain_variance``."""
    scale = math.sqrt(phy.gain_variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def beamforming_weight(centroid_aod: float, phy: PhyConfig) -> BeamformingWeight:
    """Matched analog beam toward ``centroid_aod``, unit norm."""
    a = steering_vector(centroid_aod, phy)
    return BeamformingWeight(coeffs=a / math.sqrt(phy.num_antennas))


def effective_gain(h: ChannelVector | np.ndarray, w: BeamformingWeight | np.ndarray) -> float:
    """Beamformed power gain ``|h^H w|^2``."""
    hv = h.coeffs if isinstance(h, ChannelVector) else np.asarray(h)
    wv = w.coeffs if isinstance(w, BeamformingWeight) else np.asarray(w)
    if hv.shape != wv.shape:
        raise ConfigError("num_antennas", f"dimension mismatch {hv.shape} vs {wv.shape}")
    return float(abs(np.vdot(hv, wv)) ** 2)
