"""Detection probabilities on a pixelated array for classical light and N00N states.

Pixel ``i`` is centred at ``origin + i * pitch`` and integrates the intensity
over a top-hat core of width ``core_width``. Every distribution here is built
from two per-pixel moments of the beam envelope ``env``::

    a_i = (1/w) * integral over core i of env(x) dx
    b_i = (1/w) * integral over core i of env(x) * exp(i f x) dx

so a single photon lands on pixel ``i`` with weight ``a_i + V1 Re(e^{i phase0} b_i)``
and an N00N state fires pixels ``(i_1..i_N)`` with weight
``prod a + V1^N Re(e^{i N phase0} prod b)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

ENUMERATION_BOUND = 2_000_000

# Gauss-Legendre nodes per core for non-uniform envelopes; the integrand varies
# by at most half a fringe over one core so this is exact to rounding.
_QUAD_NODES = 24


@dataclass(frozen=True)
class GaussianEnvelope:
    center: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"envelope sigma must be positive, got {self.sigma}")

    def __call__(self, x):
        return np.exp(-0.5 * ((np.asarray(x) - self.center) / self.sigma) ** 2)


@dataclass(frozen=True)
class FringeConfig:
    """Two-mode interference pattern incident on the array.

    ``angle`` is the full angle between the two beams; the intensity fringe
    has spatial frequency ``4 pi sin(angle/2) / wavelength``.
    """

    wavelength: float
    angle: float
    phase0: float = 0.0
    singles_visibility: float = 1.0
    envelope: Optional[GaussianEnvelope] = None

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not 0 < self.angle < math.pi:
            raise ValueError(f"angle must lie in (0, pi), got {self.angle}")
        if not 0 <= self.singles_visibility <= 1:
            raise ValueError(
                f"singles_visibility must lie in [0, 1], got {self.singles_visibility}"
            )

    @classmethod
    def from_period(cls, period, wavelength=808e-9, **kwargs):
        """Pick the beam angle that produces a singles fringe of ``period``."""
        return cls(wavelength=wavelength, angle=2 * math.asin(wavelength / (2 * period)), **kwargs)

    @property
    def frequency(self):
        return 4 * math.pi * math.sin(self.angle / 2) / self.wavelength

    @property
    def period(self):
        return 2 * math.pi / self.frequency

    def centroid_period(self, n):
        """Fringe period of the n-photon centroid signal."""
        return self.period / n


@dataclass(frozen=True)
class ArrayGeometry:
    """Linear detector array. ``core_width=0`` means ideal point pixels."""

    pixel_count: int
    pitch: float
    core_width: float
    origin: float = 0.0

    def __post_init__(self):
        if self.pixel_count < 2:
            raise ValueError(f"pixel_count must be >= 2, got {self.pixel_count}")
        if not self.pitch > 0:
            raise ValueError(f"pitch must be positive, got {self.pitch}")
        if not 0 <= self.core_width <= self.pitch:
            raise ValueError(
                f"core_width must lie in [0, pitch={self.pitch}], got {self.core_width}"
            )

    @property
    def fill_factor(self):
        return self.core_width / self.pitch

    @property
    def centers(self):
        return self.origin + self.pitch * np.arange(self.pixel_count)


class SourceKind(str, Enum):
    CLASSICAL = "classical"
    IDEAL_NOON = "noon"
    MIXED = "mixed"


@dataclass(frozen=True)
class SourceModel:
    """N-photon light source.

    ``Mixed`` draws a N00N event with probability ``1 - background_fraction``
    and an uncorrelated (classical) N-photon accidental otherwise. The
    accidental light is split between two constituents ("laser" and "dc",
    shares ``background_split`` and ``1 - background_split``) with total
    singles probability ``background_singles_rate`` per pulse; these only set
    the pulse bookkeeping used for accidental estimation.
    """

    kind: SourceKind
    photon_number: int
    background_fraction: float = 0.0
    background_singles_rate: float = 0.01
    background_split: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        if self.photon_number < 1:
            raise ValueError(f"photon_number must be >= 1, got {self.photon_number}")
        if self.kind is SourceKind.IDEAL_NOON and self.photon_number < 2:
            raise ValueError("an ideal N00N source needs photon_number >= 2")
        if not 0 <= self.background_fraction <= 1:
            raise ValueError(
                f"background_fraction must lie in [0, 1], got {self.background_fraction}"
            )
        if self.kind is not SourceKind.MIXED and self.background_fraction != 0:
            raise ValueError(f"{self.kind.value} source requires background_fraction = 0")
        if not 0 < self.background_singles_rate <= 1:
            raise ValueError(
                f"background_singles_rate must lie in (0, 1], got {self.background_singles_rate}"
            )
        if not 0 <= self.background_split <= 1:
            raise ValueError(f"background_split must lie in [0, 1], got {self.background_split}")


def pixel_moments(cfg: FringeConfig, geom: ArrayGeometry):
    """Per-pixel envelope moments ``(a, b)``, each averaged over the core."""
    f = cfg.frequency
    x = geom.centers
    w = geom.core_width
    if cfg.envelope is None:
        a = np.ones(geom.pixel_count)
        b = np.exp(1j * f * x) * np.sinc(f * w / (2 * np.pi))
        return a, b
    if w == 0:
        env = cfg.envelope(x)
        return env, env * np.exp(1j * f * x)
    nodes, weights = np.polynomial.legendre.leggauss(_QUAD_NODES)
    pts = x[:, None] + 0.5 * w * nodes[None, :]
    env = cfg.envelope(pts)
    a = 0.5 * (env * weights).sum(axis=1)
    b = 0.5 * (env * np.exp(1j * f * pts) * weights).sum(axis=1)
    return a, b


def singles_distribution(cfg: FringeConfig, geom: ArrayGeometry):
    """Probability that one photon is detected on each pixel (sums to 1)."""
    a, b = pixel_moments(cfg, geom)
    p = a + cfg.singles_visibility * np.real(np.exp(1j * cfg.phase0) * b)
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if not total > 0:
        raise ValueError("no pixel receives any light: envelope lies entirely off the array")
    return p / total


def check_enumeration(pixel_count, n):
    size = pixel_count**n
    if size > ENUMERATION_BOUND:
        raise ValueError(
            f"joint tensor would have {pixel_count}^{n} = {size} entries, "
            f"above the enumeration bound {ENUMERATION_BOUND}; sample classical events instead"
        )


def _outer(vectors):
    out = vectors[0]
    for v in vectors[1:]:
        out = np.multiply.outer(out, v)
    return out


def _noon_tensor(cfg, geom, n):
    a, b = pixel_moments(cfg, geom)
    v = cfg.singles_visibility**n
    p = _outer([a] * n) + v * np.real(np.exp(1j * n * cfg.phase0) * _outer([b] * n))
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if not total > 0:
        raise ValueError("no pixel receives any light: envelope lies entirely off the array")
    return p / total


def joint_distribution(src: SourceModel, cfg: FringeConfig, geom: ArrayGeometry):
    """Probability of each ordered pixel N-tuple, as an N-dimensional array."""
    n = src.photon_number
    check_enumeration(geom.pixel_count, n)
    if src.kind is SourceKind.CLASSICAL:
        return _outer([singles_distribution(cfg, geom)] * n)
    noon = _noon_tensor(cfg, geom, n)
    if src.kind is SourceKind.IDEAL_NOON:
        return noon
    eps = src.background_fraction
    classical = _outer([singles_distribution(cfg, geom)] * n)
    return (1 - eps) * noon + eps * classical


def noon_marginal(cfg: FringeConfig, geom: ArrayGeometry, n):
    """Single-photon marginal of the N00N joint law, in closed form.

    The cosine term survives only through ``(sum_j b_j)^(n-1)``, which is
    small once the array spans many fringes.
    """
    a, b = pixel_moments(cfg, geom)
    v = cfg.singles_visibility**n
    num = a * a.sum() ** (n - 1) + v * np.real(np.exp(1j * n * cfg.phase0) * b * b.sum() ** (n - 1))
    den = a.sum() ** n + v * np.real(np.exp(1j * n * cfg.phase0) * b.sum() ** n)
    return num / den
