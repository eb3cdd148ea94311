"""Vortex particle domain types, distribution generators, and particle file I/O.

A particle is a regularized point vortex: a position, a signed circulation
``gamma``, and a Gaussian core radius ``sigma``.  Generators produce seeded,
fully reproducible particle sets on a square domain; the three shipped
distributions are study stand-ins (uniform mixed-sign circulation, a single
all-positive Gaussian patch, and a pair of opposite-sign patches).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

#: Identity of the pseudo-random generator behind ``generate_particles``.
#: Recorded in sweep output so results stay attributable to one stream.
GENERATOR_ID = "numpy-pcg64"

DISTRIBUTIONS = ("uniform_random", "gaussian_patch", "two_patches")


class ParticleFileError(ValueError):
    """Raised for malformed particle CSV files (carries the offending line)."""


@dataclass(frozen=True, slots=True)
class Particle:
    """One regularized vortex: position, circulation, core radius."""

    x: float
    y: float
    gamma: float
    sigma: float


@dataclass(frozen=True, slots=True)
class Domain:
    """Axis-aligned square ``[xmin, xmin+side] x [ymin, ymin+side]``."""

    xmin: float
    ymin: float
    side: float

    def __post_init__(self) -> None:
        if not (self.side > 0.0):
            raise ValueError(f"domain side must be > 0, got {self.side}")

    @property
    def xmax(self) -> float:
        return self.xmin + self.side

    @property
    def ymax(self) -> float:
        return self.ymin + self.side

    @property
    def center(self) -> tuple[float, float]:
        return (self.xmin + 0.5 * self.side, self.ymin + 0.5 * self.side)

    def contains(self, x: float, y: float) -> bool:
        """Closed-square membership (max edges included; they clamp inward)."""
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax


UNIT_DOMAIN = Domain(0.0, 0.0, 1.0)


def generate_particles(
    distribution: str,
    n: int,
    seed: int,
    domain: Domain = UNIT_DOMAIN,
    sigma: float = 0.005,
) -> list[Particle]:
    """Generate ``n`` seeded particles on ``domain``.

    Positions are uniform over the domain for every distribution; the stream
    layout (one (n, 2) position draw, then one circulation draw) is part of
    the reproducibility contract and must not change.

    Distributions
    -------------
    ``uniform_random``
        gamma uniform in [-1, 1] (mixed sign).
    ``gaussian_patch``
        gamma = exp(-r^2 / (2 s^2)) * side^2 / n with s = side / 8 and r the
        distance to the domain center; all circulations positive.
    ``two_patches``
        superposition of two such patches of opposite sign centered at
        (1/4, 1/2) and (3/4, 1/2) of the domain; net circulation near zero.
    """
    if n < 1:
        raise ValueError(f"particle count must be >= 1, got {n}")
    if distribution not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {distribution!r}, expected one of {DISTRIBUTIONS}")
    if not (sigma > 0.0):
        raise ValueError(f"core radius sigma must be > 0, got {sigma}")

    rng = np.random.default_rng(seed)
    pos = rng.uniform(size=(n, 2))
    x = domain.xmin + domain.side * pos[:, 0]
    y = domain.ymin + domain.side * pos[:, 1]

    s = domain.side / 8.0
    if distribution == "uniform_random":
        gamma = rng.uniform(-1.0, 1.0, n)
    elif distribution == "gaussian_patch":
        cx, cy = domain.center
        r2 = (x - cx) ** 2 + (y - cy) ** 2
        gamma = np.exp(-r2 / (2.0 * s * s)) * domain.side**2 / n
    else:  # two_patches
        cx1 = domain.xmin + 0.25 * domain.side
        cx2 = domain.xmin + 0.75 * domain.side
        cy = domain.ymin + 0.5 * domain.side
        r2a = (x - cx1) ** 2 + (y - cy) ** 2
        r2b = (x - cx2) ** 2 + (y - cy) ** 2
        gamma = (np.exp(-r2a / (2.0 * s * s)) - np.exp(-r2b / (2.0 * s * s))) * domain.side**2 / n

    return [Particle(float(xi), float(yi), float(gi), sigma) for xi, yi, gi in zip(x, y, gamma)]


def to_arrays(particles: Sequence[Particle]) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Unpack a particle list into (x, y, gamma, sigma) float64 arrays."""
    n = len(particles)
    x = np.empty(n)
    y = np.empty(n)
    gamma = np.empty(n)
    sigma = np.empty(n)
    for i, pt in enumerate(particles):
        x[i] = pt.x
        y[i] = pt.y
        gamma[i] = pt.gamma
        sigma[i] = pt.sigma
    return x, y, gamma, sigma


def enclosing_domain(particles: Sequence[Particle]) -> Domain:
    """Smallest axis-aligned square containing every particle.

    Used when particles come from a file without an explicit domain.  Points
    on the max edges are valid (they clamp into the last cell row/column).
    Degenerate extents fall back to a unit side.
    """
    x, y, _, _ = to_arrays(particles)
    xmin = float(x.min())
    ymin = float(y.min())
    side = float(max(x.max() - xmin, y.max() - ymin))
    if side <= 0.0:
        side = 1.0
    return Domain(xmin, ymin, side)


def write_particles(path, particles: Iterable[Particle]) -> None:
    """Write particles as CSV with header ``x,y,gamma,sigma``.

    Values carry 17 significant digits so a write/read round trip is exact.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y", "gamma", "sigma"])
        for pt in particles:
            writer.writerow([format(v, ".17g") for v in (pt.x, pt.y, pt.gamma, pt.sigma)])


def read_particles(path) -> list[Particle]:
    """Read a particle CSV written by :func:`write_particles`.

    Raises :class:`ParticleFileError` naming the 1-based line of the first
    malformed row; a file with only the header yields an empty list.
    """
    particles: list[Particle] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParticleFileError(f"{path}: empty file, expected header x,y,gamma,sigma") from None
        if [h.strip() for h in header] != ["x", "y", "gamma", "sigma"]:
            raise ParticleFileError(f"{path}: bad header {header!r}, expected x,y,gamma,sigma")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue  # tolerate blank trailing lines
            if len(row) != 4:
                raise ParticleFileError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                x, y, gamma, sigma = (float(v) for v in row)
            except ValueError as exc:
                raise ParticleFileError(f"{path}:{lineno}: {exc}") from None
            particles.append(Particle(x, y, gamma, sigma))
    return particles
