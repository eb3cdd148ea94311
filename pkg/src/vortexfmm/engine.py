"""The O(N) evaluation pipeline over the uniform quadtree.

Passes, in order:

1. upward: particle-to-multipole at the leaves, then multipole shifts up to
   level 2 (levels 0 and 1 carry no expansions; their interaction lists are
   empty).
2. translate: multipole-to-local across every cell's interaction list.
3. downward: local shifts from parents, completing each leaf's local
   expansion with the far field of everything outside its neighbor ring.
4. evaluation: local expansions at the targets plus direct summation over the
   leaf's own and adjacent cells.  The regularized kernel acts only here; the
   far field always sees point vortices, which is why particle cores must
   stay small next to the leaf size (warned about at sigma > half_width / 2).

Translations are grouped by index offset: at a fixed level every pair at the
same (dx, dy) shares one translation matrix, so each group is a single matrix
product over the stacked source coefficients.  Per destination the groups
apply in row-major source order, which pins the floating-point accumulation
order and makes results bitwise reproducible.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import expansions
from .expansions import BoundParams, truncation_bound
from .kernels import TWO_PI, KernelKind
from .model import Domain, Particle, enclosing_domain, to_arrays
from .quadtree import OutOfDomainError, Tree, build_tree, grid_indices

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class FmmConfig:
    """Run parameters: tree depth, truncation order, near-field kernel."""

    levels: int
    order: int
    kernel: KernelKind = KernelKind.POINT_VORTEX

    def validate(self) -> None:
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")
        if self.order < 0:
            raise ValueError(f"order must be >= 0, got {self.order}")
        if self.order > expansions.ORDER_CAP:
            raise ValueError(f"order {self.order} exceeds cap {expansions.ORDER_CAP}")


@dataclass
class FmmRunStats:
    """Phase timings (seconds) and exact operation counters for one run."""

    n: int
    levels: int
    order: int
    t_build: float = 0.0
    t_upward: float = 0.0
    t_m2l: float = 0.0
    t_downward: float = 0.0
    t_eval: float = 0.0
    t_near: float = 0.0
    t_total: float = 0.0
    m2l_count: int = 0
    near_pair_count: int = 0
    sigma_guard_ok: bool = True


def _il_offsets(px: int, py: int) -> list[tuple[int, int]]:
    """Interaction-list index offsets for destination parity (px, py), row-major.

    Children of the parent's neighbors span dx in [-2-px, 3-px] and dy in
    [-2-py, 3-py]; dropping the 3x3 near block leaves the 27 translation
    offsets of that parity class.
    """
    out = []
    for dy in range(-2 - py, 4 - py):
        for dx in range(-2 - px, 4 - px):
            if max(abs(dx), abs(dy)) >= 2:
                out.append((dx, dy))
    return out


def _parity_grid(level: int, px: int, py: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-major linear ids and (ix, iy) of cells with the given index parity."""
    m = 2**level
    gx = np.arange(px, m, 2)
    gy = np.arange(py, m, 2)
    GX, GY = np.meshgrid(gx, gy)
    return (GY * m + GX).ravel(), GX.ravel(), GY.ravel()


def _quadrant_ids(level: int) -> dict[tuple[int, int], tuple[np.ndarray, np.ndarray]]:
    """Per child quadrant (cx, cy): (parent linear ids, child linear ids) at ``level``."""
    m = 2**level
    mp = m // 2
    JX, JY = np.meshgrid(np.arange(mp), np.arange(mp))
    parents = (JY * mp + JX).ravel()
    out = {}
    for cy in (0, 1):
        for cx in (0, 1):
            out[(cx, cy)] = (parents, ((2 * JY + cy) * m + 2 * JX + cx).ravel())
    return out


def upward_pass(tree: Tree, z_sorted: np.ndarray, gamma_sorted: np.ndarray, order: int) -> list:
    """Multipole coefficients for every cell at levels 2..leaf, leaf upward.

    Returns a list indexed by level; entries below level 2 are ``None``.
    Empty cells carry the zero expansion.
    """
    levels, p = tree.levels, order
    n = len(z_sorted)
    delta = z_sorted - tree.centers(levels)[tree.sorted_leaf]
    powers = np.empty((n, p + 1), dtype=np.complex128)
    powers[:, 0] = gamma_sorted
    for k in range(1, p + 1):
        powers[:, k] = powers[:, k - 1] * delta
    # reduceat over nonempty leaves only: their starts are strictly
    # increasing and the gaps of empty leaves have zero width, so consecutive
    # starts delimit exactly one leaf's particle block
    leaf_mult = np.zeros((4**levels, p + 1), dtype=np.complex128)
    occupied = np.flatnonzero(tree.nonempty(levels))
    leaf_mult[occupied] = np.add.reduceat(powers, tree.leaf_starts[occupied], axis=0)

    mult: list = [None] * (levels + 1)
    mult[levels] = leaf_mult
    for level in range(levels, 2, -1):
        side = tree.cell_side(level)
        coarse = np.zeros((4 ** (level - 1), p + 1), dtype=np.complex128)
        quads = _quadrant_ids(level)
        for cy in (0, 1):
            for cx in (0, 1):
                parents, children = quads[(cx, cy)]
                d = side * ((cx - 0.5) + 1j * (cy - 0.5))
                S = expansions.multipole_shift_matrix(d, p, p)
                coarse[parents] += mult[level][children] @ S.T
        mult[level - 1] = coarse
    return mult


def translate_pass(tree: Tree, multipoles: list, order: int) -> tuple[list, int]:
    """Accumulate interaction-list translations into local expansions.

    Every cell receives contributions from the nonempty members of its
    interaction list; empty sources are skipped (their expansion is zero).
    Returns the per-level local coefficient arrays (levels 2..leaf) and the
    number of translations performed.
    """
    levels, p = tree.levels, order
    locals_: list = [None] * (levels + 1)
    count = 0
    for level in range(2, levels + 1):
        m = 2**level
        side = tree.cell_side(level)
        loc = np.zeros((m * m, p + 1), dtype=np.complex128)
        occupied = tree.nonempty(level)
        for py in (0, 1):
            for px in (0, 1):
                dest, dix, diy = _parity_grid(level, px, py)
                for dx, dy in _il_offsets(px, py):
                    sx = dix + dx
                    sy = diy + dy
                    ok = (sx >= 0) & (sx < m) & (sy >= 0) & (sy < m)
                    d_ok = dest[ok]
                    s_ok = sy[ok] * m + sx[ok]
                    nonzero = occupied[s_ok]
                    d_ok = d_ok[nonzero]
                    s_ok = s_ok[nonzero]
                    if d_ok.size == 0:
                        continue
                    count += d_ok.size
                    # t = local center - source center; the offset points
                    # from destination to source.
                    t = -side * (dx + 1j * dy)
                    T = expansions.m2l_matrix(t, p, p)
                    loc[d_ok] += multipoles[level][s_ok] @ T.T
        locals_[level] = loc
    return locals_, count


def downward_pass(tree: Tree, locals_: list) -> list:
    """Add each parent's completed local expansion into its children (levels 3..leaf)."""
    for level in range(3, tree.levels + 1):
        side = tree.cell_side(level)
        p = locals_[level].shape[1] - 1
        quads = _quadrant_ids(level)
        for cy in (0, 1):
            for cx in (0, 1):
                parents, children = quads[(cx, cy)]
                s = side * ((cx - 0.5) + 1j * (cy - 0.5))
                R = expansions.local_shift_matrix(s, p, p)
                locals_[level][children] += locals_[level - 1][parents] @ R.T
    return locals_


def far_field(tree: Tree, locals_: list, z_sorted: np.ndarray) -> np.ndarray:
    """Evaluate each particle's leaf-local expansion at the particle (f values)."""
    leaf = tree.sorted_leaf
    delta = z_sorted - tree.centers(tree.levels)[leaf]
    coeffs = locals_[tree.levels][leaf]
    acc = coeffs[:, -1].copy()
    for k in range(coeffs.shape[1] - 2, -1, -1):
        acc = acc * delta + coeffs[:, k]
    return acc


def _neighbor_ranges(tree: Tree, linear: int) -> list[tuple[int, int]]:
    """Sorted-permutation ranges covering a leaf's 3x3 neighborhood, row-major.

    Adjacent cells of one neighborhood row are consecutive in the row-major
    cell order, so each row is a single contiguous slice of the sorted
    particle permutation; slice concatenation order equals per-cell row-major
    iteration bit for bit.
    """
    m = 2**tree.levels
    cy, cx = divmod(linear, m)
    x_lo = max(cx - 1, 0)
    x_hi = min(cx + 1, m - 1)
    ranges = []
    for ny in (cy - 1, cy, cy + 1):
        if 0 <= ny < m:
            lo = tree.leaf_starts[ny * m + x_lo]
            hi = tree.leaf_starts[ny * m + x_hi + 1]
            if hi > lo:
                ranges.append((lo, hi))
    return ranges


def _gather(array: np.ndarray, ranges: list[tuple[int, int]]) -> np.ndarray:
    if len(ranges) == 1:
        lo, hi = ranges[0]
        return array[lo:hi]
    return np.concatenate([array[lo:hi] for lo, hi in ranges])


def _pair_velocity(
    zt: np.ndarray, zs: np.ndarray, gamma_s: np.ndarray, sigma_s: np.ndarray, kind: KernelKind
) -> tuple[np.ndarray, np.ndarray]:
    """Per-target (u, v) sums over a block of sources, kernel_eval arithmetic."""
    dx = zt.real[:, None] - zs.real[None, :]
    dy = zt.imag[:, None] - zs.imag[None, :]
    r2 = dx * dx + dy * dy
    mask = r2 > 0.0
    c = np.zeros_like(r2)
    np.divide(gamma_s[None, :], TWO_PI * r2, out=c, where=mask)
    if kind is KernelKind.GAUSSIAN_BLOB:
        c = c * (1.0 - np.exp(-r2 / (2.0 * sigma_s * sigma_s)[None, :]))
    return (-c * dy).sum(axis=1), (c * dx).sum(axis=1)


def near_field(
    tree: Tree,
    z_sorted: np.ndarray,
    gamma_sorted: np.ndarray,
    sigma_sorted: np.ndarray,
    kind: KernelKind,
) -> tuple[np.ndarray, int]:
    """Direct (u, v) contributions from each particle's own and adjacent leaves.

    Exact self-terms are excluded by the coincident-point convention.  Returns
    velocities in sorted particle order plus the ordered pair count.
    """
    vel = np.zeros((len(z_sorted), 2))
    pairs = 0
    blob = kind is KernelKind.GAUSSIAN_BLOB
    for linear in np.flatnonzero(tree.nonempty(tree.levels)):
        lo, hi = tree.leaf_starts[linear], tree.leaf_starts[linear + 1]
        ranges = _neighbor_ranges(tree, linear)
        zs = _gather(z_sorted, ranges)
        gs = _gather(gamma_sorted, ranges)
        ss = _gather(sigma_sorted, ranges) if blob else sigma_sorted[:0]
        u, v = _pair_velocity(z_sorted[lo:hi], zs, gs, ss, kind)
        vel[lo:hi, 0] = u
        vel[lo:hi, 1] = v
        pairs += (hi - lo) * (zs.size - 1)
    return vel, pairs


def bound_budgets(tree: Tree, gamma: np.ndarray, order: int) -> np.ndarray:
    """Per-particle truncation budget: the tail bound summed over every
    translation whose result that particle's leaf inherits.

    rho per cell pair uses the position-independent worst case
    (sqrt(2) * half_width) / (center distance - sqrt(2) * half_width).
    Budgets are on |f| error; velocity error budgets are these over 2 pi.
    """
    levels, p = tree.levels, order
    m = 2**levels
    amp = [np.zeros(0)] * (levels + 1)
    leaf_amp = np.zeros(m * m)
    np.add.at(leaf_amp, tree.sorted_leaf, np.abs(gamma[tree.order]))
    amp[levels] = leaf_amp
    for level in range(levels - 1, 1, -1):
        mk = 2**level
        fine = amp[level + 1].reshape(2 * mk, 2 * mk)
        amp[level] = (fine[0::2, 0::2] + fine[0::2, 1::2] + fine[1::2, 0::2] + fine[1::2, 1::2]).ravel()

    total = np.zeros((4, 4))
    for level in range(2, levels + 1):
        mk = 2**level
        side = tree.cell_side(level)
        radius = SQRT2 * tree.half_width(level)
        cell_budget = np.zeros(mk * mk)
        for py in (0, 1):
            for px in (0, 1):
                dest, dix, diy = _parity_grid(level, px, py)
                for dx, dy in _il_offsets(px, py):
                    sx = dix + dx
                    sy = diy + dy
                    ok = (sx >= 0) & (sx < mk) & (sy >= 0) & (sy < mk)
                    dist = np.hypot(dx, dy) * side
                    rho = radius / (dist - radius)
                    factor = truncation_bound(BoundParams(1.0, rho), p)
                    cell_budget[dest[ok]] += amp[level][sy[ok] * mk + sx[ok]] * factor
        if level == 2:
            total = cell_budget.reshape(4, 4)
        else:
            total = cell_budget.reshape(mk, mk) + np.repeat(np.repeat(total, 2, axis=0), 2, axis=1)

    per_sorted = total.ravel()[tree.sorted_leaf]
    out = np.empty(len(gamma))
    out[tree.order] = per_sorted
    return out


def evaluate(
    particles: Sequence[Particle],
    config: FmmConfig,
    domain: Domain | None = None,
) -> tuple[np.ndarray, FmmRunStats]:
    """Velocity induced at every particle position, with run statistics.

    Returns an (N, 2) array of (u, v) rows in the original particle order.
    When no domain is given, the smallest enclosing square is used.
    """
    config.validate()
    if not particles:
        raise ValueError("need at least one particle")
    if domain is None:
        domain = enclosing_domain(particles)
    stats = FmmRunStats(n=len(particles), levels=config.levels, order=config.order)
    t_start = time.perf_counter()

    t0 = time.perf_counter()
    tree = build_tree(particles, config.levels, domain)
    x, y, gamma, sigma = to_arrays(particles)
    z_sorted = (x + 1j * y)[tree.order]
    gamma_sorted = gamma[tree.order]
    sigma_sorted = sigma[tree.order]
    stats.t_build = time.perf_counter() - t0

    if config.kernel is KernelKind.GAUSSIAN_BLOB:
        guard = tree.half_width(config.levels) / 2.0
        max_sigma = float(sigma.max())
        if max_sigma > guard:
            stats.sigma_guard_ok = False
            warnings.warn(
                f"max core radius {max_sigma:g} exceeds leaf half-width/2 = {guard:g}; "
                "the far field treats blobs as point vortices, so expect extra error",
                stacklevel=2,
            )

    t0 = time.perf_counter()
    multipoles = upward_pass(tree, z_sorted, gamma_sorted, config.order)
    stats.t_upward = time.perf_counter() - t0

    t0 = time.perf_counter()
    locals_, stats.m2l_count = translate_pass(tree, multipoles, config.order)
    stats.t_m2l = time.perf_counter() - t0

    t0 = time.perf_counter()
    downward_pass(tree, locals_)
    stats.t_downward = time.perf_counter() - t0

    t0 = time.perf_counter()
    vel_sorted = expansions.f_to_velocity(far_field(tree, locals_, z_sorted))
    stats.t_eval = time.perf_counter() - t0

    t0 = time.perf_counter()
    near_vel, stats.near_pair_count = near_field(
        tree, z_sorted, gamma_sorted, sigma_sorted, config.kernel
    )
    stats.t_near = time.perf_counter() - t0

    vel_sorted = vel_sorted + near_vel
    velocities = np.empty_like(vel_sorted)
    velocities[tree.order] = vel_sorted
    stats.t_total = time.perf_counter() - t_start
    return velocities, stats


def evaluate_at(
    targets: np.ndarray | Sequence[tuple[float, float]],
    particles: Sequence[Particle],
    config: FmmConfig,
    domain: Domain | None = None,
) -> np.ndarray:
    """Velocity at arbitrary in-domain target points (not necessarily particles)."""
    config.validate()
    if domain is None:
        domain = enclosing_domain(particles)
    pts = np.asarray(targets, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"targets must have shape (M, 2), got {pts.shape}")
    inside = (
        (pts[:, 0] >= domain.xmin)
        & (pts[:, 0] <= domain.xmax)
        & (pts[:, 1] >= domain.ymin)
        & (pts[:, 1] <= domain.ymax)
    )
    if not inside.all():
        raise OutOfDomainError(
            f"{np.count_nonzero(~inside)} target(s) outside domain {domain}"
        )

    tree = build_tree(particles, config.levels, domain)
    x, y, gamma, sigma = to_arrays(particles)
    z_sorted = (x + 1j * y)[tree.order]
    gamma_sorted = gamma[tree.order]
    sigma_sorted = sigma[tree.order]
    multipoles = upward_pass(tree, z_sorted, gamma_sorted, config.order)
    locals_, _ = translate_pass(tree, multipoles, config.order)
    downward_pass(tree, locals_)

    m = 2**config.levels
    ix, iy = grid_indices(pts[:, 0], pts[:, 1], m, domain)
    target_leaf = iy * m + ix
    zt = pts[:, 0] + 1j * pts[:, 1]

    delta = zt - tree.centers(config.levels)[target_leaf]
    coeffs = locals_[config.levels][target_leaf]
    acc = coeffs[:, -1].copy()
    for k in range(coeffs.shape[1] - 2, -1, -1):
        acc = acc * delta + coeffs[:, k]
    vel = expansions.f_to_velocity(acc)

    for linear in np.unique(target_leaf):
        sel = np.flatnonzero(target_leaf == linear)
        ranges = _neighbor_ranges(tree, int(linear))
        if not ranges:
            continue
        u, v = _pair_velocity(
            zt[sel],
            _gather(z_sorted, ranges),
            _gather(gamma_sorted, ranges),
            _gather(sigma_sorted, ranges),
            config.kernel,
        )
        vel[sel, 0] += u
        vel[sel, 1] += v
    return vel
