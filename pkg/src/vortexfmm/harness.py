"""Run orchestration: single evaluations, (N, levels, p) sweeps, timing studies.

The sweep harness is the desk-scale study driver: it executes every tuple of
a parameter grid against the direct oracle, appending one CSV row per run as
it goes (crash-resumable), with metric columns that are a pure function of
the config file.  Oracle cost is controllable: ``sampled(k)`` evaluates the
O(N^2) reference on k seeded targets instead of all N.

Config files are flat ``key = value`` lines; list values are comma-separated;
``#`` starts a comment.  Keys: n, levels, p, seeds, distribution, kernel,
sigma, map_grid, oracle, out.
"""

from __future__ import annotations

import json
import math
import os
import re
import statistics
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import errors as errorlab
from .engine import FmmConfig, bound_budgets, evaluate
from .kernels import KernelKind, velocity_direct
from .model import (
    GENERATOR_ID,
    UNIT_DOMAIN,
    Domain,
    Particle,
    enclosing_domain,
    generate_particles,
    read_particles,
    to_arrays,
)
from .quadtree import build_tree

SWEEP_HEADER = (
    "n,l,p,seed,distribution,kernel,max_abs,max_rel,rms_rel,bound_violations,"
    "sampled,t_fmm_ms,t_direct_ms,m2l_count,near_pair_count,generator_id"
)
TIMING_HEADER = "n,l,p,t_fmm_ms,t_direct_ms,direct_extrapolated"

_KERNEL_TOKENS = {"point": KernelKind.POINT_VORTEX, "gaussian": KernelKind.GAUSSIAN_BLOB}


class ConfigError(ValueError):
    """Malformed sweep configuration or resume mismatch."""


@dataclass(frozen=True)
class SweepConfig:
    n_values: tuple[int, ...]
    l_values: tuple[int, ...]
    p_values: tuple[int, ...]
    seeds: tuple[int, ...]
    distribution: str = "uniform_random"
    kernel: str = "point"
    sigma: float = 0.005
    map_grid: int = 8
    oracle_mode: str = "sampled"
    oracle_k: int | None = 200
    out: str = "sweep_results.csv"
    domain: Domain = field(default=UNIT_DOMAIN)

    @property
    def run_count(self) -> int:
        return len(self.n_values) * len(self.l_values) * len(self.p_values) * len(self.seeds)

    def tuples(self):
        """Canonical lexicographic run order."""
        for n in sorted(self.n_values):
            for lev in sorted(self.l_values):
                for p in sorted(self.p_values):
                    for seed in sorted(self.seeds):
                        yield n, lev, p, seed

    def meta(self) -> dict:
        return {
            "n": sorted(self.n_values),
            "levels": sorted(self.l_values),
            "p": sorted(self.p_values),
            "seeds": sorted(self.seeds),
            "distribution": self.distribution,
            "kernel": self.kernel,
            "sigma": self.sigma,
            "map_grid": self.map_grid,
            "oracle": self.oracle_mode if self.oracle_mode == "always" else f"sampled({self.oracle_k})",
            "generator_id": GENERATOR_ID,
        }


def _parse_int_list(value: str, key: str) -> tuple[int, ...]:
    try:
        items = tuple(int(v.strip()) for v in value.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"config key {key!r}: expected comma-separated integers, got {value!r}") from None
    if not items:
        raise ConfigError(f"config key {key!r}: empty list")
    return items


def parse_sweep_config(path) -> SweepConfig:
    """Parse a flat key = value sweep config file."""
    raw: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
            key, _, value = line.partition("=")
            raw[key.strip()] = value.strip()

    known = {"n", "levels", "p", "seeds", "distribution", "kernel", "sigma", "map_grid", "oracle", "out"}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    for key in ("n", "levels", "p", "seeds"):
        if key not in raw:
            raise ConfigError(f"missing required config key {key!r}")

    distribution = raw.get("distribution", "uniform_random")
    kernel = raw.get("kernel", "point")
    if kernel not in _KERNEL_TOKENS:
        raise ConfigError(f"config key 'kernel': expected point or gaussian, got {kernel!r}")
    try:
        sigma = float(raw.get("sigma", "0.005"))
        map_grid = int(raw.get("map_grid", "8"))
    except ValueError as exc:
        raise ConfigError(f"config key 'sigma'/'map_grid': {exc}") from None

    oracle = raw.get("oracle", "sampled(200)")
    if oracle == "always":
        oracle_mode, oracle_k = "always", None
    else:
        m = re.fullmatch(r"sampled\((\d+)\)", oracle)
        if not m:
            raise ConfigError(f"config key 'oracle': expected always or sampled(k), got {oracle!r}")
        oracle_mode, oracle_k = "sampled", int(m.group(1))
        if oracle_k < 1:
            raise ConfigError("config key 'oracle': sample size must be >= 1")

    return SweepConfig(
        n_values=_parse_int_list(raw["n"], "n"),
        l_values=_parse_int_list(raw["levels"], "levels"),
        p_values=_parse_int_list(raw["p"], "p"),
        seeds=_parse_int_list(raw["seeds"], "seeds"),
        distribution=distribution,
        kernel=kernel,
        sigma=sigma,
        map_grid=map_grid,
        oracle_mode=oracle_mode,
        oracle_k=oracle_k,
        out=raw.get("out", "sweep_results.csv"),
    )


@dataclass
class CaseResult:
    """Everything one (n, levels, p, seed) run produces."""

    n: int
    levels: int
    p: int
    seed: int
    distribution: str
    kernel: str
    report: errorlab.ErrorReport
    violations: int
    sampled: int  # 0 = full oracle, else the sample size used
    t_fmm_ms: float
    t_direct_ms: float
    m2l_count: int
    near_pair_count: int
    particles: list[Particle]
    velocities: np.ndarray
    direct: np.ndarray
    oracle_positions: np.ndarray

    def csv_row(self) -> str:
        rep = self.report
        fields = [
            str(self.n),
            str(self.levels),
            str(self.p),
            str(self.seed),
            self.distribution,
            self.kernel,
            format(rep.max_abs, ".10g"),
            "NA" if math.isnan(rep.max_rel) else format(rep.max_rel, ".10g"),
            "NA" if math.isnan(rep.rms_rel) else format(rep.rms_rel, ".10g"),
            str(self.violations),
            str(self.sampled),
            format(self.t_fmm_ms, ".3f"),
            format(self.t_direct_ms, ".3f"),
            str(self.m2l_count),
            str(self.near_pair_count),
            GENERATOR_ID,
        ]
        return ",".join(fields)


def run_case(
    n: int,
    levels: int,
    p: int,
    seed: int,
    distribution: str = "uniform_random",
    kernel: str = "point",
    sigma: float = 0.005,
    domain: Domain = UNIT_DOMAIN,
    oracle_mode: str = "always",
    oracle_k: int | None = None,
    particles: list[Particle] | None = None,
) -> CaseResult:
    """Generate (or take) particles, run the fast evaluation and the oracle, compare."""
    kind = _KERNEL_TOKENS[kernel]
    if particles is None:
        particles = generate_particles(distribution, n, seed, domain, sigma)
    config = FmmConfig(levels=levels, order=p, kernel=kind)
    velocities, stats = evaluate(particles, config, domain)

    x, y, gamma, _ = to_arrays(particles)
    positions = np.stack((x, y), axis=1)
    budgets = bound_budgets(build_tree(particles, levels, domain), gamma, p)

    if oracle_mode == "sampled" and oracle_k is not None and oracle_k < n:
        rng = np.random.default_rng([seed, n, levels, p, 0x0F5EED])
        sample = np.sort(rng.choice(n, size=oracle_k, replace=False))
        sampled = oracle_k
    else:
        sample = np.arange(n)
        sampled = 0

    t0 = time.perf_counter()
    direct = velocity_direct(positions[sample], particles, kind)
    t_direct_ms = (time.perf_counter() - t0) * 1e3

    report = errorlab.compare(velocities[sample], direct, positions[sample], budgets[sample])
    violations = len(errorlab.bound_check(report))
    return CaseResult(
        n=n,
        levels=levels,
        p=p,
        seed=seed,
        distribution=distribution,
        kernel=kernel,
        report=report,
        violations=violations,
        sampled=sampled,
        t_fmm_ms=stats.t_total * 1e3,
        t_direct_ms=t_direct_ms,
        m2l_count=stats.m2l_count,
        near_pair_count=stats.near_pair_count,
        particles=particles,
        velocities=velocities,
        direct=direct,
        oracle_positions=positions[sample],
    )


# ---------------------------------------------------------------------------
# Single runs
# ---------------------------------------------------------------------------


@dataclass
class SingleSummary:
    max_abs: float
    max_rel: float
    violations: int
    t_fmm_ms: float
    t_direct_ms: float
    out_files: tuple[Path, Path, Path]

    def line(self) -> str:
        ratio = self.t_fmm_ms / self.t_direct_ms if self.t_direct_ms > 0 else math.nan
        rel = "NA" if math.isnan(self.max_rel) else format(self.max_rel, ".3e")
        return (
            f"max_rel={rel} max_abs={self.max_abs:.3e} bound_violations={self.violations} "
            f"t_fmm={self.t_fmm_ms:.1f}ms t_direct={self.t_direct_ms:.1f}ms "
            f"t_fmm/t_direct={ratio:.3f}"
        )


def _atomic_text(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_single(
    out_dir,
    n: int = 1000,
    levels: int = 3,
    p: int = 8,
    seed: int = 1,
    distribution: str = "uniform_random",
    kernel: str = "point",
    sigma: float = 0.005,
    particles_path=None,
    map_grid: int = 8,
) -> SingleSummary:
    """One evaluation against the full direct oracle; writes three CSV files.

    Outputs (written atomically into ``out_dir``): ``velocities.csv``,
    ``error_report.csv``, ``error_map.csv``.  When ``particles_path`` is
    given it overrides the generator and the domain becomes the particles'
    enclosing square.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if particles_path is not None:
        particles = read_particles(particles_path)
        if not particles:
            raise ValueError(f"{particles_path}: no particles")
        domain = enclosing_domain(particles)
        n = len(particles)
    else:
        domain = UNIT_DOMAIN
        particles = None

    case = run_case(
        n, levels, p, seed, distribution, kernel, sigma, domain, "always", None, particles
    )
    emap = errorlab.spatial_map(case.report, domain, map_grid)

    vel_path = out_dir / "velocities.csv"
    rep_path = out_dir / "error_report.csv"
    map_path = out_dir / "error_map.csv"

    lines = ["index,x,y,u_fmm,v_fmm,u_direct,v_direct"]
    for i in range(case.n):
        px, py = case.oracle_positions[i]
        lines.append(
            f"{i},{px:.17g},{py:.17g},{case.velocities[i, 0]:.17g},{case.velocities[i, 1]:.17g},"
            f"{case.direct[i, 0]:.17g},{case.direct[i, 1]:.17g}"
        )
    _atomic_text(vel_path, "\n".join(lines) + "\n")

    rep = case.report
    lines = ["index,x,y,abs_err,f_abs_err,budget"]
    for i in range(case.n):
        px, py = rep.positions[i]
        budget = rep.bound_budget[i] if rep.bound_budget is not None else math.nan
        lines.append(
            f"{i},{px:.17g},{py:.17g},{rep.abs_errors[i]:.10g},{rep.f_abs_errors[i]:.10g},{budget:.10g}"
        )
    _atomic_text(rep_path, "\n".join(lines) + "\n")

    fd, tmp = tempfile.mkstemp(dir=out_dir, prefix="error_map", suffix=".tmp")
    os.close(fd)
    errorlab.write_error_map_csv(emap, tmp)
    os.replace(tmp, map_path)

    return SingleSummary(
        max_abs=rep.max_abs,
        max_rel=rep.max_rel,
        violations=case.violations,
        t_fmm_ms=case.t_fmm_ms,
        t_direct_ms=case.t_direct_ms,
        out_files=(vel_path, rep_path, map_path),
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def _meta_path(out_path: Path) -> Path:
    return out_path.with_name(out_path.name + ".meta.json")


def _existing_rows(out_path: Path) -> set[tuple[int, int, int, int]]:
    done = set()
    with open(out_path) as fh:
        header = fh.readline().strip()
        if header != SWEEP_HEADER:
            raise ConfigError(f"{out_path}: unexpected header, not a sweep file")
        for line in fh:
            parts = line.split(",", 4)
            if len(parts) < 4:
                continue
            done.add((int(parts[0]), int(parts[1]), int(parts[2]), int(parts[3])))
    return done


def run_sweep(
    config: SweepConfig,
    out_path=None,
    resume: bool = False,
    write_maps: bool = False,
    progress: Callable[[str], None] | None = None,
) -> tuple[Path, int]:
    """Execute the config's full grid, one CSV row per run, flushed as it goes.

    With ``resume``, tuples already present in the output are skipped and the
    sidecar metadata must match the config exactly.  Returns the output path
    and the number of newly computed rows.
    """
    out = Path(out_path) if out_path is not None else Path(config.out)
    meta_file = _meta_path(out)
    done: set[tuple[int, int, int, int]] = set()

    if resume and out.exists():
        if not meta_file.exists():
            raise ConfigError(f"cannot resume: {meta_file} is missing")
        recorded = json.loads(meta_file.read_text())
        if recorded != config.meta():
            raise ConfigError(
                f"cannot resume: config does not match {meta_file} "
                f"(recorded {recorded}, requested {config.meta()})"
            )
        done = _existing_rows(out)
        mode = "a"
    else:
        mode = "w"

    out.parent.mkdir(parents=True, exist_ok=True)
    _atomic_text(meta_file, json.dumps(config.meta(), indent=2) + "\n")
    maps_dir = out.with_name(out.stem + "_maps")
    if write_maps:
        maps_dir.mkdir(parents=True, exist_ok=True)

    computed = 0
    with open(out, mode) as fh:
        if mode == "w":
            fh.write(SWEEP_HEADER + "\n")
            fh.flush()
        for n, lev, p, seed in config.tuples():
            if (n, lev, p, seed) in done:
                continue
            case = run_case(
                n,
                lev,
                p,
                seed,
                config.distribution,
                config.kernel,
                config.sigma,
                config.domain,
                config.oracle_mode,
                config.oracle_k,
            )
            fh.write(case.csv_row() + "\n")
            fh.flush()
            computed += 1
            if write_maps:
                emap = errorlab.spatial_map(case.report, config.domain, config.map_grid)
                errorlab.write_error_map_csv(
                    emap, maps_dir / f"map_n{n}_l{lev}_p{p}_s{seed}.csv"
                )
            if progress is not None:
                progress(f"[{computed}] n={n} l={lev} p={p} seed={seed} max_rel={case.report.max_rel:.3e}")
    return out, computed


# ---------------------------------------------------------------------------
# Timing study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimingRow:
    n: int
    levels: int
    p: int
    t_fmm_ms: float
    t_direct_ms: float
    direct_extrapolated: bool

    def csv_row(self) -> str:
        return (
            f"{self.n},{self.levels},{self.p},{self.t_fmm_ms:.3f},"
            f"{self.t_direct_ms:.3f},{int(self.direct_extrapolated)}"
        )


def occupancy_levels(n: int, target_per_leaf: int) -> int:
    """Tree depth that targets a fixed leaf occupancy: round(log4(n / target)), >= 2."""
    if target_per_leaf < 1:
        raise ValueError("target_per_leaf must be >= 1")
    raw = math.log(max(n / target_per_leaf, 1.0), 4.0)
    return max(2, int(math.floor(raw + 0.5)))


def timing_study(
    n_values: Sequence[int],
    p: int = 8,
    levels: int | None = None,
    target_per_leaf: int = 8,
    seed: int = 1,
    repeats: int = 3,
    direct_cutoff: int = 8192,
    distribution: str = "uniform_random",
    kernel: str = "point",
    sigma: float = 0.005,
    domain: Domain = UNIT_DOMAIN,
    out_path=None,
) -> list[TimingRow]:
    """Median-of-``repeats`` wall times for the fast and direct evaluations.

    ``levels`` fixes the depth; otherwise it follows the occupancy policy.
    Direct timing is measured up to ``direct_cutoff`` particles and
    extrapolated beyond it with a quadratic-plus-linear fit of the measured
    points (flagged per row).  Runs strictly sequentially.
    """
    kind = _KERNEL_TOKENS[kernel]
    rows: list[tuple[int, int, float, float | None]] = []
    measured: list[tuple[int, float]] = []
    for n in sorted(n_values):
        lev = levels if levels is not None else occupancy_levels(n, target_per_leaf)
        particles = generate_particles(distribution, n, seed, domain, sigma)
        config = FmmConfig(levels=lev, order=p, kernel=kind)
        t_fmm = statistics.median(
            evaluate(particles, config, domain)[1].t_total for _ in range(repeats)
        )
        t_direct: float | None = None
        if n <= direct_cutoff:
            x, y, _, _ = to_arrays(particles)
            positions = np.stack((x, y), axis=1)
            samples = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                velocity_direct(positions, particles, kind)
                samples.append(time.perf_counter() - t0)
            t_direct = statistics.median(samples)
            measured.append((n, t_direct))
        rows.append((n, lev, t_fmm, t_direct))

    if not measured:
        raise ValueError("direct_cutoff excludes every requested n; nothing to extrapolate from")
    ns = np.array([n for n, _ in measured], dtype=np.float64)
    ts = np.array([t for _, t in measured])
    design = np.stack((ns**2, ns), axis=1)
    coef, *_ = np.linalg.lstsq(design, ts, rcond=None)

    out_rows = []
    for n, lev, t_fmm, t_direct in rows:
        extrapolated = t_direct is None
        if extrapolated:
            t_direct = float(coef[0] * n**2 + coef[1] * n)
        out_rows.append(
            TimingRow(n, lev, p, t_fmm * 1e3, t_direct * 1e3, extrapolated)
        )

    if out_path is not None:
        text = TIMING_HEADER + "\n" + "\n".join(r.csv_row() for r in out_rows) + "\n"
        _atomic_text(Path(out_path), text)
    return out_rows
