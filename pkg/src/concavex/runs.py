"""Run pipelines behind the command-line subcommands.

Each pipeline is deterministic in ``(config, seed)``: output text never
carries timestamps or timings, and sweep rows are ordered by ``mu`` no matter
how they were scheduled.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .config import RunConfig
from .functional import ProblemParams
from .grid import GridDomain, GridFunction, build_domain, write_grid_function
from .solver import (
    ConstraintSet,
    SolveReport,
    SolverError,
    fixed_point_solve,
    minimize_positive,
    multiplicity_search,
    negative_energy_witness,
    select_rho,
    sphere_level_estimate,
)
from .threshold import EmbeddingConstants, RadiusInterval, estimate_constants, mu_star, radius_interval

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("mu", "r1", "r2", "energy_min", "residual_inf", "min_value", "solution_count")
THRESHOLD_COLUMNS = ("mu", "r1", "r2", "mu_star", "r_star", "d1", "d2", "C1", "C2")


class RefusalError(ValueError):
    """Requested ``mu`` lies outside ``(0, mu_star)``."""


def g12(x: float) -> str:
    return f"{x:.12g}"


@dataclass
class Setup:
    domain: GridDomain
    params: ProblemParams
    ec: EmbeddingConstants
    mu_star: float
    r_star: float
    mus: list[float]


def setup(config: RunConfig) -> Setup:
    """Grid, embedding constants (once per grid and exponents) and resolved ``mu`` values."""
    domain = build_domain(config.dimension, config.lengths, config.nodes)
    params = ProblemParams(config.p, config.q)
    ec = estimate_constants(domain, params, seed=config.seed)
    th = mu_star(ec, params)
    scale = th.mu_star if config.mu.relative else 1.0
    mus = sorted(scale * v for v in config.mu.values())
    return Setup(domain, params, ec, th.mu_star, th.r_star, mus)


# ---------------------------------------------------------------------------
# thresholds


def threshold_rows(s: Setup) -> list[tuple[float, Optional[RadiusInterval]]]:
    return [(mu, radius_interval(s.ec, s.params.with_mu(mu))) for mu in s.mus]


def format_thresholds(s: Setup) -> str:
    ec = s.ec
    head = [
        f"# mu_star = {g12(s.mu_star)}",
        f"# r_star = {g12(s.r_star)}",
        f"# d1 = {g12(ec.d1)}",
        f"# d2 = {g12(ec.d2)}",
        f"# C1 = {g12(ec.C1)}",
        f"# C2 = {g12(ec.C2)}",
        " ".join(THRESHOLD_COLUMNS),
    ]
    rows = []
    for mu, iv in threshold_rows(s):
        r1, r2 = ("EMPTY", "EMPTY") if iv is None else (g12(iv.r1), g12(iv.r2))
        rows.append(
            " ".join([g12(mu), r1, r2, g12(s.mu_star), g12(s.r_star), g12(ec.d1), g12(ec.d2), g12(ec.C1), g12(ec.C2)])
        )
    return "\n".join(head + rows) + "\n"


# ---------------------------------------------------------------------------
# solve


def check_mu(mu: float, mu_star_value: float) -> None:
    if not 0 < mu < mu_star_value:
        raise RefusalError(f"refusing mu={g12(mu)}: guarantees need 0 < mu < mu_star={g12(mu_star_value)}")


def solve_positive(domain: GridDomain, params: ProblemParams, r2: float, config: RunConfig) -> tuple[SolveReport, SolveReport]:
    """Constrained minimizer and fixed-point solution on ``K(r2)``."""
    k = ConstraintSet(r2, nonnegative=True)
    rep_min = minimize_positive(
        params, k, domain, tol=config.tol, max_iter=config.max_iter, trial_count=config.trial_count, seed=config.seed
    )
    _, start = negative_energy_witness(domain, params, k)
    rep_fp = fixed_point_solve(
        GridFunction(domain, start), params, r2, config.tol, config.max_iter,
        trial_count=config.trial_count, seed=config.seed,
    )
    return rep_min, rep_fp


def write_report(rep: SolveReport, directory: Path, stem: str) -> None:
    (directory / f"{stem}.report").write_text(rep.to_text())
    write_grid_function(rep.solution, directory / f"{stem}.profile")


def run_solve(config: RunConfig, out_dir: Path) -> tuple[list[str], list[SolveReport]]:
    s = setup(config)
    if len(s.mus) != 1:
        raise RefusalError("solve takes a single mu value")
    mu = s.mus[0]
    check_mu(mu, s.mu_star)
    params = s.params.with_mu(mu)
    iv = radius_interval(s.ec, params)
    rep_min, rep_fp = solve_positive(s.domain, params, iv.r2, config)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report(rep_min, out_dir, "minimize_positive")
    write_report(rep_fp, out_dir, "fixed_point")
    lines = [rep_min.summary_line(), rep_fp.summary_line()]
    (out_dir / "summary.txt").write_text(
        f"mu = {g12(mu)}\nmu_star = {g12(s.mu_star)}\nr1 = {g12(iv.r1)}\nr2 = {g12(iv.r2)}\n" + "\n".join(lines) + "\n"
    )
    return lines, [rep_min, rep_fp]


# ---------------------------------------------------------------------------
# sweep


def _sweep_row(task) -> list[str]:
    domain, params, ec, mu_star_value, config = task
    mu = params.mu
    iv = radius_interval(ec, params)
    r1, r2 = ("EMPTY", "EMPTY") if iv is None else (g12(iv.r1), g12(iv.r2))
    row = [g12(mu), r1, r2]
    if iv is None or not 0 < mu < mu_star_value:
        return row + ["NA"] * 4
    try:
        rep, _ = solve_positive(domain, params, iv.r2, config)
        count = 1
        if config.multiplicity:
            found = multiplicity_search(
                domain, params, ConstraintSet(iv.r2), config.want, config.seed, tol=config.tol,
                shift=config.shift, power=config.power, n_random=config.random_starts, trial_count=config.trial_count,
            )
            count = len(found)
    except SolverError as exc:
        log.warning("sweep row mu=%s failed: %s", g12(mu), exc)
        return row + ["FAIL"] * 4
    return row + [g12(rep.energy), g12(rep.residual_inf), g12(rep.min_value), str(count)]


def run_sweep(config: RunConfig, jobs: int = 1) -> str:
    """CSV text, one row per ``mu`` in ascending order."""
    s = setup(config)
    tasks = [(s.domain, s.params.with_mu(mu), s.ec, s.mu_star, config) for mu in s.mus]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]
    return ",".join(SWEEP_COLUMNS) + "\n" + "".join(",".join(r) + "\n" for r in rows)


# ---------------------------------------------------------------------------
# multiplicity


@dataclass
class MultiplicityRun:
    mu: float
    r2: float
    rho: float
    levels: list[float]
    reports: list[SolveReport] = field(default_factory=list)
    distances: Optional[np.ndarray] = None

    def summary(self) -> str:
        lines = [
            f"mu = {g12(self.mu)}",
            f"r2 = {g12(self.r2)}",
            f"rho = {g12(self.rho)}",
            f"found = {len(self.reports)}",
        ]
        lines += [f"level_upper_bound[{j + 1}] = {g12(c)}" for j, c in enumerate(self.levels)]
        lines += [f"energy[{i}] = {g12(r.energy)} residual_inf[{i}] = {g12(r.residual_inf)}" for i, r in enumerate(self.reports)]
        n = len(self.reports)
        for i in range(n):
            for j in range(i + 1, n):
                lines.append(f"distance[{i},{j}] = {g12(self.distances[i, j])}")
        return "\n".join(lines) + "\n"


def pair_distances(reports: list[SolveReport]) -> np.ndarray:
    """Weighted L² distance between pairs ``±u_i`` and ``±u_j``."""
    n = len(reports)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            a, b = reports[i].solution.values, reports[j].solution.values
            w = reports[i].solution.domain.cell_volume
            D[i, j] = min(math.sqrt(w * float(np.sum((a - b) ** 2))), math.sqrt(w * float(np.sum((a + b) ** 2))))
    return D


def run_multiplicity(config: RunConfig, out_dir: Optional[Path] = None) -> MultiplicityRun:
    s = setup(config)
    if len(s.mus) != 1:
        raise RefusalError("multiplicity takes a single mu value")
    mu = s.mus[0]
    check_mu(mu, s.mu_star)
    params = s.params.with_mu(mu)
    iv = radius_interval(s.ec, params)
    k = ConstraintSet(iv.r2)
    want = max(config.want, 1)
    rho, _ = select_rho(s.domain, params, want, k, config.seed, config.rho_levels)
    levels = [sphere_level_estimate(s.domain, params, j, rho, k, config.seed) for j in range(1, want + 1)]
    reports = multiplicity_search(
        s.domain, params, k, config.want, config.seed, rho=rho, tol=config.tol,
        shift=config.shift, power=config.power, n_random=config.random_starts, trial_count=config.trial_count,
    )
    run = MultiplicityRun(mu, iv.r2, rho, levels, reports, pair_distances(reports))
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, rep in enumerate(reports):
            write_report(rep, out_dir, f"solution_{i}")
        (out_dir / "summary.txt").write_text(run.summary())
    return run


# ---------------------------------------------------------------------------
# verify


def run_verify(config: RunConfig, profile: Path, nonnegative: bool = False) -> SolveReport:
    """Diagnostics of a stored profile against the configured problem on ``K(r2)``."""
    from .grid import read_grid_function
    from .solver import verify_solution

    s = setup(config)
    if len(s.mus) != 1:
        raise RefusalError("verify takes a single mu value")
    u = read_grid_function(profile)
    if u.domain != s.domain:
        raise RefusalError(f"profile grid {u.domain} does not match the configured grid {s.domain}")
    params = s.params.with_mu(s.mus[0])
    iv = radius_interval(s.ec, params)
    if iv is None:
        raise RefusalError(f"no invariant radius for mu={g12(params.mu)} (mu_star={g12(s.mu_star)})")
    return verify_solution(u, params, ConstraintSet(iv.r2, nonnegative), config.trial_count, config.seed)
