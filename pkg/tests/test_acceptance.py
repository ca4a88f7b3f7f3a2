"""Acceptance criteria 1-10; each prints one PASS/FAIL line with its measured runtime."""

import contextlib
import math
import subprocess
import sys
import time

import numpy as np
from conftest import ACCEPTANCE_LINES
from concavex.functional import ProblemParams, energy, energy_gradient, nonlinearity, phi
from concavex.grid import GridFunction, build_domain, eigenpairs, inner, norm, poisson_solve
from concavex.solver import (
    ConstraintSet,
    fixed_point_image,
    fixed_point_solve,
    minimize_positive,
    multiplicity_search,
    negative_energy_witness,
    select_rho,
    sphere_level_estimate,
)
from concavex.threshold import (
    EmbeddingConstants,
    estimate_constants,
    mu_star,
    mu_star_closed_form,
    radius_interval,
)


@contextlib.contextmanager
def criterion(number, title, budget, capsys):
    start = time.perf_counter()
    status, detail = "FAIL", ""
    try:
        yield
        elapsed = time.perf_counter() - start
        if budget is not None and elapsed >= budget:
            detail = f" runtime {elapsed:.2f}s exceeds {budget:g}s"
            raise AssertionError(detail.strip())
        status = "PASS"
    except BaseException as exc:
        detail = detail or f" {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        raise
    finally:
        elapsed = time.perf_counter() - start
        bound = f"budget {budget:g}s" if budget is not None else "no runtime bound"
        line = f"criterion {number}: {status} {title} ({elapsed:.2f}s, {bound}){detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n{line}")


# oracles written independently of the package


def h(r, C1, C2, p, q, mu):
    return C1 * r ** (p - 1) + mu * C2 * r ** (q - 1) - r


def bisect(f, inside, outside, iters=200):
    for _ in range(iters):
        mid = 0.5 * (inside + outside)
        if f(mid) <= 0:
            inside = mid
        else:
            outside = mid
    return inside


def mu_bisection_oracle(C1, C2, p, q):
    """Largest mu whose h(., mu) reaches a nonpositive value; min of h(r)/r from d/dr = 0."""

    def nonempty(mu):
        r = ((2 - q) * mu * C2 / ((p - 2) * C1)) ** (1 / (p - q))
        return h(r, C1, C2, p, q, mu) / r <= 0

    hi = 1.0
    while nonempty(hi):
        hi *= 2
    return bisect(lambda mu: 0.0 if nonempty(mu) else 1.0, 0.0, hi)


def random_in_ball(domain, r, rng):
    v = rng.standard_normal(domain.size)
    if rng.random() < 0.5:
        # smooth draws: Poisson image of positive or signed noise
        v = poisson_solve(GridFunction(domain, np.abs(v) if rng.random() < 0.5 else v)).values
    u = GridFunction(domain, v)
    frac = 1.0 if rng.random() < 0.2 else rng.random()
    return (frac * r / norm(u, "W2n")) * u


def half_mu_star(dimension, nodes, p, q=1.5):
    domain = build_domain(dimension, [1.0] * dimension, [nodes] * dimension)
    base = ProblemParams(p, q)
    ec = estimate_constants(domain, base, seed=0)
    ms = mu_star(ec, base).mu_star
    params = base.with_mu(0.5 * ms)
    return domain, params, ec, radius_interval(ec, params)


def check_ball_invariance(domain, params, iv, seed=0):
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for r in (iv.r1, 0.5 * (iv.r1 + iv.r2), iv.r2):
        for _ in range(100):
            u = random_in_ball(domain, r, rng)
            excess = norm(fixed_point_image(u, params), "W2n") - r
            worst = max(worst, excess)
            assert excess <= 1e-10, f"‖T(u)‖ exceeds r={r} by {excess}"
    return worst


def check_positive_solutions(domain, params, iv):
    k = ConstraintSet(iv.r2, nonnegative=True)
    rep_min = minimize_positive(params, k, domain, tol=1e-10)
    _, start = negative_energy_witness(domain, params, k)
    rep_fp = fixed_point_solve(GridFunction(domain, start), params, iv.r2, tol=1e-10)
    for rep in (rep_min, rep_fp):
        assert rep.residual_inf <= 1e-8, (rep.method, rep.residual_inf)
        assert rep.min_value > 0, (rep.method, rep.min_value)
        assert rep.energy < 0, (rep.method, rep.energy)
        assert rep.in_ball and norm(rep.solution, "W2n") <= iv.r2 + 1e-10
        assert rep.certificate_slack >= -1e-8, (rep.method, rep.certificate_slack)
    return rep_min, rep_fp


def test_criterion_01_threshold_closed_form(capsys):
    with criterion(1, "scalar threshold closed form", 1.0, capsys):
        ms, rs = mu_star_closed_form(EmbeddingConstants.from_C(1.0, 1.0, 3.0, 1.5))
        assert abs(ms - 0.38490018) <= 1e-8
        assert abs(rs - 1 / 3) <= 1e-10
        rng = np.random.default_rng(2024)
        for _ in range(50):
            p, q = rng.uniform(2.1, 12), rng.uniform(1.05, 1.95)
            C1, C2 = 10 ** rng.uniform(-2, 1), 10 ** rng.uniform(-2, 1)
            closed = mu_star_closed_form(EmbeddingConstants.from_C(C1, C2, p, q))[0]
            assert abs(closed - mu_bisection_oracle(C1, C2, p, q)) <= 1e-10


def test_criterion_02_radius_interval(capsys):
    with criterion(2, "radius interval oracle", 1.0, capsys):
        ec = EmbeddingConstants.from_C(1.0, 1.0, 3.0, 1.5)
        iv = radius_interval(ec, ProblemParams(3.0, 1.5, 0.2))
        f = lambda r: r * r + 0.2 * math.sqrt(r) - r
        r1 = bisect(f, 0.1, 0.04)
        r2 = bisect(f, 0.1, 0.78)
        assert abs(r1 - 0.0437) < 5e-5 and abs(r2 - 0.772) < 5e-4
        assert abs(iv.r1 - r1) <= 1e-10 and abs(iv.r2 - r2) <= 1e-10


def test_criterion_03_spectral_oracle(capsys):
    with criterion(3, "discrete spectral oracle", 1.0, capsys):
        d = build_domain(1, [1.0], [3])
        pairs = eigenpairs(d, 2)
        lam1 = 32 * (1 - math.cos(math.pi / 4))
        assert abs(pairs[0].eigenvalue - lam1) <= 1e-10 * lam1
        assert abs(pairs[1].eigenvalue - 32) <= 1e-10 * 32
        v = poisson_solve(GridFunction(d, np.ones(3)))
        x = d.axes()[0]
        assert np.max(np.abs(v.values - x * (1 - x) / 2)) <= 1e-12


def test_criterion_04_ball_invariance_2d(capsys):
    with criterion(4, "ball invariance, 2D 32x32 p=4", 30.0, capsys):
        domain, params, _, iv = half_mu_star(2, 32, 4.0)
        check_ball_invariance(domain, params, iv)


def test_criterion_05_positive_solution_2d(capsys):
    with criterion(5, "positive negative-energy solution, 2D", 60.0, capsys):
        domain, params, _, iv = half_mu_star(2, 32, 4.0)
        check_positive_solutions(domain, params, iv)


def test_criterion_06_gradient_consistency(capsys):
    with criterion(6, "gradient consistency, 1D N=63", None, capsys):
        d = build_domain(1, [1.0], [63])
        params = ProblemParams(4.0, 1.5, 0.3)
        rng = np.random.default_rng(6)
        eps = 1e-5
        for _ in range(50):
            u = GridFunction(d, rng.standard_normal(d.size))
            w = GridFunction(d, rng.standard_normal(d.size))
            fd = (energy(u + eps * w, params) - energy(u - eps * w, params)) / (2 * eps)
            an = inner(energy_gradient(u, params), w)
            assert abs(fd - an) <= 1e-6 * abs(an)


def test_criterion_07_multiplicity(capsys):
    with criterion(7, "multiplicity surrogate, want=3", 600.0, capsys):
        domain, params, _, iv = half_mu_star(2, 32, 4.0)
        k = ConstraintSet(iv.r2)
        rho, _ = select_rho(domain, params, 3, k)
        levels = [sphere_level_estimate(domain, params, j, rho, k) for j in (1, 2, 3)]
        assert all(c < 0 for c in levels), levels
        found = multiplicity_search(domain, params, k, 3, seed=0, rho=rho)
        assert len(found) >= 3
        w = domain.cell_volume
        for i, rep in enumerate(found):
            assert rep.energy < 0 and rep.residual_inf <= 1e-8
            for other in found[i + 1 :]:
                a, b = rep.solution.values, other.solution.values
                dist = min(math.sqrt(w * np.sum((a - b) ** 2)), math.sqrt(w * np.sum((a + b) ** 2)))
                assert dist > 1e-3


def test_criterion_08_supercritical_3d(capsys):
    with criterion(8, "supercritical 3D 9^3 p=8: criteria 4 and 5", 300.0, capsys):
        domain, params, _, iv = half_mu_star(3, 9, 8.0)
        assert params.p > 2 * 3 / (3 - 2)
        check_ball_invariance(domain, params, iv)
        check_positive_solutions(domain, params, iv)


def test_criterion_09_oddness(capsys):
    with criterion(9, "oddness and evenness", None, capsys):
        d = build_domain(2, [1.0, 1.0], [16, 16])
        params = ProblemParams(4.0, 1.5, 0.7)
        rng = np.random.default_rng(9)
        for _ in range(100):
            u = GridFunction(d, rng.standard_normal(d.size) * 10 ** rng.uniform(-3, 2))
            assert np.max(np.abs(nonlinearity(-u, params).values + nonlinearity(u, params).values)) <= 1e-12
            assert abs(phi(-u, params) - phi(u, params)) <= 1e-12 * abs(phi(u, params))
        domain, params, _, iv = half_mu_star(2, 32, 4.0)
        for rep in multiplicity_search(domain, params, ConstraintSet(iv.r2), 3, seed=0):
            u = rep.solution
            assert abs(energy(-u, params) - energy(u, params)) <= 1e-12


SWEEP_CONFIG = """\
[domain]
dimension = 2
lengths = 1.0 1.0
nodes = 16 16

[problem]
p = 4
q = 1.5

[mu]
relative = true
start = 0.1
stop = 0.8
count = 8
"""


def test_criterion_10_sweep_determinism(tmp_path, capsys):
    with criterion(10, "sweep --jobs 1 vs --jobs 4 byte-identical", None, capsys):
        cfg = tmp_path / "sweep.ini"
        cfg.write_text(SWEEP_CONFIG)
        outputs = []
        for jobs, out in (("1", "serial"), ("4", "parallel")):
            proc = subprocess.run(
                [sys.executable, "-m", "concavex.cli", "sweep", "--config", str(cfg), "--jobs", jobs, "--out", str(tmp_path / out)],
                capture_output=True,
                check=True,
            )
            (csv,) = (tmp_path / out).rglob("sweep.csv")
            assert csv.read_bytes() == proc.stdout
            outputs.append(csv.read_bytes())
        assert outputs[0] == outputs[1]
        assert len(outputs[0].decode().splitlines()) == 9
