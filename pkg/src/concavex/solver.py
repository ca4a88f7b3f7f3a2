"""Solvers on the constraint sets ``K(r) = {‖Δ_h u‖_{L^n} <= r}`` and ``K(r) ∩ {u >= 0}``.

``T(u) = (-Δ_h)^{-1} DΦ(u)`` maps ``K(r)`` into itself for radii in the
invariant interval; every solver below works inside such a ball and reports
whether it stayed there.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.optimize
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .functional import (
    ProblemParams,
    energy_value,
    nonlinearity_values,
    residual_values,
    signed_power,
    szulkin_certificate,
)
from .grid import (
    GridDomain,
    GridFunction,
    apply_laplacian,
    eigen_basis,
    laplacian_matrix,
    lt_norm,
    solve_laplacian,
    w2n_norm,
)

log = logging.getLogger(__name__)

BALL_TOL = 1e-10
#: smallest damping used by the fixed-point iteration
THETA_MIN = 1.0 / 16
WITNESS_T = (1e-1, 1e-2, 1e-3, 1e-4)
#: iterations without halving the stationarity measure before the sphere polish
POLISH_AFTER = 50


class SolverError(RuntimeError):
    """Solver failure; ``report`` holds the last iterate when available."""

    exit_code = 2

    def __init__(self, message: str, report: Optional[SolveReport] = None):
        super().__init__(message)
        self.report = report


class ToleranceError(SolverError):
    exit_code = 2


class NoNegativeWitness(SolverError):
    exit_code = 2


class BallViolation(SolverError):
    exit_code = 3


class SphereExitsK(SolverError):
    def __init__(self, message: str, max_norm: float):
        super().__init__(message)
        self.max_norm = max_norm


@dataclass(frozen=True)
class ConstraintSet:
    radius: float
    nonnegative: bool = False

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError(f"radius must be nonnegative, got {self.radius}")

    def contains_values(self, domain: GridDomain, values: np.ndarray) -> bool:
        if self.nonnegative and values.size and values.min() < -1e-12:
            return False
        return w2n_norm(domain, values) <= self.radius * (1 + 1e-12)

    def contains(self, u: GridFunction) -> bool:
        return self.contains_values(u.domain, u.values)


def project_values(domain: GridDomain, values: np.ndarray, k: ConstraintSet) -> np.ndarray:
    """Clamp (if sign-constrained), then scale radially into the ball."""
    if k.contains_values(domain, values):
        return values
    v = np.maximum(values, 0.0) if k.nonnegative else values.copy()
    nrm = w2n_norm(domain, v)
    if nrm > k.radius:
        v = v * (k.radius / nrm) if k.radius > 0 else np.zeros_like(v)
        # guard the last ulp so the result passes the membership test
        while w2n_norm(domain, v) > k.radius * (1 + 1e-12):
            v = v * (1 - 1e-15)
    return v


def project_feasible(u: GridFunction, k: ConstraintSet) -> GridFunction:
    """Retraction onto ``k``; the identity on feasible points."""
    v = project_values(u.domain, u.values, k)
    return u if v is u.values else GridFunction(u.domain, v)


@dataclass
class SolveReport:
    solution: GridFunction
    residual_inf: float
    energy: float
    iterations: int
    in_ball: bool
    min_value: float
    certificate_slack: float
    w2n_norm: float = 0.0
    radius: float = 0.0
    method: str = ""
    ball_active: bool = False
    degenerate: bool = False
    energy_history: list[float] = field(default_factory=list, repr=False)

    def to_text(self) -> str:
        rows = [
            ("method", self.method),
            ("energy", f"{self.energy:.17g}"),
            ("residual_inf", f"{self.residual_inf:.17g}"),
            ("iterations", str(self.iterations)),
            ("in_ball", str(self.in_ball).lower()),
            ("ball_active", str(self.ball_active).lower()),
            ("w2n_norm", f"{self.w2n_norm:.17g}"),
            ("radius", f"{self.radius:.17g}"),
            ("min_value", f"{self.min_value:.17g}"),
            ("certificate_slack", f"{self.certificate_slack:.17g}"),
            ("degenerate", str(self.degenerate).lower()),
        ]
        return "".join(f"{k} = {v}\n" for k, v in rows)

    def summary_line(self) -> str:
        return (
            f"method={self.method} energy={self.energy:.12g} residual_inf={self.residual_inf:.12g} "
            f"min_value={self.min_value:.12g} iterations={self.iterations}"
        )


def verify_solution(
    u: GridFunction,
    params: ProblemParams,
    k: ConstraintSet,
    trial_count: int = 100,
    seed: int = 0,
    *,
    iterations: int = 0,
    method: str = "verify",
) -> SolveReport:
    """Recompute every diagnostic of ``u``; never raises on non-solutions."""
    d = u.domain
    x = u.values
    nrm = w2n_norm(d, x)
    cert = szulkin_certificate(u, params, k, trial_count, seed)
    return SolveReport(
        solution=u,
        residual_inf=float(np.max(np.abs(residual_values(d, x, params)))) if x.size else 0.0,
        energy=energy_value(d, x, params),
        iterations=iterations,
        in_ball=nrm <= k.radius + BALL_TOL,
        min_value=float(x.min()),
        certificate_slack=cert.min_slack,
        w2n_norm=nrm,
        radius=k.radius,
        method=method,
        ball_active=nrm >= 0.99 * k.radius,
    )


# ---------------------------------------------------------------------------
# fixed point


def fixed_point_image(u: GridFunction, params: ProblemParams) -> GridFunction:
    """``T(u)``: the Poisson solve with the nonlinearity of ``u`` as source."""
    return GridFunction(u.domain, solve_laplacian(u.domain, nonlinearity_values(u.values, params)))


def fixed_point_solve(
    u0: GridFunction,
    params: ProblemParams,
    r: float,
    tol: float = 1e-10,
    max_iter: int = 5000,
    *,
    theta: float = 1.0,
    trial_count: int = 100,
    seed: int = 0,
) -> SolveReport:
    """Damped iteration ``u <- (1-θ)u + θ T(u)`` inside ``K(r)``.

    ``θ`` is halved whenever the residual grows. Every iterate is checked
    against the ball; leaving it raises :class:`BallViolation`.
    """
    d = u0.domain
    k = ConstraintSet(r)
    if w2n_norm(d, u0.values) > r + BALL_TOL:
        raise ValueError("starting point lies outside K(r)")
    x = u0.values.copy()
    theta_max = theta
    res = float(np.max(np.abs(residual_values(d, x, params))))
    it = 0
    while res > tol:
        if it >= max_iter:
            rep = verify_solution(GridFunction(d, x), params, k, trial_count, seed, iterations=it, method="fixed_point")
            raise ToleranceError(f"max_iter exceeded: residual {res:.3e} > {tol:.3e}", rep)
        tx = solve_laplacian(d, nonlinearity_values(x, params))
        tnorm = w2n_norm(d, tx)
        if tnorm > r + BALL_TOL:
            rep = verify_solution(GridFunction(d, x), params, k, trial_count, seed, iterations=it, method="fixed_point")
            raise BallViolation(f"T(u) left K(r): {tnorm!r} > {r!r} at iteration {it}", rep)
        while True:
            cand = (1 - theta) * x + theta * tx
            cres = float(np.max(np.abs(residual_values(d, cand, params))))
            if cres <= res or theta <= THETA_MIN:
                break
            theta = max(0.5 * theta, THETA_MIN)
        if cres <= res:
            theta = min(2.0 * theta, theta_max)
        x, res = cand, cres
        it += 1
        log.debug("fixed point it=%d norm=%.6g residual=%.3e theta=%g", it, w2n_norm(d, x), res, theta)
        if w2n_norm(d, x) > r + BALL_TOL:
            raise BallViolation(f"iterate left K(r) at iteration {it}")
    return verify_solution(GridFunction(d, x), params, k, trial_count, seed, iterations=it, method="fixed_point")


# ---------------------------------------------------------------------------
# constrained minimization


def negative_energy_witness(domain: GridDomain, params: ProblemParams, k: ConstraintSet) -> tuple[float, np.ndarray]:
    """Lowest ``I(t e1)`` over the witness scales with ``t e1`` in ``k``."""
    _, E = eigen_basis(domain, 1)
    e = E[:, 0]
    best = (math.inf, None)
    for t in WITNESS_T:
        v = t * e
        if not k.contains_values(domain, v):
            continue
        val = energy_value(domain, v, params)
        if val < best[0]:
            best = (val, v)
    return best


def _kkt_residual(domain: GridDomain, x: np.ndarray, params: ProblemParams) -> tuple[float, float, np.ndarray]:
    """Multiplier ``c`` and ``‖g - c Δ_h s‖_∞`` for the sphere ``‖Δ_h u‖_n = r``."""
    n = domain.dimension
    w = domain.cell_volume
    g = residual_values(domain, x, params)
    ax = apply_laplacian(domain, x)
    sn = signed_power(ax, n) if n > 1 else np.sign(ax)
    c = w * float(x @ g) / lt_norm(ax, w, n) ** n
    kkt = g - c * apply_laplacian(domain, sn)
    return float(np.max(np.abs(kkt))), c, kkt


def _kkt_polish(
    domain: GridDomain, x: np.ndarray, params: ProblemParams, k: ConstraintSet, tol: float, max_iter: int = 30
) -> Optional[np.ndarray]:
    """Newton on ``g - c Δ_h s = 0``, ``‖Δ_h u‖_n^n = r^n``; ``None`` unless a valid KKT point is reached."""
    n = domain.dimension
    w = domain.cell_volume
    A = laplacian_matrix(domain)
    res, c, kkt = _kkt_residual(domain, x, params)
    for _ in range(max_iter):
        if res <= tol:
            break
        ax = A @ x
        sn = signed_power(ax, n) if n > 1 else np.sign(ax)
        J = _jacobian(domain, x, params)
        if n > 1:
            J = J - c * (A @ sp.diags((n - 1) * np.abs(ax) ** (n - 2)) @ A)
        col = -(A @ sn)
        row = n * w * (A @ sn)
        big = sp.bmat([[J, col[:, None]], [row[None, :], None]], format="csc")
        rhs = -np.concatenate([kkt, [w * float(np.sum(np.abs(ax) ** n)) - k.radius**n]])
        try:
            step = spla.spsolve(big, rhs)
        except RuntimeError:
            return None
        if not np.all(np.isfinite(step)):
            return None
        x = x + step[:-1]
        res, c, kkt = _kkt_residual(domain, x, params)
    if res > tol or c > 0 or not k.contains_values(domain, x):
        return None
    return x


def minimize_positive(
    params: ProblemParams,
    k: ConstraintSet,
    domain: GridDomain,
    start: Optional[GridFunction] = None,
    tol: float = 1e-10,
    max_iter: int = 5000,
    *,
    trial_count: int = 100,
    seed: int = 0,
) -> SolveReport:
    """Projected descent of the energy over ``k``.

    Directions are the H¹₀ representative of the energy gradient,
    ``T(u) - u``; steps are projected back onto ``k`` and accepted under an
    Armijo rule. Stops once ``‖-Δ_h(P(u + d) - u)‖_∞ <= tol``.

    On the sphere ``‖u‖_{W2n} = r`` the radial retraction does not fix
    constrained minimizers. When ``d`` points outward it is replaced by the
    Riesz representative of the tangential gradient, ``d + c s`` with
    ``s = |Δ_h u|^{n-2} Δ_h u``, projected along ``u`` onto the tangent
    space so that the retracted path descends; the stopping test then
    measures the KKT residual ``‖g - c Δ_h s‖_∞``.
    """
    if k.radius == 0:
        rep = verify_solution(domain.zeros(), params, k, trial_count, seed, method="minimize_positive")
        rep.degenerate = True
        return rep
    witness_energy, witness = negative_energy_witness(domain, params, k)
    if not witness_energy < 0:
        raise NoNegativeWitness(f"no negative-energy witness (best {witness_energy!r}); mu outside the working regime?")
    x = witness if start is None else project_values(domain, start.values, k)
    w = domain.cell_volume
    n = domain.dimension
    E = energy_value(domain, x, params)
    history = [E]

    def report(it):
        return verify_solution(GridFunction(domain, x), params, k, trial_count, seed, iterations=it, method="minimize_positive")

    best_stationarity, since_best = math.inf, 0
    for it in range(max_iter + 1):
        g = residual_values(domain, x, params)
        direction = solve_laplacian(domain, -g)
        ax = apply_laplacian(domain, x)
        sn = signed_power(ax, n) if n > 1 else np.sign(ax)
        on_sphere = lt_norm(ax, w, n) >= k.radius * (1 - 1e-9)
        if on_sphere and float(sn @ g) < 0:
            c = w * float(x @ g) / lt_norm(ax, w, n) ** n
            v = direction + c * sn
            # oblique projection along u: the first-order motion of the retracted path
            direction = v - (float(sn @ apply_laplacian(domain, v)) / float(sn @ ax)) * x
            stationarity = float(np.max(np.abs(g - c * apply_laplacian(domain, sn))))
            full = project_values(domain, x + direction, k)
        else:
            on_sphere = False
            full = project_values(domain, x + direction, k)
            stationarity = float(np.max(np.abs(apply_laplacian(domain, full - x))))
        log.debug("minimize it=%d energy=%.15g stationarity=%.3e sphere=%s", it, E, stationarity, on_sphere)
        if stationarity <= tol:
            break
        if stationarity < 0.5 * best_stationarity:
            best_stationarity, since_best = stationarity, 0
        else:
            since_best += 1
        # energy descent on the sphere stalls at roundoff: finish with Newton on the KKT system
        if on_sphere and since_best >= POLISH_AFTER:
            polished = _kkt_polish(domain, x, params, k, tol)
            if polished is None:
                raise ToleranceError("stalled above tolerance on the constraint sphere", report(it))
            x = polished
            E = energy_value(domain, x, params)
            history.append(E)
            break
        if it == max_iter:
            raise ToleranceError("stalled above tolerance", report(it))
        alpha = 1.0
        while True:
            trial = full if alpha == 1.0 else project_values(domain, x + alpha * direction, k)
            Et = energy_value(domain, trial, params)
            predicted = w * float(g @ (trial - x))
            # below energy roundoff the Armijo test carries no information
            if alpha == 1.0 and abs(predicted) <= 1e-12 * max(abs(E), 1e-300):
                break
            if Et <= E + 1e-4 * predicted or (Et <= E and alpha < 1e-6):
                break
            alpha *= 0.5
            if alpha < 1e-12:
                break
        if alpha < 1e-12:
            since_best = POLISH_AFTER
            if not on_sphere:
                raise ToleranceError("stalled above tolerance: line search failed", report(it))
            continue
        x, E = trial, Et
        history.append(E)
    rep = report(it)
    rep.energy_history = history
    if not rep.energy <= witness_energy:
        raise NoNegativeWitness(f"minimizer energy {rep.energy!r} above witness {witness_energy!r}", rep)
    return rep


# ---------------------------------------------------------------------------
# sphere levels


def _sphere_starts(k_dim: int, n_random: int, rng: np.random.Generator) -> list[np.ndarray]:
    starts = []
    for j in range(k_dim):
        e = np.zeros(k_dim)
        e[j] = 1.0
        starts += [e, -e]
    if k_dim > 1:
        for signs in np.ndindex(*(2,) * min(k_dim, 4)):
            s = np.ones(k_dim)
            s[: len(signs)] = 1 - 2 * np.array(signs)
            starts.append(s / math.sqrt(k_dim))
        starts += [v / np.linalg.norm(v) for v in rng.standard_normal((n_random, k_dim))]
    return starts


def _maximize_on_sphere(fun, grad, starts, max_iter: int = 500) -> tuple[float, np.ndarray]:
    """Riemannian gradient ascent on the unit sphere, best over starts."""
    best, best_a = -math.inf, None
    for a in starts:
        a = a / np.linalg.norm(a)
        val = fun(a)
        step = 0.5
        for _ in range(max_iter):
            gr = grad(a)
            gr = gr - (gr @ a) * a
            gn = np.linalg.norm(gr)
            if gn < 1e-13:
                break
            while step > 1e-12:
                b = a + step * gr / gn
                b /= np.linalg.norm(b)
                vb = fun(b)
                if vb > val:
                    break
                step *= 0.5
            else:
                break
            improvement = vb - val
            a, val = b, vb
            step = min(2 * step, 1.0)
            if improvement <= 1e-14 * max(1.0, abs(val)):
                break
        if val > best:
            best, best_a = val, a
    return best, best_a


def sphere_max_w2n(domain: GridDomain, k_dim: int, rho: float, seed: int = 0) -> float:
    """Largest ``‖Δ_h u‖_{L^n}`` on ``{Σ α_j e_j : |α| = rho}``."""
    lam, E = eigen_basis(domain, k_dim)
    B = E * lam  # -Δ_h e_j = λ_j e_j
    n, w = domain.dimension, domain.cell_volume
    if k_dim == 1:
        return rho * lt_norm(B[:, 0], w, n)

    def fun(a):
        return lt_norm(B @ a, w, n) ** n

    def grad(a):
        v = B @ a
        return n * w * (B.T @ signed_power(v, n))

    rng = np.random.default_rng(seed)
    val, _ = _maximize_on_sphere(fun, grad, _sphere_starts(k_dim, 8, rng))
    return rho * val ** (1.0 / n)


def sphere_level_estimate(
    domain: GridDomain,
    params: ProblemParams,
    k_dim: int,
    rho: float,
    constraint: Optional[ConstraintSet] = None,
    seed: int = 0,
) -> float:
    """Best found ``sup I`` over the ``rho``-sphere of ``span(e_1..e_k)``.

    The eigenfunctions are H¹₀-orthonormal, so the quadratic part is the
    constant ``rho²/2`` on the sphere. When ``constraint`` is given the
    sphere must lie inside it.
    """
    if k_dim < 1 or not rho > 0:
        raise ValueError("need k_dim >= 1 and rho > 0")
    if constraint is not None:
        mx = sphere_max_w2n(domain, k_dim, rho, seed)
        if mx > constraint.radius:
            raise SphereExitsK(f"sphere exits K: max W2n norm {mx!r} > {constraint.radius!r}", mx)
    _, E = eigen_basis(domain, k_dim)
    w = domain.cell_volume

    def fun(a):
        return energy_value(domain, rho * (E @ a), params)

    def grad(a):
        u = rho * (E @ a)
        # quadratic part is constant on the sphere
        return -rho * w * (E.T @ nonlinearity_values(u, params))

    if k_dim == 1:
        return max(fun(np.ones(1)), fun(-np.ones(1)))
    rng = np.random.default_rng(seed)
    val, _ = _maximize_on_sphere(fun, grad, _sphere_starts(k_dim, 16, rng))
    return val


def select_rho(
    domain: GridDomain,
    params: ProblemParams,
    k_dim: int,
    constraint: ConstraintSet,
    seed: int = 0,
    levels: int = 20,
) -> tuple[float, float]:
    """Largest ``rho`` in ``{2^-m r : m = 1..levels}`` with a negative level inside ``K``."""
    for m in range(1, levels + 1):
        rho = constraint.radius * 2.0**-m
        if sphere_max_w2n(domain, k_dim, rho, seed) > constraint.radius:
            continue
        level = sphere_level_estimate(domain, params, k_dim, rho, None, seed)
        if level < 0:
            return rho, level
    raise SolverError(f"no rho in the 2^-m grid gives a negative level for k={k_dim}")


# ---------------------------------------------------------------------------
# multiplicity


@dataclass
class DeflationState:
    """Shifted deflation ``M(u) = Π (1 + shift / ‖u - u_i‖^power)``, weighted L² distance."""

    w: float
    shift: float = 1.0
    power: float = 2.0
    found: list[np.ndarray] = field(default_factory=list)

    def add(self, u: np.ndarray) -> None:
        self.found.append(np.array(u, dtype=float))

    def factor_and_grad_log(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        """``M(u)`` and the Euclidean gradient of ``log M``."""
        m = 1.0
        g = np.zeros_like(u)
        for ui in self.found:
            diff = u - ui
            dist = math.sqrt(self.w * float(diff @ diff))
            if dist == 0.0:
                return math.inf, g
            t = self.shift * dist**-self.power
            m *= 1.0 + t
            # d/du log(1 + s d^-a) = -a t / (1 + t) * grad(d)/d,  grad(d) = w diff / d
            g += (-self.power * t / (1.0 + t)) * self.w * diff / (dist * dist)
        return m, g


def _jacobian(domain: GridDomain, x: np.ndarray, params: ProblemParams) -> sp.csc_matrix:
    a = np.maximum(np.abs(x), 1e-12 * max(1.0, float(np.max(np.abs(x)))))
    dphi = (params.p - 1) * a ** (params.p - 2)
    if params.mu:
        dphi = dphi + params.mu * (params.q - 1) * a ** (params.q - 2)
    return (laplacian_matrix(domain) - sp.diags(dphi)).tocsc()


def deflated_newton(
    domain: GridDomain,
    x0: np.ndarray,
    params: ProblemParams,
    deflation: DeflationState,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> tuple[np.ndarray, bool, int]:
    """Newton on ``M(u) F(u) = 0`` with ``F = -Δ_h u - DΦ(u)``; backtracking on ``M ‖F‖``."""
    x = x0.copy()
    F = residual_values(domain, x, params)
    M, _ = deflation.factor_and_grad_log(x)
    merit = M * np.linalg.norm(F)
    for it in range(max_iter):
        if float(np.max(np.abs(F))) <= tol:
            return x, True, it
        try:
            delta = spla.spsolve(_jacobian(domain, x, params), -F)
        except RuntimeError:
            return x, False, it
        if not np.all(np.isfinite(delta)):
            return x, False, it
        _, glog = deflation.factor_and_grad_log(x)
        denom = 1.0 - float(glog @ delta)
        step = delta / denom if denom > 1e-8 and math.isfinite(denom) else delta
        alpha = 1.0
        while True:
            trial = x + alpha * step
            Ft = residual_values(domain, trial, params)
            Mt, _ = deflation.factor_and_grad_log(trial)
            mt = Mt * np.linalg.norm(Ft)
            if mt < merit or alpha <= 1 / 64:
                break
            alpha *= 0.5
        x, F, merit = trial, Ft, mt
    return x, float(np.max(np.abs(F))) <= tol, max_iter


def canonical_sign(x: np.ndarray) -> np.ndarray:
    """Representative of ``±x`` whose first non-negligible entry is positive."""
    scale = float(np.max(np.abs(x))) if x.size else 0.0
    idx = np.flatnonzero(np.abs(x) > 1e-8 * scale)
    return -x if idx.size and x[idx[0]] < 0 else x


def distinctness_threshold(domain: GridDomain) -> float:
    return 1e-3 * math.sqrt(domain.measure)


def _ray_minimize(domain: GridDomain, s: np.ndarray, params: ProblemParams) -> np.ndarray:
    res = scipy.optimize.minimize_scalar(
        lambda t: energy_value(domain, t * s, params), bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-10}
    )
    return res.x * s


def multiplicity_starts(domain: GridDomain, want: int, rho: float, seed: int, n_random: int) -> list[np.ndarray]:
    """Deterministic start list on ``rho``-spheres in growing eigenfunction spans."""
    m = min(want + 2, domain.size)
    _, E = eigen_basis(domain, m)
    starts = [rho * E[:, j] for j in range(m)]
    for j in range(1, m):
        for i in range(j):
            starts += [rho * (E[:, i] + E[:, j]) / math.sqrt(2), rho * (E[:, i] - E[:, j]) / math.sqrt(2)]
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        a = rng.standard_normal(m)
        starts.append(rho * (E @ (a / np.linalg.norm(a))))
    return starts


def multiplicity_search(
    domain: GridDomain,
    params: ProblemParams,
    k: ConstraintSet,
    want: int,
    seed: int = 0,
    *,
    rho: Optional[float] = None,
    tol: float = 1e-10,
    shift: float = 1.0,
    power: float = 2.0,
    n_random: int = 20,
    trial_count: int = 100,
) -> list[SolveReport]:
    """Find up to ``want`` distinct pairs ``±u`` of negative-energy solutions in ``k``.

    Starts lie on a ``rho``-sphere in ``span(e_1..e_{want+2})``; each start is
    first rescaled to the energy minimizer on its ray, then driven to a root by
    deflated Newton. The trivial solution and every found pair are deflated.
    Every accepted solution is re-verified without the deflation machinery.
    """
    if want <= 0:
        return []
    if rho is None:
        rho, _ = select_rho(domain, params, want, k, seed)
    deflation = DeflationState(domain.cell_volume, shift, power)
    deflation.add(np.zeros(domain.size))
    thresh = distinctness_threshold(domain)
    w = domain.cell_volume
    reports: list[SolveReport] = []
    for idx, s in enumerate(multiplicity_starts(domain, want, rho, seed, n_random)):
        if len(reports) >= want:
            break
        x0 = _ray_minimize(domain, s, params)
        x, ok, iters = deflated_newton(domain, x0, params, deflation, tol)
        if not ok:
            log.debug("start %d: deflated Newton did not converge", idx)
            continue
        x = canonical_sign(x)
        if math.sqrt(w * float(x @ x)) <= thresh:
            continue
        if any(min(np.sqrt(w * np.sum((x - y) ** 2)), np.sqrt(w * np.sum((x + y) ** 2))) <= thresh for y in (r.solution.values for r in reports)):
            continue
        rep = verify_solution(GridFunction(domain, x), params, k, trial_count, seed, iterations=iters, method=f"multiplicity[{len(reports)}]")
        if not (rep.residual_inf <= tol and rep.energy < 0 and rep.in_ball):
            log.debug("start %d rejected: residual %.3e energy %.3e in_ball %s", idx, rep.residual_inf, rep.energy, rep.in_ball)
            continue
        log.info("start %d: solution %d energy %.6g", idx, len(reports), rep.energy)
        reports.append(rep)
        deflation.add(x)
        deflation.add(-x)
    if len(reports) < want:
        log.warning("multiplicity shortfall: found %d of %d pairs", len(reports), want)
    return reports
