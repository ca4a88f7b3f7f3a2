"""Embedding constants, the critical parameter ``mu_star`` and invariant radii.

With ``C1 = d1^{p-1}``, ``C2 = d2^{q-1}`` the ball ``K(r)`` is mapped into
itself by the Poisson image of the nonlinearity whenever

    h(r) = C1 r^{p-1} + mu C2 r^{q-1} - r <= 0.

Everything scalar here is solved by bracketed bisection.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .functional import ProblemParams
from .grid import GridDomain, GridFunction, apply_laplacian, eigen_basis, lt_norm, solve_laplacian

log = logging.getLogger(__name__)

R_TOL = 1e-12
MU_TOL = 1e-10
#: |h(r)/r| below this at the minimizer of h(r)/r counts as tangency
TANGENCY_TOL = 1e-12


class EmbeddingConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class EmbeddingConstants:
    d1: float
    d2: float
    p: float
    q: float

    def __post_init__(self):
        if not (self.d1 > 0 and self.d2 > 0):
            raise ValueError("embedding constants must be positive")

    @property
    def C1(self) -> float:
        return self.d1 ** (self.p - 1)

    @property
    def C2(self) -> float:
        return self.d2 ** (self.q - 1)

    @classmethod
    def from_C(cls, C1: float, C2: float, p: float, q: float) -> EmbeddingConstants:
        """Build from ``C1, C2`` directly (``d`` recovered by the inverse power)."""
        return cls(C1 ** (1.0 / (p - 1)), C2 ** (1.0 / (q - 1)), p, q)


@dataclass(frozen=True)
class RadiusInterval:
    r1: float
    r2: float
    tangent: bool = False
    degenerate: bool = False


@dataclass(frozen=True)
class ThresholdResult:
    mu_star: float
    r_star: float
    mu: Optional[float] = None
    r1: Optional[float] = None
    r2: Optional[float] = None

    @property
    def empty(self) -> bool:
        return self.r1 is None


# ---------------------------------------------------------------------------
# embedding constants


def embedding_ratio(domain: GridDomain, values: np.ndarray, s: float) -> float:
    """``‖u‖_{L^s} / ‖Δ_h u‖_{L^n}``; ``s`` may be below 1 (quasi-norm)."""
    w = domain.cell_volume
    return lt_norm(values, w, s) / lt_norm(apply_laplacian(domain, values), w, domain.dimension)


def _ascend(domain: GridDomain, f: np.ndarray, s: float, max_iter: int, window: int = 25):
    """Projected normalized ascent of ``log‖G f‖_s - log‖f‖_n`` over ``f >= 0``.

    ``G`` is the inverse of ``-Δ_h``; it is entrywise nonnegative, so
    ``|G f| <= G |f|`` and the supremum is attained on the nonnegative cone.
    """
    n = domain.dimension
    w = domain.cell_volume

    def objective(f):
        u = solve_laplacian(domain, f)
        return math.log(lt_norm(u, w, s)) - math.log(lt_norm(f, w, n)), u

    f = np.abs(f)
    f = f / f.max()
    obj, u = objective(f)
    history = [obj]
    alpha = 0.5
    for it in range(max_iter):
        S = w * float(np.sum(u**s))
        F = w * float(np.sum(f**n))
        grad = solve_laplacian(domain, w * u ** (s - 1)) / S - w * f ** (n - 1) / F
        gmax = float(np.max(np.abs(grad)))
        if gmax == 0.0:
            return obj, f, True
        direction = grad * (f.max() / gmax)
        while alpha > 1e-14:
            trial = np.maximum(f + alpha * direction, 0.0)
            if trial.max() > 0:
                tobj, tu = objective(trial)
                if tobj > obj:
                    break
            alpha *= 0.5
        else:
            return obj, f, True
        f = trial / trial.max()
        obj, u = tobj, tu / trial.max()
        alpha = min(2 * alpha, 1.0)
        history.append(obj)
        if len(history) > window and history[-1] - history[-1 - window] < 1e-10:
            return obj, f, True
    return obj, f, False


def estimate_embedding_constant(
    domain: GridDomain,
    s: float,
    *,
    n_eigen_starts: int = 5,
    n_random_starts: int = 5,
    seed: int = 0,
    extra_starts: Iterable[GridFunction] = (),
    max_iter: int = 4000,
) -> float:
    """Best found value of ``sup ‖u‖_{L^s} / ‖Δ_h u‖_{L^n}`` over grid functions.

    Multi-started ascent from the lowest eigenfunctions, seeded random starts
    and any ``extra_starts``. The result is a lower bound on the discrete best
    constant and is the value used downstream.
    """
    if not s > 0:
        raise ValueError(f"embedding exponent must be positive, got {s}")
    starts = []
    k = min(n_eigen_starts, domain.size)
    if k:
        lam, E = eigen_basis(domain, k)
        starts += [lam[j] * E[:, j] for j in range(k)]
    rng = np.random.default_rng(seed)
    starts += [rng.standard_normal(domain.size) for _ in range(n_random_starts)]
    starts += [apply_laplacian(domain, g.values) for g in extra_starts]

    best, best_idx, all_converged = -math.inf, -1, True
    for idx, f0 in enumerate(starts):
        if not np.any(f0):
            continue
        _, f, converged = _ascend(domain, f0, s, max_iter)
        all_converged &= converged
        ratio = embedding_ratio(domain, solve_laplacian(domain, f), s)
        if ratio > best:
            best, best_idx = ratio, idx
    if not all_converged:
        warnings.warn(
            f"embedding ascent for s={s} stalled before the stopping rule", EmbeddingConvergenceWarning
        )
    log.debug("embedding constant s=%g: %.12g (start %d)", s, best, best_idx)
    return best


def estimate_constants(domain: GridDomain, params: ProblemParams, seed: int = 0) -> EmbeddingConstants:
    """``d1`` for ``L^{n(p-1)}`` and ``d2`` for ``L^{n(q-1)}``."""
    n = domain.dimension
    d1 = estimate_embedding_constant(domain, n * (params.p - 1), seed=seed)
    d2 = estimate_embedding_constant(domain, n * (params.q - 1), seed=seed)
    return EmbeddingConstants(d1, d2, params.p, params.q)


# ---------------------------------------------------------------------------
# scalar analysis


def h_value(r: float, ec: EmbeddingConstants, mu: float) -> float:
    return ec.C1 * r ** (ec.p - 1) + mu * ec.C2 * r ** (ec.q - 1) - r


def _h_over_r(r: float, ec: EmbeddingConstants, mu: float) -> float:
    return ec.C1 * r ** (ec.p - 2) + mu * ec.C2 * r ** (ec.q - 2) - 1.0


def _argmin_h_over_r(ec: EmbeddingConstants, mu: float) -> float:
    p, q = ec.p, ec.q
    return ((2 - q) * mu * ec.C2 / ((p - 2) * ec.C1)) ** (1.0 / (p - q))


def _bisect(g, inside: float, outside: float, tol: float) -> float:
    """Boundary of ``{g <= 0}`` between ``inside`` (g <= 0) and ``outside`` (g > 0).

    Returns the last point known to satisfy ``g <= 0``. The bracket is also
    shrunk to a few ulps so that endpoints far below ``tol`` stay resolved.
    """
    while abs(outside - inside) > min(tol, 4e-16 * max(abs(inside), abs(outside))):
        mid = 0.5 * (inside + outside)
        if mid in (inside, outside):
            break
        if g(mid) <= 0:
            inside = mid
        else:
            outside = mid
    return inside


def _check(ec: EmbeddingConstants, params: ProblemParams):
    if ec.p != params.p or ec.q != params.q:
        raise ValueError("embedding constants were computed for different exponents")


def radius_interval(ec: EmbeddingConstants, params: ProblemParams) -> Optional[RadiusInterval]:
    """Maximal ``[r1, r2]`` on which ``h(r) <= 0``; ``None`` when empty.

    For ``mu = 0`` the lower end is reported as the sentinel ``r1 = 0`` with
    ``degenerate`` set.
    """
    _check(ec, params)
    mu = params.mu
    if mu == 0:
        return RadiusInterval(0.0, ec.C1 ** (-1.0 / (ec.p - 2)), degenerate=True)

    def g(r):
        return _h_over_r(r, ec, mu)

    rm = _argmin_h_over_r(ec, mu)
    gm = g(rm)
    if abs(gm) <= TANGENCY_TOL:
        return RadiusInterval(rm, rm, tangent=True)
    if gm > 0:
        return None
    lo = rm
    while g(lo) <= 0:
        lo *= 0.5
    hi = rm
    while g(hi) <= 0:
        hi *= 2.0
    r1 = _bisect(g, rm, lo, R_TOL)
    r2 = _bisect(g, rm, hi, R_TOL)
    return RadiusInterval(r1, r2)


def mu_star_closed_form(ec: EmbeddingConstants) -> tuple[float, float]:
    """``(mu_star, r_star)`` from eliminating ``h = h' = 0``."""
    p, q = ec.p, ec.q
    r_star = ((2 - q) / ((p - q) * ec.C1)) ** (1.0 / (p - 2))
    mu = (r_star - ec.C1 * r_star ** (p - 1)) / (ec.C2 * r_star ** (q - 1))
    return mu, r_star


def mu_star_bisection(ec: EmbeddingConstants, tol: float = 1e-13) -> float:
    """Largest ``mu`` with ``min_r h(r)/r <= 0``, located by bisection in ``mu``."""

    def nonempty(mu):
        return _h_over_r(_argmin_h_over_r(ec, mu), ec, mu) <= 0

    lo, hi = 0.0, 1.0
    while nonempty(hi):
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if nonempty(mid):
            lo = mid
        else:
            hi = mid
    return lo


def mu_star(ec: EmbeddingConstants, params: ProblemParams, check: bool = True) -> ThresholdResult:
    """Critical parameter and tangency radius; ``params.mu`` is ignored."""
    _check(ec, params)
    mu, r = mu_star_closed_form(ec)
    if check:
        oracle = mu_star_bisection(ec)
        if abs(oracle - mu) > MU_TOL:
            raise RuntimeError(f"closed-form mu_star {mu!r} disagrees with bisection {oracle!r}")
    return ThresholdResult(mu, r)


def thresholds(ec: EmbeddingConstants, params: ProblemParams) -> ThresholdResult:
    """``mu_star``, ``r_star`` and the invariant interval for ``params.mu``."""
    base = mu_star(ec, params)
    interval = radius_interval(ec, params)
    if interval is None:
        return ThresholdResult(base.mu_star, base.r_star, params.mu)
    return ThresholdResult(base.mu_star, base.r_star, params.mu, interval.r1, interval.r2)
