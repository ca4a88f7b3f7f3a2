"""Energy ``I = Ψ - Φ`` for ``-Δu = |u|^{p-2}u + μ|u|^{q-2}u`` and its derivatives.

``Ψ(u) = ½‖∇u‖²`` is the convex part, ``Φ(u) = (1/p)∫|u|^p + (μ/q)∫|u|^q``
the nonlinear part. All integrals use the node quadrature of :mod:`grid`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from .grid import GridFunction, apply_laplacian, eigen_basis, h10_norm_sq, solve_laplacian, w2n_norm

if TYPE_CHECKING:
    from .solver import ConstraintSet


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemParams:
    p: float
    q: float
    mu: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p > 2):
            raise ParameterError(f"p must exceed 2, got {self.p}")
        if not (1 < self.q < 2):
            raise ParameterError(f"q must lie in (1, 2), got {self.q}")
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise ParameterError(f"mu must be >= 0, got {self.mu}")

    def with_mu(self, mu: float) -> ProblemParams:
        return ProblemParams(self.p, self.q, mu)


# ---------------------------------------------------------------------------
# array kernels; used directly by the solvers


def signed_power(values: np.ndarray, e: float) -> np.ndarray:
    """``|u|^{e-1} u`` with the value 0 at u = 0 (continuous for e > 1)."""
    a = np.abs(values)
    out = np.zeros_like(values, dtype=float)
    nz = a > 0
    out[nz] = np.sign(values[nz]) * a[nz] ** (e - 1.0)
    return out


def nonlinearity_values(values: np.ndarray, params: ProblemParams) -> np.ndarray:
    out = signed_power(values, params.p)
    if params.mu:
        out += params.mu * signed_power(values, params.q)
    return out


def phi_value(values: np.ndarray, w: float, params: ProblemParams) -> float:
    a = np.abs(values)
    total = float(np.sum(a**params.p)) / params.p
    if params.mu:
        total += params.mu * float(np.sum(a**params.q)) / params.q
    return w * total


def energy_value(domain, values: np.ndarray, params: ProblemParams) -> float:
    return 0.5 * h10_norm_sq(domain, values) - phi_value(values, domain.cell_volume, params)


def residual_values(domain, values: np.ndarray, params: ProblemParams) -> np.ndarray:
    return apply_laplacian(domain, values) - nonlinearity_values(values, params)


# ---------------------------------------------------------------------------
# public operations


def nonlinearity(u: GridFunction, params: ProblemParams) -> GridFunction:
    """Nodewise ``DΦ(u) = |u|^{p-2}u + μ|u|^{q-2}u``."""
    return GridFunction(u.domain, nonlinearity_values(u.values, params))


def phi(u: GridFunction, params: ProblemParams) -> float:
    return phi_value(u.values, u.domain.cell_volume, params)


def psi(u: GridFunction) -> float:
    return 0.5 * h10_norm_sq(u.domain, u.values)


def energy(u: GridFunction, params: ProblemParams) -> float:
    """``I(u) = ½‖∇u‖² - (1/p)‖u‖_p^p - (μ/q)‖u‖_q^q``."""
    return energy_value(u.domain, u.values, params)


def energy_gradient(u: GridFunction, params: ProblemParams) -> GridFunction:
    """Strong-form residual ``-Δ_h u - DΦ(u)``.

    Its weighted L² pairing with a direction is the directional derivative
    of :func:`energy`.
    """
    return GridFunction(u.domain, residual_values(u.domain, u.values, params))


# ---------------------------------------------------------------------------
# critical-point certificate


@dataclass
class CertificateReport:
    """Worst sampled value of ``<DΦ(u), u - v> + Ψ_K(v) - Ψ_K(u)``."""

    min_slack: float
    worst_index: int
    seed: int
    feasible: bool
    tolerance: float
    witnesses: list[np.ndarray] = field(default_factory=list, repr=False)
    slacks: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def certified(self) -> bool:
        return self.feasible and self.min_slack >= -self.tolerance

    def to_text(self) -> str:
        return (
            f"min_slack = {self.min_slack:.12g}\n"
            f"worst_witness_index = {self.worst_index}\n"
            f"seed = {self.seed}\n"
            f"feasible = {str(self.feasible).lower()}\n"
        )


def certificate_tolerance(u: GridFunction) -> float:
    return 1e-8 * (1.0 + w2n_norm(u.domain, u.values))


def _witness_family(u: GridFunction, params: ProblemParams, constraint: ConstraintSet, trial_count: int, seed: int):
    from .solver import project_values

    domain = u.domain
    x = u.values
    n_modes = min(4, domain.size)
    _, E = eigen_basis(domain, n_modes)
    xnorm = float(np.max(np.abs(x)))
    delta = 1e-3 * xnorm if xnorm > 0 else 1e-3

    def proj(v):
        return project_values(domain, v, constraint)

    det = [np.zeros_like(x), x.copy()]
    det += [proj(t * x) for t in (0.25, 0.5, 0.9, 0.99, 1.01, 1.1, 2.0)]
    # rays from u that end on the ball boundary
    det += [proj(100.0 * x)]
    for j in range(n_modes):
        e = E[:, j] / np.max(np.abs(E[:, j]))
        det += [proj(x + delta * e), proj(x - delta * e), proj(x + e * max(xnorm, 1.0) * 1e3)]
    # the Poisson image of DΦ(u), the competitor a fixed point is compared against
    det.append(proj(solve_laplacian(domain, nonlinearity_values(x, params))))
    rng = np.random.default_rng(seed)
    rand = []
    for _ in range(max(0, trial_count - len(det))):
        v = rng.standard_normal(x.size)
        if rng.random() < 0.5:
            v = x + rng.uniform(1e-3, 1.0) * (xnorm if xnorm > 0 else 1.0) * v / np.max(np.abs(v))
        else:
            r = w2n_norm(domain, v)
            v = v * (rng.uniform(0.0, 1.0) * constraint.radius / r if r > 0 else 0.0)
        rand.append(proj(v))
    return det + rand


def szulkin_certificate(
    u: GridFunction,
    params: ProblemParams,
    constraint: ConstraintSet,
    trial_count: int = 100,
    seed: int = 0,
) -> CertificateReport:
    """Sample the critical-point inequality for ``I_K`` at ``u``.

    Every witness ``v`` is feasible, so ``Ψ_K(v) = Ψ(v)``; the report holds
    the minimum slack over the family. ``v = u`` is always included.
    """
    tol = certificate_tolerance(u)
    if not constraint.contains(u):
        return CertificateReport(-math.inf, -1, seed, False, tol)
    domain = u.domain
    w = domain.cell_volume
    x = u.values
    dphi = nonlinearity_values(x, params)
    psi_u = 0.5 * h10_norm_sq(domain, x)
    witnesses = _witness_family(u, params, constraint, trial_count, seed)
    slacks = np.array(
        [w * float(dphi @ (x - v)) + 0.5 * h10_norm_sq(domain, v) - psi_u for v in witnesses]
    )
    worst = int(np.argmin(slacks))
    return CertificateReport(float(slacks[worst]), worst, seed, True, tol, witnesses, slacks)
