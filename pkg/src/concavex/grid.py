"""Finite-difference discretization of box domains with zero Dirichlet data.

Grid functions live on interior nodes only; boundary values are identically
zero and never stored. Values are flattened in C (lexicographic) order of the
node array of shape ``nodes_per_axis``.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

#: relative residual demanded of every Poisson solve
POISSON_RTOL = 1e-12
#: residual tolerance declared for returned eigenpairs
EIGEN_TOL = 1e-8
#: above this node count eigenpairs come from shift-invert Lanczos instead of dense eigh
DENSE_EIGEN_LIMIT = 4096


class GridError(ValueError):
    """Invalid grid construction or grid-function input."""


class PoissonSolveError(RuntimeError):
    """The linear solve did not reach the requested residual."""


@dataclass(frozen=True)
class GridDomain:
    """Box ``prod_k (0, L_k)`` with ``N_k`` interior nodes per axis.

    :func:`build_domain` is the validating constructor. Direct construction
    also accepts a single interior node per axis, which is occasionally handy
    for closed-form checks.
    """

    dimension: int
    side_lengths: tuple[float, ...]
    nodes_per_axis: tuple[int, ...]

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise GridError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        lengths = tuple(float(L) for L in self.side_lengths)
        nodes = tuple(int(n) for n in self.nodes_per_axis)
        if len(lengths) != self.dimension or len(nodes) != self.dimension:
            raise GridError("side_lengths and nodes_per_axis need one entry per axis")
        if any(not math.isfinite(L) or L <= 0 for L in lengths):
            raise GridError(f"side lengths must be positive, got {lengths}")
        if any(n < 1 for n in nodes):
            raise GridError(f"node counts must be positive, got {nodes}")
        object.__setattr__(self, "side_lengths", lengths)
        object.__setattr__(self, "nodes_per_axis", nodes)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / (n + 1) for L, n in zip(self.side_lengths, self.nodes_per_axis))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.nodes_per_axis

    @property
    def size(self) -> int:
        return math.prod(self.nodes_per_axis)

    @property
    def cell_volume(self) -> float:
        """Quadrature weight attached to every interior node."""
        return math.prod(self.spacing)

    @property
    def measure(self) -> float:
        return math.prod(self.side_lengths)

    def axes(self) -> list[np.ndarray]:
        """Interior node coordinates along each axis."""
        return [h * np.arange(1, n + 1) for h, n in zip(self.spacing, self.nodes_per_axis)]

    def coordinates(self) -> list[np.ndarray]:
        """Flattened coordinate arrays, one per axis, in node order."""
        return [X.ravel() for X in np.meshgrid(*self.axes(), indexing="ij")]

    def sample(self, fn) -> GridFunction:
        """Evaluate ``fn(x1, ..., xd)`` at the interior nodes."""
        return GridFunction(self, np.asarray(fn(*self.coordinates()), dtype=float))

    def zeros(self) -> GridFunction:
        return GridFunction(self, np.zeros(self.size))


def build_domain(dimension: int, side_lengths: Sequence[float], nodes_per_axis: Sequence[int]) -> GridDomain:
    """Validated constructor: at least two interior nodes on every axis."""
    if any(int(n) < 2 for n in nodes_per_axis):
        raise GridError(f"need at least 2 interior nodes per axis, got {tuple(nodes_per_axis)}")
    return GridDomain(int(dimension), tuple(side_lengths), tuple(nodes_per_axis))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Read-only node values attached to a domain."""

    domain: GridDomain
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).ravel()
        if vals.size != self.domain.size:
            raise GridError(f"expected {self.domain.size} node values, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise GridError("grid function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __neg__(self) -> GridFunction:
        return GridFunction(self.domain, -self.values)

    def __add__(self, other: GridFunction) -> GridFunction:
        return GridFunction(self.domain, self.values + _values_on(other, self.domain))

    def __sub__(self, other: GridFunction) -> GridFunction:
        return GridFunction(self.domain, self.values - _values_on(other, self.domain))

    def __mul__(self, scalar: float) -> GridFunction:
        return GridFunction(self.domain, float(scalar) * self.values)

    __rmul__ = __mul__

    def as_array(self) -> np.ndarray:
        """Node values reshaped to the grid."""
        return self.values.reshape(self.domain.shape)

    def min(self) -> float:
        return float(self.values.min())


def _values_on(other: GridFunction, domain: GridDomain) -> np.ndarray:
    if other.domain != domain:
        raise GridError("grid functions live on different domains")
    return other.values


# ---------------------------------------------------------------------------
# operators


def _second_difference(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / (h * h)


@functools.lru_cache(maxsize=16)
def laplacian_matrix(domain: GridDomain) -> sp.csr_matrix:
    """Sparse matrix of ``-Δ_h`` (3/5/7-point stencil, ghost-eliminated zero boundary)."""
    A = sp.csr_matrix((domain.size, domain.size))
    for k, (n, h) in enumerate(zip(domain.nodes_per_axis, domain.spacing)):
        factors = [sp.identity(m, format="csr") for m in domain.nodes_per_axis]
        factors[k] = _second_difference(n, h)
        term = factors[0]
        for F in factors[1:]:
            term = sp.kron(term, F, format="csr")
        A = A + term
    A = A.tocsr()
    A.sort_indices()
    return A


@functools.lru_cache(maxsize=16)
def _factorization(domain: GridDomain):
    return spla.splu(laplacian_matrix(domain).tocsc())


def apply_laplacian(domain: GridDomain, values: np.ndarray) -> np.ndarray:
    return laplacian_matrix(domain) @ values


def solve_laplacian(domain: GridDomain, rhs: np.ndarray) -> np.ndarray:
    """Array-level ``-Δ_h v = rhs``; direct solve, refinement, CG as last resort."""
    A = laplacian_matrix(domain)
    scale = float(np.max(np.abs(rhs))) if rhs.size else 0.0
    if scale == 0.0:
        return np.zeros_like(rhs, dtype=float)
    lu = _factorization(domain)
    v = lu.solve(rhs)
    tol = POISSON_RTOL * scale
    for _ in range(2):
        r = rhs - A @ v
        if np.max(np.abs(r)) <= tol:
            return v
        v = v + lu.solve(r)
    if np.max(np.abs(rhs - A @ v)) <= tol:
        return v
    log.debug("direct Poisson solve above tolerance, falling back to CG")
    v, info = spla.cg(A, rhs, x0=v, rtol=1e-14, atol=0.1 * tol, maxiter=10 * domain.size)
    res = float(np.max(np.abs(rhs - A @ v)))
    if res > tol:
        raise PoissonSolveError(f"Poisson residual {res:.3e} exceeds {tol:.3e} (cg info={info})")
    return v


def neg_laplacian(u: GridFunction) -> GridFunction:
    """``-Δ_h u`` with zero Dirichlet ghost values."""
    return GridFunction(u.domain, apply_laplacian(u.domain, u.values))


def poisson_solve(f: GridFunction) -> GridFunction:
    """Unique ``v`` with ``-Δ_h v = f`` and ``v = 0`` on the boundary."""
    return GridFunction(f.domain, solve_laplacian(f.domain, f.values))


# ---------------------------------------------------------------------------
# spectrum


@dataclass(frozen=True)
class EigenPair:
    eigenvalue: float
    eigenfunction: GridFunction


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(vec))
    idx = np.flatnonzero(np.abs(vec) > 1e-8 * scale)
    if idx.size and vec[idx[0]] < 0:
        return -vec
    return vec


@functools.lru_cache(maxsize=16)
def _eigen_arrays(domain: GridDomain, k: int) -> tuple[np.ndarray, np.ndarray]:
    A = laplacian_matrix(domain)
    if domain.size <= DENSE_EIGEN_LIMIT:
        lam, vecs = scipy.linalg.eigh(A.toarray(), subset_by_index=[0, k - 1])
    else:
        lam, vecs = spla.eigsh(A, k=k, sigma=0.0, which="LM", tol=1e-14)
        order = np.argsort(lam, kind="stable")
        lam, vecs = lam[order], vecs[:, order]
    w = domain.cell_volume
    cols = []
    for j in range(k):
        v = _fix_sign(vecs[:, j])
        # H^1_0 normalization: <A e, e>_w = lambda w |e|^2 = 1
        cols.append(v / math.sqrt(lam[j] * w * float(v @ v)))
    E = np.column_stack(cols)
    E.setflags(write=False)
    lam = np.array(lam, dtype=float)
    lam.setflags(write=False)
    return lam, E


def eigenpairs(domain: GridDomain, k: int) -> list[EigenPair]:
    """The ``k`` smallest eigenpairs of ``-Δ_h``, H¹₀-orthonormal eigenfunctions."""
    k = int(k)
    if not 1 <= k <= domain.size:
        raise GridError(f"k must lie in [1, {domain.size}], got {k}")
    lam, E = _eigen_arrays(domain, k)
    return [EigenPair(float(lam[j]), GridFunction(domain, E[:, j])) for j in range(k)]


def eigen_basis(domain: GridDomain, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Array form of :func:`eigenpairs`: eigenvalues and a ``(size, k)`` column basis."""
    if not 1 <= k <= domain.size:
        raise GridError(f"k must lie in [1, {domain.size}], got {k}")
    return _eigen_arrays(domain, int(k))


# ---------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class Lt:
    """Discrete Lebesgue norm of exponent ``t``."""

    t: float


NormKind = Union[Lt, str]


def lt_power(values: np.ndarray, w: float, t: float) -> float:
    """``sum_i w |u_i|^t``; any ``t > 0`` (quasi-norm powers included)."""
    return w * float(np.sum(np.abs(values) ** t))


def lt_norm(values: np.ndarray, w: float, t: float) -> float:
    return lt_power(values, w, t) ** (1.0 / t)


def h10_norm_sq(domain: GridDomain, values: np.ndarray) -> float:
    """``sum w |∇_h u|^2`` over forward differences, boundary cells included."""
    u = values.reshape(domain.shape)
    total = 0.0
    for axis, h in enumerate(domain.spacing):
        pad = [(0, 0)] * domain.dimension
        pad[axis] = (1, 1)
        d = np.diff(np.pad(u, pad), axis=axis) / h
        total += float(np.sum(d * d))
    return domain.cell_volume * total


def w2n_norm(domain: GridDomain, values: np.ndarray) -> float:
    """``‖Δ_h u‖_{L^n}`` with ``n`` the space dimension."""
    return lt_norm(apply_laplacian(domain, values), domain.cell_volume, domain.dimension)


def norm(u: GridFunction, kind: NormKind) -> float:
    """Discrete norm of ``u``: ``Lt(t)`` (t ≥ 1), ``"H10"`` or ``"W2n"``."""
    d = u.domain
    if isinstance(kind, Lt):
        if not kind.t >= 1:
            raise GridError(f"L^t norm needs t >= 1, got {kind.t}")
        return lt_norm(u.values, d.cell_volume, kind.t)
    if kind == "H10":
        return math.sqrt(h10_norm_sq(d, u.values))
    if kind == "W2n":
        return norm(neg_laplacian(u), Lt(d.dimension))
    raise GridError(f"unknown norm kind {kind!r}")


def inner(u: GridFunction, v: GridFunction) -> float:
    """Weighted L² pairing ``sum w u_i v_i``."""
    return u.domain.cell_volume * float(u.values @ _values_on(v, u.domain))


# ---------------------------------------------------------------------------
# text serialization


def format_grid_function(u: GridFunction) -> str:
    d = u.domain
    header = " ".join(
        [str(d.dimension)] + [str(n) for n in d.nodes_per_axis] + [repr(L) for L in d.side_lengths]
    )
    body = "\n".join(f"{x:.17g}" for x in u.values)
    return f"{header}\n{body}\n"


def parse_grid_function(text: str) -> GridFunction:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise GridError("empty grid-function text")
    head = lines[0].split()
    dim = int(head[0])
    if len(head) != 1 + 2 * dim:
        raise GridError(f"malformed header line {lines[0]!r}")
    nodes = tuple(int(x) for x in head[1 : 1 + dim])
    lengths = tuple(float(x) for x in head[1 + dim :])
    domain = GridDomain(dim, lengths, nodes)
    values = np.array([float(x) for x in lines[1:]])
    return GridFunction(domain, values)


def write_grid_function(u: GridFunction, path: str | Path) -> None:
    Path(path).write_text(format_grid_function(u))


def read_grid_function(path: str | Path) -> GridFunction:
    return parse_grid_function(Path(path).read_text())
