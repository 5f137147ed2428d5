"""Carleman linearisation of quadratic systems.

The lifted state is ``y = (u, u⊗u, ..., u^{⊗C})``. Differentiating block ``j``
with the product rule gives

    d/dt u^{⊗j} = D_j u^{⊗(j-1)} + L_j u^{⊗j} + U_j u^{⊗(j+1)}

where each of ``D_j``, ``L_j``, ``U_j`` is the Kronecker sum
``sum_nu I^{⊗(nu-1)} ⊗ M ⊗ I^{⊗(j-nu)}`` with ``M`` equal to ``F0`` (as an
``N x 1`` block), ``F1`` and ``F2`` respectively. Truncating at order ``C``
drops ``U_C``; the ``j = 1`` forcing ``F0`` moves into the constant vector
``b``.

Time stepping is forward Euler ``y <- (I + A dt) y + b dt``. The Euler steps
can also be written as one block lower-bidiagonal system ``M y_hat = rhs``
over all time levels (:func:`assemble_global`). :func:`integrate_expm` is an
alternative that advances the truncated linear system exactly over each step,
which separates truncation error from time-discretisation error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import norm as sparse_norm, spsolve_triangular

from .errors import CapacityError, ContractError, DivergenceError
from .io import write_csv
from .quadratic_ode import DEFAULT_SIZE_CAP, QuadraticSystem, kron_power
from .reference import IntegratorConfig, integrate_reference
from .trajectory import Trajectory, interpolate_linear

#: Nonzero budget for the all-timesteps matrix ``M``.
GLOBAL_CAP = 10**7
#: Largest lifted dimension for which a dense matrix exponential is formed.
EXPM_CAP = 2000
#: ``||u||`` beyond which a Carleman solution counts as blown up.
BLOWUP_NORM = 1e12


def carleman_dimension(n: int, c: int, size_cap: int = DEFAULT_SIZE_CAP) -> int:
    """Lifted dimension ``sum_{j=1..c} n**j``."""
    if n < 1 or c < 1:
        raise ContractError(f"need n >= 1 and c >= 1, got n={n}, c={c}")
    dim = c if n == 1 else n * (n**c - 1) // (n - 1)
    if dim > size_cap:
        raise CapacityError(f"lifted dimension {dim} exceeds cap {size_cap}")
    return dim


def _kron_sum(block, n: int, j: int) -> sp.csr_matrix:
    """``sum_{nu=1..j} I_{n^(nu-1)} ⊗ block ⊗ I_{n^(j-nu)}``."""
    block = sp.csr_matrix(block)
    total = None
    for nu in range(1, j + 1):
        term = sp.kron(sp.identity(n ** (nu - 1), format="csr"), block, format="csr")
        term = sp.kron(term, sp.identity(n ** (j - nu), format="csr"), format="csr")
        total = term if total is None else total + term
    return total.tocsr()


def transfer_blocks(sys: QuadraticSystem, j: int, size_cap: int = DEFAULT_SIZE_CAP):
    """The ``(down, diag, up)`` blocks of row ``j`` of the Carleman matrix.

    Shapes are ``N^j x N^(j-1)``, ``N^j x N^j`` and ``N^j x N^(j+1)``; for
    ``j = 1`` the down block has zero columns.
    """
    n = sys.dim
    if j < 1:
        raise ContractError(f"block index j must be >= 1, got {j}")
    if n ** (j + 1) > size_cap:
        raise CapacityError(f"block of width {n}**{j + 1} exceeds cap {size_cap}")
    up = _kron_sum(sys.f2, n, j)
    diag = _kron_sum(sys.f1, n, j)
    if j == 1:
        down = sp.csr_matrix((n, 0))
    else:
        down = _kron_sum(sys.f0.reshape(n, 1), n, j)
    return down, diag, up


@dataclass(frozen=True)
class CarlemanOperator:
    order: int
    lifted_dim: int
    a: sp.csr_matrix
    b: np.ndarray
    source: QuadraticSystem

    def block_offsets(self) -> list[int]:
        """Start index of every block ``j = 1..C`` plus the end sentinel."""
        n = self.source.dim
        offs = [0]
        for j in range(1, self.order + 1):
            offs.append(offs[-1] + n**j)
        return offs

    def block_of(self, index) -> np.ndarray:
        """1-based block number of each lifted index."""
        return np.searchsorted(self.block_offsets(), np.asarray(index), side="right")


def assemble(sys: QuadraticSystem, c: int, size_cap: int = DEFAULT_SIZE_CAP) -> CarlemanOperator:
    """Truncated Carleman matrix ``A`` and forcing ``b = (F0, 0, ..., 0)``."""
    dim = carleman_dimension(sys.dim, c, size_cap)
    grid = [[None] * c for _ in range(c)]
    n = sys.dim
    for j in range(1, c + 1):
        grid[j - 1][j - 1] = _kron_sum(sys.f1, n, j)
        if j > 1:
            grid[j - 1][j - 2] = _kron_sum(sys.f0.reshape(n, 1), n, j)
        if j < c:
            grid[j - 1][j] = _kron_sum(sys.f2, n, j)
    a = sp.bmat(grid, format="csr")
    a.eliminate_zeros()
    b = np.zeros(dim)
    b[: sys.dim] = sys.f0
    return CarlemanOperator(c, dim, a, b, sys)


def lift_initial(u0, c: int, size_cap: int = DEFAULT_SIZE_CAP) -> np.ndarray:
    """``(u0, u0⊗u0, ..., u0^{⊗c})`` concatenated."""
    u0 = np.asarray(u0, dtype=float).ravel()
    carleman_dimension(u0.size, c, size_cap)
    return np.concatenate([kron_power(u0, j, size_cap) for j in range(1, c + 1)])


def n_steps(t_end: float, dt: float) -> int:
    """Number of steps covering ``[0, t_end]``.

    ``t_end / dt`` is rounded to the nearest integer when it is within
    ``1e-9`` (relative) of one; otherwise it is rounded up, so the last grid
    time ``m * dt`` may overshoot ``t_end`` by less than one step.
    """
    if not dt > 0 or not t_end > 0:
        raise ContractError(f"dt and t_end must be positive, got dt={dt}, t_end={t_end}")
    ratio = t_end / dt
    nearest = round(ratio)
    if abs(ratio - nearest) <= 1e-9 * max(1.0, ratio):
        return max(int(nearest), 1)
    return int(math.ceil(ratio))


def spectral_radius_estimate(a: sp.spmatrix) -> float:
    if a.shape[0] <= 1500:
        return float(np.abs(np.linalg.eigvals(a.toarray())).max()) if a.shape[0] else 0.0
    return float(sparse_norm(a, ord=np.inf))


def _check_y0(op, y0):
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (op.lifted_dim,):
        raise ContractError(f"y0 must have length {op.lifted_dim}, got shape {y0.shape}")
    return y0


def _march(step, op, y0, dt, t_end, keep_lifted, meta):
    n = op.source.dim
    m = n_steps(t_end, dt)
    times = dt * np.arange(m + 1)
    u = np.empty((m + 1, n))
    y = y0.copy()
    u[0] = y[:n]
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(m):
            y = step(y)
            if not np.all(np.isfinite(y)) or np.linalg.norm(y[:n]) > BLOWUP_NORM:
                partial = Trajectory(times[: i + 1], u[: i + 1], meta=dict(meta, diverged=True))
                raise DivergenceError(
                    f"Carleman solution blew up at t = {times[i + 1]:.6g}",
                    float(times[i + 1]), partial)
            u[i + 1] = y[:n]
    return Trajectory(times, u, meta=meta, lifted_final=y if keep_lifted else None)


def integrate_euler(op: CarlemanOperator, y0, dt: float, t_end: float,
                    keep_lifted: bool = False) -> Trajectory:
    """Forward Euler ``y <- (I + A dt) y + b dt`` from 0 to ``t_end``.

    Only the ``u`` block is stored per step; ``keep_lifted`` also returns the
    full lifted state at the final time. A ``RuntimeWarning`` is emitted when
    ``dt`` times the spectral radius of ``A`` exceeds 2.

    Raises:
        DivergenceError: with ``partial`` holding the steps computed before
            the first non-finite state.
    """
    y0 = _check_y0(op, y0)
    rho = spectral_radius_estimate(op.a)
    if dt * rho > 2:
        warnings.warn(f"dt * spectral radius = {dt * rho:.3g} > 2: forward Euler is "
                      "likely unstable", RuntimeWarning, stacklevel=2)
    a, bdt = op.a, op.b * dt
    meta = {"integrator": "euler", "dt": dt, "order": op.order}
    return _march(lambda y: y + dt * (a @ y) + bdt, op, y0, dt, t_end, keep_lifted, meta)


def integrate_expm(op: CarlemanOperator, y0, dt: float, t_end: float,
                   keep_lifted: bool = False) -> Trajectory:
    """Advance the truncated linear system exactly over each step of size ``dt``.

    Uses the exponential of the augmented matrix ``[[A, b], [0, 0]] dt``;
    errors are then purely truncation (plus rounding).
    """
    y0 = _check_y0(op, y0)
    d = op.lifted_dim
    if d + 1 > EXPM_CAP:
        raise CapacityError(f"dense exponential of size {d + 1} exceeds cap {EXPM_CAP}")
    aug = np.zeros((d + 1, d + 1))
    aug[:d, :d] = op.a.toarray()
    aug[:d, d] = op.b
    prop = scipy.linalg.expm(aug * dt)
    step_mat, step_vec = prop[:d, :d], prop[:d, d]
    meta = {"integrator": "expm", "dt": dt, "order": op.order}
    return _march(lambda y: step_mat @ y + step_vec, op, y0, dt, t_end, keep_lifted, meta)


def assemble_global(op: CarlemanOperator, y0, dt: float, t_end: float,
                    size_cap: int = GLOBAL_CAP):
    """All Euler steps as one sparse system ``M y_hat = rhs``.

    ``M = I - A_hat`` has identity diagonal blocks and ``-(I + A dt)`` on the
    block sub-diagonal; ``rhs = (y0, b dt, ..., b dt)``. Time levels are
    stacked forward, so ``M`` is block lower bidiagonal.
    """
    y0 = _check_y0(op, y0)
    m = n_steps(t_end, dt)
    d = op.lifted_dim
    total = d * (m + 1)
    step = (sp.identity(d, format="csr") + dt * op.a).tocsr()
    nnz = total + m * step.nnz
    if nnz > size_cap:
        raise CapacityError(f"global system needs ~{nnz} nonzeros, cap is {size_cap}")
    shift = sp.diags([np.ones(m)], [-1], shape=(m + 1, m + 1), format="csr")
    big = sp.identity(total, format="csr") - sp.kron(shift, step, format="csr")
    rhs = np.tile(op.b * dt, m + 1)
    rhs[:d] = y0
    return big.tocsr(), rhs


def solve_global(matrix, rhs, lifted_dim: int) -> np.ndarray:
    """Sparse lower-triangular solve; rows of the result are time levels."""
    sol = spsolve_triangular(sp.csr_matrix(matrix), rhs, lower=True, unit_diagonal=True)
    return np.asarray(sol).reshape(-1, lifted_dim)


@dataclass
class ErrorCurve:
    """``|u(t) - u_C(t)|`` on the Carleman time grid."""

    times: np.ndarray
    err: np.ndarray
    order: int
    scheme: str
    diverged: bool = False
    blowup_time: float | None = None

    @property
    def max_error(self) -> float:
        return float(np.max(self.err)) if self.err.size else math.inf

    def to_csv(self, path):
        return write_csv(path, ["t", "err"], [self.times, self.err])


SCHEMES = {"euler": integrate_euler, "expm": integrate_expm}


def carleman_solution(sys: QuadraticSystem, u0, c: int, dt: float, t_end: float,
                      scheme: str = "euler", size_cap: int = DEFAULT_SIZE_CAP) -> Trajectory:
    """Assemble, lift and integrate in one call."""
    if scheme not in SCHEMES:
        raise ContractError(f"unknown scheme {scheme!r}; choose from {sorted(SCHEMES)}")
    op = assemble(sys, c, size_cap)
    return SCHEMES[scheme](op, lift_initial(u0, c, size_cap), dt, t_end)


def reference_on_grid(sys: QuadraticSystem, u0, dt: float, t_end: float,
                      cfg: IntegratorConfig | None = None) -> Trajectory:
    """Reference solution sampled on the Carleman grid for ``(dt, t_end)``."""
    m = n_steps(t_end, dt)
    grid = dt * np.arange(m + 1)
    traj = integrate_reference(sys, u0, grid[-1], cfg)
    return Trajectory(grid, traj.at(grid), meta=dict(traj.meta, sampled_dt=dt))


def truncation_error(sys: QuadraticSystem, u0, c: int, dt: float, t_end: float,
                     reference: Trajectory, scheme: str = "euler",
                     size_cap: int = DEFAULT_SIZE_CAP) -> ErrorCurve:
    """Euclidean distance between the Carleman ``u`` block and ``reference``.

    The reference is linearly interpolated onto the Carleman grid, so it
    should be sampled at least that finely (see :func:`reference_on_grid`).
    A blow-up of the Carleman solution truncates the curve and sets
    ``diverged``.
    """
    m = n_steps(t_end, dt)
    if reference.t_end < m * dt * (1 - 1e-12):
        raise ContractError(f"reference ends at {reference.t_end}, needs {m * dt}")
    diverged, t_bad = False, None
    try:
        approx = carleman_solution(sys, u0, c, dt, t_end, scheme, size_cap)
    except DivergenceError as exc:
        approx, diverged, t_bad = exc.partial, True, exc.time
    ref = interpolate_linear(reference.times, reference.states, approx.times)
    err = np.linalg.norm(approx.states - ref, axis=1)
    return ErrorCurve(approx.times, err, c, scheme, diverged, t_bad)
