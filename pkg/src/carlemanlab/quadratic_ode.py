"""Quadratic ODE systems ``du/dt = F2 (u ⊗ u) + F1 u + F0``.

``F2`` is kept as a coordinate list. The column of the product ``u_i u_j``
is ``i * N + j`` (row-major pairing), which matches :func:`kron_power`.
Cross terms are encoded with a single entry (coefficient 1 on ``x ⊗ y``)
rather than split symmetrically across ``x ⊗ y`` and ``y ⊗ x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, ContractError, NonDissipativeError, NumericalError

#: Default ceiling on the length of any lifted vector or Kronecker power.
DEFAULT_SIZE_CAP = 10**7


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QuadraticSystem:
    """Coefficients of a time-independent quadratic ODE system.

    Args:
        dim: state dimension ``N``.
        f2_rows, f2_cols, f2_vals: coordinate entries of the ``N x N**2``
            quadratic coefficient. Duplicated coordinates are summed.
        f1: dense ``N x N`` linear coefficient.
        f0: constant inhomogeneity of length ``N``.
    """

    dim: int
    f2_rows: np.ndarray
    f2_cols: np.ndarray
    f2_vals: np.ndarray
    f1: np.ndarray
    f0: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        n = self.dim
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ContractError(f"dim must be a positive integer, got {n!r}")
        rows = np.asarray(self.f2_rows, dtype=np.int64).ravel()
        cols = np.asarray(self.f2_cols, dtype=np.int64).ravel()
        vals = np.asarray(self.f2_vals, dtype=float).ravel()
        if not rows.size == cols.size == vals.size:
            raise ContractError("f2 coordinate arrays differ in length")
        if rows.size and (rows.min() < 0 or rows.max() >= n):
            raise ContractError(f"f2 row index outside [0, {n})")
        if cols.size and (cols.min() < 0 or cols.max() >= n * n):
            raise ContractError(f"f2 column index outside [0, {n * n})")
        f1 = np.asarray(self.f1, dtype=float)
        f0 = np.asarray(self.f0, dtype=float)
        if f1.shape != (n, n):
            raise ContractError(f"f1 must be {n}x{n}, got shape {f1.shape}")
        if f0.shape != (n,):
            raise ContractError(f"f0 must have length {n}, got shape {f0.shape}")
        for label, arr in (("f2", vals), ("f1", f1), ("f0", f0)):
            if not np.all(np.isfinite(arr)):
                raise ContractError(f"{label} contains NaN or infinite entries")
        rows.setflags(write=False)
        cols.setflags(write=False)
        object.__setattr__(self, "dim", int(n))
        object.__setattr__(self, "f2_rows", rows)
        object.__setattr__(self, "f2_cols", cols)
        object.__setattr__(self, "f2_vals", _frozen(vals))
        object.__setattr__(self, "f1", _frozen(f1))
        object.__setattr__(self, "f0", _frozen(f0))

    @classmethod
    def from_dense(cls, f2, f1, f0, name=""):
        """Build from a dense ``N x N**2`` quadratic coefficient."""
        f2 = np.atleast_2d(np.asarray(f2, dtype=float))
        rows, cols = np.nonzero(f2)
        return cls(len(np.atleast_1d(f0)), rows, cols, f2[rows, cols],
                   np.atleast_2d(f1), np.atleast_1d(f0), name=name)

    @property
    def f2(self) -> sp.csr_matrix:
        """The quadratic coefficient as a CSR matrix of shape ``(N, N**2)``."""
        n = self.dim
        return sp.csr_matrix((self.f2_vals, (self.f2_rows, self.f2_cols)), shape=(n, n * n))

    def f2_dense(self) -> np.ndarray:
        return self.f2.toarray()

    @property
    def is_linear(self) -> bool:
        return not np.any(self.f2_vals)


def rhs_eval(sys: QuadraticSystem, u) -> np.ndarray:
    """Right-hand side ``F2 (u ⊗ u) + F1 u + F0`` without forming ``u ⊗ u``."""
    u = np.asarray(u, dtype=float)
    n = sys.dim
    if u.shape != (n,):
        raise ContractError(f"state must have shape ({n},), got {u.shape}")
    out = sys.f1 @ u + sys.f0
    if sys.f2_vals.size:
        quad = sys.f2_vals * u[sys.f2_cols // n] * u[sys.f2_cols % n]
        out += np.bincount(sys.f2_rows, weights=quad, minlength=n)
    return out


def kron_power(u, k: int, size_cap: int = DEFAULT_SIZE_CAP) -> np.ndarray:
    """k-fold Kronecker power of ``u`` in lexicographic index order.

    Component ``(i_1, ..., i_k)`` sits at ``sum_j i_j * N**(k - j)``.
    """
    u = np.asarray(u, dtype=float).ravel()
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    if u.size**k > size_cap:
        raise CapacityError(f"kron power of length {u.size}**{k} exceeds cap {size_cap}")
    out = u.copy()
    for _ in range(k - 1):
        out = np.multiply.outer(out, u).ravel()
    return out


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues_f1: np.ndarray
    max_real_part: float
    f2_spectral_norm: float
    dissipative: bool


def spectral_report(sys: QuadraticSystem) -> SpectralReport:
    """Eigenvalues of ``F1`` and the spectral norm of ``F2``.

    The norm of the rectangular ``F2`` is taken from the eigenvalues of the
    small ``N x N`` Gram matrix ``F2 F2^T``.
    """
    try:
        eig = np.linalg.eigvals(sys.f1)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed on F1: {exc}") from exc
    eig = eig[np.lexsort((eig.imag, eig.real))]
    f2 = sys.f2
    gram = (f2 @ f2.T).toarray()
    norm = float(np.sqrt(max(np.linalg.eigvalsh(gram).max(), 0.0))) if f2.nnz else 0.0
    max_re = float(eig.real.max())
    return SpectralReport(eig, max_re, norm, max_re < 0)


def reynolds_like_r(sys: QuadraticSystem, u0) -> float:
    """Relative strength of the nonlinearity and forcing against dissipation.

    ``R = (||F2|| ||u0|| + ||F0|| / ||u0||) / |Re lambda_N|`` where
    ``lambda_N`` is the eigenvalue of ``F1`` with the largest real part.

    Raises:
        NonDissipativeError: if ``F1`` has an eigenvalue with ``Re >= 0``.
    """
    rep = spectral_report(sys)
    if not rep.dissipative:
        raise NonDissipativeError(
            f"R is undefined: max Re(eig F1) = {rep.max_real_part:.6g} >= 0")
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (sys.dim,):
        raise ContractError(f"u0 must have shape ({sys.dim},), got {u0.shape}")
    nu = float(np.linalg.norm(u0))
    if nu == 0.0:
        raise ContractError("R is undefined for a zero initial condition")
    f0 = float(np.linalg.norm(sys.f0))
    return (rep.f2_spectral_norm * nu + f0 / nu) / abs(rep.max_real_part)
