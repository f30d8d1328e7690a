"""Factorize and solve (I - gamma*dt*a0 * D) for the implicit IMEX stages.

Dirichlet meshes give a block-tridiagonal matrix, factorized as a banded LU
with LAPACK dgbtrf. Periodic meshes add two corner blocks; the last cell is
treated as a border so the leading block stays banded and the corner
coupling is resolved through a small dense Schur complement.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp
from loguru import logger
from scipy.linalg import lapack, lu_factor, lu_solve

from config import config
from errors import ConfigurationError, SingularSystemError
from ldg import DiscreteLaplacian

PIVOT_GROWTH_LIMIT = 1e8
RESIDUAL_TOLERANCE = 1e-11

Epoch = Tuple[float, float, float]


@dataclass(frozen=True, eq=False)
class BandedLU:
    """LAPACK banded LU factors of a square matrix."""

    lu: np.ndarray
    piv: np.ndarray
    kl: int
    ku: int

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        squeeze = rhs.ndim == 1
        rhs2d = np.ascontiguousarray(rhs.reshape(rhs.shape[0], -1))
        x, info = lapack.dgbtrs(self.lu, self.kl, self.ku, rhs2d, self.piv)
        if info != 0:
            raise SingularSystemError(f"dgbtrs failed with info={info}")
        return x[:, 0] if squeeze else x


def to_band_storage(matrix: sp.spmatrix, kl: int, ku: int) -> np.ndarray:
    """LAPACK layout with kl extra rows for fill-in: A[i, j] -> ab[kl + ku + i - j, j]."""
    coo = sp.coo_matrix(matrix)
    offsets = coo.row - coo.col
    if np.any(offsets > kl) or np.any(-offsets > ku):
        raise ConfigurationError("matrix entries fall outside the declared band")
    ab = np.zeros((2 * kl + ku + 1, coo.shape[1]))
    np.add.at(ab, (kl + ku + offsets, coo.col), coo.data)
    return ab


def banded_lu(matrix: sp.spmatrix, kl: int, ku: int) -> Tuple[BandedLU, float]:
    """Banded LU and its pivot growth max|U| / max|A|."""
    ab = to_band_storage(matrix, kl, ku)
    lu, piv, info = lapack.dgbtrf(ab, kl, ku)
    if info != 0:
        raise SingularSystemError(f"dgbtrf hit a zero pivot at column {info}")
    scale = abs(matrix).max()
    growth = np.abs(lu[: kl + ku + 1]).max() / scale if scale > 0 else 1.0
    return BandedLU(lu=lu, piv=piv, kl=kl, ku=ku), float(growth)


def dense_lu(matrix: np.ndarray):
    factors = lu_factor(matrix, check_finite=True)
    if np.any(np.diag(factors[0]) == 0.0):
        raise SingularSystemError("dense LU produced a zero pivot")
    return factors


@dataclass(eq=False)
class ImplicitFactorization:
    """Cached factors of A = I - shift * D, tagged with the (a0, dt, gamma) epoch."""

    laplacian: DiscreteLaplacian
    shift: float
    method: str
    epoch: Optional[Epoch] = None
    _factors: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return self.laplacian.size

    def sparse_matrix(self) -> sp.csr_matrix:
        return (sp.identity(self.size, format="csr") - self.shift * self.laplacian.matrix).tocsr()

    def matrix(self) -> np.ndarray:
        return self.sparse_matrix().toarray()

    def apply(self, x: np.ndarray) -> np.ndarray:
        """A x, without forming A."""
        return x - self.shift * (self.laplacian.matrix @ x)


def factorize(
    laplacian: DiscreteLaplacian,
    gamma_dt_a0: float,
    epoch: Optional[Epoch] = None,
    method: str = "auto",
) -> ImplicitFactorization:
    """LU of (I - gamma_dt_a0 * D).

    Args:
        laplacian: assembled discrete Laplacian
        gamma_dt_a0: shift, the diagonal tableau entry times dt times a0
        epoch: (a0, dt, gamma) tag used by `epoch_check`
        method: "auto" (banded, bordered when periodic), or "dense"

    Returns:
        ImplicitFactorization ready for `solve`
    """
    if not gamma_dt_a0 >= 0.0:
        raise ConfigurationError(f"implicit shift must be non-negative, got {gamma_dt_a0}")
    if method not in ("auto", "dense"):
        raise ConfigurationError(f"unknown factorization method {method!r}")
    fact = ImplicitFactorization(
        laplacian=laplacian, shift=float(gamma_dt_a0), method=method, epoch=epoch
    )
    if gamma_dt_a0 == 0.0:
        fact.method = "identity"
        return fact

    A = fact.sparse_matrix()
    nb = laplacian.block_size
    n_cells = laplacian.mesh.n_cells
    band = 2 * nb - 1

    if method == "dense" or (laplacian.mesh.is_periodic and n_cells <= 2):
        fact.method = "dense"
        fact._factors["dense"] = dense_lu(A.toarray())
    elif not laplacian.mesh.is_periodic:
        lu, growth = banded_lu(A, band, band)
        fact.method = "banded"
        fact._factors["banded"] = lu
        if growth > PIVOT_GROWTH_LIMIT:
            logger.warning(f"Pivot growth {growth:.2e} in banded LU, falling back to dense")
            fact.method = "dense"
            fact._factors = {"dense": dense_lu(A.toarray())}
    else:
        n1 = (n_cells - 1) * nb
        lu, growth = banded_lu(A[:n1, :n1], band, band)
        if growth > PIVOT_GROWTH_LIMIT:
            logger.warning(f"Pivot growth {growth:.2e} in bordered LU, falling back to dense")
            fact.method = "dense"
            fact._factors["dense"] = dense_lu(A.toarray())
        else:
            A12 = A[:n1, n1:].toarray()
            A21 = A[n1:, :n1].toarray()
            W = lu.solve(A12)
            schur = A[n1:, n1:].toarray() - A21 @ W
            fact.method = "bordered"
            fact._factors.update(banded=lu, W=W, A21=A21, schur=dense_lu(schur), n1=n1)

    logger.debug(
        f"Factorized implicit operator: size={fact.size}, shift={gamma_dt_a0:.6g}, "
        f"method={fact.method}, epoch={epoch}"
    )
    return fact


def solve(
    fact: ImplicitFactorization, rhs: np.ndarray, check_residual: Optional[bool] = None
) -> np.ndarray:
    """x with (I - shift * D) x = rhs."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (fact.size,):
        raise ConfigurationError(f"rhs has shape {rhs.shape}, expected ({fact.size},)")

    if fact.method == "identity":
        x = rhs.copy()
    elif fact.method == "dense":
        x = lu_solve(fact._factors["dense"], rhs)
    elif fact.method == "banded":
        x = fact._factors["banded"].solve(rhs)
    else:
        f = fact._factors
        n1 = f["n1"]
        y = f["banded"].solve(rhs[:n1])
        x2 = lu_solve(f["schur"], rhs[n1:] - f["A21"] @ y)
        x = np.concatenate((y - f["W"] @ x2, x2))

    if check_residual is None:
        check_residual = config.check_residuals
    if check_residual:
        residual = np.abs(fact.apply(x) - rhs).max()
        bound = RESIDUAL_TOLERANCE * max(np.abs(rhs).max(), 1e-300)
        if residual > bound:
            raise SingularSystemError(
                f"implicit solve residual {residual:.3e} exceeds {bound:.3e} ({fact.method})"
            )
    return x


def dense_solve(laplacian: DiscreteLaplacian, gamma_dt_a0: float, rhs: np.ndarray) -> np.ndarray:
    """Reference solve through a dense LU of the explicitly assembled matrix."""
    matrix = np.eye(laplacian.size) - gamma_dt_a0 * laplacian.to_dense()
    return lu_solve(dense_lu(matrix), np.asarray(rhs, dtype=float))


def epoch_check(fact: ImplicitFactorization, a0: float, dt: float, gamma: float) -> bool:
    """True when `fact` was built for exactly this (a0, dt, gamma)."""
    return fact.epoch == (a0, dt, gamma)
