"""LDG solver for phi_xx = source with Dirichlet data and minimal-dissipation fluxes.

Unknowns are (phi, psi) with psi ~ phi_x. Fluxes: phi-hat is the boundary
datum at both ends and phi^- inside; psi-hat is psi^+ everywhere except the
right boundary, where psi^- - (phi^- - phi_b) / h is used.
"""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import scipy.sparse as sp
from loguru import logger
from scipy.sparse.linalg import splu

from errors import ConfigurationError, SingularSystemError
from fem import DGFunction, Mesh1D, mode_signs, stiffness_matrix


@dataclass(eq=False)
class PoissonSystem:
    """Coupled (phi, psi) matrix, factorized once per mesh and degree."""

    mesh: Mesh1D
    degree: int
    matrix: sp.csc_matrix = field(init=False, repr=False)
    _lu: object = field(init=False, repr=False)

    def __post_init__(self):
        self.matrix = self._assemble()
        try:
            self._lu = splu(self.matrix)
        except RuntimeError as e:
            raise SingularSystemError(f"Poisson system is singular: {e}") from e
        logger.debug(f"Poisson system factorized: {self.matrix.shape[0]} unknowns")

    @property
    def block_size(self) -> int:
        return self.degree + 1

    @property
    def n_unknowns(self) -> int:
        return self.mesh.n_cells * self.block_size

    def _mass(self, j: int) -> np.ndarray:
        return np.diag(self.mesh.widths[j] / (2.0 * np.arange(self.degree + 1) + 1.0))

    def _assemble(self) -> sp.csc_matrix:
        n, nb = self.mesh.n_cells, self.block_size
        offset = self.n_unknowns
        S = stiffness_matrix(self.degree)
        e = np.ones(nb)
        s = mode_signs(self.degree)
        ee, se, es, ss = np.outer(e, e), np.outer(s, e), np.outer(e, s), np.outer(s, s)
        penalty = 1.0 / self.mesh.widths[-1]
        matrix = sp.lil_matrix((2 * offset, 2 * offset))

        def put(row_block: int, col_block: int, block: np.ndarray):
            r, c = row_block * nb, col_block * nb
            matrix[r : r + nb, c : c + nb] = matrix[r : r + nb, c : c + nb].toarray() + block

        for j in range(n):
            # (psi, w) + (phi, w_x) - phi-hat w^- + phi-hat w^+ = 0
            put(j, n + j, self._mass(j))
            put(j, j, S.T - (ee if j < n - 1 else 0.0))
            if j > 0:
                put(j, j - 1, se)
            # -(psi, v_x) + psi-hat v^- - psi-hat v^+ = (source, v)
            put(n + j, n + j, -S.T - ss)
            if j < n - 1:
                put(n + j, n + j + 1, es)
            else:
                put(n + j, n + j, ee)
                put(n + j, j, -penalty * ee)
        return matrix.tocsc()

    def _rhs(self, source: DGFunction, phi_a: float, phi_b: float) -> np.ndarray:
        n, nb = self.mesh.n_cells, self.block_size
        e = np.ones(nb)
        s = mode_signs(self.degree)
        rhs = np.zeros(2 * self.n_unknowns)
        rhs[:nb] -= phi_a * s
        rhs[(n - 1) * nb : n * nb] += phi_b * e
        masses = self.mesh.widths[:, None] / (2.0 * np.arange(nb) + 1.0)[None, :]
        rhs[self.n_unknowns :] = (masses * source.coeffs).ravel()
        rhs[-nb:] -= phi_b / self.mesh.widths[-1] * e
        return rhs

    def solve(self, source: DGFunction, phi_a: float, phi_b: float) -> Tuple[DGFunction, DGFunction]:
        """(phi, psi) for the given source and boundary values."""
        if source.degree != self.degree or not source.mesh.same_as(self.mesh):
            raise ConfigurationError("Poisson source lives on a different mesh or degree")
        x = self._lu.solve(self._rhs(source, phi_a, phi_b))
        if not np.all(np.isfinite(x)):
            raise SingularSystemError("Poisson solve produced non-finite values")
        phi = DGFunction.from_vector(self.mesh, self.degree, x[: self.n_unknowns])
        psi = DGFunction.from_vector(self.mesh, self.degree, x[self.n_unknowns :])
        return phi, psi

    def residual(
        self, phi: DGFunction, psi: DGFunction, source: DGFunction, phi_a: float, phi_b: float
    ) -> float:
        """Max-norm residual of both discrete equations."""
        x = np.concatenate((phi.vector(), psi.vector()))
        return float(np.abs(self.matrix @ x - self._rhs(source, phi_a, phi_b)).max())


def solve_poisson(
    source: DGFunction, phi_a: float, phi_b: float, system: PoissonSystem = None
) -> Tuple[DGFunction, DGFunction]:
    """Solve phi_xx = source; returns (phi, E) with E = -psi.

    Args:
        source: right-hand side in V_h
        phi_a: phi at the left end
        phi_b: phi at the right end
        system: cached factorization for repeated solves on the same mesh

    Returns:
        Potential and electric field
    """
    if system is None:
        system = PoissonSystem(source.mesh, source.degree)
    phi, psi = system.solve(source, phi_a, phi_b)
    return phi, -psi
