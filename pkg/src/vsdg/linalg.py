"""Sparse storage and linear solvers for the Stokes saddle-point system."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from vsdg.grid import ConfigurationError

logger = logging.getLogger(__name__)

METHODS = ("gmres", "direct", "dense")
PRECONDITIONERS = ("block-jacobi", "none")


class SolverError(RuntimeError):
    """Linear solve failed to reach the requested tolerance."""

    def __init__(self, message: str, residual: float = float("nan"), iterations: int = 0):
        super().__init__(f"{message} (relative residual {residual:.3e}, {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SolverConfig:
    method: str = "gmres"
    tol: float = 1e-10
    max_iter: int = 2000
    restart: int = 100
    preconditioner: str = "block-jacobi"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown solver method {self.method!r}; expected one of {METHODS}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ConfigurationError(f"unknown preconditioner {self.preconditioner!r}")
        if not 0.0 < self.tol < 1.0:
            raise ConfigurationError(f"solver tolerance must lie in (0, 1), got {self.tol}")
        if self.max_iter < 1 or self.restart < 1:
            raise ConfigurationError("max_iter and restart must be positive")


@dataclass
class SolveInfo:
    iterations: int = 0
    residual: float = 0.0
    method: str = ""


def as_csr(matrix) -> sp.csr_matrix:
    """Canonical CSR form: sorted, duplicate-free column indices."""
    A = sp.csr_matrix(matrix, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    if not np.all(np.isfinite(A.data)):
        raise ValueError("matrix has non-finite entries")
    return A


def spmv(matrix, x) -> np.ndarray:
    """Sparse matrix-vector product; rows are accumulated in stored column order."""
    x = np.asarray(x, dtype=float)
    n_rows, n_cols = matrix.shape
    if x.shape != (n_cols,):
        raise ValueError(f"dimension mismatch: matrix is {matrix.shape}, vector has shape {x.shape}")
    return np.asarray(sp.csr_matrix(matrix) @ x)


def relative_residual(matrix, x, rhs) -> float:
    rhs = np.asarray(rhs, dtype=float)
    r = rhs - spmv(matrix, x)
    nb = np.linalg.norm(rhs)
    return float(np.linalg.norm(r) / nb) if nb > 0 else float(np.linalg.norm(r))


class BlockJacobi(spla.LinearOperator):
    """Inverse of the block-diagonal part of ``A`` for a partition of the unknowns.

    Singular diagonal blocks (such as the zero block of a Lagrange multiplier)
    and unknowns not in any block are left unscaled.
    """

    def __init__(self, A, blocks: Sequence[np.ndarray]):
        A = sp.csr_matrix(A)
        n = A.shape[0]
        super().__init__(dtype=float, shape=(n, n))
        self.blocks = [np.asarray(b, dtype=np.intp) for b in blocks]
        covered = np.zeros(n, dtype=bool)
        self.inverses = []
        for idx in self.blocks:
            sub = A[idx][:, idx].toarray()
            try:
                if np.linalg.cond(sub) > 1e12:
                    raise np.linalg.LinAlgError
                inv = np.linalg.inv(sub)
            except np.linalg.LinAlgError:
                inv = np.eye(len(idx))
            self.inverses.append(inv)
            covered[idx] = True
        self.uncovered = np.flatnonzero(~covered)
        # equal-size blocks are applied in one batched product
        sizes = {len(b) for b in self.blocks}
        if len(sizes) == 1 and self.blocks:
            self._idx = np.stack(self.blocks)
            self._inv = np.stack(self.inverses)
        else:
            self._idx = None

    def _matvec(self, x):
        x = np.asarray(x, dtype=float).ravel()
        y = np.zeros_like(x)
        if self._idx is not None:
            y[self._idx] = np.einsum("bij,bj->bi", self._inv, x[self._idx])
        else:
            for idx, inv in zip(self.blocks, self.inverses):
                y[idx] = inv @ x[idx]
        y[self.uncovered] = x[self.uncovered]
        return y


def solve(matrix, rhs, config: SolverConfig | None = None, blocks=None, return_info: bool = False):
    """Solve ``matrix @ x = rhs`` to relative residual ``config.tol``.

    ``blocks`` lists index arrays for the block-Jacobi preconditioner; when
    omitted each unknown is its own block.
    """
    config = config or SolverConfig()
    rhs = np.asarray(rhs, dtype=float)
    n_rows, n_cols = matrix.shape
    if n_rows != n_cols:
        raise ValueError(f"matrix must be square, got {matrix.shape}")
    if rhs.shape != (n_rows,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({n_rows},)")

    info = SolveInfo(method=config.method)
    if not np.any(rhs):
        x = np.zeros(n_rows)
    elif config.method == "dense":
        dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)
        try:
            x = scipy.linalg.lu_solve(scipy.linalg.lu_factor(dense, check_finite=True), rhs)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverError(f"dense factorization failed: {exc}") from exc
        info.iterations = 1
    elif config.method == "direct":
        A = sp.csc_matrix(matrix)
        try:
            x = spla.splu(A).solve(rhs)
        except RuntimeError as exc:
            raise SolverError(f"sparse LU failed: {exc}") from exc
        info.iterations = 1
    else:
        x, info.iterations = _gmres(sp.csr_matrix(matrix), rhs, config, blocks)

    info.residual = relative_residual(matrix, x, rhs)
    if not np.all(np.isfinite(x)) or info.residual > config.tol:
        raise SolverError(f"{config.method} solve did not converge", info.residual, info.iterations)
    return (x, info) if return_info else x


def _gmres(A: sp.csr_matrix, rhs: np.ndarray, config: SolverConfig, blocks):
    M = None
    if config.preconditioner == "block-jacobi":
        if blocks is None:
            blocks = [np.array([i]) for i in range(A.shape[0])]
        M = BlockJacobi(A, blocks)

    count = [0]

    def callback(_):
        count[0] += 1

    x = None
    # scipy checks the preconditioned residual; tighten until the true one is small enough
    inner_tol = config.tol * 1e-2
    for _ in range(4):
        x, _status = spla.gmres(
            A, rhs, x0=x, rtol=inner_tol, atol=0.0, restart=config.restart,
            maxiter=config.max_iter, M=M, callback=callback, callback_type="pr_norm",
        )
        if relative_residual(A, x, rhs) <= config.tol:
            break
        inner_tol *= 1e-2
        logger.debug("gmres: tightening inner tolerance to %.1e", inner_tol)
    return x, count[0]
