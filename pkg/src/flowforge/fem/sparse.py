"""Direct sparse solver wrapper with factor reuse."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import SolverError


class SparseFactor:
    """LU factorization usable for the forward and transposed system."""

    def __init__(self, A: sp.spmatrix):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise SolverError(f"matrix is not square: {A.shape}")
        self.shape = A.shape
        try:
            self._lu = spla.splu(A)
        except RuntimeError as exc:  # singular factorization
            pivot = _parse_pivot(str(exc))
            raise SolverError(f"sparse factorization failed: {exc}", pivot=pivot) from exc

    def solve(self, b: np.ndarray) -> np.ndarray:
        x = self._lu.solve(np.asarray(b, dtype=float))
        if not np.all(np.isfinite(x)):
            raise SolverError("sparse solve produced non-finite values (singular matrix?)")
        return x

    def solve_transposed(self, b: np.ndarray) -> np.ndarray:
        x = self._lu.solve(np.asarray(b, dtype=float), trans="T")
        if not np.all(np.isfinite(x)):
            raise SolverError("transposed sparse solve produced non-finite values")
        return x


def _parse_pivot(message: str):
    # SuperLU reports e.g. "Factor is exactly singular" or a column index
    # "... at column 17"; keep whatever index is recoverable.
    for token in message.replace("(", " ").replace(")", " ").split():
        if token.isdigit():
            return int(token)
    return None


def sparse_solve(A: sp.spmatrix, b: np.ndarray) -> np.ndarray:
    """Direct solution of ``A x = b`` via LU factorization."""
    b = np.asarray(b, dtype=float)
    factor = SparseFactor(A)
    if b.shape[0] != factor.shape[0]:
        raise SolverError(f"rhs length {b.shape[0]} does not match matrix {factor.shape}")
    return factor.solve(b)
