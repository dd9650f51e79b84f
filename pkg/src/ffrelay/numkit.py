"""Dense complex linear algebra and structured-matrix constructors.

Conventions shared by the whole package:

* Sample windows are stacked newest-first (descending time index), which is
  the ordering under which :func:`toeplitz_filter` matrices implement causal
  FIR filtering.
* A circulant matrix with first row ``c`` acts on the right-eigenvector
  family ``xi_k = (1/sqrt(N)) [1, w^-k, ..., w^-(N-1)k]^T`` with
  ``w = exp(2j*pi/N)``; the matching eigenvalue is ``sum_n c[n] w^(-k*n)``,
  i.e. the unnormalised DFT of the first row.  ``circulant_eigenvalues``
  returns eigenvalues in that k-order.
"""

from __future__ import annotations

import numpy as np

HERMITIAN_RTOL = 1e-12  # elementwise, relative to the max-magnitude entry


def toeplitz_filter(v, rows: int) -> np.ndarray:
    """Banded filtering matrix with ``rows`` rows and first row [v^T, 0, ...].

    Row r is the r-step right shift of the first row, so the result has shape
    (rows, rows + len(v) - 1) and applying it to a newest-first window
    performs causal convolution by ``v`` restricted to that window.
    """
    v = np.asarray(v, dtype=complex).ravel()
    if v.size == 0:
        raise ValueError("filter tap vector must have length >= 1")
    if rows < 1:
        raise ValueError("rows must be >= 1")
    L = v.size
    out = np.zeros((rows, rows + L - 1), dtype=complex)
    for r in range(rows):
        out[r, r:r + L] = v
    return out


def circulant_eigenvalues(c) -> np.ndarray:
    """Eigenvalues of the circulant matrix with first row ``c``.

    lambda_k = sum_n c[n] w^(-k n), w = exp(2j*pi/N), which is exactly the
    unnormalised DFT of the first row.
    """
    c = np.asarray(c, dtype=complex).ravel()
    if c.size == 0:
        raise ValueError("first row must have length >= 1")
    return np.fft.fft(c)


def dft_rows(N: int, ext: int = 0):
    """Normalised IDFT matrix W_N and its cyclic-prefix row extension.

    ``W`` has entry (a, b) = w^(a*b)/sqrt(N) with w = exp(2j*pi/N); it is
    symmetric and unitary.  The extension stacks the rows of W newest-first
    and wraps once past row index 0, producing ``N + ext`` rows:
    [row N-1, row N-2, ..., row 0, row N-1, ..., row N-ext].
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    if ext < 0:
        raise ValueError("ext must be >= 0")
    if ext > N:
        raise ValueError("ext must not exceed N (rows may wrap only once)")
    idx = np.arange(N)
    W = np.exp(2j * np.pi * np.outer(idx, idx) / N) / np.sqrt(N)
    rows = (N - 1 - np.arange(N + ext)) % N
    return W, W[rows, :]


def is_hermitian(A, rtol: float = HERMITIAN_RTOL) -> bool:
    A = np.asarray(A)
    scale = max(np.abs(A).max(), 1e-300)
    return bool(np.abs(A - A.conj().T).max() <= rtol * scale)


def hermitize(A) -> np.ndarray:
    """(A + A^H)/2; cheap guard against accumulated round-off."""
    A = np.asarray(A, dtype=complex)
    return 0.5 * (A + A.conj().T)


def hermitian_eig(A, rtol: float = HERMITIAN_RTOL):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Raises ValueError when the input is not Hermitian within ``rtol``
    (relative to the max-magnitude entry).  The input is symmetrised before
    decomposition so tiny asymmetries cannot leak into the eigenvectors.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("hermitian_eig expects a square matrix")
    if not is_hermitian(A, rtol):
        raise ValueError("matrix is not Hermitian within tolerance")
    vals, vecs = np.linalg.eigh(hermitize(A))
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def kron(A, B) -> np.ndarray:
    """Kronecker product (thin wrapper so the whole package shares one spot)."""
    return np.kron(np.asarray(A, dtype=complex), np.asarray(B, dtype=complex))
