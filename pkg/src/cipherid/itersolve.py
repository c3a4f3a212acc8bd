"""Division-free iterative kernels on emulated ciphertexts.

All kernels only use ``+``, ``-`` and ``*`` of :mod:`cipherid.leveled_arith`,
so they run unchanged on the exact and the fixed-point backend. Level costs
(relative to the lowest input level):

====================== ==============================
reciprocal_iter        2 per iteration
goldschmidt_reciprocal 1 (setup) + 1 per iteration
schulz_iter            2 per iteration
goldschmidt_matrix     1 per iteration
binary_pow(x, e)       ceil(log2(e))
laplace_det            nu - 1
====================== ==============================
"""

from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

from .errors import DiagnosticsNotAllowed, DimensionMismatch
from .leveled_arith import EXACT, CipherMatrix, CipherScalar, decrypt, mat_mul

DEBUG_KEY_ENV = "CIPHERID_DEBUG_KEY"
MAX_LAPLACE_DIM = 10


class IterTrace:
    """Decrypted per-iteration snapshots of a kernel run.

    Decrypting intermediates breaks the service model, so a trace is only
    accepted for the exact backend, or when a debug key is passed explicitly
    or set through ``CIPHERID_DEBUG_KEY``.
    """

    def __init__(self, debug_key: str | None = None):
        self.debug_key = debug_key or os.environ.get(DEBUG_KEY_ENV) or None
        self.snapshots: list[tuple[int, np.ndarray | float]] = []

    def record(self, k: int, ct) -> None:
        if ct.params.backend != EXACT and not self.debug_key:
            raise DiagnosticsNotAllowed(
                f"tracing on the {ct.params.backend} backend needs a debug key ({DEBUG_KEY_ENV})"
            )
        self.snapshots.append((k, decrypt(ct)))

    @property
    def iterates(self) -> list:
        return [v for _, v in self.snapshots]

    def scalar_errors(self, mu: float) -> np.ndarray:
        """Relative errors ``1 - w_k * mu``."""
        return np.array([1.0 - w * mu for w in self.iterates])

    def relative_errors(self, M: np.ndarray) -> list[np.ndarray]:
        """Relative error matrices ``I - W_k M``."""
        eye = np.eye(M.shape[1])
        return [eye - W @ M for W in self.iterates]

    def abs_errors(self, pinv: np.ndarray) -> list[np.ndarray]:
        """Absolute error matrices ``M^+ - W_k``."""
        return [pinv - W for W in self.iterates]


def _check_iterations(k: int, minimum: int = 0) -> None:
    if k < minimum:
        raise ValueError(f"iteration count must be >= {minimum}, got {k}")


def reciprocal_iter(mu: CipherScalar, w0: CipherScalar, k_div: int, trace: IterTrace | None = None) -> CipherScalar:
    """Newton iteration ``w <- (2 - w*mu) * w`` towards ``1/mu``."""
    _check_iterations(k_div, 1)
    w = w0
    if trace is not None:
        trace.record(0, w)
    for k in range(k_div):
        w = (2.0 - w * mu) * w
        if trace is not None:
            trace.record(k + 1, w)
    return w


def goldschmidt_reciprocal(
    mu: CipherScalar, w0: CipherScalar, k_div: int, trace: IterTrace | None = None
) -> CipherScalar:
    """Same iterates as :func:`reciprocal_iter` at one level per iteration.

    Tracks ``f_k = w_k`` and ``h_k = w_k * mu`` and updates both with the
    shared factor ``2 - h_k``.
    """
    _check_iterations(k_div, 1)
    f, h = w0, w0 * mu
    if trace is not None:
        trace.record(0, f)
    for k in range(k_div):
        g = 2.0 - h
        f, h = g * f, g * h
        if trace is not None:
            trace.record(k + 1, f)
    return f


def schulz_iter(
    M: CipherMatrix,
    W0: CipherMatrix,
    k_inv: int,
    gram: CipherMatrix | None = None,
    alpha: CipherScalar | None = None,
    trace: IterTrace | None = None,
) -> CipherMatrix:
    """Newton-Schulz iteration ``W <- (2I - W M) W`` towards ``M^+``.

    If ``W0 = alpha * M^T`` and both ``gram = M^T M`` and ``alpha`` are given,
    the first product ``W0 M`` is formed as ``alpha * gram``.
    """
    _check_iterations(k_inv)
    if W0.shape != (M.cols, M.rows):
        raise DimensionMismatch(f"W0 must be {M.cols}x{M.rows}, got {W0.shape}")
    two_eye = 2.0 * np.eye(M.cols)
    W = W0
    if trace is not None:
        trace.record(0, W)
    for k in range(k_inv):
        if k == 0 and gram is not None and alpha is not None:
            WM = alpha * gram
        else:
            WM = W @ M
        W = (two_eye - WM) @ W
        if trace is not None:
            trace.record(k + 1, W)
    return W


def goldschmidt_matrix(
    W0: CipherMatrix, H0: CipherMatrix, k_inv: int, trace: IterTrace | None = None
) -> CipherMatrix:
    """Goldschmidt form of the Schulz iteration.

    With ``H0 = W0 M`` the iterates ``F_{k+1} = (2I - H_k) F_k`` and
    ``H_{k+1} = (2I - H_k) H_k`` satisfy ``F_k = W_k``. Both products share
    the factor ``2I - H_k`` and sit at the same depth, so each iteration
    costs a single level.
    """
    _check_iterations(k_inv)
    if H0.rows != H0.cols or H0.cols != W0.rows:
        raise DimensionMismatch(f"H0 must be {W0.rows}x{W0.rows}, got {H0.shape}")
    two_eye = 2.0 * np.eye(H0.rows)
    F, H = W0, H0
    if trace is not None:
        trace.record(0, F)
    for k in range(k_inv):
        G = two_eye - H
        F, H = mat_mul(G, F), mat_mul(G, H)
        if trace is not None:
            trace.record(k + 1, F)
    return F


def binary_pow(x: CipherScalar, e: int) -> CipherScalar:
    """``x**e`` by right-to-left square-and-multiply.

    Costs ``floor(log2 e)`` levels for the squarings plus one more when ``e``
    is not a power of two.
    """
    if e < 1:
        raise ValueError(f"exponent must be >= 1, got {e}")
    result = None
    base = x
    while True:
        if e & 1:
            result = base if result is None else result * base
        e >>= 1
        if not e:
            return result
        base = base * base


def laplace_det(A: CipherMatrix) -> CipherScalar:
    """Determinant by cofactor expansion along the first row.

    Minors are shared between cofactors (each minor is fixed by its set of
    columns), which keeps the work at O(2^nu * nu) multiplications. The depth
    is nu - 1: every expansion step multiplies one fresh entry with a minor.
    """
    if A.rows != A.cols:
        raise DimensionMismatch(f"determinant of non-square {A.shape} matrix")
    n = A.rows
    if n > MAX_LAPLACE_DIM:
        raise ValueError(f"Laplace expansion refused for {n}x{n} (limit {MAX_LAPLACE_DIM})")

    @lru_cache(maxsize=None)
    def minor(cols: tuple[int, ...]) -> CipherScalar:
        row = n - len(cols)
        if len(cols) == 1:
            return A[row, cols[0]]
        total = None
        for pos, c in enumerate(cols):
            term = A[row, c] * minor(cols[:pos] + cols[pos + 1 :])
            if total is None:
                total = term
            elif pos % 2:
                total = total - term
            else:
                total = total + term
        return total

    return minor(tuple(range(n)))
