"""Reference third-order system and synthetic data generation.

    G(z) = (z^2 + 0.5 z + 2) / (z^3 + 0.5 z^2 + 0.25 z + 0.5)

Identification runs are driven by standard-normal inputs; Gaussian
measurement noise is added to the outputs.
"""

from __future__ import annotations

import zlib

import numpy as np
from scipy.signal import lfilter

from .regressors import MSP, SSM, TF, IoData, TaskSpec

# monic denominator a_0..a_{n-1} and numerator b_0..b_m, lowest power first
DEN = (0.5, 0.25, 0.5)
NUM = (2.0, 0.5, 1.0)
ORDER = 3

DEFAULT_TASKS = {
    TF: TaskSpec.transfer_function(3, 2),
    SSM: TaskSpec.state_space(3, 1),
    MSP: TaskSpec.multi_step(3, 2),
}


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named purpose under one run seed."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode())]))


def ccf_matrices(den=DEN) -> tuple[np.ndarray, np.ndarray]:
    """Controllable canonical form ``(A, B)`` for a monic denominator."""
    n = len(den)
    A = np.eye(n, k=1)
    A[-1, :] = -np.asarray(den)
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    return A, B


def simulate_tf(u: np.ndarray, num=NUM, den=DEN) -> np.ndarray:
    """Output of the transfer function from rest."""
    n, m = len(den), len(num) - 1
    # coefficients in powers of z^-1
    b = np.zeros(n + 1)
    b[n - m :] = num[::-1]
    a = np.concatenate([[1.0], np.asarray(den)[::-1]])
    return lfilter(b, a, np.asarray(u, dtype=np.float64).ravel())


def simulate_ssm(u: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """States ``x(0..L-1)`` of ``x(k+1) = A x(k) + B u(k)`` from ``x(0) = 0``."""
    u = np.asarray(u, dtype=np.float64).reshape(len(u), -1)
    x = np.zeros((len(u), A.shape[0]))
    for k in range(len(u) - 1):
        x[k + 1] = A @ x[k] + B @ u[k]
    return x


def true_params(task: TaskSpec, num=NUM, den=DEN) -> np.ndarray:
    """Exact ``Z`` of the reference system for a task with default orders."""
    if task.kind == TF:
        return np.concatenate([den, num])[:, None]
    if task.kind == SSM:
        A, B = ccf_matrices(den)
        return np.vstack([A.T, B.T])
    return msp_true_params(task.n, task.N, num, den)


def msp_true_params(n: int, N: int, num=NUM, den=DEN) -> np.ndarray:
    """Exact multi-step predictor by unrolling the difference equation.

    Columns of the regressor are ``u(k-1..k-n), y(k-1..k-n), u(k..k+N-1)``;
    column ``j`` of the result expresses ``y(k+j)`` in that basis.
    """
    if len(den) != n:
        raise ValueError("predictor order must match the system order")
    m = len(num) - 1
    nu = 2 * n + N

    def u_at(offset):
        # u(k + offset): past inputs come first, future inputs last
        v = np.zeros(nu)
        v[-offset - 1 if offset < 0 else 2 * n + offset] = 1.0
        return v

    ys = {}
    for i in range(1, n + 1):
        v = np.zeros(nu)
        v[n + i - 1] = 1.0
        ys[-i] = v
    for j in range(N):
        v = np.zeros(nu)
        for i in range(n):
            v -= den[i] * ys[j - n + i]
        for i in range(m + 1):
            v += num[i] * u_at(j - n + i)
        ys[j] = v
    return np.column_stack([ys[j] for j in range(N)])


def generate(task: TaskSpec, L: int, noise_std: float, seed: int) -> tuple[IoData, IoData]:
    """Noisy and noise-free data for ``task``. Returns ``(noisy, clean)``."""
    u = rng_stream(seed, "input").standard_normal((L, task.input_dim))
    if task.kind == SSM:
        A, B = ccf_matrices()
        if task.n != A.shape[0] or task.n_u != 1:
            raise ValueError("the reference system has 3 states and 1 input")
        y = simulate_ssm(u, A, B)
    else:
        y = simulate_tf(u)[:, None]
    noise = rng_stream(seed, "measurement").normal(0.0, noise_std, y.shape) if noise_std > 0 else 0.0
    return IoData(u, y + noise), IoData(u, y)
