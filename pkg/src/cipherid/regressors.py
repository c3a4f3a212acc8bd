"""Least squares problems for three linear identification tasks.

Every task is canonicalized to ``min_Z ||M Z - V||_F`` where each entry of
``M`` and ``V`` is a signed copy of an input or output sample. The copy
pattern is captured by a :class:`RegressorLayout`, which the server replays
on ciphertexts and the plaintext oracle replays on raw data.

Data are stacked as the flat vector ``concat(u.ravel(), y_hat.ravel())``
with ``u`` of shape ``(L, n_u)`` and ``y_hat`` of shape ``(L, n_y)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateData, DimensionMismatch, InsufficientData, RankDeficient

TF = "tf"
SSM = "ssm"
MSP = "msp"

RANK_TOLERANCE = 1e-12


@dataclass(frozen=True)
class TaskSpec:
    """Model structure to identify.

    ``tf``: SISO transfer function with denominator order ``n`` and numerator
    order ``m``. ``ssm``: state space model with ``n`` fully measured states
    and ``n_u`` inputs. ``msp``: multi-step predictor over ``N`` steps with
    ``n`` past inputs/outputs as initial condition.
    """

    kind: str
    n: int
    m: int | None = None
    n_u: int | None = None
    N: int | None = None

    def __post_init__(self):
        if self.kind == TF:
            if self.m is None or not 0 <= self.m < self.n:
                raise ValueError("transfer function needs 0 <= m < n")
        elif self.kind == SSM:
            if self.n < 1:
                raise ValueError("state space model needs n >= 1")
            if self.n_u is None:
                object.__setattr__(self, "n_u", 1)
            if self.n_u < 1:
                raise ValueError("state space model needs n_u >= 1")
        elif self.kind == MSP:
            if self.n < 1 or self.N is None or self.N < 1:
                raise ValueError("multi-step predictor needs n >= 1 and N >= 1")
        else:
            raise ValueError(f"unknown task kind {self.kind!r}")

    @classmethod
    def transfer_function(cls, n: int, m: int) -> "TaskSpec":
        return cls(TF, n, m=m)

    @classmethod
    def state_space(cls, n: int, n_u: int = 1) -> "TaskSpec":
        return cls(SSM, n, n_u=n_u)

    @classmethod
    def multi_step(cls, n: int, N: int) -> "TaskSpec":
        return cls(MSP, n, N=N)

    @property
    def input_dim(self) -> int:
        return self.n_u if self.kind == SSM else 1

    @property
    def output_dim(self) -> int:
        return self.n if self.kind == SSM else 1

    def to_dict(self) -> dict:
        return {k: v for k, v in vars(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        return cls(**d)


@dataclass(frozen=True)
class IoData:
    u: np.ndarray
    y_hat: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        y = np.asarray(self.y_hat, dtype=np.float64)
        if u.ndim == 1:
            u = u[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if u.ndim != 2 or y.ndim != 2 or len(u) != len(y):
            raise DimensionMismatch("u and y_hat must be sequences of equal length")
        if len(u) < 2:
            raise InsufficientData("at least two samples are required")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y_hat", y)

    @property
    def L(self) -> int:
        return len(self.u)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.u.ravel(), self.y_hat.ravel()])

    def scaled(self, c: float) -> "IoData":
        return IoData(c * self.u, c * self.y_hat)

    def to_csv(self, path) -> None:
        n_u, n_y = self.u.shape[1], self.y_hat.shape[1]
        header = ["k"] + [f"u_{i + 1}" for i in range(n_u)] + [f"y_{i + 1}" for i in range(n_y)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(self.L):
                w.writerow([k] + [repr(float(v)) for v in self.u[k]] + [repr(float(v)) for v in self.y_hat[k]])

    @classmethod
    def from_csv(cls, path) -> "IoData":
        with open(Path(path), newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        u_cols = [i for i, h in enumerate(header) if h.startswith("u_")]
        y_cols = [i for i, h in enumerate(header) if h.startswith("y_")]
        if header[0] != "k" or not u_cols or not y_cols:
            raise ValueError(f"{path}: expected header 'k,u_1..,y_1..', got {header}")
        data = np.array([[float(v) for v in row] for row in body])
        if not np.array_equal(data[:, 0], np.arange(len(data))):
            raise ValueError(f"{path}: time index must run 0..L-1")
        return cls(data[:, u_cols], data[:, y_cols])


@dataclass(frozen=True)
class RegressorLayout:
    """Signed gather pattern producing ``M`` (l x nu) and ``V`` (l x r)."""

    m_index: np.ndarray
    m_sign: np.ndarray
    v_index: np.ndarray
    v_sign: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        l, nu = self.m_index.shape
        return l, nu, self.v_index.shape[1]

    def assemble(self, stacked: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        stacked = np.asarray(stacked, dtype=np.float64)
        return self.m_sign * stacked[self.m_index], self.v_sign * stacked[self.v_index]


@dataclass(frozen=True)
class LsqProblem:
    M: np.ndarray
    V: np.ndarray
    beta: float

    @property
    def l(self) -> int:
        return self.M.shape[0]

    @property
    def nu(self) -> int:
        return self.M.shape[1]

    @property
    def r(self) -> int:
        return self.V.shape[1]


class _Indexer:
    """Flat positions of u(k)[i] and y(k)[i] in the stacked data vector."""

    def __init__(self, L: int, n_u: int, n_y: int):
        self.L, self.n_u, self.n_y = L, n_u, n_y

    def u(self, k: int, i: int = 0) -> int:
        return k * self.n_u + i

    def y(self, k: int, i: int = 0) -> int:
        return self.L * self.n_u + k * self.n_y + i


def _layout(m_rows, v_rows) -> RegressorLayout:
    m = np.array(m_rows)
    v = np.array(v_rows)
    return RegressorLayout(m[..., 0].astype(int), m[..., 1].astype(float), v[..., 0].astype(int), v[..., 1].astype(float))


def tf_layout(L: int, n: int, m: int) -> RegressorLayout:
    if L <= n + m:
        raise InsufficientData(f"transfer function (n={n}, m={m}) needs L > {n + m}, got L={L}")
    ix = _Indexer(L, 1, 1)
    ell = L - n
    m_rows, v_rows = [], []
    for i in range(ell):
        row = [(ix.y(i + j), -1) for j in range(n)]
        row += [(ix.u(i + j), 1) for j in range(m + 1)]
        m_rows.append(row)
        v_rows.append([(ix.y(i + n), 1)])
    return _layout(m_rows, v_rows)


def ssm_layout(L: int, n: int, n_u: int) -> RegressorLayout:
    if L < 2:
        raise InsufficientData("state space identification needs L >= 2")
    ix = _Indexer(L, n_u, n)
    m_rows, v_rows = [], []
    for k in range(L - 1):
        m_rows.append([(ix.y(k, i), 1) for i in range(n)] + [(ix.u(k, i), 1) for i in range(n_u)])
        v_rows.append([(ix.y(k + 1, i), 1) for i in range(n)])
    return _layout(m_rows, v_rows)


def msp_layout(L: int, n: int, N: int) -> RegressorLayout:
    if N >= L or L < N + n:
        raise InsufficientData(f"multi-step predictor (n={n}, N={N}) needs L >= {N + n}, got L={L}")
    ix = _Indexer(L, 1, 1)
    m_rows, v_rows = [], []
    for k in range(n, L - N + 1):
        xi = [(ix.u(k - j), 1) for j in range(1, n + 1)] + [(ix.y(k - j), 1) for j in range(1, n + 1)]
        m_rows.append(xi + [(ix.u(k + j), 1) for j in range(N)])
        v_rows.append([(ix.y(k + j), 1) for j in range(N)])
    return _layout(m_rows, v_rows)


def layout_for(task: TaskSpec, L: int) -> RegressorLayout:
    if task.kind == TF:
        return tf_layout(L, task.n, task.m)
    if task.kind == SSM:
        return ssm_layout(L, task.n, task.n_u)
    return msp_layout(L, task.n, task.N)


def compute_beta(data: IoData) -> float:
    """Largest absolute sample over inputs and outputs."""
    beta = float(max(np.abs(data.u).max(), np.abs(data.y_hat).max()))
    if beta == 0.0:
        raise DegenerateData("all I/O samples are zero")
    return beta


def check_task_dims(data: IoData, task: TaskSpec) -> None:
    if data.u.shape[1] != task.input_dim or data.y_hat.shape[1] != task.output_dim:
        raise DimensionMismatch(
            f"task {task.kind} expects {task.input_dim} input(s) and {task.output_dim} output(s), "
            f"data has {data.u.shape[1]} and {data.y_hat.shape[1]}"
        )


def build(data: IoData, task: TaskSpec) -> LsqProblem:
    check_task_dims(data, task)
    M, V = layout_for(task, data.L).assemble(data.stacked())
    return LsqProblem(M, V, compute_beta(data))


def build_tf(data: IoData, n: int, m: int) -> LsqProblem:
    return build(data, TaskSpec.transfer_function(n, m))


def build_ssm(data: IoData, n: int, n_u: int = 1) -> LsqProblem:
    return build(data, TaskSpec.state_space(n, n_u))


def build_msp(data: IoData, n: int, N: int) -> LsqProblem:
    return build(data, TaskSpec.multi_step(n, N))


@dataclass(frozen=True)
class OracleSolution:
    Z: np.ndarray
    pinv: np.ndarray
    sigma_min: float
    sigma_max: float

    @property
    def lambda_min(self) -> float:
        return self.sigma_min**2

    @property
    def lambda_max(self) -> float:
        return self.sigma_max**2

    @property
    def pinv_norm(self) -> float:
        return 1.0 / self.sigma_min


def oracle_solve(prob: LsqProblem | tuple) -> OracleSolution:
    """Exact least squares minimizer via the SVD.

    Accepts an :class:`LsqProblem` or a plain ``(M, V)`` pair. Raises
    :class:`RankDeficient` when ``sigma_min / sigma_max < 1e-12``.
    """
    M, V = (prob.M, prob.V) if isinstance(prob, LsqProblem) else prob
    M = np.asarray(M, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    if M.shape[0] < M.shape[1]:
        raise RankDeficient(f"{M.shape[0]}x{M.shape[1]} matrix cannot have full column rank")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s[0] == 0.0 or s[-1] / s[0] < RANK_TOLERANCE:
        raise RankDeficient(f"relative condition {s[-1] / s[0] if s[0] else 0.0:.3e} below {RANK_TOLERANCE}")
    pinv = (Vt.T / s) @ U.T
    return OracleSolution(pinv @ V, pinv, float(s[-1]), float(s[0]))
