"""Initialization, iteration-count selection and accuracy certificates.

The server only ever sees ``ct(M)``, ``ct(V)`` and ``ct(1/beta^2)``. From
these it derives

* ``mu = trace(M^T M) = ||M||_F^2``, an upper bound on ``sigma_max(M)^2``,
* ``w0 = tau / (l * nu) * ct(1/beta^2)``, which lies in ``(0, 2/mu)``,
* ``alpha = (1 + p) * w_kdiv`` after ``k_div`` reciprocal iterations.

The guarantee ``||Z* - Z_hat||_max <= eps`` then rests on two assumptions,
``||I - alpha M^T M||_2 <= p`` and ``mu >= q beta^2``. Neither can be checked
on ciphertexts, so the server returns both sides of sufficient inequalities
(:class:`CertificatePair`) for the client to compare after decryption.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import Infeasible, PreconditionViolated
from .itersolve import binary_pow, laplace_det
from .leveled_arith import CipherMatrix, CipherScalar, trace

DEFAULT_Q = 1.0
DEFAULT_TAU = 1.999
DEFAULT_K_DIV = 5
DEFAULT_K_INV = 12
DEFAULT_GRID_STEP = 1e-3
CERT_SLACK = 1e-9

SPECTRAL = "spectral"
MAGNITUDE = "magnitude"


def _ceil_log2(x: int) -> int:
    return (x - 1).bit_length()


@dataclass(frozen=True)
class DepthBudget:
    """Multiplicative depth per pipeline stage.

    The computation branch runs preprocessing, division, inversion and least
    squares in sequence; the certificate branch starts after preprocessing.
    """

    preprocessing: int
    division: int
    inversion: int
    least_squares: int
    certificates: int

    @property
    def computation(self) -> int:
        return self.preprocessing + self.division + self.inversion + self.least_squares

    @property
    def certificate_branch(self) -> int:
        return self.preprocessing + self.certificates

    @property
    def total(self) -> int:
        return max(self.computation, self.certificate_branch)

    def to_dict(self) -> dict:
        return {**asdict(self), "total": self.total}


def depth_plan(k_div: int, k_inv: int, nu: int) -> DepthBudget:
    if k_div < 1 or k_inv < 0 or nu < 2:
        raise ValueError(f"invalid depth plan inputs k_div={k_div}, k_inv={k_inv}, nu={nu}")
    certificates = max(3 + _ceil_log2(nu - 1), 1 + nu, k_div + 2)
    return DepthBudget(1, 1 + k_div, 2 + k_inv, 1, certificates)


@dataclass(frozen=True)
class ReliabilityPlan:
    epsilon: float
    p: float
    q: float
    tau: float
    k_div: int
    k_inv: int
    l: int
    nu: int
    r: int

    @property
    def depth(self) -> DepthBudget:
        return depth_plan(self.k_div, self.k_inv, self.nu)

    def to_dict(self) -> dict:
        return {**asdict(self), "depth_total": self.depth.total}

    @classmethod
    def from_dict(cls, d: dict) -> "ReliabilityPlan":
        d = {k: v for k, v in d.items() if k != "depth_total"}
        return cls(**d)


def check_epsilon_condition(eps: float, p: float, q: float, l: int, r: int) -> bool:
    """Whether ``eps < p * sqrt((1+p)/(1-p) * l*r/q)``."""
    if not 0 < p < 1 or q <= 0:
        return False
    return eps < p * math.sqrt((1 + p) / (1 - p) * l * r / q)


def k_inv_bound_value(eps: float, p: float, q: float, l: int, r: int) -> float:
    """Real-valued lower bound on the number of inversion iterations."""
    if not check_epsilon_condition(eps, p, q, l, r):
        raise PreconditionViolated(f"epsilon condition fails for eps={eps}, p={p}, q={q}, l={l}, r={r}")
    inner = eps * math.sqrt((1 - p) / (1 + p) * q / (l * r))
    return math.log2(math.log2(inner) / math.log2(p))


def k_inv_bound(eps: float, p: float, q: float, l: int, r: int) -> int:
    """Smallest iteration count guaranteeing ``||Z* - Z_hat||_max <= eps``."""
    return math.ceil(k_inv_bound_value(eps, p, q, l, r))


def select_p(eps: float, q: float, l: int, r: int, k_inv: int, grid_step: float = DEFAULT_GRID_STEP) -> float:
    """Largest grid value of ``p`` compatible with ``eps`` and ``k_inv``.

    Scans ``1 - grid_step, 1 - 2*grid_step, ...`` down to ``grid_step``.
    """
    if not 0 < grid_step < 1:
        raise ValueError("grid_step must lie in (0, 1)")
    n = round(1 / grid_step)
    for i in range(n - 1, 0, -1):
        p = round(i * grid_step, 12)
        if check_epsilon_condition(eps, p, q, l, r) and k_inv_bound(eps, p, q, l, r) <= k_inv:
            return p
    raise Infeasible(f"no p on a {grid_step} grid reaches eps={eps} within k_inv={k_inv}")


def make_plan(
    eps: float,
    l: int,
    nu: int,
    r: int,
    *,
    q: float = DEFAULT_Q,
    tau: float = DEFAULT_TAU,
    k_div: int = DEFAULT_K_DIV,
    k_inv: int | None = DEFAULT_K_INV,
    p: float | None = None,
    grid_step: float = DEFAULT_GRID_STEP,
) -> ReliabilityPlan:
    """Choose ``(p, k_inv)`` from plaintext metadata only.

    With ``p`` unset it is selected on the grid for the given ``k_inv``; with
    ``k_inv`` unset it is the minimal count for the given ``p``.
    """
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    if not 0 < tau < 2:
        raise ValueError("tau must lie in (0, 2)")
    if p is None:
        if k_inv is None:
            raise ValueError("give k_inv, p, or both")
        p = select_p(eps, q, l, r, k_inv, grid_step)
    elif k_inv is None:
        k_inv = k_inv_bound(eps, p, q, l, r)
    return ReliabilityPlan(eps, p, q, tau, k_div, k_inv, l, nu, r)


# -- encrypted building blocks ------------------------------------------------


def mu_from_gram(gram: CipherMatrix) -> CipherScalar:
    """``ct(mu)`` as the trace of ``ct(M^T M)``; no level consumed."""
    return trace(gram)


def init_w0(inv_beta_sq: CipherScalar, tau: float, l: int, nu: int) -> CipherScalar:
    if not 0 < tau < 2:
        raise ValueError("tau must lie in (0, 2)")
    return inv_beta_sq * (tau / (l * nu))


def alpha_from_w(w: CipherScalar, p: float) -> CipherScalar:
    return w * (1.0 + p)


@dataclass(frozen=True)
class CertificatePair:
    """Encrypted sides of an inequality the client checks after decryption.

    ``spectral``: accept iff ``lhs <= rhs``. ``magnitude``: ``lhs`` is
    ``ct(mu/beta^2)``, accept iff it is ``>= q``; ``rhs`` stays ``None``.
    """

    kind: str
    lhs: CipherScalar
    rhs: CipherScalar | None = None


def certificate_magnitude(mu: CipherScalar, inv_beta_sq: CipherScalar) -> CertificatePair:
    return CertificatePair(MAGNITUDE, mu * inv_beta_sq)


def spectral_constant(p: float, nu: int) -> float:
    """Plaintext factor ``((1-p)/(1+p))**(1/(nu-1)) / (nu-1)``."""
    return ((1 - p) / (1 + p)) ** (1.0 / (nu - 1)) / (nu - 1)


def certificate_spectral(
    gram: CipherMatrix, mu: CipherScalar, inv_beta_sq: CipherScalar, w: CipherScalar, p: float, nu: int
) -> CertificatePair:
    """Both sides of the beta-scaled trace/determinant condition.

    ``lhs = (mu/beta^2 * c)^(nu-1) / beta^2`` and
    ``rhs = w * det(M^T M / beta^2)``; ``lhs <= rhs`` implies
    ``||I - (1+p) w M^T M||_2 <= p``.
    """
    if nu < 2:
        raise ValueError("the spectral certificate needs nu >= 2")
    if gram.shape != (nu, nu):
        raise ValueError(f"gram must be {nu}x{nu}, got {gram.shape}")
    scaled_mu = (mu * inv_beta_sq) * spectral_constant(p, nu)
    lhs = binary_pow(scaled_mu, nu - 1) * inv_beta_sq
    rhs = w * laplace_det(inv_beta_sq * gram)
    return CertificatePair(SPECTRAL, lhs, rhs)


# -- client-side acceptance (plaintext) ----------------------------------------


def accept_spectral(lhs: float, rhs: float) -> bool:
    """``lhs <= rhs`` up to a relative slack.

    Both sides shrink like ``beta^-2`` and powers of ``(1-p)/(1+p)``, so an
    absolute slack would wave through tiny but violated pairs. ``lhs`` is
    strictly positive in exact arithmetic; a value rounded to zero carries no
    information and is rejected.
    """
    return lhs > 0 and lhs <= rhs + CERT_SLACK * max(abs(lhs), abs(rhs))


def accept_magnitude(ratio: float, q: float) -> bool:
    return ratio >= q - CERT_SLACK * max(1.0, abs(q))


# -- plaintext reference quantities ----------------------------------------------


def eigenvalue_lower_bound(gram: np.ndarray) -> float:
    """``((nu-1)/trace)^(nu-1) * det`` bounds ``lambda_min`` of a PD matrix from below."""
    nu = gram.shape[0]
    return ((nu - 1) / np.trace(gram)) ** (nu - 1) * np.linalg.det(gram)


def division_error(mu: float, w0: float, k_div: int) -> float:
    """Relative reciprocal error ``(1 - w0*mu)^(2^k_div)`` after ``k_div`` steps."""
    return (1.0 - w0 * mu) ** (2**k_div)
