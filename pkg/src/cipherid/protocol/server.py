"""Server role: encrypted least squares with certificates.

This module never decrypts. It only sees ciphertexts and the plaintext
metadata of a request (task, L, epsilon, scheme parameters).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from ..errors import DepthExhausted
from ..itersolve import IterTrace, goldschmidt_matrix, goldschmidt_reciprocal
from ..leveled_arith import CipherMatrix, CipherScalar, gather, transpose
from ..regressors import layout_for
from ..reliability import (
    DEFAULT_GRID_STEP,
    DEFAULT_K_DIV,
    DEFAULT_K_INV,
    DEFAULT_Q,
    DEFAULT_TAU,
    ReliabilityPlan,
    alpha_from_w,
    certificate_magnitude,
    certificate_spectral,
    init_w0,
    make_plan,
    mu_from_gram,
)
from .messages import REQUEST_FILE, RESPONSE_FILE, IdentifyRequest, IdentifyResponse, read_json, write_json

log = logging.getLogger(__name__)

BRANCH_ORDERS = ("computation_first", "certificates_first", "concurrent")


@dataclass(frozen=True)
class ServerConfig:
    """Server-side choices.

    ``k_inv`` is the iteration budget used to select ``p``. ``k_inv_override``
    runs a different number of inversion iterations (diagnostics only; the
    client's verdict then reports whether the count still suffices).
    ``safety_margin`` levels are recommended on top of the planned depth; a
    smaller ``max_level`` only logs a warning.
    """

    p_grid_step: float = DEFAULT_GRID_STEP
    q: float = DEFAULT_Q
    tau: float = DEFAULT_TAU
    k_div: int = DEFAULT_K_DIV
    k_inv: int = DEFAULT_K_INV
    p: float | None = None
    k_inv_override: int | None = None
    safety_margin: int = 1
    branch_order: str = "computation_first"
    enforce_budget: bool = True

    def plan(self, eps: float, l: int, nu: int, r: int) -> ReliabilityPlan:
        plan = make_plan(
            eps, l, nu, r, q=self.q, tau=self.tau, k_div=self.k_div, k_inv=self.k_inv, p=self.p,
            grid_step=self.p_grid_step,
        )
        if self.k_inv_override is not None:
            plan = replace(plan, k_inv=self.k_inv_override)
        return plan


def check_budget(plan: ReliabilityPlan, max_level: int, safety_margin: int = 0) -> None:
    total = plan.depth.total
    if total > max_level:
        raise DepthExhausted(f"plan needs depth {total} but the scheme supports {max_level}")
    if total + safety_margin > max_level:
        log.warning("max_level %d leaves less than the %d-level safety margin over depth %d", max_level, safety_margin, total)


def _computation_branch(Mt, gram, ct_V, w, plan: ReliabilityPlan, trace):
    alpha = alpha_from_w(w, plan.p)
    W0 = alpha * Mt
    H0 = alpha * gram
    W = goldschmidt_matrix(W0, H0, plan.k_inv, trace=trace)
    return W @ ct_V


def _certificate_branch(gram, mu, inv_beta_sq, w, plan: ReliabilityPlan):
    return (
        certificate_spectral(gram, mu, inv_beta_sq, w, plan.p, plan.nu),
        certificate_magnitude(mu, inv_beta_sq),
    )


def solve_encrypted(
    ct_M: CipherMatrix,
    ct_V: CipherMatrix,
    ct_inv_beta_sq: CipherScalar,
    plan: ReliabilityPlan,
    *,
    branch_order: str = "computation_first",
    trace: IterTrace | None = None,
) -> IdentifyResponse:
    """Encrypted least squares on an assembled ``(ct(M), ct(V))`` pair."""
    if branch_order not in BRANCH_ORDERS:
        raise ValueError(f"branch_order must be one of {BRANCH_ORDERS}")

    # preprocessing
    Mt = transpose(ct_M)
    gram = Mt @ ct_M
    mu = mu_from_gram(gram)
    w0 = init_w0(ct_inv_beta_sq, plan.tau, plan.l, plan.nu)

    # division
    w = goldschmidt_reciprocal(mu, w0, plan.k_div)

    def compute():
        return _computation_branch(Mt, gram, ct_V, w, plan, trace)

    def certify():
        return _certificate_branch(gram, mu, ct_inv_beta_sq, w, plan)

    if branch_order == "concurrent":
        with ThreadPoolExecutor(max_workers=1) as pool:
            certs = pool.submit(certify)
            Z = compute()
            spectral, magnitude = certs.result()
    elif branch_order == "certificates_first":
        spectral, magnitude = certify()
        Z = compute()
    else:
        Z = compute()
        spectral, magnitude = certify()
    return IdentifyResponse(Z, spectral, magnitude, plan)


def server_identify(
    req: IdentifyRequest, config: ServerConfig = ServerConfig(), trace: IterTrace | None = None
) -> IdentifyResponse:
    layout = layout_for(req.task, req.L)
    l, nu, r = layout.dims
    plan = config.plan(req.epsilon, l, nu, r)
    if config.enforce_budget:
        check_budget(plan, req.params.max_level, config.safety_margin)

    sources = [req.ct_u, req.ct_y]
    ct_M = gather(sources, layout.m_index, layout.m_sign)
    ct_V = gather(sources, layout.v_index, layout.v_sign)
    return solve_encrypted(ct_M, ct_V, req.ct_inv_beta_sq, plan, branch_order=config.branch_order, trace=trace)


def serve_directory(exchange_dir, config: ServerConfig = ServerConfig()) -> Path:
    """Answer ``request.json`` in ``exchange_dir`` with ``response.json``."""
    exchange_dir = Path(exchange_dir)
    req = IdentifyRequest.from_dict(read_json(exchange_dir / REQUEST_FILE))
    resp = server_identify(req, config)
    out = exchange_dir / RESPONSE_FILE
    write_json(resp.to_dict(), out)
    return out
