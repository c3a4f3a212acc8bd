"""Client role: encrypt the I/O data, decrypt and check the answer."""

from __future__ import annotations

import math

from ..errors import PreconditionViolated
from ..leveled_arith import SchemeParams, decrypt, encrypt
from ..regressors import IoData, TaskSpec, check_task_dims, compute_beta, layout_for
from ..reliability import accept_magnitude, accept_spectral, k_inv_bound
from .messages import IdentifyRequest, IdentifyResponse, ValidationVerdict


def client_prepare(data: IoData, task: TaskSpec, eps: float, params: SchemeParams) -> IdentifyRequest:
    """Encrypt ``u``, ``y_hat`` and ``1/beta^2`` at the maximum level."""
    check_task_dims(data, task)
    layout_for(task, data.L)  # fail early on too-short data
    beta = compute_beta(data)
    return IdentifyRequest(
        task=task,
        L=data.L,
        epsilon=eps,
        ct_u=encrypt(data.u, params),
        ct_y=encrypt(data.y_hat, params),
        ct_inv_beta_sq=encrypt(1.0 / beta**2, params),
        params=params,
    )


def client_validate(resp: IdentifyResponse, q: float | None = None, max_level: int | None = None) -> ValidationVerdict:
    """Decrypt the response and evaluate both certificates.

    ``q`` defaults to the value the server planned with. The iteration count
    is re-checked against that ``q``, since the bound depends on it.
    """
    plan = resp.plan
    q = plan.q if q is None else q
    if max_level is None:
        max_level = resp.ct_Z_hat.params.max_level

    lhs = decrypt(resp.cert_spectral.lhs)
    rhs = decrypt(resp.cert_spectral.rhs)
    ratio = decrypt(resp.cert_magnitude.lhs)
    try:
        enough = plan.k_inv >= k_inv_bound(plan.epsilon, plan.p, q, plan.l, plan.r)
    except PreconditionViolated:
        enough = False

    cert_levels = (resp.cert_spectral.lhs.level, resp.cert_spectral.rhs.level, resp.cert_magnitude.lhs.level)
    lowest = min(resp.ct_Z_hat.level, *cert_levels)
    return ValidationVerdict(
        Z_hat=decrypt(resp.ct_Z_hat),
        cert_spectral_ok=bool(math.isfinite(lhs) and math.isfinite(rhs) and accept_spectral(lhs, rhs)),
        cert_magnitude_ok=bool(accept_magnitude(ratio, q)),
        k_inv_sufficient=enough,
        spectral_lhs=lhs,
        spectral_rhs=rhs,
        magnitude_ratio=ratio,
        depth_used=max_level - lowest,
        # the certificate branch starts from the preprocessed level max_level - 1
        certificate_depth=max_level - 1 - min(cert_levels),
    )
