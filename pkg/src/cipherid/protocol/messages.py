"""Client/server messages and their JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import leveled_arith as la
from ..leveled_arith import CipherMatrix, CipherScalar, SchemeParams
from ..regressors import TaskSpec
from ..reliability import MAGNITUDE, SPECTRAL, CertificatePair, ReliabilityPlan

REQUEST_FILE = "request.json"
RESPONSE_FILE = "response.json"


@dataclass(frozen=True)
class IdentifyRequest:
    task: TaskSpec
    L: int
    epsilon: float
    ct_u: CipherMatrix
    ct_y: CipherMatrix
    ct_inv_beta_sq: CipherScalar
    params: SchemeParams

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.ct_u.shape != (self.L, self.task.input_dim) or self.ct_y.shape != (self.L, self.task.output_dim):
            raise ValueError("ciphertext dimensions do not match L and the task")

    def to_dict(self) -> dict:
        return {
            "task": self.task.to_dict(),
            "L": self.L,
            "epsilon": self.epsilon,
            "params": self.params.to_dict(),
            "ct_u": la.to_json_dict(self.ct_u),
            "ct_y": la.to_json_dict(self.ct_y),
            "ct_inv_beta_sq": la.to_json_dict(self.ct_inv_beta_sq),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IdentifyRequest":
        params = SchemeParams.from_dict(d["params"])
        return cls(
            task=TaskSpec.from_dict(d["task"]),
            L=d["L"],
            epsilon=d["epsilon"],
            ct_u=la.matrix_from_json_dict(d["ct_u"], params),
            ct_y=la.matrix_from_json_dict(d["ct_y"], params),
            ct_inv_beta_sq=la.scalar_from_json_dict(d["ct_inv_beta_sq"], params),
            params=params,
        )


@dataclass(frozen=True)
class IdentifyResponse:
    ct_Z_hat: CipherMatrix
    cert_spectral: CertificatePair
    cert_magnitude: CertificatePair
    plan: ReliabilityPlan

    def __post_init__(self):
        if self.ct_Z_hat.shape != (self.plan.nu, self.plan.r):
            raise ValueError(f"Z_hat shape {self.ct_Z_hat.shape} does not match plan ({self.plan.nu}, {self.plan.r})")

    def to_dict(self) -> dict:
        return {
            "ct_Z_hat": la.to_json_dict(self.ct_Z_hat),
            "cert_spectral": {
                "lhs": la.to_json_dict(self.cert_spectral.lhs),
                "rhs": la.to_json_dict(self.cert_spectral.rhs),
            },
            "cert_magnitude": {"lhs": la.to_json_dict(self.cert_magnitude.lhs)},
            "plan": self.plan.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict, params: SchemeParams) -> "IdentifyResponse":
        return cls(
            ct_Z_hat=la.matrix_from_json_dict(d["ct_Z_hat"], params),
            cert_spectral=CertificatePair(
                SPECTRAL,
                la.scalar_from_json_dict(d["cert_spectral"]["lhs"], params),
                la.scalar_from_json_dict(d["cert_spectral"]["rhs"], params),
            ),
            cert_magnitude=CertificatePair(MAGNITUDE, la.scalar_from_json_dict(d["cert_magnitude"]["lhs"], params)),
            plan=ReliabilityPlan.from_dict(d["plan"]),
        )


@dataclass(frozen=True)
class ValidationVerdict:
    """What the client learns after decrypting a response.

    ``guaranteed`` means ``||Z* - Z_hat||_max <= eps`` is certified: both
    certificates hold and the plan ran enough inversion iterations for the
    client's ``q``.
    """

    Z_hat: np.ndarray
    cert_spectral_ok: bool
    cert_magnitude_ok: bool
    k_inv_sufficient: bool
    spectral_lhs: float
    spectral_rhs: float
    magnitude_ratio: float
    depth_used: int
    certificate_depth: int

    @property
    def guaranteed(self) -> bool:
        return self.cert_spectral_ok and self.cert_magnitude_ok and self.k_inv_sufficient

    def to_dict(self) -> dict:
        return {
            "Z_hat": self.Z_hat.tolist(),
            "cert_spectral_ok": self.cert_spectral_ok,
            "cert_magnitude_ok": self.cert_magnitude_ok,
            "k_inv_sufficient": self.k_inv_sufficient,
            "guaranteed": self.guaranteed,
            "spectral_lhs": self.spectral_lhs,
            "spectral_rhs": self.spectral_rhs,
            "magnitude_ratio": self.magnitude_ratio,
            "depth_used": self.depth_used,
            "certificate_depth": self.certificate_depth,
        }


def write_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
