"""Experiment orchestration behind the command line.

A run directory holds::

    config.json     run configuration
    data.csv        I/O samples (k,u_1..,y_1..)
    request.json    client -> server
    response.json   server -> client
    verdict.json    decrypted result and certificate outcome
    summary.json    errors against the oracle and the true system
    trace.csv       per-iteration errors (when diagnostics are allowed)
    timing.json     wall-clock time, kept apart so the rest is reproducible
"""

from __future__ import annotations

import csv
import io
import json
import time
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import casestudy
from .errors import MissingRun
from .itersolve import IterTrace
from .leveled_arith import EXACT, SchemeParams
from .protocol import IdentifyRequest, IdentifyResponse, ServerConfig, client_prepare, client_validate, server_identify
from .protocol.messages import read_json, write_json
from .regressors import IoData, TaskSpec, build, layout_for, oracle_solve



@dataclass
class RunConfig:
    task: TaskSpec = field(default_factory=lambda: casestudy.DEFAULT_TASKS["tf"])
    L: int = 20
    noise_std: float = 1e-3
    seed: int = 0
    epsilon: float = 1e-3
    backend: str = EXACT
    scale_bits: int = 30
    max_level: int | None = None
    emulator_noise_std: float | None = None
    k_div: int = 5
    k_inv: int | None = None
    safety_margin: int = 1
    debug_key: str | None = None
    output_dir: Path = Path("run")

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        self.output_dir = Path(self.output_dir)
        layout_for(self.task, self.L)

    def server_config(self) -> ServerConfig:
        return ServerConfig(k_div=self.k_div, k_inv_override=self.k_inv, safety_margin=self.safety_margin)

    def scheme_params(self, backend: str | None = None) -> SchemeParams:
        l, nu, r = layout_for(self.task, self.L).dims
        max_level = self.max_level
        if max_level is None:
            plan = self.server_config().plan(self.epsilon, l, nu, r)
            max_level = plan.depth.total + self.safety_margin
        return SchemeParams(
            backend=backend or self.backend,
            scale_bits=self.scale_bits,
            max_level=max_level,
            noise_std=self.emulator_noise_std,
            # separate stream from the data generator
            noise_seed=zlib.crc32(f"emulator/{self.seed}".encode()),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["task"] = self.task.to_dict()
        d["output_dir"] = str(self.output_dir)
        d.pop("debug_key")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d["task"] = TaskSpec.from_dict(d["task"])
        return cls(**d)


def gen_data(config: RunConfig) -> Path:
    """Simulate the reference system and write ``data.csv``."""
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    noisy, _ = casestudy.generate(config.task, config.L, config.noise_std, config.seed)
    path = out / "data.csv"
    noisy.to_csv(path)
    write_json(config.to_dict(), out / "config.json")
    return path


def _max_err(A, B) -> float:
    return float(np.max(np.abs(np.asarray(A) - np.asarray(B))))


def _trace_errors(trace: IterTrace | None, V: np.ndarray, Z_star: np.ndarray) -> list[float] | None:
    if trace is None:
        return None
    return [_max_err(W @ V, Z_star) for W in trace.iterates]


def _new_trace(params: SchemeParams, debug_key: str | None) -> IterTrace | None:
    trace = IterTrace(debug_key)
    if params.backend != EXACT and not trace.debug_key:
        return None
    return trace


def run_identify(config: RunConfig, data_path=None) -> dict:
    """Full client -> server -> client round trip through the JSON files."""
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    data_path = Path(data_path) if data_path else out / "data.csv"
    if not data_path.exists():
        gen_data(config)
    data = IoData.from_csv(data_path)
    write_json(config.to_dict(), out / "config.json")

    params = config.scheme_params()
    server_config = config.server_config()
    started = time.perf_counter()

    req = client_prepare(data, config.task, config.epsilon, params)
    write_json(req.to_dict(), out / "request.json")

    trace = _new_trace(params, config.debug_key)
    resp = server_identify(IdentifyRequest.from_dict(read_json(out / "request.json")), server_config, trace=trace)
    write_json(resp.to_dict(), out / "response.json")

    verdict = client_validate(IdentifyResponse.from_dict(read_json(out / "response.json"), params), q=server_config.q)
    elapsed = time.perf_counter() - started
    write_json(verdict.to_dict(), out / "verdict.json")

    prob = build(data, config.task)
    Z_star = oracle_solve(prob).Z
    summary = {
        "task": config.task.kind,
        "seed": config.seed,
        "backend": params.backend,
        "l": resp.plan.l,
        "nu": resp.plan.nu,
        "r": resp.plan.r,
        "p": resp.plan.p,
        "k_inv": resp.plan.k_inv,
        "epsilon": config.epsilon,
        "final_error": _max_err(verdict.Z_hat, Z_star),
        "true_error": None,
        "oracle_true_error": None,
        "cert_spectral": verdict.cert_spectral_ok,
        "cert_magnitude": verdict.cert_magnitude_ok,
        "guaranteed": verdict.guaranteed,
        "depth_used": verdict.depth_used,
        "depth_total": resp.plan.depth.total,
        "certificate_depth": verdict.certificate_depth,
        "max_level": params.max_level,
    }
    try:
        Z_true = casestudy.true_params(config.task)
    except ValueError:
        Z_true = None
    if Z_true is not None and Z_true.shape == Z_star.shape:
        summary["true_error"] = _max_err(verdict.Z_hat, Z_true)
        summary["oracle_true_error"] = _max_err(Z_star, Z_true)
    write_json(summary, out / "summary.json")
    write_json({"wall_time_s": elapsed}, out / "timing.json")

    enc_errors = _trace_errors(trace, prob.V, Z_star)
    if enc_errors is not None:
        if params.backend == EXACT:
            plain_errors = enc_errors
        else:
            plain_trace = IterTrace()
            exact_req = client_prepare(data, config.task, config.epsilon, config.scheme_params(EXACT))
            server_identify(exact_req, server_config, trace=plain_trace)
            plain_errors = _trace_errors(plain_trace, prob.V, Z_star)
        with open(out / "trace.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "plaintext_error", "encrypted_error"])
            for k, (a, b) in enumerate(zip(plain_errors, enc_errors)):
                w.writerow([k, repr(a), repr(b)])
    return summary


RUN_COLUMNS = [
    "run", "task", "seed", "backend", "final_error", "true_error",
    "cert_spectral", "cert_magnitude", "guaranteed", "depth_used",
]
TASK_COLUMNS = [
    "task", "backend", "runs", "mean_error", "max_error", "spectral_rate", "magnitude_rate", "guaranteed_rate",
]


def _fmt(v, column: str = "") -> str:
    if isinstance(v, float):
        return f"{v:.2f}" if column.endswith("_rate") else f"{v:.6e}"
    return "" if v is None else str(v)


def _table_text(columns, rows) -> str:
    cells = [columns] + [[_fmt(r[c], c) for c in columns] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells) + "\n"


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c], c) for c in columns])
    return buf.getvalue()


def report(run_dirs, out=None, with_timing: bool = False) -> tuple[list[dict], list[dict]]:
    """Per-run rows and per-(task, backend) aggregates.

    Aggregates are only produced for groups with more than one run. Written
    as ``report.csv``, ``report_by_task.csv`` and ``report.txt`` when ``out``
    is given.
    """
    rows = []
    for d in map(Path, run_dirs):
        path = d / "summary.json"
        if not path.exists():
            raise MissingRun(f"{d} has no summary.json")
        s = json.loads(path.read_text())
        row = {c: s.get(c) for c in RUN_COLUMNS}
        row["run"] = d.name
        if with_timing:
            t = d / "timing.json"
            row["wall_time_s"] = json.loads(t.read_text())["wall_time_s"] if t.exists() else None
        rows.append(row)

    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["task"], row["backend"]), []).append(row)
    agg = []
    for (task, backend), rs in groups.items():
        if len(rs) < 2:
            continue
        errors = np.array([r["final_error"] for r in rs])
        agg.append({
            "task": task,
            "backend": backend,
            "runs": len(rs),
            "mean_error": float(errors.mean()),
            "max_error": float(errors.max()),
            "spectral_rate": float(np.mean([r["cert_spectral"] for r in rs])),
            "magnitude_rate": float(np.mean([r["cert_magnitude"] for r in rs])),
            "guaranteed_rate": float(np.mean([r["guaranteed"] for r in rs])),
        })

    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        columns = RUN_COLUMNS + (["wall_time_s"] if with_timing else [])
        (out / "report.csv").write_text(_csv_text(columns, rows))
        (out / "report_by_task.csv").write_text(_csv_text(TASK_COLUMNS, agg))
        text = _table_text(columns, rows)
        if agg:
            text += "\n" + _table_text(TASK_COLUMNS, agg)
        (out / "report.txt").write_text(text)
    return rows, agg


def sweep(config: RunConfig, seeds, out) -> tuple[list[dict], list[dict]]:
    """Run ``config`` once per seed under ``out`` and aggregate."""
    out = Path(out)
    dirs = []
    for seed in seeds:
        d = out / f"{config.task.kind}_{config.backend}_seed{seed:03d}"
        cfg = RunConfig(**{**vars(config), "seed": seed, "output_dir": d})
        gen_data(cfg)
        run_identify(cfg)
        dirs.append(d)
    return report(dirs, out)
