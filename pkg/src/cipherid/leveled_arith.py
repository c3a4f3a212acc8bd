"""Emulated leveled homomorphic arithmetic.

Ciphertexts here are *not* encrypted. They carry the represented value, the
current level and the scheme parameters, and every operation follows the
bookkeeping of a leveled scheme: additions keep the minimum level of their
operands, every multiplication (including multiplication by a plaintext
constant) consumes one level, and multiplying at level 0 raises
:class:`DepthExhausted`.

Two backends are available through :class:`SchemeParams`:

``exact``
    Plain float64 arithmetic with level bookkeeping. Serves as the oracle.
``fixed_point``
    Every value is rounded to the nearest multiple of ``2**-scale_bits`` after
    each operation, and each multiplication adds zero-mean Gaussian noise of
    standard deviation ``noise_std`` before rounding.

Noise draws are a pure function of ``noise_seed`` and the operands, so the
same circuit always produces bit-identical payloads regardless of the order
in which independent sub-circuits are evaluated.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import DepthExhausted, DimensionMismatch

EXACT = "exact"
FIXED_POINT = "fixed_point"
BACKENDS = (EXACT, FIXED_POINT)


@dataclass(frozen=True)
class SchemeParams:
    """Emulator configuration.

    ``base_modulus_bits`` and ``ring_dim_log2`` are metadata only; they mirror
    the parameters of a real CKKS setup but do not influence arithmetic.
    ``noise_std=None`` selects the default ``2**-scale_bits``.
    """

    backend: str = EXACT
    scale_bits: int = 30
    max_level: int = 23
    base_modulus_bits: int = 60
    ring_dim_log2: int = 15
    noise_std: float | None = None
    noise_seed: int = 0

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.scale_bits < 1:
            raise ValueError("scale_bits must be >= 1")
        if self.max_level < 1:
            raise ValueError("max_level must be >= 1")
        if self.noise_std is None:
            object.__setattr__(self, "noise_std", 2.0 ** -self.scale_bits)
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")

    @property
    def resolution(self) -> float:
        return 2.0 ** -self.scale_bits

    @property
    def ciphertext_modulus_bits(self) -> int:
        return self.base_modulus_bits + self.scale_bits * self.max_level

    @property
    def noisy(self) -> bool:
        return self.backend == FIXED_POINT and self.noise_std > 0

    def quantize(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.backend == EXACT:
            return x
        return np.ldexp(np.rint(np.ldexp(x, self.scale_bits)), -self.scale_bits)

    def replace(self, **changes) -> "SchemeParams":
        d = self.to_dict()
        d.update(changes)
        return SchemeParams.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "scale_bits": self.scale_bits,
            "max_level": self.max_level,
            "base_modulus_bits": self.base_modulus_bits,
            "ring_dim_log2": self.ring_dim_log2,
            "noise_std": self.noise_std,
            "noise_seed": self.noise_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SchemeParams":
        return cls(**d)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


class _Cipher:
    # Make numpy defer to our reflected operators (e.g. 2*I - H).
    __array_ufunc__ = None

    params: SchemeParams
    level: int

    @property
    def backend_tag(self) -> str:
        return self.params.backend

    def _value(self) -> np.ndarray:
        raise NotImplementedError

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)


@dataclass(frozen=True, eq=False)
class CipherScalar(_Cipher):
    """Handle for one emulated ciphertext.

    Arithmetic operators are available: ``+``/``-`` never consume a level,
    ``*`` always consumes one (also with a plaintext operand).
    """

    payload: float
    level: int
    params: SchemeParams = field(repr=False)

    def _value(self):
        return np.float64(self.payload)


@dataclass(frozen=True, eq=False)
class CipherMatrix(_Cipher):
    """A matrix of ciphertexts sharing one level.

    The entries are stored as one read-only float array; ``entries`` and
    indexing expose them as :class:`CipherScalar` handles.
    """

    payload: np.ndarray
    level: int
    params: SchemeParams = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.payload)
        if p.ndim != 2:
            raise DimensionMismatch(f"CipherMatrix payload must be 2-D, got shape {p.shape}")
        if not p.flags.writeable and p.dtype == np.float64:
            return
        object.__setattr__(self, "payload", _readonly(p))

    @property
    def rows(self) -> int:
        return self.payload.shape[0]

    @property
    def cols(self) -> int:
        return self.payload.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.payload.shape

    @property
    def T(self) -> "CipherMatrix":
        return transpose(self)

    @property
    def entries(self) -> list[CipherScalar]:
        return [CipherScalar(float(v), self.level, self.params) for v in self.payload.ravel()]

    def __getitem__(self, idx) -> CipherScalar:
        i, j = idx
        return CipherScalar(float(self.payload[i, j]), self.level, self.params)

    def __matmul__(self, other):
        return mat_mul(self, other)

    def _value(self):
        return self.payload

    @classmethod
    def from_entries(cls, entries: Sequence[CipherScalar], rows: int, cols: int) -> "CipherMatrix":
        """Assemble a matrix, leveling every entry down to the lowest one."""
        if len(entries) != rows * cols:
            raise DimensionMismatch(f"{len(entries)} entries for a {rows}x{cols} matrix")
        if not entries:
            raise DimensionMismatch("empty matrix")
        params = _common_params(*entries)
        level = min(e.level for e in entries)
        payload = np.array([e.payload for e in entries], dtype=np.float64).reshape(rows, cols)
        return cls(payload, level, params)


Cipher = Union[CipherScalar, CipherMatrix]
Plain = Union[float, int, np.ndarray]


def _wrap(value, level: int, params: SchemeParams) -> Cipher:
    value = np.asarray(value, dtype=np.float64)
    if value.ndim == 0:
        return CipherScalar(float(value), level, params)
    return CipherMatrix(_readonly(value), level, params)


def _common_params(*cts: _Cipher) -> SchemeParams:
    params = cts[0].params
    for ct in cts[1:]:
        if ct.params.backend != params.backend or ct.params.scale_bits != params.scale_bits:
            raise ValueError("operands belong to different backends")
    return params


def _noise(params: SchemeParams, tag: str, operands: Sequence, shape) -> np.ndarray | float:
    if not params.noisy:
        return 0.0
    h = hashlib.blake2b(digest_size=16)
    h.update(params.noise_seed.to_bytes(8, "little", signed=True))
    h.update(tag.encode())
    for op in operands:
        if isinstance(op, _Cipher):
            h.update(op.level.to_bytes(4, "little"))
            op = op._value()
        a = np.ascontiguousarray(op, dtype=np.float64)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    rng = np.random.default_rng(int.from_bytes(h.digest(), "little"))
    return rng.normal(0.0, params.noise_std, size=shape)


def _consume(level: int) -> int:
    if level < 1:
        raise DepthExhausted(f"multiplication requested at level {level}")
    return level - 1


def _check_elementwise(a, b):
    sa, sb = np.shape(a), np.shape(b)
    if sa and sb and sa != sb:
        raise DimensionMismatch(f"operand shapes {sa} and {sb} differ")


# -- encryption ---------------------------------------------------------------


def encrypt(x, params: SchemeParams) -> Cipher:
    """Encode ``x`` at the maximum level.

    Scalars give a :class:`CipherScalar`, 1-D input a column
    :class:`CipherMatrix`, 2-D input a :class:`CipherMatrix`.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim > 2:
        raise DimensionMismatch("only scalars and matrices can be encrypted")
    return _wrap(params.quantize(x), params.max_level, params)


def decrypt(ct: Cipher):
    """Return the represented value (float for scalars, array for matrices)."""
    if isinstance(ct, CipherScalar):
        return ct.payload
    return np.array(ct.payload)


def level_down(ct: Cipher, level: int) -> Cipher:
    if level > ct.level:
        raise ValueError(f"cannot raise level {ct.level} to {level}")
    return _wrap(ct._value(), level, ct.params)


# -- additive operations (no level consumed) ----------------------------------


def _additive(a, b, sign: float) -> Cipher:
    if isinstance(a, _Cipher) and isinstance(b, _Cipher):
        params = _common_params(a, b)
        _check_elementwise(a._value(), b._value())
        value = a._value() + sign * b._value()
        level = min(a.level, b.level)
    elif isinstance(a, _Cipher):
        params = a.params
        c = params.quantize(b)
        _check_elementwise(a._value(), c)
        value, level = a._value() + sign * c, a.level
    elif isinstance(b, _Cipher):
        params = b.params
        c = params.quantize(a)
        _check_elementwise(c, b._value())
        value, level = c + sign * b._value(), b.level
    else:
        return NotImplemented
    return _wrap(params.quantize(value), level, params)


def add(a, b) -> Cipher:
    """``a + b``; either operand may be a plaintext constant."""
    return _additive(a, b, 1.0)


def sub(a, b) -> Cipher:
    return _additive(a, b, -1.0)


def neg(a: Cipher) -> Cipher:
    return _wrap(-a._value(), a.level, a.params)


# -- multiplicative operations (one level each) -------------------------------


def mul(a, b) -> Cipher:
    """Entrywise product; a scalar ciphertext broadcasts over a matrix.

    With one plaintext operand this is :func:`mul_plain`.
    """
    if not isinstance(a, _Cipher):
        return mul_plain(b, a)
    if not isinstance(b, _Cipher):
        return mul_plain(a, b)
    params = _common_params(a, b)
    _check_elementwise(a._value(), b._value())
    level = _consume(min(a.level, b.level))
    value = a._value() * b._value()
    value = value + _noise(params, "mul", (a, b), np.shape(value))
    return _wrap(params.quantize(value), level, params)


def mul_plain(a: Cipher, c: Plain) -> Cipher:
    """Multiply by a plaintext constant (scalar or same-shape array).

    Always consumes a level, whatever the constant.
    """
    params = a.params
    c = params.quantize(c)
    _check_elementwise(a._value(), c)
    level = _consume(a.level)
    value = a._value() * c
    value = value + _noise(params, "mul_plain", (a, c), np.shape(value))
    return _wrap(params.quantize(value), level, params)


scale_by_plain = mul_plain


def mat_mul(A: CipherMatrix, B: CipherMatrix) -> CipherMatrix:
    """Matrix product built from entrywise products and sums; one level."""
    if not isinstance(A, CipherMatrix) or not isinstance(B, CipherMatrix):
        raise TypeError("mat_mul expects two CipherMatrix operands")
    params = _common_params(A, B)
    if A.cols != B.rows:
        raise DimensionMismatch(f"cannot multiply {A.shape} by {B.shape}")
    level = _consume(min(A.level, B.level))
    if params.backend == EXACT:
        value = A.payload @ B.payload
    else:
        products = params.quantize(A.payload[:, :, None] * B.payload[None, :, :])
        value = products.sum(axis=1)
        value = value + _noise(params, "mat_mul", (A, B), value.shape)
    return CipherMatrix(_readonly(params.quantize(value)), level, params)


def mat_add(A: CipherMatrix, B: CipherMatrix) -> CipherMatrix:
    if A.shape != B.shape:
        raise DimensionMismatch(f"cannot add {A.shape} and {B.shape}")
    return add(A, B)


def mat_sub(A: CipherMatrix, B: CipherMatrix) -> CipherMatrix:
    if A.shape != B.shape:
        raise DimensionMismatch(f"cannot subtract {B.shape} from {A.shape}")
    return sub(A, B)


def transpose(A: CipherMatrix) -> CipherMatrix:
    return CipherMatrix(_readonly(A.payload.T), A.level, A.params)


def trace(A: CipherMatrix) -> CipherScalar:
    if A.rows != A.cols:
        raise DimensionMismatch(f"trace of non-square {A.shape} matrix")
    return CipherScalar(float(A.params.quantize(np.trace(A.payload))), A.level, A.params)


def gather(sources: Sequence[CipherMatrix], index, sign) -> CipherMatrix:
    """Build a matrix whose entries are signed copies of source entries.

    The sources are flattened row-major and concatenated; ``index`` holds flat
    positions into that sequence and ``sign`` is +1 or -1 per entry. Copying
    and negating ciphertexts is free, so the result keeps the minimum level.
    """
    params = _common_params(*sources)
    flat = np.concatenate([s.payload.ravel() for s in sources])
    index = np.asarray(index)
    sign = np.asarray(sign, dtype=np.float64)
    if not np.all(np.abs(sign) == 1.0):
        raise ValueError("gather signs must be +1 or -1")
    value = sign * flat[index]
    return CipherMatrix(_readonly(value), min(s.level for s in sources), params)


# -- serialization -------------------------------------------------------------


def to_json_dict(ct: Cipher) -> dict:
    """JSON-ready dict; payloads are shortest round-trip decimal strings."""
    value = np.atleast_2d(ct._value())
    return {
        "backend": ct.params.backend,
        "scale_bits": ct.params.scale_bits,
        "level": ct.level,
        "rows": int(value.shape[0]),
        "cols": int(value.shape[1]),
        "payload": [repr(float(v)) for v in value.ravel()],
        "emulated": True,
    }


def _payload_from_json(d: dict, params: SchemeParams) -> np.ndarray:
    if d.get("emulated") is not True:
        raise ValueError("refusing ciphertext without the 'emulated' marker")
    if d["backend"] != params.backend or d["scale_bits"] != params.scale_bits:
        raise ValueError("ciphertext was produced under different scheme parameters")
    if not 0 <= d["level"] <= params.max_level:
        raise ValueError(f"level {d['level']} outside [0, {params.max_level}]")
    payload = np.array([float(s) for s in d["payload"]], dtype=np.float64)
    if payload.size != d["rows"] * d["cols"]:
        raise DimensionMismatch("payload length does not match rows*cols")
    return payload.reshape(d["rows"], d["cols"])


def matrix_from_json_dict(d: dict, params: SchemeParams) -> CipherMatrix:
    return CipherMatrix(_readonly(_payload_from_json(d, params)), d["level"], params)


def scalar_from_json_dict(d: dict, params: SchemeParams) -> CipherScalar:
    payload = _payload_from_json(d, params)
    if payload.size != 1:
        raise DimensionMismatch("scalar ciphertext with more than one payload entry")
    return CipherScalar(float(payload[0, 0]), d["level"], params)
