"""
Problem data model for l1-regularized least squares.

Covers the objective, gradient and residual arithmetic, incremental
coordinate updates, synthetic P1/P2 instance generation and the binary
instance file format.
"""

import math
import struct
import zlib
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np

from fastbcda.core.errors import (
    DimensionError,
    InstanceFormatError,
    InvalidParameterError,
)
from fastbcda.core.logging_config import get_logger
from fastbcda.schemas.common import ProblemKind

logger = get_logger(__name__)

MAGIC = b"FBCD1\0"
HEADER_KEYS = ("n", "m", "tau", "kind", "has_x_true")
DEFAULT_DENSITY = 0.5
DEFAULT_NOISE_VAR = 1e-3
TAU_FACTOR = 0.1

PathLike = Union[str, Path]


@dataclass(frozen=True)
class InstanceMeta:
    """Generator metadata carried alongside the problem data."""
    kind: ProblemKind = ProblemKind.custom
    seed: Optional[int] = None
    rho: Optional[float] = None
    density: Optional[float] = None
    noise_var: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Instance:
    """
    Problem data (A, b, tau) of min 1/2 ||Ax - b||^2 + tau ||x||_1.

    Arrays are stored as read-only float64 copies, so an instance can be
    shared between concurrent solves.
    """
    A: np.ndarray
    b: np.ndarray
    tau: float
    x_true: Optional[np.ndarray] = None
    meta: InstanceMeta = field(default_factory=InstanceMeta)

    def __post_init__(self) -> None:
        A = np.array(self.A, dtype=np.float64, order="C")
        b = np.array(self.b, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise DimensionError(
                f"A must be a non-empty matrix, got {A.shape}"
            )
        if b.shape != (A.shape[0],):
            raise DimensionError(
                f"b has shape {b.shape}, expected ({A.shape[0]},)"
            )
        tau = float(self.tau)
        if not tau > 0 or not math.isfinite(tau):
            raise InvalidParameterError(f"tau must be positive, got {tau}")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "tau", tau)

        if self.x_true is not None:
            x_true = np.array(self.x_true, dtype=np.float64)
            if x_true.shape != (A.shape[1],):
                raise DimensionError(
                    f"x_true has shape {x_true.shape}, "
                    f"expected ({A.shape[1]},)"
                )
            x_true.setflags(write=False)
            object.__setattr__(self, "x_true", x_true)

        if np.any(self.col_norms_sq <= 0):
            zero_cols = np.flatnonzero(self.col_norms_sq <= 0)
            raise InvalidParameterError(
                f"columns {zero_cols[:10].tolist()} of A have zero norm",
                code="zero_column",
            )

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @cached_property
    def col_norms_sq(self) -> np.ndarray:
        """Diagonal of the Hessian, H_ii = ||A_i||^2."""
        norms = np.einsum("ij,ij->j", self.A, self.A)
        norms.setflags(write=False)
        return norms

    @property
    def name(self) -> str:
        """Short identifier used in log context and result files."""
        meta = self.meta
        if meta.kind is ProblemKind.custom:
            return f"custom-{self.m}x{self.n}"
        return f"{meta.kind.value}-n{self.n}-rho{meta.rho}-seed{meta.seed}"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        if (self.x_true is None) != (other.x_true is None):
            return False
        return (
            self.meta == other.meta
            and self.tau == other.tau
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.b, other.b)
            and (
                self.x_true is None
                or np.array_equal(self.x_true, other.x_true)
            )
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass
class SolverState:
    """
    Mutable iterate owned by exactly one solve.

    ``residual`` is kept equal to A x - b by every update; the objective and
    the full gradient are cached lazily and dropped on any change to x.
    """
    inst: Instance
    x: np.ndarray
    residual: np.ndarray
    outer_iter: int = 0
    f_value: Optional[float] = None
    _gradient: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def col_norms_sq(self) -> np.ndarray:
        return self.inst.col_norms_sq

    @property
    def f(self) -> float:
        """Objective at x, evaluated from the maintained residual."""
        if self.f_value is None:
            self.f_value = float(
                0.5 * np.dot(self.residual, self.residual)
                + self.inst.tau * np.abs(self.x).sum()
            )
        return self.f_value

    @property
    def gradient(self) -> np.ndarray:
        """Full gradient g = A^T r at x."""
        if self._gradient is None:
            self._gradient = gradient_q(self.inst, self.residual)
        return self._gradient

    def invalidate(self) -> None:
        self.f_value = None
        self._gradient = None

    def copy(self) -> "SolverState":
        return SolverState(
            inst=self.inst,
            x=self.x.copy(),
            residual=self.residual.copy(),
            outer_iter=self.outer_iter,
            f_value=self.f_value,
            _gradient=self._gradient,
        )

    def resync(self) -> None:
        """Recompute the residual densely, removing accumulated drift."""
        self.residual = self.inst.A @ self.x - self.inst.b
        self.invalidate()


def _check_vector(name: str, v: np.ndarray, size: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (size,):
        raise DimensionError(f"{name} has shape {v.shape}, expected ({size},)")
    return v


def objective(inst: Instance, x: np.ndarray) -> float:
    """
    Evaluate f(x) = 1/2 ||Ax - b||^2 + tau ||x||_1.

    Raises:
        DimensionError: If x does not have length n
    """
    x = _check_vector("x", x, inst.n)
    r = inst.A @ x - inst.b
    return float(0.5 * np.dot(r, r) + inst.tau * np.abs(x).sum())


def gradient_q(inst: Instance, residual: np.ndarray) -> np.ndarray:
    """Gradient of the smooth part, g = A^T r, given r = Ax - b."""
    residual = _check_vector("residual", residual, inst.m)
    return inst.A.T @ residual


def initial_state(
    inst: Instance, x0: Optional[np.ndarray] = None
) -> SolverState:
    """Build a state at x0 (the null vector when omitted)."""
    if x0 is None:
        x = np.zeros(inst.n)
        residual = -inst.b.copy()
    else:
        x = _check_vector("x0", x0, inst.n).copy()
        residual = inst.A @ x - inst.b
    return SolverState(inst=inst, x=x, residual=residual)


def apply_coordinate_delta(
    state: SolverState, i: int, delta: float
) -> SolverState:
    """
    Add delta to x_i and update the residual by delta * A_i.

    The state is updated in place and returned.

    Raises:
        DimensionError: If i is out of range
    """
    n = state.inst.n
    if not 0 <= i < n:
        raise DimensionError(f"index {i} out of range [0, {n})")
    if delta == 0.0:
        return state
    state.x[i] += delta
    state.residual += delta * state.inst.A[:, i]
    state.invalidate()
    return state


def apply_block_delta(
    state: SolverState, J: Sequence[int], delta: np.ndarray
) -> SolverState:
    """Add delta to x_J with a single residual update A_J delta."""
    J = np.asarray(J, dtype=np.intp)
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != J.shape:
        raise DimensionError(
            f"delta has shape {delta.shape}, block has {J.shape}"
        )
    if J.size and (J.min() < 0 or J.max() >= state.inst.n):
        raise DimensionError(f"block {J.tolist()} out of range")
    nz = delta != 0.0
    if not nz.any():
        return state
    J, delta = J[nz], delta[nz]
    state.x[J] += delta
    state.residual += state.inst.A[:, J] @ delta
    state.invalidate()
    return state


def hessian_block(inst: Instance, J: Sequence[int]) -> np.ndarray:
    """
    Return the |J| x |J| submatrix (A^T A)_JJ.

    The diagonal is taken from the cached column norms so that a 1x1 block
    equals col_norms_sq[i] exactly.

    Raises:
        DimensionError: On duplicate or out-of-range indices
    """
    J = np.asarray(J, dtype=np.intp)
    if J.ndim != 1 or len(set(J.tolist())) != J.size:
        raise DimensionError(f"block indices must be distinct, got {J}")
    if J.size and (J.min() < 0 or J.max() >= inst.n):
        raise DimensionError(f"block {J.tolist()} out of range")
    AJ = inst.A[:, J]
    H = AJ.T @ AJ
    H = 0.5 * (H + H.T)
    H[np.diag_indices_from(H)] = inst.col_norms_sq[J]
    return H


def spike_count(m: int, rho: float) -> int:
    """T = round(rho * m), rounding halves away from zero."""
    return int(math.floor(rho * m + 0.5))


def sparse_uniform_matrix(
    rng: np.random.Generator, m: int, n: int, density: float
) -> np.ndarray:
    """
    Dense copy of a sparse uniform random matrix.

    Entries are nonzero with probability ``density`` and uniform on (0, 1)
    when nonzero. Columns that come out empty are redrawn.
    """
    mask = rng.random((m, n)) < density
    values = rng.random((m, n))
    A = np.where(mask, values, 0.0)
    empty = np.flatnonzero(~mask.any(axis=0))
    for j in empty:
        while not A[:, j].any():
            col_mask = rng.random(m) < density
            A[:, j] = np.where(col_mask, rng.random(m), 0.0)
    return A


def generate_instance(
    kind: Union[ProblemKind, str],
    n: int,
    m: int,
    rho: float,
    density: float = DEFAULT_DENSITY,
    noise_var: float = DEFAULT_NOISE_VAR,
    seed: int = 0,
) -> Instance:
    """
    Generate a synthetic sparse-recovery instance.

    Args:
        kind: P1 (Gaussian) or P2 (sparse uniform with ``density``)
        n: Signal dimension
        m: Number of observations, at most n
        rho: Spike count as a fraction of m
        density: Nonzero fraction of the P2 matrix
        noise_var: Variance of the Gaussian observation noise
        seed: Seed of the random stream

    Returns:
        Instance with unit-norm columns, +-1 spikes in x_true and
        tau = 0.1 ||A^T b||_inf

    Raises:
        InvalidParameterError: If m > n, rho is outside (0, 1] or
            round(rho * m) = 0
    """
    kind = ProblemKind(kind)
    if kind is ProblemKind.custom:
        raise InvalidParameterError("custom instances are not generated")
    if m < 1 or n < m:
        raise InvalidParameterError(f"need n >= m >= 1, got n={n}, m={m}")
    if not 0 < rho <= 1:
        raise InvalidParameterError(f"rho must lie in (0, 1], got {rho}")
    if kind is ProblemKind.P2 and not 0 < density <= 1:
        raise InvalidParameterError(
            f"density must lie in (0, 1], got {density}"
        )
    if noise_var < 0:
        raise InvalidParameterError(f"noise_var must be >= 0, got {noise_var}")
    T = spike_count(m, rho)
    if T == 0:
        raise InvalidParameterError(
            f"rho={rho} gives no spikes for m={m}", code="no_spikes"
        )

    rng = np.random.default_rng(seed)
    if kind is ProblemKind.P1:
        A_bar = rng.standard_normal((m, n))
    else:
        A_bar = sparse_uniform_matrix(rng, m, n, density)
    A = A_bar / np.linalg.norm(A_bar, axis=0)

    x_true = np.zeros(n)
    support = rng.permutation(n)[:T]
    x_true[support] = np.where(rng.random(T) < 0.5, -1.0, 1.0)

    eta = math.sqrt(noise_var) * rng.standard_normal(m)
    b = A @ x_true + eta
    tau = TAU_FACTOR * float(np.abs(A.T @ b).max())

    logger.debug(
        f"Generated {kind.value} instance n={n} m={m} T={T}",
        extra={"kind": kind.value, "n": n, "m": m, "spikes": T, "seed": seed},
    )
    return Instance(
        A=A,
        b=b,
        tau=tau,
        x_true=x_true,
        meta=InstanceMeta(
            kind=kind,
            seed=seed,
            rho=rho,
            density=density if kind is ProblemKind.P2 else None,
            noise_var=noise_var,
        ),
    )


def _fmt_float(value: Optional[float]) -> str:
    return "none" if value is None else float(value).hex()


def _parse_float(value: str) -> Optional[float]:
    return None if value == "none" else float.fromhex(value)


def _encode_header(inst: Instance) -> bytes:
    meta = inst.meta
    fields = {
        "n": str(inst.n),
        "m": str(inst.m),
        "tau": _fmt_float(inst.tau),
        "kind": meta.kind.value,
        "seed": "none" if meta.seed is None else str(meta.seed),
        "rho": _fmt_float(meta.rho),
        "density": _fmt_float(meta.density),
        "noise_var": _fmt_float(meta.noise_var),
        "has_x_true": "1" if inst.x_true is not None else "0",
    }
    return "".join(f"{k}={v}\n" for k, v in fields.items()).encode("utf-8")


def _decode_header(raw: bytes) -> Dict[str, str]:
    try:
        text = raw.decode("utf-8")
        fields = dict(
            line.split("=", 1) for line in text.splitlines() if line
        )
    except (UnicodeDecodeError, ValueError) as e:
        raise InstanceFormatError(
            f"Malformed instance header: {e}", code="bad_header"
        ) from e
    missing = [key for key in HEADER_KEYS if key not in fields]
    if missing:
        raise InstanceFormatError(
            f"Instance header lacks {missing}", code="bad_header"
        )
    return fields


def save_instance(inst: Instance, path: PathLike) -> Path:
    """
    Write an instance to a binary file.

    Layout: magic, u32 header length, UTF-8 key=value header, float64
    arrays (A row-major, b, optional x_true), CRC32 of the payload; all
    little-endian.
    """
    path = Path(path)
    header = _encode_header(inst)
    arrays = [inst.A.ravel(order="C"), inst.b]
    if inst.x_true is not None:
        arrays.append(inst.x_true)
    payload = b"".join(a.astype("<f8").tobytes() for a in arrays)
    crc = zlib.crc32(payload) & 0xFFFFFFFF

    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<I", crc))

    logger.info(
        f"Saved instance {inst.name} to {path}",
        extra={"path": str(path), "bytes": len(payload)},
    )
    return path


def load_instance(path: PathLike) -> Instance:
    """
    Read an instance written by save_instance.

    Raises:
        InstanceFormatError: On bad magic, malformed header, payload size
            mismatch or checksum mismatch
        OSError: If the file cannot be read
    """
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise InstanceFormatError(
            f"{path}: not an instance file (bad magic)", code="bad_magic"
        )
    offset = len(MAGIC)
    if len(data) < offset + 4:
        raise InstanceFormatError(
            f"{path}: truncated header length", code="bad_header"
        )
    (header_len,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if len(data) < offset + header_len:
        raise InstanceFormatError(
            f"{path}: truncated header", code="bad_header"
        )
    fields = _decode_header(data[offset : offset + header_len])
    offset += header_len

    try:
        n, m = int(fields["n"]), int(fields["m"])
        tau = _parse_float(fields["tau"])
        has_x_true = fields["has_x_true"] == "1"
        meta = InstanceMeta(
            kind=ProblemKind(fields["kind"]),
            seed=None
            if fields.get("seed", "none") == "none"
            else int(fields["seed"]),
            rho=_parse_float(fields.get("rho", "none")),
            density=_parse_float(fields.get("density", "none")),
            noise_var=_parse_float(fields.get("noise_var", "none")),
        )
    except ValueError as e:
        raise InstanceFormatError(
            f"{path}: bad header value: {e}", code="bad_header"
        ) from e
    if n < 1 or m < 1 or tau is None:
        raise InstanceFormatError(
            f"{path}: invalid header n={n} m={m} tau={tau}",
            code="bad_header",
        )

    count = m * n + m + (n if has_x_true else 0)
    expected = 8 * count + 4
    payload_and_crc = data[offset:]
    if len(payload_and_crc) != expected:
        raise InstanceFormatError(
            f"{path}: payload has {len(payload_and_crc)} bytes, header "
            f"n={n} m={m} implies {expected}",
            code="size_mismatch",
        )
    payload = payload_and_crc[:-4]
    (crc,) = struct.unpack("<I", payload_and_crc[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise InstanceFormatError(
            f"{path}: checksum mismatch", code="checksum_mismatch"
        )

    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    A = values[: m * n].reshape(m, n)
    b = values[m * n : m * n + m]
    x_true = values[m * n + m :] if has_x_true else None
    return Instance(A=A, b=b, tau=tau, x_true=x_true, meta=meta)
