"""Completely positive maps in Kraus form and their Choi matrices.

Two normalizations are kept apart on purpose:

* ``Channel.choi`` is the dynamical matrix ``J = (Phi (x) id)(vec(I) vec(I)^dagger)``,
  with trace ``dim_in`` for trace-preserving maps;
* ``Channel.jamiolkowski_state`` is ``J / dim_in``, a density matrix.

The output factor comes first in ``J``: ``J = sum_i vec(K_i) vec(K_i)^dagger``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np

from . import matrixcore as mc
from .haar import haar_unitary

TP_ATOL = 1e-10
DENSITY_ATOL = 1e-10


class NotCompletelyPositive(ValueError):
    """Raised when a Choi matrix has a significantly negative eigenvalue."""


class NotTracePreserving(ValueError):
    pass


class NotBistochastic(ValueError):
    pass


class ChannelFormatError(ValueError):
    """Raised for malformed channel JSON; the message names the offending field."""


def _as_kraus(operators) -> np.ndarray:
    if isinstance(operators, Channel):
        return operators.kraus
    ops = np.asarray(operators, dtype=np.complex128)
    if ops.ndim == 2:
        ops = ops[None]
    if ops.ndim != 3 or ops.shape[0] == 0:
        raise mc.DimensionError("Kraus set must be a non-empty stack of equally shaped matrices")
    return ops


def kraus_tp_residual(kraus) -> float:
    k = _as_kraus(kraus)
    s = np.einsum("kai,kaj->ij", k.conj(), k)
    return float(np.abs(s - np.eye(k.shape[2])).max())


def kraus_unital_residual(kraus) -> float:
    k = _as_kraus(kraus)
    s = np.einsum("kia,kja->ij", k, k.conj())
    return float(np.abs(s - np.eye(k.shape[1])).max())


def choi_from_kraus(kraus) -> np.ndarray:
    """Dynamical matrix ``sum_i vec(K_i) vec(K_i)^dagger`` of the map with Kraus set ``kraus``."""
    k = _as_kraus(kraus)
    v = k.reshape(k.shape[0], -1)
    return v.T @ v.conj()


def choi_by_action(kraus) -> np.ndarray:
    """Dynamical matrix computed as ``(Phi (x) id)(vec(I) vec(I)^dagger)``.

    Independent route to :func:`choi_from_kraus`, used as a cross-check.
    """
    k = _as_kraus(kraus)
    d_in = k.shape[2]
    omega = mc.vec(np.eye(d_in))
    big = np.stack([np.kron(op, np.eye(d_in)) for op in k])
    return apply_kraus(big, np.outer(omega, omega.conj()))


def kraus_from_choi(choi, dim_in: int, dim_out: int) -> np.ndarray:
    """Kraus operators ``sqrt(lambda_i) * unvec(v_i)`` from the spectrum of ``choi``.

    Eigenvalues below ``1e-12 * lambda_max`` are dropped.

    Raises:
        NotCompletelyPositive: if the smallest eigenvalue is below ``-1e-9``.
    """
    choi = mc.as_matrix(choi)
    d = dim_in * dim_out
    if choi.shape != (d, d):
        raise mc.DimensionError(f"Choi matrix must be {d}x{d}, got {choi.shape}")
    w, v = mc.hermitian_eig(choi)
    if w[-1] < -1e-9:
        raise NotCompletelyPositive(f"Choi matrix has eigenvalue {w[-1]:.3e}")
    keep = w > mc.CLAMP_RTOL * max(w[0], 0.0)
    if not keep.any():
        return np.zeros((1, dim_out, dim_in), dtype=np.complex128)
    ops = [np.sqrt(lam) * mc.unvec(v[:, i], dim_out, dim_in) for i, lam in enumerate(w) if keep[i]]
    return np.stack(ops)


def apply_kraus(kraus, rho) -> np.ndarray:
    k = _as_kraus(kraus)
    rho = mc.as_matrix(rho)
    if rho.shape != (k.shape[2], k.shape[2]):
        raise mc.DimensionError(f"operator of shape {rho.shape} does not match input dimension {k.shape[2]}")
    return np.einsum("kab,bc,kdc->ad", k, rho, k.conj())


@dataclass(frozen=True, eq=False)
class Channel:
    """A CP map ``sigma -> sum_i K_i sigma K_i^dagger``.

    The Choi matrix and the trace-preserving / unital flags are computed once at
    construction; the instance is immutable afterwards.
    """

    kraus: np.ndarray
    choi: np.ndarray = field(init=False, repr=False)
    tp: bool = field(init=False)
    unital: bool = field(init=False)

    def __post_init__(self):
        k = _as_kraus(self.kraus).copy()
        k.setflags(write=False)
        j = choi_from_kraus(k)
        j.setflags(write=False)
        object.__setattr__(self, "kraus", k)
        object.__setattr__(self, "choi", j)
        object.__setattr__(self, "tp", kraus_tp_residual(k) <= TP_ATOL)
        object.__setattr__(self, "unital", kraus_unital_residual(k) <= TP_ATOL)

    @property
    def dim_in(self) -> int:
        return self.kraus.shape[2]

    @property
    def dim_out(self) -> int:
        return self.kraus.shape[1]

    @property
    def rank(self) -> int:
        return self.kraus.shape[0]

    @property
    def cp(self) -> bool:
        return True

    @property
    def bistochastic(self) -> bool:
        return self.tp and self.unital

    @property
    def is_square(self) -> bool:
        return self.dim_in == self.dim_out

    @property
    def jamiolkowski_state(self) -> np.ndarray:
        return self.choi / self.dim_in

    def __call__(self, rho) -> np.ndarray:
        return apply_kraus(self.kraus, rho)

    def to_dict(self, seed: Optional[int] = None) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "dim_in": self.dim_in,
            "dim_out": self.dim_out,
            "kraus": [[[[float(z.real), float(z.imag)] for z in row] for row in op] for op in self.kraus],
            "flags": {"cp": True, "tp": self.tp, "unital": self.unital},
        }
        if seed is not None:
            out["seed"] = seed
        return out

    def to_json(self, seed: Optional[int] = None) -> str:
        return json.dumps(self.to_dict(seed))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Channel":
        if not isinstance(data, dict):
            raise ChannelFormatError("channel document must be a JSON object")
        for key in ("dim_in", "dim_out", "kraus"):
            if key not in data:
                raise ChannelFormatError(f"missing field '{key}'")
        dim_in, dim_out = data["dim_in"], data["dim_out"]
        if not (isinstance(dim_in, int) and isinstance(dim_out, int) and dim_in >= 1 and dim_out >= 1):
            raise ChannelFormatError("fields 'dim_in' and 'dim_out' must be positive integers")
        raw = data["kraus"]
        if not isinstance(raw, list) or not raw:
            raise ChannelFormatError("field 'kraus' must be a non-empty list of matrices")
        ops = []
        for i, op in enumerate(raw):
            try:
                arr = np.asarray(op, dtype=float)
            except (TypeError, ValueError):
                raise ChannelFormatError(f"kraus[{i}]: entries must be [re, im] number pairs") from None
            if arr.shape != (dim_out, dim_in, 2):
                raise ChannelFormatError(
                    f"kraus[{i}]: expected shape ({dim_out}, {dim_in}, 2) of [re, im] pairs, got {arr.shape}"
                )
            ops.append(arr[..., 0] + 1j * arr[..., 1])
        return cls(np.stack(ops))

    @classmethod
    def from_json(cls, text: str) -> "Channel":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ChannelFormatError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(data)


def as_density_matrix(rho, atol: float = DENSITY_ATOL) -> np.ndarray:
    """Validate and symmetrize a density matrix (Hermitian, PSD, unit trace)."""
    rho = mc.hermitize(rho)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > atol:
        raise ValueError(f"density matrix must have unit trace, got {tr}")
    if np.linalg.eigvalsh(rho)[0] < -atol:
        raise ValueError("density matrix must be positive semidefinite")
    return rho


def pure_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    return np.outer(psi, psi.conj())


def apply(c: Channel, rho) -> np.ndarray:
    return c(rho)


def identity_channel(n: int) -> Channel:
    return Channel(np.eye(n, dtype=np.complex128))


def unitary_channel(u) -> Channel:
    return Channel(mc.as_matrix(u))


def unitary_mixture(weights: Sequence[float], unitaries) -> Channel:
    """Channel ``sum_i p_i U_i . U_i^dagger``."""
    p = np.asarray(weights, dtype=float)
    us = np.asarray(unitaries, dtype=np.complex128)
    if p.ndim != 1 or us.ndim != 3 or us.shape[0] != p.size:
        raise mc.DimensionError("need one weight per unitary")
    if np.any(p < 0):
        raise ValueError("mixture weights must be non-negative")
    return Channel(np.sqrt(p)[:, None, None] * us)


def compose(phi: Channel, psi: Channel) -> Channel:
    """``Phi o Psi``: apply ``psi`` first. Kraus set ``{M_i N_j}``."""
    if psi.dim_out != phi.dim_in:
        raise mc.DimensionError(f"cannot compose: psi outputs {psi.dim_out}, phi takes {phi.dim_in}")
    ops = np.einsum("iab,jbc->ijac", phi.kraus, psi.kraus)
    return Channel(ops.reshape(-1, phi.dim_out, psi.dim_in))


def tensor_channels(phi: Channel, psi: Channel) -> Channel:
    """``Phi (x) Psi`` with Kraus set ``{M_i (x) N_j}``."""
    ops = [np.kron(m, n) for m in phi.kraus for n in psi.kraus]
    return Channel(np.stack(ops))


def _require_square(c: Channel) -> None:
    if not c.is_square:
        raise mc.DimensionError(f"channel must be square, got {c.dim_out}x{c.dim_in}")


def transpose_channel(c: Channel) -> Channel:
    _require_square(c)
    return Channel(np.transpose(c.kraus, (0, 2, 1)))


def adjoint_channel(c: Channel) -> Channel:
    _require_square(c)
    return Channel(np.transpose(c.kraus, (0, 2, 1)).conj())


def depolarizing(n: int, x: float) -> Channel:
    """``rho -> (1 - x) rho + x tr(rho) I / n`` for ``0 <= x <= 1``.

    Kraus set: ``sqrt(1 - x) I`` together with ``sqrt(x / n) |i><j|``; zero-weight
    terms are omitted.
    """
    if n < 2:
        raise ValueError("depolarizing channel needs n >= 2")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"depolarizing parameter must lie in [0, 1], got {x}")
    ops = []
    if x < 1.0:
        ops.append(np.sqrt(1.0 - x) * np.eye(n, dtype=np.complex128))
    if x > 0.0:
        for i in range(n):
            for j in range(n):
                e = np.zeros((n, n), dtype=np.complex128)
                e[i, j] = np.sqrt(x / n)
                ops.append(e)
    return Channel(np.stack(ops))


def random_cptp(n: int, k: int, seed=None) -> Channel:
    """Random CPTP map of Kraus rank ``k`` from a Haar-random Stinespring isometry."""
    if n < 2 or not 1 <= k <= n * n:
        raise ValueError(f"need n >= 2 and 1 <= k <= n^2, got n={n}, k={k}")
    u = haar_unitary(n * k, seed)
    iso = u[:, :n]
    return Channel(iso.reshape(k, n, n))


def random_mixture_params(n: int, k: int, seed=None):
    """Dirichlet-uniform weights and ``k`` Haar unitaries for :func:`unitary_mixture`."""
    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.ones(k))
    unitaries = np.stack([haar_unitary(n, rng) for _ in range(k)])
    return weights, unitaries


def random_bistochastic(n: int, k: int, seed=None) -> Channel:
    """Random mixture of ``k`` Haar unitaries.

    For ``n >= 3`` unitary mixtures do not exhaust the bistochastic maps.
    """
    if n < 2 or k < 1:
        raise ValueError(f"need n >= 2 and k >= 1, got n={n}, k={k}")
    return unitary_mixture(*random_mixture_params(n, k, seed))


def require_tp(c: Channel) -> None:
    if not c.tp:
        raise NotTracePreserving(f"channel is not trace preserving (residual {kraus_tp_residual(c.kraus):.2e})")


def require_bistochastic(c: Channel, atol: float = 1e-8) -> None:
    r_tp, r_un = kraus_tp_residual(c.kraus), kraus_unital_residual(c.kraus)
    if not c.is_square or r_tp > atol or r_un > atol:
        raise NotBistochastic(f"channel is not bistochastic (TP residual {r_tp:.2e}, unital residual {r_un:.2e})")


def channels_close(a: Channel, b: Channel, atol: float = 1e-12) -> bool:
    return a.choi.shape == b.choi.shape and bool(np.abs(a.choi - b.choi).max() <= atol)
