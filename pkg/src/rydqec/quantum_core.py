"""Dense states and operators on tensor-product registers.

Registers are described by a tuple of local dimensions, e.g. ``(4, 4, 4)`` for
three Rydberg ions or ``(2,) * n`` for qubits. Site 0 is the most significant
factor of the flat index; callers address sites by name and never compute
flat indices themselves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when register dimensions or site lists are inconsistent."""


def _as_dims(dims: Sequence[int]) -> tuple[int, ...]:
    out = tuple(int(d) for d in dims)
    if not out or any(d < 1 for d in out):
        raise DimensionError(f"invalid register dims {dims!r}")
    return out


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes over a tensor-product register."""

    dims: tuple[int, ...]
    amps: np.ndarray

    def __post_init__(self) -> None:
        dims = _as_dims(self.dims)
        amps = np.array(self.amps, dtype=np.complex128).reshape(-1)
        if amps.size != int(np.prod(dims)):
            raise DimensionError(
                f"{amps.size} amplitudes do not match dims {dims} (size {int(np.prod(dims))})"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amps", amps)

    @property
    def dim(self) -> int:
        return self.amps.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> StateVector:
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.dims, self.amps / n)

    def tensor(self) -> np.ndarray:
        return self.amps.reshape(self.dims)

    @classmethod
    def basis(cls, dims: Sequence[int], levels: Sequence[int]) -> StateVector:
        dims = _as_dims(dims)
        if len(levels) != len(dims):
            raise DimensionError("one level per site required")
        for lv, d in zip(levels, dims):
            if not 0 <= lv < d:
                raise DimensionError(f"level {lv} outside local dimension {d}")
        amps = np.zeros(int(np.prod(dims)), dtype=np.complex128)
        amps[np.ravel_multi_index(tuple(levels), dims)] = 1.0
        return cls(dims, amps)

    @classmethod
    def product(cls, locals_: Sequence[np.ndarray]) -> StateVector:
        vec = np.ones(1, dtype=np.complex128)
        for v in locals_:
            vec = np.kron(vec, np.asarray(v, dtype=np.complex128))
        return cls(tuple(len(v) for v in locals_), vec)


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense square matrix acting on a register of total dimension ``dim``."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.entries, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"operator must be square, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def dagger(self) -> Operator:
        return Operator(self.entries.conj().T)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return float(np.max(np.abs(self.entries - self.entries.conj().T))) < tol

    def __matmul__(self, other: Operator) -> Operator:
        if other.dim != self.dim:
            raise DimensionError("operator dimensions differ")
        return Operator(self.entries @ other.entries)


def _check_sites(sites: Sequence[int], dims: tuple[int, ...]) -> tuple[int, ...]:
    sites = tuple(int(s) for s in sites)
    if len(set(sites)) != len(sites):
        raise DimensionError(f"duplicate site in {sites}")
    for s in sites:
        if not 0 <= s < len(dims):
            raise DimensionError(f"site {s} outside register of {len(dims)} sites")
    return sites


def apply_local_tensor(
    local: np.ndarray, sites: Sequence[int], dims: Sequence[int], tensor: np.ndarray
) -> np.ndarray:
    """Apply a local matrix to ``tensor`` (shape ``(*dims, ...)``) on ``sites``.

    Trailing axes beyond the register are carried along untouched, which lets
    callers act on many columns at once.
    """
    dims = _as_dims(dims)
    sites = _check_sites(sites, dims)
    local_dims = tuple(dims[s] for s in sites)
    k = len(sites)
    if local.shape != (int(np.prod(local_dims)),) * 2:
        raise DimensionError(
            f"local operator shape {local.shape} does not match sites {sites} of dims {dims}"
        )
    op = local.reshape(local_dims + local_dims)
    moved = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), list(sites)))
    # tensordot puts the acted-on axes first; move them back into place
    return np.moveaxis(moved, list(range(k)), list(sites))


def embed_local(op: Operator | np.ndarray, sites: Sequence[int], dims: Sequence[int]) -> Operator:
    """Full-register operator acting as ``op`` on ``sites`` and identity elsewhere."""
    local = op.entries if isinstance(op, Operator) else np.asarray(op, dtype=np.complex128)
    dims = _as_dims(dims)
    total = int(np.prod(dims))
    ident = np.eye(total, dtype=np.complex128).reshape(dims + (total,))
    full = apply_local_tensor(local, sites, dims, ident)
    return Operator(full.reshape(total, total))


def inner(a: StateVector, b: StateVector) -> complex:
    """Return the inner product <a|b>, conjugate-linear in ``a``."""
    if a.dims != b.dims:
        raise DimensionError(f"dims differ: {a.dims} vs {b.dims}")
    return complex(np.vdot(a.amps, b.amps))


def apply(op: Operator, s: StateVector) -> StateVector:
    if op.dim != s.dim:
        raise DimensionError(f"operator dim {op.dim} does not match state dim {s.dim}")
    return StateVector(s.dims, op.entries @ s.amps)


def permute_sites(s: StateVector, order: Sequence[int]) -> StateVector:
    """Reorder register sites so that new site ``k`` is old site ``order[k]``."""
    order = _check_sites(order, s.dims)
    if len(order) != len(s.dims):
        raise DimensionError("permutation must list every site")
    t = np.transpose(s.tensor(), order)
    return StateVector(tuple(s.dims[i] for i in order), t.reshape(-1))


SQRT2 = np.sqrt(2.0)
I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / SQRT2
S = np.array([[1, 0], [0, 1j]], dtype=np.complex128)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}
