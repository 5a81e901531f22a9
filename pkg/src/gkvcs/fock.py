"""Truncated multimode Fock space with fermionic sector labels.

Factor order on the full space is ``c.m. (if present) x bosons 1..N x fermion``.
Boson modes and fermion levels are numbered from 1, as in the physics
notation; the centre-of-mass mode is addressed as ``"cm"``.  The fermionic
factor is only materialised when a Hamiltonian hops between sectors; the
sector-diagonal models work on the bosonic space of one sector at a time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache, reduce
from typing import Sequence

import numpy as np
from scipy.linalg import expm

HERMITIAN_TOL = 1e-12


class ParameterError(ValueError):
    """Invalid parameter, label or basis combination."""


class ContractError(RuntimeError):
    """An operation was called outside its contract (e.g. non-Hermitian H)."""


@dataclass(frozen=True)
class TruncationSpec:
    boson_cutoffs: tuple[int, ...]
    cm_cutoff: int | None = None
    M: int = 1

    def __post_init__(self):
        object.__setattr__(self, "boson_cutoffs", tuple(int(c) for c in self.boson_cutoffs))
        if any(c < 0 for c in self.boson_cutoffs):
            raise ParameterError("boson cutoffs must be >= 0")
        if self.cm_cutoff is not None and self.cm_cutoff < 0:
            raise ParameterError("cm cutoff must be >= 0")
        if self.M < 1:
            raise ParameterError("M must be >= 1")

    @property
    def N(self) -> int:
        return len(self.boson_cutoffs)

    @property
    def has_cm(self) -> bool:
        return self.cm_cutoff is not None

    @property
    def cutoffs(self) -> tuple[int, ...]:
        """Per-factor cutoffs in factor order (c.m. first when present)."""
        head = (self.cm_cutoff,) if self.has_cm else ()
        return head + self.boson_cutoffs

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.cutoffs)

    @property
    def dim(self) -> int:
        """Bosonic dimension (fermion factor excluded)."""
        return math.prod(self.dims)

    def full_dim(self, fermions: bool = False) -> int:
        return self.dim * (2**self.M if fermions else 1)

    def tag(self, fermions: bool = False) -> str:
        parts = [f"cm{self.cm_cutoff}"] if self.has_cm else []
        parts += [f"b{c}" for c in self.boson_cutoffs]
        if fermions:
            parts.append(f"f{self.M}")
        return "x".join(parts) or "scalar"

    def factor(self, mode) -> int:
        """Position of ``mode`` ("cm" or 1..N) in the factor order."""
        if mode == "cm":
            if not self.has_cm:
                raise ParameterError("no c.m. mode in this truncation")
            return 0
        if isinstance(mode, (int, np.integer)) and 1 <= mode <= self.N:
            return int(mode) - 1 + (1 if self.has_cm else 0)
        raise ParameterError(f"invalid mode {mode!r} for N={self.N}")

    def flat_index(self, occupations: Sequence[int], sector: int | None = None) -> int:
        """Row-major flat index of an occupation tuple (m, n_1, ..., n_N)."""
        occ = tuple(int(o) for o in occupations)
        if len(occ) != len(self.dims):
            raise ParameterError("occupation tuple has wrong length")
        for o, c in zip(occ, self.cutoffs):
            if not 0 <= o <= c:
                raise ParameterError(f"occupation {o} outside cutoff {c}")
        idx = int(np.ravel_multi_index(occ, self.dims)) if occ else 0
        if sector is None:
            return idx
        if not 0 <= sector < 2**self.M:
            raise ParameterError("sector index out of range")
        return idx * 2**self.M + sector

    def occupations(self, flat: int, fermions: bool = False) -> BasisIndex:
        sector = None
        if fermions:
            flat, sector = divmod(int(flat), 2**self.M)
        if not 0 <= flat < self.dim:
            raise ParameterError("flat index out of range")
        occ = tuple(int(x) for x in np.unravel_index(flat, self.dims)) if self.dims else ()
        return BasisIndex(occ, sector)


@dataclass(frozen=True)
class BasisIndex:
    occupations: tuple[int, ...]
    sector: int | None = None


@dataclass(frozen=True, eq=False)
class Operator:
    matrix: np.ndarray
    tag: str
    hermitian: bool = False

    def __post_init__(self):
        mat = np.asarray(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ParameterError("operator matrix must be square")
        if self.hermitian and hermiticity_defect(mat) > HERMITIAN_TOL:
            raise ContractError(f"claimed Hermitian but |A - A^H| = {hermiticity_defect(mat):.3g}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        if hermiticity_defect(self.matrix) > HERMITIAN_TOL:
            raise ContractError("eigendecomposition requested for a non-Hermitian operator")
        return np.linalg.eigh(self.matrix)

    def __matmul__(self, other: Operator) -> Operator:
        _same_basis(self.tag, other.tag)
        return Operator(self.matrix @ other.matrix, self.tag)

    def __add__(self, other: Operator) -> Operator:
        _same_basis(self.tag, other.tag)
        return Operator(self.matrix + other.matrix, self.tag, self.hermitian and other.hermitian)

    def __sub__(self, other: Operator) -> Operator:
        _same_basis(self.tag, other.tag)
        return Operator(self.matrix - other.matrix, self.tag, self.hermitian and other.hermitian)

    def scaled(self, c: float) -> Operator:
        return Operator(c * self.matrix, self.tag, self.hermitian and np.isreal(c))

    def shifted(self, e0: float) -> Operator:
        """``A - e0 * 1``."""
        return Operator(self.matrix - e0 * np.eye(self.dim), self.tag, self.hermitian)

    def dagger(self) -> Operator:
        return Operator(self.matrix.conj().T, self.tag, self.hermitian)

    def apply(self, psi: State) -> State:
        _same_basis(self.tag, psi.tag)
        return State(self.matrix @ psi.amplitudes, self.tag)


@dataclass(frozen=True, eq=False)
class State:
    amplitudes: np.ndarray
    tag: str

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.ndim != 1:
            raise ParameterError("state amplitudes must be a vector")
        if not np.all(np.isfinite(amp)):
            raise ParameterError("state has non-finite amplitudes")
        object.__setattr__(self, "amplitudes", amp)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> State:
        return State(self.amplitudes / self.norm(), self.tag)

    def __add__(self, other: State) -> State:
        _same_basis(self.tag, other.tag)
        return State(self.amplitudes + other.amplitudes, self.tag)

    def __sub__(self, other: State) -> State:
        _same_basis(self.tag, other.tag)
        return State(self.amplitudes - other.amplitudes, self.tag)


def _same_basis(a: str, b: str) -> None:
    if a != b:
        raise ParameterError(f"basis mismatch: {a} vs {b}")


def hermiticity_defect(mat: np.ndarray) -> float:
    mat = np.asarray(mat)
    if mat.size == 0:
        return 0.0
    return float(np.max(np.abs(mat - mat.conj().T)))


# --- single-factor building blocks -------------------------------------------------


def lowering(cutoff: int) -> np.ndarray:
    """Truncated annihilation operator, <n-1|a|n> = sqrt(n)."""
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1)


def number_diag(cutoff: int) -> np.ndarray:
    return np.diag(np.arange(cutoff + 1, dtype=float))


def quadrature(cutoff: int) -> np.ndarray:
    """a + a^dagger on one factor."""
    a = lowering(cutoff)
    return a + a.T


def displacement_factor(beta: float, cutoff: int) -> np.ndarray:
    """exp(beta (a^dagger - a)) of the truncated generator; exactly orthogonal."""
    if not np.isfinite(beta):
        raise ParameterError("displacement amplitude must be finite")
    a = lowering(cutoff)
    return expm(beta * (a.T - a))


def _pad_for(beta: float, cutoff: int) -> int:
    return 30 + math.ceil(6 * abs(beta) * math.sqrt(cutoff + 1) + 2 * beta * beta)


@lru_cache(maxsize=256)
def _displaced_columns(beta: float, cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    big = cutoff + _pad_for(beta, cutoff)
    full = displacement_factor(beta, big)[:, : cutoff + 1]
    cols = full[: cutoff + 1].copy()
    leak = np.clip(1.0 - np.sum(cols**2, axis=0), 0.0, None)
    cols.setflags(write=False)
    leak.setflags(write=False)
    return cols, leak


def displaced_columns(beta: float, cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    """Columns D(beta)|n>, n = 0..cutoff, restricted to the truncated factor.

    The columns are evaluated on a padded space and then cut, so they are the
    truncation of the exact infinite-dimensional displaced number states.
    ``leak[n]`` is the squared amplitude of column ``n`` beyond the cutoff.
    """
    return _displaced_columns(float(beta), int(cutoff))


# --- full-space operators -----------------------------------------------------------


def embed(factor_matrix: np.ndarray, mode, spec: TruncationSpec, fermions: bool = False) -> Operator:
    """Place a single-factor matrix on ``mode`` with identities elsewhere."""
    pos = spec.factor(mode)
    mats = [np.eye(d) for d in spec.dims]
    mats[pos] = factor_matrix
    if fermions:
        mats.append(np.eye(2**spec.M))
    return Operator(reduce(np.kron, mats), spec.tag(fermions))


def annihilate(mode, spec: TruncationSpec, fermions: bool = False) -> Operator:
    return embed(lowering(spec.cutoffs[spec.factor(mode)]), mode, spec, fermions)


def displacement(mode, beta: float, spec: TruncationSpec, fermions: bool = False) -> Operator:
    """exp(beta (a^dagger - a)) on ``mode``."""
    return embed(displacement_factor(beta, spec.cutoffs[spec.factor(mode)]), mode, spec, fermions)


def identity(spec: TruncationSpec, fermions: bool = False) -> Operator:
    return Operator(np.eye(spec.full_dim(fermions)), spec.tag(fermions), hermitian=True)


def tensor(a: Operator, b: Operator) -> Operator:
    """Kronecker product ``a (x) b`` in the given factor order."""
    return Operator(np.kron(a.matrix, b.matrix), f"{a.tag}x{b.tag}", a.hermitian and b.hermitian)


def number_state(spec: TruncationSpec, occupations: Sequence[int], sector: int | None = None) -> State:
    vec = np.zeros(spec.full_dim(sector is not None), dtype=complex)
    vec[spec.flat_index(occupations, sector)] = 1.0
    return State(vec, spec.tag(sector is not None))


# --- fermions ------------------------------------------------------------------------


def sector_bits(index: int, M: int) -> tuple[int, ...]:
    """Occupation bits (k_1, ..., k_M); k_1 is the most significant bit."""
    return tuple((index >> (M - 1 - j)) & 1 for j in range(M))


def sector_index(bits: Sequence[int]) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def fermion_hop(j: int, l: int, M: int) -> dict[int, tuple[int, int] | None]:
    """Action of c_j^dagger c_l on every occupation basis state.

    Basis states are Psi_[k] = (c_1^+)^{k_1} ... (c_M^+)^{k_M} |vac>.  Returns
    ``{k: (k', sign)}`` or ``{k: None}`` when the state is annihilated.
    """
    if not (1 <= j <= M and 1 <= l <= M):
        raise ParameterError(f"fermion levels must lie in 1..{M}")
    out: dict[int, tuple[int, int] | None] = {}
    for k in range(2**M):
        bits = list(sector_bits(k, M))
        if bits[l - 1] == 0:
            out[k] = None
            continue
        sign = (-1) ** sum(bits[: l - 1])
        bits[l - 1] = 0
        if bits[j - 1] == 1:
            out[k] = None
            continue
        sign *= (-1) ** sum(bits[: j - 1])
        bits[j - 1] = 1
        out[k] = (sector_index(bits), sign)
    return out


def fermion_hop_matrix(j: int, l: int, M: int) -> np.ndarray:
    mat = np.zeros((2**M, 2**M))
    for k, img in fermion_hop(j, l, M).items():
        if img is not None:
            mat[img[0], k] = img[1]
    return mat


# --- states and dynamics --------------------------------------------------------------


def inner(u: State, v: State) -> complex:
    """<u|v>, conjugate-linear in ``u``."""
    _same_basis(u.tag, v.tag)
    return complex(np.vdot(u.amplitudes, v.amplitudes))


def expectation(h: Operator, psi: State) -> float:
    val = inner(psi, h.apply(psi))
    if h.hermitian and abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ContractError("expectation of Hermitian operator has an imaginary part")
    return val.real


def evolve(h: Operator, t: float, psi: State) -> State:
    """exp(-i H t) psi through the eigendecomposition of H."""
    _same_basis(h.tag, psi.tag)
    evals, vecs = h.eigh
    coeff = vecs.conj().T @ psi.amplitudes
    return State(vecs @ (np.exp(-1j * evals * t) * coeff), psi.tag)


@dataclass(frozen=True, eq=False)
class SeparableOperator:
    """Sum of single-factor Hermitian terms plus a constant (a Kronecker sum).

    Every sector block of the sector-diagonal Hamiltonians has this form, which
    lets dynamics and spectra be computed factor by factor.  ``dense()`` gives
    the explicit matrix for cross-checks.
    """

    spec: TruncationSpec
    terms: tuple
    constant: float = 0.0

    def __post_init__(self):
        if len(self.terms) != len(self.spec.dims):
            raise ParameterError("one term per factor required (use None for zero)")
        for term, d in zip(self.terms, self.spec.dims):
            if term is not None:
                if term.shape != (d, d):
                    raise ParameterError("factor term has wrong shape")
                if hermiticity_defect(term) > HERMITIAN_TOL:
                    raise ContractError("factor term is not Hermitian")

    @property
    def tag(self) -> str:
        return self.spec.tag()

    def dense(self) -> Operator:
        total = self.constant * np.eye(self.spec.dim)
        for pos, term in enumerate(self.terms):
            if term is None:
                continue
            mats = [np.eye(d) for d in self.spec.dims]
            mats[pos] = term
            total = total + reduce(np.kron, mats)
        return Operator(total, self.tag, hermitian=True)

    @cached_property
    def factor_eigh(self) -> tuple:
        return tuple(
            np.linalg.eigh(t) if t is not None else (np.zeros(d), np.eye(d))
            for t, d in zip(self.terms, self.spec.dims)
        )

    def eigenvalues(self) -> np.ndarray:
        """All eigenvalues, ascending, from the factor diagonalizations."""
        grid = reduce(np.add.outer, [e for e, _ in self.factor_eigh]) if self.terms else np.zeros(())
        return np.sort(np.ravel(grid) + self.constant)

    def _factorwise(self, psi: State, maps) -> np.ndarray:
        _same_basis(self.tag, psi.tag)
        tens = psi.amplitudes.reshape(self.spec.dims)
        for pos, mat in enumerate(maps):
            if mat is not None:
                tens = np.moveaxis(np.tensordot(mat, tens, axes=([1], [pos])), 0, pos)
        return tens.reshape(-1)

    def apply(self, psi: State) -> State:
        out = self.constant * psi.amplitudes
        for pos, term in enumerate(self.terms):
            if term is not None:
                maps = [None] * len(self.terms)
                maps[pos] = term
                out = out + self._factorwise(psi, maps)
        return State(out, self.tag)

    def evolve(self, t: float, psi: State) -> State:
        maps = [(v * np.exp(-1j * e * t)) @ v.conj().T for e, v in self.factor_eigh]
        return State(np.exp(-1j * self.constant * t) * self._factorwise(psi, maps), self.tag)

    def expectation(self, psi: State) -> float:
        return inner(psi, self.apply(psi)).real

    def shifted(self, e0: float) -> SeparableOperator:
        return SeparableOperator(self.spec, self.terms, self.constant - e0)

    def __add__(self, other: SeparableOperator) -> SeparableOperator:
        if other.spec != self.spec:
            raise ParameterError("basis mismatch")
        terms = tuple(
            a if b is None else b if a is None else a + b for a, b in zip(self.terms, other.terms)
        )
        return SeparableOperator(self.spec, terms, self.constant + other.constant)


def product_state(spec: TruncationSpec, vectors: Sequence[np.ndarray]) -> State:
    """Tensor product of per-factor vectors (factor order)."""
    if len(vectors) != len(spec.dims):
        raise ParameterError("one vector per factor required")
    return State(reduce(np.kron, [np.asarray(v, dtype=complex) for v in vectors]), spec.tag())


def with_sector(psi: State, spec: TruncationSpec, sector: int) -> State:
    """Embed a sector-space state into the full space with fermion slot ``sector``."""
    _same_basis(psi.tag, spec.tag())
    slot = np.zeros(2**spec.M)
    slot[sector] = 1.0
    return State(np.kron(psi.amplitudes, slot), spec.tag(True))


def sector_component(psi: State, spec: TruncationSpec, sector: int) -> State:
    _same_basis(psi.tag, spec.tag(True))
    return State(psi.amplitudes.reshape(spec.dim, 2**spec.M)[:, sector], spec.tag())
