"""Fermionic sector arithmetic, derived couplings, degeneracy counts and the
closed-form energies of the nanoparticle Hamiltonians.

Sectors are multi-indices [k] = k_1...k_M with k_1 the most significant bit of
the integer index.  Energies are in the units of the supplied frequencies
(hbar = 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterator, Sequence

import numpy as np

from .fock import ParameterError, sector_bits, sector_index

X_MODES = ("diagonal", "extradiagonal", "full")


@dataclass(frozen=True)
class SectorId:
    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if not bits or any(b not in (0, 1) for b in bits):
            raise ParameterError(f"invalid sector bits {self.bits!r}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_index(cls, index: int, M: int) -> SectorId:
        if not 0 <= index < 2**M:
            raise ParameterError(f"sector index {index} out of range for M={M}")
        return cls(sector_bits(index, M))

    @classmethod
    def parse(cls, label: str) -> SectorId:
        return cls(tuple(int(c) for c in label.strip("[]")))

    @property
    def M(self) -> int:
        return len(self.bits)

    @property
    def index(self) -> int:
        return sector_index(self.bits)

    @property
    def label(self) -> str:
        return "".join(map(str, self.bits))

    def __str__(self) -> str:
        return f"[{self.label}]"


def all_sectors(M: int) -> list[SectorId]:
    return [SectorId.from_index(i, M) for i in range(2**M)]


def as_sector(k, M: int) -> SectorId:
    if isinstance(k, SectorId):
        if k.M != M:
            raise ParameterError("sector has wrong number of levels")
        return k
    if isinstance(k, str):
        sec = SectorId.parse(k)
        if sec.M != M:
            raise ParameterError("sector has wrong number of levels")
        return sec
    if isinstance(k, (int, np.integer)):
        return SectorId.from_index(int(k), M)
    sec = SectorId(tuple(k))
    if sec.M != M:
        raise ParameterError("sector has wrong number of levels")
    return sec


@dataclass(frozen=True)
class ModelParams:
    """Physical constants.  ``g_extra[i, a, b]`` is g_{i,a+1,b+1} (0-based axes).

    ``x_mode`` selects the c.m. coupling blocks of the general model: the
    sector-diagonal one (``"diagonal"``), the level-changing one
    (``"extradiagonal"``) or both (``"full"``).
    """

    N: int
    M: int
    omega: tuple[float, ...]
    epsilon: tuple[float, ...]
    g_diag: tuple[float, ...] | None = None
    g_extra: np.ndarray | None = field(default=None, compare=False)
    Omega: float | None = None
    g_prime: float = 0.0
    x_mode: str = "full"

    def __post_init__(self):
        if self.N < 1 or self.M < 1:
            raise ParameterError("N and M must be >= 1")
        omega = tuple(float(w) for w in np.broadcast_to(np.asarray(self.omega, float), (self.N,)))
        if any(not np.isfinite(w) or w <= 0 for w in omega):
            raise ParameterError("all omega must be finite and > 0")
        object.__setattr__(self, "omega", omega)
        eps = tuple(float(e) for e in self.epsilon)
        if len(eps) != self.M:
            raise ParameterError(f"epsilon needs {self.M} entries")
        object.__setattr__(self, "epsilon", eps)
        gd = tuple(float(g) for g in (self.g_diag if self.g_diag is not None else (0.0,) * self.M))
        if len(gd) != self.M:
            raise ParameterError(f"g_diag needs {self.M} entries")
        object.__setattr__(self, "g_diag", gd)
        if self.g_extra is None:
            ge = np.zeros((self.N, self.M, self.M))
        else:
            ge = np.array(self.g_extra, dtype=float)
        if ge.shape != (self.N, self.M, self.M):
            raise ParameterError(f"g_extra must have shape {(self.N, self.M, self.M)}")
        if not np.allclose(ge, ge.transpose(0, 2, 1), rtol=0, atol=1e-15):
            raise ParameterError("g_extra must be symmetric in its level indices (Hermiticity)")
        ge.setflags(write=False)
        object.__setattr__(self, "g_extra", ge)
        if self.Omega is not None:
            if not np.isfinite(self.Omega) or self.Omega <= 0:
                raise ParameterError("Omega must be > 0")
            object.__setattr__(self, "Omega", float(self.Omega))
        elif self.g_prime:
            raise ParameterError("g_prime given without a c.m. frequency Omega")
        object.__setattr__(self, "g_prime", float(self.g_prime))
        if self.x_mode not in X_MODES:
            raise ParameterError(f"x_mode must be one of {X_MODES}")

    @property
    def has_cm(self) -> bool:
        return self.Omega is not None

    @property
    def equal_omega(self) -> bool:
        return len(set(self.omega)) == 1

    @property
    def eps_NM(self) -> int:
        """Number of nonzero g_{ijl}, j != l, at fixed i; must not depend on i."""
        off = ~np.eye(self.M, dtype=bool)
        counts = {int(np.count_nonzero(self.g_extra[i][off])) for i in range(self.N)}
        if len(counts) != 1:
            raise ParameterError(f"extradiagonal coupling count depends on the mode: {sorted(counts)}")
        return counts.pop()


@dataclass(frozen=True)
class SectorDerived:
    sector: SectorId
    eps_k: float
    g_k: float
    kappa_k: float
    alpha_k: int
    lambda_flag: int
    f_flag: int
    g_i_k: tuple[float, ...]
    eps_NM: int


def kappa_jl(bits: Sequence[int], j: int, l: int) -> int:
    """(1 - delta_{k_j,1})(delta_{k_j,0} - delta_{k_l,0}); levels from 1."""
    kj, kl = bits[j - 1], bits[l - 1]
    return (1 - (kj == 1)) * ((kj == 0) - (kl == 0))


def kappa_branch(bits: Sequence[int]) -> float:
    """The two-branch kappa definition evaluated literally."""
    if 0 not in bits:
        return float(len(bits))
    return 0.5 * sum(1 - (b == 0) + (b == 1) for b in bits)


def sector_scalars(params: ModelParams, k) -> SectorDerived:
    sec = as_sector(k, params.M)
    bits = sec.bits
    M = params.M
    eps_k = math.fsum(b * e for b, e in zip(bits, params.epsilon))
    g_k = math.fsum(b * g for b, g in zip(bits, params.g_diag))
    lam = int(all(bits[j] == bits[j + 1] for j in range(M - 1)))
    g_i_k = tuple(
        math.fsum(
            params.g_extra[i, j - 1, l - 1] * kappa_jl(bits, j, l)
            for j in range(1, M + 1)
            for l in range(1, M + 1)
            if j != l
        )
        for i in range(params.N)
    )
    return SectorDerived(
        sector=sec,
        eps_k=eps_k,
        g_k=g_k,
        kappa_k=kappa_branch(bits),
        alpha_k=1 - lam,
        lambda_flag=lam,
        f_flag=1 - lam,
        g_i_k=g_i_k,
        eps_NM=params.eps_NM,
    )


# --- degeneracy -----------------------------------------------------------------------

_INT64_MAX = 2**63 - 1


def degeneracy(n: int, N: int) -> int:
    """C(n+N-1, n): number of ways to spread n quanta over N modes."""
    if n < 0 or N < 1:
        raise ParameterError("degeneracy needs n >= 0 and N >= 1")
    value = math.comb(n + N - 1, n)
    if n + N - 1 > 62 and value > _INT64_MAX:
        raise OverflowError(f"d({n}) for N={N} exceeds 64-bit range")
    return value


def compositions(n: int, N: int) -> list[tuple[int, ...]]:
    """Ordered compositions of n into N non-negative parts, lexicographic.

    For N = 2 the j-th entry (from 1) is (j-1, n-j+1).
    """
    if N == 1:
        return [(n,)]
    return [(first,) + rest for first in range(n + 1) for rest in compositions(n - first, N - 1)]


def degenerate_labels(n: int, N: int, family: str = "lex") -> list[tuple[int, ...]]:
    """Occupation tuples attached to level ``n`` in a degenerate family.

    ``"lex"`` enumerates all d(n) compositions.  The N = 3 families ``"pair12"``,
    ``"pair13"`` and ``"pair23"`` put the level on two modes only:
    (j-1, n-j+1, 0), (j-1, 0, n-j+1) and (0, j-1, n-j+1), j = 1..n+1.
    """
    if family == "lex":
        return compositions(n, N)
    if N != 3:
        raise ParameterError(f"family {family!r} is only defined for N = 3")
    js = range(1, n + 2)
    if family == "pair12":
        return [(j - 1, n - j + 1, 0) for j in js]
    if family == "pair13":
        return [(j - 1, 0, n - j + 1) for j in js]
    if family == "pair23":
        return [(0, j - 1, n - j + 1) for j in js]
    raise ParameterError(f"unknown degenerate family {family!r}")


def iter_occupations(cutoffs: Sequence[int]) -> Iterator[tuple[int, ...]]:
    return product(*(range(c + 1) for c in cutoffs))


# --- energies ---------------------------------------------------------------------------


def _occupations(params: ModelParams, n) -> tuple[np.ndarray, bool]:
    """Occupation vector, or a total quantum number for equal frequencies."""
    if isinstance(n, (int, np.integer)):
        if not params.equal_omega:
            raise ParameterError("a total quantum number needs equal mode frequencies")
        if n < 0:
            raise ParameterError("quantum numbers must be >= 0")
        return np.array([int(n)]), True
    occ = np.asarray(n, dtype=int)
    if occ.shape != (params.N,) or np.any(occ < 0):
        raise ParameterError(f"need {params.N} non-negative occupations")
    return occ, False


def _cm(params: ModelParams, m: int) -> float:
    if not params.has_cm:
        if m:
            raise ParameterError("c.m. quantum number given without a c.m. mode")
        return 0.0
    return params.Omega * m


def _free_bosons(params: ModelParams, occ: np.ndarray, degenerate: bool) -> float:
    if degenerate:
        return params.omega[0] * int(occ[0])
    return float(np.dot(params.omega, occ))


def energy_free(params: ModelParams, k, m: int = 0, n=None) -> float:
    d = sector_scalars(params, k)
    occ, deg = _occupations(params, n if n is not None else (0,) * params.N)
    return _cm(params, m) + _free_bosons(params, occ, deg) + d.eps_k


def energy_diag(params: ModelParams, k, n) -> float:
    """Sum_l omega_l n_l + eps_[k] - g_[k]^2 Sum_l 1/omega_l.

    An integer ``n`` selects the equal-frequency form omega n + eps - N g^2/omega.
    """
    d = sector_scalars(params, k)
    occ, deg = _occupations(params, n)
    if deg:
        w = params.omega[0]
        return w * int(occ[0]) + d.eps_k - params.N * d.g_k**2 / w
    return _free_bosons(params, occ, False) + d.eps_k - d.g_k**2 * sum(1 / w for w in params.omega)


def energy_cm_diag(params: ModelParams, k, m: int, n) -> float:
    """energy_diag plus the c.m. part Omega m - (g' kappa_[k])^2 / Omega."""
    if not params.has_cm:
        raise ParameterError("c.m. energies need Omega")
    d = sector_scalars(params, k)
    gk = params.g_prime * d.kappa_k
    return (params.Omega * m - gk**2 / params.Omega) + energy_diag(params, k, n)


def ground_energy(params: ModelParams, k, variant: str) -> float:
    """E^[k]_0 of a sector-diagonal variant (used by the shifted Hamiltonians)."""
    zero = (0,) * params.N
    if variant == "diag":
        return energy_diag(params, k, zero)
    if variant == "cm_diag":
        return energy_cm_diag(params, k, 0, zero)
    raise ParameterError(f"no sector ground energy for variant {variant!r}")


@dataclass(frozen=True)
class ExtradiagPrediction:
    """Both closed forms of the extradiagonal spectrum (not exact eigenvalues)."""

    eig_form: float
    alpha_form: float
    alpha_k: int
    eps_NM: int


def effective_eps_NM(params: ModelParams) -> int:
    """eps_NM, with the value 1 standing in when there are no level-changing couplings."""
    off = ~np.eye(params.M, dtype=bool)
    if np.any(params.g_extra[:, ~off] != 0):
        raise ParameterError("the extradiagonal model has no same-level couplings g_{ijj}")
    eps = params.eps_NM
    if eps == 0:
        # no level-changing couplings: the lambda terms reduce to the c.m. shift
        return 1
    return eps


def _lambda(params, d, occ, deg, scale: float) -> float:
    """lambda_{eps_NM}; ``scale`` = 1 for the extradiagonal model, 2 for the general one.

    In the general model every free frequency is halved while the couplings
    keep their value.
    """
    eps = effective_eps_NM(params)
    if deg:
        w = params.omega[0] / scale
        bos = (eps - 1) * w * int(occ[0]) - sum(g * g for g in d.g_i_k) / (eps * w)
    else:
        bos = math.fsum(
            (eps - 1) * (w / scale) * n - g * g / (eps * w / scale)
            for w, n, g in zip(params.omega, occ, d.g_i_k)
        )
    cm = params.g_prime**2 / (params.Omega / scale) if params.has_cm else 0.0
    return bos - cm


def energy_extradiag(params: ModelParams, k, m: int, n) -> ExtradiagPrediction:
    d = sector_scalars(params, k)
    occ, deg = _occupations(params, n)
    eps = effective_eps_NM(params)
    cm = _cm(params, m) - (params.g_prime**2 / params.Omega if params.has_cm else 0.0)
    if deg:
        w = params.omega[0]
        bos = eps * w * int(occ[0]) - sum(g * g for g in d.g_i_k) / (eps * w)
    else:
        bos = math.fsum(eps * w * nn - g * g / (eps * w) for w, nn, g in zip(params.omega, occ, d.g_i_k))
    alpha_form = _cm(params, m) + _free_bosons(params, occ, deg) + d.eps_k + d.alpha_k * _lambda(params, d, occ, deg, 1.0)
    return ExtradiagPrediction(cm + bos, alpha_form, d.alpha_k, params.eps_NM)


def extradiag_components(params: ModelParams, k, m: int, n) -> tuple[float, float]:
    """Split of the alpha-form into its boson-fermion and c.m.-fermion parts.

    Returns (E_bf, E_cmf) with E_bf + E_cmf equal to the alpha-form energy.
    """
    d = sector_scalars(params, k)
    occ, deg = _occupations(params, n)
    lam = _lambda(params, d, occ, deg, 1.0)
    cm_shift = params.g_prime**2 / params.Omega if params.has_cm else 0.0
    e_cmf = _cm(params, m) - d.alpha_k * cm_shift
    e_bf = _free_bosons(params, occ, deg) + d.eps_k + d.alpha_k * (lam + cm_shift)
    return e_bf, e_cmf


@dataclass(frozen=True)
class GeneralPrediction:
    E1: float
    E2: float

    @property
    def total(self) -> float:
        return self.E1 + self.E2


def energy_general(params: ModelParams, k, m: int, n) -> GeneralPrediction:
    """E1 (sector-diagonal part with halved free terms) + E2 (level-changing part).

    ``x_mode`` drops the c.m. shift of the part whose c.m. coupling is absent.
    """
    d = sector_scalars(params, k)
    occ, deg = _occupations(params, n)
    use_diag_x = params.x_mode in ("diagonal", "full")
    use_extra_x = params.x_mode in ("extradiagonal", "full")
    cm1 = 0.0
    if params.has_cm:
        cm1 = params.Omega * m / 2
        if use_diag_x:
            cm1 -= 2 * (params.g_prime * d.kappa_k) ** 2 / params.Omega
    elif m:
        raise ParameterError("c.m. quantum number given without a c.m. mode")
    if deg:
        w = params.omega[0]
        bos1 = w * int(occ[0]) / 2 - params.N * 2 * d.g_k**2 / w
    else:
        bos1 = math.fsum(w * nn / 2 - 2 * d.g_k**2 / w for w, nn in zip(params.omega, occ))
    e1 = cm1 + bos1 + d.eps_k / 2
    if use_extra_x:
        lam = _lambda(params, d, occ, deg, 2.0)
    else:
        lam = _lambda(replace_params(params, g_prime=0.0), d, occ, deg, 2.0)
    e2 = (_cm(params, m) + _free_bosons(params, occ, deg) + d.eps_k) / 2 + d.alpha_k * lam
    return GeneralPrediction(e1, e2)


def _fields(params: ModelParams) -> dict:
    return {
        "N": params.N,
        "M": params.M,
        "omega": params.omega,
        "epsilon": params.epsilon,
        "g_diag": params.g_diag,
        "g_extra": params.g_extra,
        "Omega": params.Omega,
        "g_prime": params.g_prime,
        "x_mode": params.x_mode,
    }


def replace_params(params: ModelParams, **changes) -> ModelParams:
    return ModelParams(**{**_fields(params), **changes})


def average_frequency(n: Sequence[int], omega: Sequence[float]) -> float:
    """Omega_N = Sum omega_l n_l / Sum n_l."""
    occ = np.asarray(n, dtype=float)
    w = np.asarray(omega, dtype=float)
    if occ.shape != w.shape:
        raise ParameterError("occupations and frequencies differ in length")
    total = occ.sum()
    if total <= 0:
        raise ParameterError("average frequency is undefined when every occupation is zero")
    return float(np.dot(w, occ) / total)
