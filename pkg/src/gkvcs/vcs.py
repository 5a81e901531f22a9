"""Gazeau-Klauder coherent states and vector coherent states on the truncated space.

Every family is a superposition of analytic eigenvectors (displaced number
states).  A state is described by independent *factors*: a Poisson factor
sums one quantum number (c.m. or one boson mode) with weights
J^{n/2} e^{s i gamma n} / sqrt(n!), and a degenerate factor sums the level
n and the label j = 1..d(n) of all boson modes jointly, with the extra phase
e^{-i j theta} and the weight 1/sqrt(n! d(n)).  A factor whose quantum number
is held fixed contributes a single label with the same weight, which gives the
two-sector families (fixed [n] or fixed m) whose norm is only 1 after summing
over the fixed label.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import reduce

import numpy as np
from scipy.special import gammaln

from . import assembly, model
from .fock import ContractError, ParameterError, State, TruncationSpec, displaced_columns, with_sector
from .model import ModelParams


class TailBoundError(ParameterError):
    """Requested state does not fit the truncation within the tail tolerance."""

    def __init__(self, message: str, required_cutoff: int):
        super().__init__(message)
        self.required_cutoff = required_cutoff


@dataclass(frozen=True)
class GKParams:
    """Coherent-state labels of one sector.

    ``J``/``gamma`` hold one entry per boson mode (a single entry for the
    degenerate families).  ``J_prime``/``gamma_prime`` label the c.m. mode.
    """

    J: tuple[float, ...]
    gamma: tuple[float, ...]
    theta: float = 0.0
    J_prime: float | None = None
    gamma_prime: float | None = None
    sector: int = 0

    def __post_init__(self):
        J = tuple(float(x) for x in np.atleast_1d(self.J))
        gamma = tuple(float(x) for x in np.atleast_1d(self.gamma))
        if len(gamma) == 1 and len(J) > 1:
            gamma = gamma * len(J)
        if len(J) != len(gamma):
            raise ParameterError("J and gamma need the same length")
        if any(not np.isfinite(x) or x < 0 for x in J):
            raise ParameterError("J must be finite and >= 0")
        if not all(np.isfinite(gamma)) or not np.isfinite(self.theta):
            raise ParameterError("angles must be finite")
        if self.J_prime is not None and (not np.isfinite(self.J_prime) or self.J_prime < 0):
            raise ParameterError("J_prime must be finite and >= 0")
        if self.gamma_prime is not None and not np.isfinite(self.gamma_prime):
            raise ParameterError("gamma_prime must be finite")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "gamma", gamma)

    def d_k(self, M: int) -> np.ndarray:
        """Sector selector: unit entry at the active sector."""
        out = np.zeros(2**M)
        out[self.sector] = 1.0
        return out

    @property
    def beta_n(self) -> np.ndarray:
        """Line of ones over the boson modes."""
        return np.ones(len(self.J))

    def replace(self, **changes) -> GKParams:
        return replace(self, **changes)


# --- normalization and tails -------------------------------------------------------------


def normalization(J) -> float:
    """N(J) = e^J; for several modes the product of the per-mode values.

    The degenerate families share it because their weights are 1/(n! d(n)).
    """
    return float(np.exp(np.sum(np.asarray(J, dtype=float))))


def poisson_tail(J: float, n_max: int) -> float:
    """Upper bound on e^{-J} Sum_{n > n_max} J^n / n!.

    First omitted term times the geometric factor 1/(1 - J/(n_max+2)); 1 when
    that factor is not available.
    """
    if J == 0:
        return 0.0
    if J >= n_max + 2:
        return 1.0
    log_first = -J + (n_max + 1) * math.log(J) - math.lgamma(n_max + 2)
    return min(1.0, math.exp(log_first) / (1 - J / (n_max + 2)))


def required_cutoff(J: float, bound: float) -> int:
    n = 0
    while poisson_tail(J, n) > bound:
        n += 1
    return n


def default_cutoff(J: float) -> int:
    """ceil(J + 10 sqrt(J)) + 10."""
    return math.ceil(J + 10 * math.sqrt(J)) + 10


def radial_weights(n: np.ndarray, J) -> np.ndarray:
    """J^{n/2} / sqrt(n!) for arrays of n and J (broadcasting), with 0^0 = 1."""
    n = np.asarray(n, dtype=float)
    J = np.asarray(J, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = 0.5 * n * np.log(J) - 0.5 * gammaln(n + 1)
        out = np.exp(logs)
    zero = J == 0
    if np.any(zero):
        out = np.where(zero, (n == 0).astype(float), out)
    return out


# --- factors ------------------------------------------------------------------------------


@dataclass(frozen=True)
class Factor:
    """One independent summation of a coherent state.

    ``modes`` lists the physical modes ("cm" or 1..N) it occupies; ``levels`` the
    quantum numbers n it covers (one value for a fixed label).  ``sign`` is the
    sign s of the e^{s i gamma n} phase.
    """

    kind: str
    modes: tuple
    levels: tuple[int, ...]
    J: float
    gamma: float
    sign: int = -1
    theta: float = 0.0
    label_family: str = "lex"

    @property
    def summed(self) -> bool:
        return len(self.levels) > 1

    def labels(self) -> tuple[list[int], list[int], list[tuple[int, ...]]]:
        """(n, j, occupations) per label; j counts from 1."""
        ns, js, occs = [], [], []
        for n in self.levels:
            if self.kind == "poisson":
                ns.append(n), js.append(1), occs.append((n,))
            else:
                for j, occ in enumerate(model.degenerate_labels(n, len(self.modes), self.label_family), start=1):
                    ns.append(n), js.append(j), occs.append(occ)
        return ns, js, occs

    def degeneracies(self) -> np.ndarray:
        ns, _, _ = self.labels()
        if self.kind == "poisson":
            return np.ones(len(ns))
        counts = {n: len(model.degenerate_labels(n, len(self.modes), self.label_family)) for n in self.levels}
        return np.array([counts[n] for n in ns], dtype=float)

    def coefficients(self, J=None, gamma=None, theta=None, normalized: bool = True) -> np.ndarray:
        """Label amplitudes; J, gamma, theta may be arrays of nodes (last axis = labels)."""
        J = self.J if J is None else J
        gamma = self.gamma if gamma is None else gamma
        theta = self.theta if theta is None else theta
        ns, js, _ = self.labels()
        n = np.asarray(ns, dtype=float)
        J = np.asarray(J, dtype=float)[..., None]
        gamma = np.asarray(gamma, dtype=float)[..., None]
        amp = radial_weights(n, J) * np.exp(1j * self.sign * gamma * n)
        if self.kind == "degenerate":
            amp = amp * np.exp(-1j * np.asarray(theta, dtype=float)[..., None] * np.asarray(js)) / np.sqrt(self.degeneracies())
        if normalized:
            amp = amp * np.exp(-J / 2)
        return amp

    def tail(self) -> float:
        """Poisson mass beyond the covered levels (zero for a fixed label)."""
        return poisson_tail(self.J, max(self.levels)) if self.summed else 0.0


# --- family registry ----------------------------------------------------------------------


@dataclass(frozen=True)
class FamilySpec:
    variant: str
    degenerate: bool
    cm: str | None  # None, "summed", "fixed"
    bosons: str  # "summed" or "fixed"
    cm_sign: int = -1
    evolved: tuple[str, ...] = ("bosons",)
    action: tuple[str, ...] = ("bosons",)
    fermion_slot: bool = False
    single_mode: bool = False


FAMILIES: dict[str, FamilySpec] = {
    "single": FamilySpec("diag", False, None, "summed", single_mode=True),
    "multimode": FamilySpec("diag", False, None, "summed"),
    "vcs_vector": FamilySpec("diag", False, None, "summed", fermion_slot=True),
    "degenerate": FamilySpec("diag", True, None, "summed"),
    "cm_fixed_n": FamilySpec("cm_diag", False, "summed", "fixed", +1, ("cm",), ("cm",)),
    "cm_fixed_m": FamilySpec("cm_diag", False, "fixed", "summed", +1, ("bosons",), ("bosons",)),
    "cm_deg_fixed_n": FamilySpec("cm_diag", True, "summed", "fixed", +1, ("cm",), ("cm",)),
    "cm_deg_fixed_m": FamilySpec("cm_diag", True, "fixed", "summed", +1, ("bosons",), ("bosons",)),
    "cm_multidim": FamilySpec("cm_diag", False, "summed", "summed", -1, ("cm", "bosons"), ("cm", "bosons")),
    "cm_deg_multidim": FamilySpec("cm_diag", True, "summed", "summed", -1, ("cm", "bosons"), ("cm", "bosons")),
    "extra_fixed_n": FamilySpec("extradiag", False, "summed", "fixed", +1, ("cm",), ("cm",)),
    "extra_fixed_m": FamilySpec("extradiag", False, "fixed", "summed", +1, ("bosons",), ("bosons",)),
    "extra_deg_fixed_n": FamilySpec("extradiag", True, "summed", "fixed", +1, ("cm",), ("cm",)),
    "extra_deg_fixed_m": FamilySpec("extradiag", True, "fixed", "summed", +1, ("bosons",), ("bosons",)),
}

TWO_SECTOR = ("cm_fixed_n", "cm_fixed_m", "cm_deg_fixed_n", "cm_deg_fixed_m", "extra_fixed_n", "extra_fixed_m", "extra_deg_fixed_n", "extra_deg_fixed_m")


def family_spec(family: str) -> FamilySpec:
    try:
        return FAMILIES[family]
    except KeyError:
        raise ParameterError(f"unknown family {family!r}; expected one of {sorted(FAMILIES)}") from None


def fixed_index_kind(family: str) -> str | None:
    """Which label a two-sector family holds fixed: "n" (bosons) or "m" (c.m.)."""
    fs = family_spec(family)
    if fs.bosons == "fixed":
        return "n"
    if fs.cm == "fixed":
        return "m"
    return None


def effective_rates(params: ModelParams, variant: str, k) -> tuple[float | None, tuple[float, ...]]:
    """Level spacings (c.m., per boson mode) of the shifted Hamiltonian."""
    cm = params.Omega if params.has_cm else None
    if variant in ("diag", "cm_diag"):
        return cm, params.omega
    if variant == "extradiag":
        d = model.sector_scalars(params, k)
        eps = model.effective_eps_NM(params)
        return cm, tuple(w * (1 + d.alpha_k * (eps - 1)) for w in params.omega)
    raise ParameterError(f"no coherent states for variant {variant!r}")


# --- states -------------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoherentState:
    family: str
    variant: str
    params: GKParams
    factors: tuple[Factor, ...]
    label_tensor: np.ndarray = field(repr=False)
    state: State = field(repr=False)
    tail: float
    fermions: bool

    def norm2(self) -> float:
        return float(np.vdot(self.state.amplitudes, self.state.amplitudes).real)


def _factors(
    family: str,
    model_params: ModelParams,
    spec: TruncationSpec,
    gk: GKParams,
    fixed=None,
    mode: int = 1,
    label_family: str = "lex",
) -> tuple[Factor, ...]:
    fs = family_spec(family)
    N = model_params.N
    out: list[Factor] = []
    if fs.cm is not None:
        if not spec.has_cm or gk.J_prime is None or gk.gamma_prime is None:
            raise ParameterError(f"family {family!r} needs a c.m. mode and J_prime, gamma_prime")
        levels = tuple(range(spec.cm_cutoff + 1)) if fs.cm == "summed" else (_fixed_int(fixed, "m"),)
        if max(levels) > spec.cm_cutoff:
            raise ParameterError("fixed c.m. label outside the cutoff")
        out.append(Factor("poisson", ("cm",), levels, gk.J_prime, gk.gamma_prime, fs.cm_sign))
    if fs.degenerate:
        if not model_params.equal_omega:
            raise ContractError("degenerate families need equal boson frequencies")
        if len(gk.J) != 1:
            raise ParameterError("degenerate families take a single J and gamma")
        if fs.bosons == "summed":
            levels = tuple(range(min(spec.boson_cutoffs) + 1))
        else:
            levels = (_fixed_int(fixed, "n"),)
            if levels[0] > min(spec.boson_cutoffs):
                raise ParameterError("fixed level outside the cutoff")
        fam = label_family if (N == 3 or label_family == "lex") else "lex"
        out.append(Factor("degenerate", tuple(range(1, N + 1)), levels, gk.J[0], gk.gamma[0], -1, gk.theta, fam))
        return tuple(out)
    if fs.single_mode:
        if len(gk.J) != 1:
            raise ParameterError("the single-mode family takes one J and gamma")
        if not 1 <= mode <= N:
            raise ParameterError(f"mode {mode} outside 1..{N}")
        c = spec.boson_cutoffs[mode - 1]
        out.append(Factor("poisson", (mode,), tuple(range(c + 1)), gk.J[0], gk.gamma[0], -1))
        return tuple(out)
    if len(gk.J) != N:
        raise ParameterError(f"family {family!r} needs {N} J values")
    occ = None
    if fs.bosons == "fixed":
        if fixed is None:
            raise ParameterError(f"family {family!r} needs fixed occupations")
        occ = tuple(int(x) for x in np.atleast_1d(fixed))
        if len(occ) != N:
            raise ParameterError(f"fixed occupations need {N} entries")
    for l, c in enumerate(spec.boson_cutoffs, start=1):
        if occ is None:
            levels = tuple(range(c + 1))
        else:
            if not 0 <= occ[l - 1] <= c:
                raise ParameterError("fixed occupation outside the cutoff")
            levels = (occ[l - 1],)
        out.append(Factor("poisson", (l,), levels, gk.J[l - 1], gk.gamma[l - 1], -1))
    return tuple(out)


def _fixed_int(fixed, name: str) -> int:
    if fixed is None or np.ndim(fixed) != 0:
        raise ParameterError(f"family needs a fixed integer {name}")
    if int(fixed) < 0:
        raise ParameterError(f"fixed {name} must be >= 0")
    return int(fixed)


def label_tensor(spec: TruncationSpec, factors: tuple[Factor, ...], coeffs: list[np.ndarray] | None = None) -> np.ndarray:
    """Amplitudes on the occupation grid (modes not covered by a factor sit in 0)."""
    tens = np.zeros(spec.dims, dtype=complex)
    # Build as an outer product over factors, each scattered onto its own axes.
    pieces, axes = [], []
    for f, c in zip(factors, coeffs if coeffs is not None else [f.coefficients() for f in factors]):
        pos = [spec.factor(m) for m in f.modes]
        sub = np.zeros([spec.dims[p] for p in pos], dtype=complex)
        for occ, val in zip(f.labels()[2], c):
            sub[occ] += val
        pieces.append(sub)
        axes.extend(pos)
    covered = set(axes)
    for p in range(len(spec.dims)):
        if p not in covered:
            e0 = np.zeros(spec.dims[p])
            e0[0] = 1.0
            pieces.append(e0)
            axes.append(p)
    outer = reduce(np.multiply.outer, pieces) if pieces else np.ones(())
    order = np.argsort(axes)
    tens[...] = np.transpose(outer, order) if outer.ndim else outer
    return tens


def basis_columns(model_params: ModelParams, spec: TruncationSpec, variant: str, k) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per-factor displaced columns and their leakage for the variant's eigenvectors."""
    cm_beta, betas = assembly.displacement_amplitudes(model_params, variant, k)
    cols, leaks = [], []
    if spec.has_cm:
        c, lk = displaced_columns(cm_beta or 0.0, spec.cm_cutoff)
        cols.append(c), leaks.append(lk)
    for beta, cut in zip(betas, spec.boson_cutoffs):
        c, lk = displaced_columns(beta, cut)
        cols.append(c), leaks.append(lk)
    return cols, leaks


def to_physical(tens: np.ndarray, cols: list[np.ndarray]) -> np.ndarray:
    out = tens
    for pos, c in enumerate(cols):
        out = np.moveaxis(np.tensordot(c, out, axes=([1], [pos])), 0, pos)
    return out.reshape(-1)


def _leak_delta(tens: np.ndarray, leaks: list[np.ndarray]) -> float:
    keep = reduce(np.multiply.outer, [1 - lk for lk in leaks])
    return float(np.sum(np.abs(tens) * np.sqrt(np.clip(1 - keep, 0, None))))


def build_state(
    family: str,
    model_params: ModelParams,
    spec: TruncationSpec,
    gk: GKParams,
    fixed=None,
    mode: int = 1,
    label_family: str = "lex",
    max_tail: float | None = 1e-6,
) -> CoherentState:
    """Construct any registered family.

    ``fixed`` is the held label of a two-sector family (occupations [n], a
    level n for the degenerate ones, or m).  Raises :class:`TailBoundError`
    when the truncation tail exceeds ``max_tail``.
    """
    fs = family_spec(family)
    if spec.N != model_params.N or spec.M != model_params.M:
        raise ParameterError("truncation and model disagree on N or M")
    sec = model.as_sector(gk.sector, model_params.M)
    if fs.variant == "cm_diag" and not model_params.has_cm:
        raise ParameterError(f"family {family!r} needs the c.m. model")
    if fs.variant == "diag" and spec.has_cm:
        raise ParameterError(f"family {family!r} lives on the bosonic space (no c.m. cutoff)")
    factors = _factors(family, model_params, spec, gk, fixed, mode, label_family)
    tens = label_tensor(spec, factors)
    cols, leaks = basis_columns(model_params, spec, fs.variant, sec)
    delta = _leak_delta(tens, leaks)
    tail = sum(f.tail() for f in factors) + delta**2
    if max_tail is not None and tail > max_tail:
        worst = max(factors, key=lambda f: f.tail())
        need = required_cutoff(worst.J, max_tail / max(1, len(factors)))
        raise TailBoundError(
            f"{family}: truncation tail {tail:.3g} exceeds {max_tail:.3g}; cutoff >= {need} needed for J={worst.J}",
            need,
        )
    amp = to_physical(tens, cols)
    st = State(amp, spec.tag())
    fermions = fs.fermion_slot or fs.variant == "extradiag"
    if fs.variant == "extradiag":
        st = State(np.kron(amp, assembly.psi_orbit(sec, model_params.M).vector), spec.tag(True))
    elif fs.fermion_slot:
        st = with_sector(st, spec, sec.index)
    return CoherentState(family, fs.variant, gk, factors, tens, st, tail, fermions)


def gk_single(model_params, spec, k, mode: int, J: float, gamma: float, **kw) -> CoherentState:
    """|J, gamma> on boson mode ``mode`` of sector k; other modes in the displaced vacuum."""
    return build_state("single", model_params, spec, GKParams((J,), (gamma,), sector=_idx(k, model_params)), mode=mode, **kw)


def gk_multimode(model_params, spec, gk: GKParams, **kw) -> CoherentState:
    return build_state("multimode", model_params, spec, gk, **kw)


def vcs_vector(model_params, spec, gk: GKParams, **kw) -> CoherentState:
    """The multimode state placed in fermion slot [k] (zeros in the other slots)."""
    return build_state("vcs_vector", model_params, spec, gk, **kw)


def gk_degenerate(model_params, spec, gk: GKParams, label_family: str = "lex", **kw) -> CoherentState:
    return build_state("degenerate", model_params, spec, gk, label_family=label_family, **kw)


def vcs_two_sector(family: str, model_params, spec, gk: GKParams, fixed, **kw) -> CoherentState:
    if family not in TWO_SECTOR:
        raise ParameterError(f"{family!r} is not a two-sector family")
    return build_state(family, model_params, spec, gk, fixed=fixed, **kw)


def vcs_multidim(model_params, spec, gk: GKParams, degenerate: bool = False, **kw) -> CoherentState:
    return build_state("cm_deg_multidim" if degenerate else "cm_multidim", model_params, spec, gk, **kw)


def fixed_labels(family: str, model_params: ModelParams, spec: TruncationSpec) -> list:
    """All values of the held label that fit the truncation."""
    kind = fixed_index_kind(family)
    if kind is None:
        return [None]
    if kind == "m":
        return list(range(spec.cm_cutoff + 1))
    if family_spec(family).degenerate:
        return list(range(min(spec.boson_cutoffs) + 1))
    return list(model.iter_occupations(spec.boson_cutoffs))


def _idx(k, params: ModelParams) -> int:
    return model.as_sector(k, params.M).index


def shift(
    gk: GKParams, t: float, family: str, model_params: ModelParams, convention: str = "uniform", mode: int = 1
) -> GKParams:
    """Labels predicted for e^{-iH't}|CS(gk)>.

    ``"uniform"`` adds rate * t to every evolved angle (gamma' + Omega t,
    gamma_l + omega_l t).  ``"family"`` uses the sign each family's phase
    requires: an angle entering as e^{+i m gamma'} moves by -Omega t.
    ``mode`` selects the boson mode of the single-mode family.
    """
    if convention not in ("uniform", "family"):
        raise ParameterError("convention must be 'uniform' or 'family'")
    fs = family_spec(family)
    cm_rate, rates = effective_rates(model_params, fs.variant, gk.sector)
    changes = {}
    if "cm" in fs.evolved and fs.cm is not None and gk.gamma_prime is not None:
        sign = 1 if convention == "uniform" else -fs.cm_sign
        changes["gamma_prime"] = gk.gamma_prime + sign * cm_rate * t
    if "bosons" in fs.evolved:
        if fs.degenerate:
            rate_list = (rates[0],)
        elif fs.single_mode:
            rate_list = (rates[mode - 1],)
        else:
            rate_list = rates
        changes["gamma"] = tuple(g + r * t for g, r in zip(gk.gamma, rate_list))
    return gk.replace(**changes)


def label_energies(cs: CoherentState, model_params: ModelParams, spec: TruncationSpec, parts: tuple[str, ...]) -> np.ndarray:
    """Shifted energies on the occupation grid, restricted to the chosen parts."""
    cm_rate, rates = effective_rates(model_params, cs.variant, cs.params.sector)
    grids = []
    if spec.has_cm:
        grids.append((cm_rate if "cm" in parts else 0.0) * np.arange(spec.cm_cutoff + 1))
    for r, c in zip(rates, spec.boson_cutoffs):
        grids.append((r if "bosons" in parts else 0.0) * np.arange(c + 1))
    return reduce(np.add.outer, grids)
