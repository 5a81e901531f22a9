"""Explicit Hamiltonian matrices, displaced eigenvectors and the numeric
diagonalization oracle.

Sector-diagonal models are stored per sector as Kronecker sums
(:class:`~gkvcs.fock.SeparableOperator`); level-changing models are stored as
one dense matrix over ``c.m. x bosons x fermion``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Mapping

import numpy as np

from . import model
from .fock import (
    ContractError,
    Operator,
    ParameterError,
    SeparableOperator,
    State,
    TruncationSpec,
    displaced_columns,
    fermion_hop_matrix,
    hermiticity_defect,
    number_diag,
    quadrature,
)
from .model import ModelParams, SectorId

VARIANTS = ("diag", "cm_diag", "extradiag", "general")


@dataclass(frozen=True, eq=False)
class HamiltonianBundle:
    """Assembled Hamiltonian of one variant.

    ``sectors`` maps sector index to H_[k] for the sector-diagonal variants and
    ``shifted`` to H'_[k] = H_[k] - E^[k]_0.  ``full`` is the matrix over the
    fermionic factor for the level-changing variants.  ``components`` holds the
    named parts (H1/H2 and the boson/c.m. splits).
    """

    variant: str
    params: ModelParams
    spec: TruncationSpec
    sectors: Mapping[int, SeparableOperator] = field(default_factory=dict)
    shifted: Mapping[int, SeparableOperator] = field(default_factory=dict)
    ground_energies: Mapping[int, float] = field(default_factory=dict)
    full: Operator | None = None
    components: Mapping[str, object] = field(default_factory=dict)

    def sector(self, k) -> SeparableOperator:
        return self.sectors[model.as_sector(k, self.params.M).index]

    def block_diagonal(self) -> Operator:
        """Sector blocks placed on the full space (fermion index fastest)."""
        if self.full is not None:
            return self.full
        nf = 2**self.spec.M
        dim = self.spec.dim
        out = np.zeros((dim * nf, dim * nf))
        for idx, op in self.sectors.items():
            out[idx::nf, idx::nf] = op.dense().matrix
        return Operator(out, self.spec.tag(True), hermitian=True)


def _check_spec(params: ModelParams, spec: TruncationSpec, cm: bool) -> None:
    if spec.N != params.N or spec.M != params.M:
        raise ParameterError("truncation and model disagree on N or M")
    if cm and not (params.has_cm and spec.has_cm):
        raise ParameterError("c.m. variant needs Omega and a c.m. cutoff")
    if params.has_cm != spec.has_cm:
        raise ParameterError("Omega and the c.m. cutoff must be given together")


def _boson_terms(params: ModelParams, spec: TruncationSpec, coupling: float, scale: float = 1.0) -> list:
    return [
        (w / scale) * number_diag(c) + coupling * quadrature(c)
        for w, c in zip(params.omega, spec.boson_cutoffs)
    ]


def build_diag(params: ModelParams, spec: TruncationSpec) -> HamiltonianBundle:
    """H_[k] = Sum_l omega_l a_l^+ a_l + eps_[k] + g_[k] Sum_l (a_l + a_l^+)."""
    if spec.has_cm or params.has_cm:
        raise ParameterError("the bosonic model has no c.m. mode")
    _check_spec(params, spec, cm=False)
    sectors, shifted, ground = {}, {}, {}
    for sec in model.all_sectors(params.M):
        d = model.sector_scalars(params, sec)
        op = SeparableOperator(spec, tuple(_boson_terms(params, spec, d.g_k)), d.eps_k)
        e0 = model.ground_energy(params, sec, "diag")
        sectors[sec.index], shifted[sec.index], ground[sec.index] = op, op.shifted(e0), e0
    return HamiltonianBundle("diag", params, spec, sectors, shifted, ground)


def build_cm_diag(params: ModelParams, spec: TruncationSpec) -> HamiltonianBundle:
    """Adds Omega b^+ b - g' kappa_[k] (b + b^+) to every sector.

    Components ``H1`` (bosons and fermions) and ``H2`` (c.m. part) are stored
    per sector.
    """
    _check_spec(params, spec, cm=True)
    sectors, shifted, ground = {}, {}, {}
    h1, h2 = {}, {}
    mc = spec.cm_cutoff
    for sec in model.all_sectors(params.M):
        d = model.sector_scalars(params, sec)
        cm_term = params.Omega * number_diag(mc) - params.g_prime * d.kappa_k * quadrature(mc)
        bos = _boson_terms(params, spec, d.g_k)
        op = SeparableOperator(spec, (cm_term, *bos), d.eps_k)
        e0 = model.ground_energy(params, sec, "cm_diag")
        sectors[sec.index], shifted[sec.index], ground[sec.index] = op, op.shifted(e0), e0
        h1[sec.index] = SeparableOperator(spec, (None, *bos), d.eps_k)
        h2[sec.index] = SeparableOperator(spec, (cm_term,) + (None,) * params.N)
    return HamiltonianBundle("cm_diag", params, spec, sectors, shifted, ground, components={"H1": h1, "H2": h2})


# --- level-changing models ------------------------------------------------------------


def _full_factor(spec: TruncationSpec, pos: int | None, mat: np.ndarray | None, fermion: np.ndarray) -> np.ndarray:
    mats = [np.eye(d) for d in spec.dims]
    if pos is not None:
        mats[pos] = mat
    return reduce(np.kron, mats + [fermion])


def _fermion_number(M: int, level: int) -> np.ndarray:
    return fermion_hop_matrix(level, level, M)


def _free_full(params: ModelParams, spec: TruncationSpec, scale: float) -> tuple[np.ndarray, np.ndarray]:
    """(free boson part, free c.m. part) on the full space, frequencies / scale."""
    nf = 2**spec.M
    eye_f = np.eye(nf)
    bos = np.zeros((spec.full_dim(True),) * 2)
    for l, c in enumerate(spec.boson_cutoffs, start=1):
        bos += (params.omega[l - 1] / scale) * _full_factor(spec, spec.factor(l), number_diag(c), eye_f)
    for a in range(1, spec.M + 1):
        bos += (params.epsilon[a - 1] / scale) * _full_factor(spec, None, None, _fermion_number(spec.M, a))
    cm = np.zeros_like(bos)
    if spec.has_cm:
        cm = (params.Omega / scale) * _full_factor(spec, 0, number_diag(spec.cm_cutoff), eye_f)
    return bos, cm


def _hopping_terms(params: ModelParams, spec: TruncationSpec, cm_on: bool) -> tuple[np.ndarray, np.ndarray]:
    """Level-changing couplings: (boson part, c.m. part) with x_{aa'} = 1 - delta."""
    bos = np.zeros((spec.full_dim(True),) * 2)
    cm = np.zeros_like(bos)
    M = spec.M
    for a in range(1, M + 1):
        for b in range(1, M + 1):
            if a == b:
                continue
            hop = fermion_hop_matrix(a, b, M)
            for i, c in enumerate(spec.boson_cutoffs, start=1):
                g = params.g_extra[i - 1, a - 1, b - 1]
                if g:
                    bos += g * _full_factor(spec, spec.factor(i), quadrature(c), hop)
            if cm_on and spec.has_cm and params.g_prime:
                cm -= params.g_prime * _full_factor(spec, 0, quadrature(spec.cm_cutoff), hop)
    return bos, cm


def _diagonal_terms(params: ModelParams, spec: TruncationSpec, cm_on: bool) -> tuple[np.ndarray, np.ndarray]:
    """Same-level couplings g_a n_a Sum_i (a_i + a_i^+) and -g' n_a (b + b^+)."""
    bos = np.zeros((spec.full_dim(True),) * 2)
    cm = np.zeros_like(bos)
    for a in range(1, spec.M + 1):
        num = _fermion_number(spec.M, a)
        g = params.g_diag[a - 1]
        if g:
            for i, c in enumerate(spec.boson_cutoffs, start=1):
                bos += g * _full_factor(spec, spec.factor(i), quadrature(c), num)
        if cm_on and spec.has_cm and params.g_prime:
            cm -= params.g_prime * _full_factor(spec, 0, quadrature(spec.cm_cutoff), num)
    return bos, cm


def _op(mat: np.ndarray, spec: TruncationSpec) -> Operator:
    return Operator(mat, spec.tag(True), hermitian=True)


def build_extradiag(params: ModelParams, spec: TruncationSpec) -> HamiltonianBundle:
    """Free terms plus Sum_{a != a'} [Sum_i g_{iaa'} (a_i + a_i^+) - g' (b + b^+)] c_a^+ c_a'.

    Components: ``H_bf`` (bosons, levels and boson couplings) and ``H_cmf``
    (c.m. oscillator and its coupling); they sum to ``full``.
    """
    _check_spec(params, spec, cm=False)
    if np.any(params.g_extra[:, np.eye(params.M, dtype=bool)] != 0):
        raise ParameterError("the extradiagonal model has no same-level couplings g_{ijj}")
    free_b, free_cm = _free_full(params, spec, 1.0)
    hop_b, hop_cm = _hopping_terms(params, spec, cm_on=True)
    h_bf, h_cmf = free_b + hop_b, free_cm + hop_cm
    full = _op(h_bf + h_cmf, spec)
    e0 = model.energy_extradiag(params, 0, 0, (0,) * params.N).alpha_form
    comps = {"H_bf": _op(h_bf, spec), "H_cmf": _op(h_cmf, spec), "H_shifted": full.shifted(e0)}
    return HamiltonianBundle("extradiag", params, spec, full=full, components=comps, ground_energies={0: e0})


def build_general(params: ModelParams, spec: TruncationSpec) -> HamiltonianBundle:
    """H = H1 + H2, each carrying half of every free term.

    H1 holds the same-level couplings, H2 the level-changing ones.  The
    ``x_mode`` of the parameters decides which part carries a c.m. coupling.
    """
    _check_spec(params, spec, cm=False)
    if np.any(params.g_extra[:, np.eye(params.M, dtype=bool)] != 0):
        raise ParameterError("same-level couplings belong in g_diag, not g_extra")
    diag_x = params.x_mode in ("diagonal", "full")
    extra_x = params.x_mode in ("extradiagonal", "full")
    free_b, free_cm = _free_full(params, spec, 2.0)
    d_b, d_cm = _diagonal_terms(params, spec, diag_x)
    x_b, x_cm = _hopping_terms(params, spec, extra_x)
    h1 = free_b + free_cm + d_b + d_cm
    h2 = free_b + free_cm + x_b + x_cm
    full = _op(h1 + h2, spec)
    e0 = model.energy_general(params, 0, 0, (0,) * params.N).total
    comps = {
        "H1": _op(h1, spec),
        "H2": _op(h2, spec),
        "H_int": _op(d_b + d_cm + x_b + x_cm, spec),
        "H_bf": _op(2 * free_b + d_b + x_b, spec),
        "H_cmf": _op(2 * free_cm + d_cm + x_cm, spec),
        "H_shifted": full.shifted(e0),
    }
    return HamiltonianBundle("general", params, spec, full=full, components=comps, ground_energies={0: e0})


BUILDERS = {"diag": build_diag, "cm_diag": build_cm_diag, "extradiag": build_extradiag, "general": build_general}


def build(variant: str, params: ModelParams, spec: TruncationSpec) -> HamiltonianBundle:
    try:
        return BUILDERS[variant](params, spec)
    except KeyError:
        raise ParameterError(f"unknown variant {variant!r}; expected one of {VARIANTS}") from None


# --- eigenvectors ---------------------------------------------------------------------


@dataclass(frozen=True)
class PsiOrbit:
    """Fermionic state h([k]) Psi_[k], normalized, with its orbit of sectors.

    ``factor`` is <Psi|K|Psi> for K = Sum kappa_jl c_j^+ c_l and ``residual`` is
    |K Psi - factor Psi|, which measures how far Psi is from an eigenvector.
    """

    vector: np.ndarray
    orbit: tuple[int, ...]
    factor: float
    residual: float


def kappa_hop_matrix(k: SectorId) -> np.ndarray:
    M = k.M
    mat = np.zeros((2**M, 2**M))
    for j in range(1, M + 1):
        for l in range(1, M + 1):
            if j != l and model.kappa_jl(k.bits, j, l):
                mat += fermion_hop_matrix(j, l, M)
    return mat


def psi_orbit(k, M: int) -> PsiOrbit:
    sec = model.as_sector(k, M)
    base = np.zeros(2**M)
    base[sec.index] = 1.0
    lam = int(all(sec.bits[j] == sec.bits[j + 1] for j in range(M - 1)))
    kmat = kappa_hop_matrix(sec)
    vec = base if lam else base + kmat @ base
    vec = vec / np.linalg.norm(vec)
    orbit = tuple(int(i) for i in np.flatnonzero(np.abs(vec) > 0))
    kv = kmat @ vec
    factor = float(vec @ kv)
    return PsiOrbit(vec, orbit, factor, float(np.linalg.norm(kv - factor * vec)))


@dataclass(frozen=True, eq=False)
class DisplacedVector:
    state: State
    leakage: float  # squared norm lost to the truncation before renormalization


def _labels(params: ModelParams, n, j: int | None, family: str) -> tuple[int, ...]:
    if j is None:
        occ = tuple(int(x) for x in np.atleast_1d(n))
        if len(occ) != params.N:
            raise ParameterError(f"need {params.N} occupations")
        return occ
    labels = model.degenerate_labels(int(n), params.N, family)
    if not 1 <= j <= len(labels):
        raise ParameterError(f"degenerate index j={j} outside 1..{len(labels)}")
    return labels[j - 1]


def displacement_amplitudes(params: ModelParams, variant: str, k) -> tuple[float | None, tuple[float, ...]]:
    """Displacement amplitudes (c.m., per boson mode) of the analytic eigenvectors.

    Boson modes coupled by +g (a + a^+) are displaced by -g/omega, the c.m.
    mode coupled by -g' (b + b^+) by +g'/Omega.
    """
    d = model.sector_scalars(params, k)
    if variant == "diag":
        return None, tuple(-d.g_k / w for w in params.omega)
    if variant == "cm_diag":
        return params.g_prime * d.kappa_k / params.Omega, tuple(-d.g_k / w for w in params.omega)
    if variant == "extradiag":
        cm = (params.g_prime / params.Omega if d.f_flag else 0.0) if params.has_cm else None
        eps = model.effective_eps_NM(params)
        return cm, tuple((-g / (eps * w)) if d.f_flag else 0.0 for g, w in zip(d.g_i_k, params.omega))
    raise ParameterError(f"no analytic eigenvectors for variant {variant!r}")


def displaced_eigenvector(
    params: ModelParams,
    spec: TruncationSpec,
    variant: str,
    k,
    m: int = 0,
    n=None,
    j: int | None = None,
    family: str = "lex",
) -> DisplacedVector:
    """Analytic eigenvector as displaced number states (renormalized on the cutoff).

    ``n`` is an occupation tuple, or the total quantum number when ``j``
    selects one of the degenerate labels.  The extradiagonal variant returns a
    vector on the full space including the fermionic factor.
    """
    sec = model.as_sector(k, params.M)
    occ = _labels(params, n if n is not None else (0,) * params.N, j, family)
    cm_beta, betas = displacement_amplitudes(params, variant, sec)
    vecs, keep = [], 1.0
    if spec.has_cm:
        beta = cm_beta or 0.0
        if not 0 <= m <= spec.cm_cutoff:
            raise ParameterError("c.m. label outside the cutoff")
        cols, leak = displaced_columns(beta, spec.cm_cutoff)
        vecs.append(cols[:, m])
        keep *= 1 - leak[m]
    elif m:
        raise ParameterError("c.m. label without a c.m. mode")
    for beta, nl, c in zip(betas, occ, spec.boson_cutoffs):
        if not 0 <= nl <= c:
            raise ParameterError("occupation outside the cutoff")
        cols, leak = displaced_columns(beta, c)
        vecs.append(cols[:, nl])
        keep *= 1 - leak[nl]
    amp = reduce(np.kron, vecs)
    if variant == "extradiag":
        amp = np.kron(amp, psi_orbit(sec, params.M).vector)
        tag = spec.tag(True)
    else:
        tag = spec.tag()
    amp = amp / np.linalg.norm(amp)
    return DisplacedVector(State(amp, tag), 1 - keep)


# --- numeric oracle -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Spectrum:
    values: np.ndarray
    vectors: np.ndarray | None


def numeric_spectrum(h, lowest: int | None = None) -> Spectrum:
    """Ascending eigenvalues (and eigenvectors for dense input) of a Hermitian operator.

    Kronecker sums are diagonalized factor by factor; their eigenvalues are the
    sums of the factor eigenvalues, and no vectors are returned.
    """
    if isinstance(h, SeparableOperator):
        vals = h.eigenvalues()
        return Spectrum(vals[:lowest] if lowest else vals, None)
    mat = h.matrix if isinstance(h, Operator) else np.asarray(h)
    if hermiticity_defect(mat) > 1e-12:
        raise ContractError("numeric_spectrum needs a Hermitian matrix")
    vals, vecs = np.linalg.eigh(mat)
    if lowest:
        vals, vecs = vals[:lowest], vecs[:, :lowest]
    return Spectrum(vals, vecs)
