import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from gkvcs import assembly, model
from gkvcs.fock import ContractError, Operator, ParameterError, TruncationSpec, annihilate, hermiticity_defect
from gkvcs.model import ModelParams


def extra(N, M, value, pairs):
    ge = np.zeros((N, M, M))
    for a, b in pairs:
        ge[:, a, b] = ge[:, b, a] = value
    return ge


def test_diag_matches_independent_matrix():
    p = ModelParams(N=2, M=2, omega=(1.0, 1.7), epsilon=(0.3, 0.5), g_diag=(0.2, 0.4))
    spec = TruncationSpec((6, 5), M=2)
    bundle = assembly.build("diag", p, spec)
    for sec in model.all_sectors(2):
        d = model.sector_scalars(p, sec)
        ref = oracles.diag_sector_matrix(p.omega, spec.boson_cutoffs, d.eps_k, d.g_k)
        got = bundle.sector(sec).dense().matrix
        assert np.max(np.abs(got - ref)) <= 1e-12
    assert hermiticity_defect(bundle.block_diagonal().matrix) <= 1e-12


def test_diag_free_sector_and_shift():
    p = ModelParams(N=1, M=1, omega=1.0, epsilon=(0.5,), g_diag=(0.2,))
    bundle = assembly.build("diag", p, TruncationSpec((40,)))
    assert np.allclose(bundle.sector("0").dense().matrix, np.diag(np.arange(41.0)))
    assert bundle.shifted[0].eigenvalues()[0] == pytest.approx(0.0, abs=1e-9)
    assert bundle.shifted[1].eigenvalues()[0] == pytest.approx(0.0, abs=1e-9)


def test_diag_lowest_levels_at_cutoff_40():
    p = ModelParams(N=1, M=1, omega=1.0, epsilon=(0.5,), g_diag=(0.2,))
    vals = assembly.build("diag", p, TruncationSpec((40,))).sector("1").eigenvalues()
    ref = [model.energy_diag(p, "1", (n,)) for n in range(15)]
    assert np.max(np.abs(vals[:15] - ref)) <= 1e-8


def test_displaced_vacuum_position():
    p = ModelParams(N=1, M=1, omega=1.3, epsilon=(0.0,), g_diag=(0.4,))
    spec = TruncationSpec((40,))
    phi = assembly.displaced_eigenvector(p, spec, "diag", "1").state
    a = annihilate(1, spec)
    assert np.vdot(phi.amplitudes, a.apply(phi).amplitudes).real == pytest.approx(-0.4 / 1.3, abs=1e-12)


def test_diag_rejects_cm():
    p = ModelParams(N=1, M=1, omega=1.0, epsilon=(0.0,), Omega=1.0)
    with pytest.raises(ParameterError):
        assembly.build("diag", p, TruncationSpec((3,), 3))
    with pytest.raises(ParameterError):
        assembly.build("nope", p, TruncationSpec((3,), 3))


def test_cm_diag_cm_eigenvalues():
    M, Omega, gp = 2, 1.0, 0.3
    p = ModelParams(N=1, M=M, omega=1.0, epsilon=(0.0, 0.0), Omega=Omega, g_prime=gp)
    bundle = assembly.build("cm_diag", p, TruncationSpec((0,), 40, M))
    vals = bundle.components["H2"][3].eigenvalues()
    ref = [Omega * m - (M * gp) ** 2 / Omega for m in range(15)]
    assert np.max(np.abs(vals[:15] - ref)) <= 1e-8


def test_cm_diag_matches_independent_matrix():
    p = ModelParams(N=1, M=2, omega=1.2, epsilon=(0.3, 0.5), g_diag=(0.2, 0.1), Omega=2.0, g_prime=0.4)
    spec = TruncationSpec((5,), 6, 2)
    bundle = assembly.build("cm_diag", p, spec)
    b, a = oracles.lower(6), oracles.lower(5)
    for sec in model.all_sectors(2):
        d = model.sector_scalars(p, sec)
        ref = (
            np.kron(2.0 * b.T @ b - 0.4 * d.kappa_k * (b + b.T), np.eye(6))
            + np.kron(np.eye(7), 1.2 * a.T @ a + d.g_k * (a + a.T))
            + d.eps_k * np.eye(42)
        )
        assert np.max(np.abs(bundle.sector(sec).dense().matrix - ref)) <= 1e-12
        parts = bundle.components["H1"][sec.index] + bundle.components["H2"][sec.index]
        assert np.max(np.abs(parts.dense().matrix - ref)) <= 1e-12


def test_cm_eigenvector_matches_numeric():
    p = ModelParams(N=1, M=2, omega=1.0, epsilon=(0.0, 0.0), Omega=1.0, g_prime=0.3)
    spec = TruncationSpec((0,), 40, 2)
    bundle = assembly.build("cm_diag", p, spec)
    h2 = bundle.components["H2"][3].dense()
    vals, vecs = np.linalg.eigh(h2.matrix)
    for m in range(5):
        chi = assembly.displaced_eigenvector(p, spec, "cm_diag", "11", m=m).state
        assert abs(np.vdot(vecs[:, m], chi.amplitudes)) >= 1 - 1e-8


def test_cm_diag_decoupled_cm():
    p = ModelParams(N=1, M=1, omega=1.0, epsilon=(0.4,), g_diag=(0.2,), Omega=1.5)
    spec = TruncationSpec((30,), 30, 1)
    vals = assembly.build("cm_diag", p, spec).sector("1").eigenvalues()
    ref = sorted(model.energy_diag(p, "1", (n,)) + 1.5 * m for n in range(15) for m in range(15))
    assert np.max(np.abs(vals[:10] - ref[:10])) <= 1e-9


def test_extradiag_matches_independent_matrix():
    ge = extra(2, 2, 0.15, [(0, 1)])
    p = ModelParams(N=2, M=2, omega=(1.0, 1.4), epsilon=(0.3, 0.7), g_extra=ge, Omega=1.7, g_prime=0.2)
    spec = TruncationSpec((3, 2), 3, 2)
    bundle = assembly.build("extradiag", p, spec)
    ref = oracles.extradiag_matrix(p.omega, p.epsilon, ge, 1.7, 0.2, (3, 2), 3)
    assert np.max(np.abs(bundle.full.matrix - ref)) <= 1e-12
    parts = bundle.components["H_bf"].matrix + bundle.components["H_cmf"].matrix
    assert np.max(np.abs(parts - ref)) <= 1e-12


@given(st.integers(0, 10_000))
def test_extradiag_hermitian_random(seed):
    rng = np.random.default_rng(seed)
    M = int(rng.integers(2, 4))
    ge = np.zeros((1, M, M))
    iu = np.triu_indices(M, 1)
    ge[0][iu] = rng.uniform(-0.4, 0.4, size=len(iu[0]))
    ge[0] = ge[0] + ge[0].T
    p = ModelParams(N=1, M=M, omega=rng.uniform(0.5, 2), epsilon=tuple(rng.uniform(-1, 1, M)), g_extra=ge,
                    Omega=float(rng.uniform(0.5, 2)), g_prime=float(rng.uniform(0, 0.4)))
    h = assembly.build("extradiag", p, TruncationSpec((3,), 2, M)).full.matrix
    assert hermiticity_defect(h) <= 1e-12


def test_extradiag_decoupled_is_block_diagonal_free():
    p = ModelParams(N=1, M=2, omega=1.0, epsilon=(0.3, 0.7), Omega=1.5)
    spec = TruncationSpec((3,), 3, 2)
    h = assembly.build("extradiag", p, spec).full.matrix
    assert np.count_nonzero(h - np.diag(np.diag(h))) == 0
    free = [1.5 * m + n + model.sector_scalars(p, k).eps_k for m in range(4) for n in range(4) for k in range(4)]
    assert np.allclose(np.diag(h), free)


def test_general_degenerates_to_cm_diag():
    p = ModelParams(N=2, M=2, omega=(1.0, 1.3), epsilon=(0.3, 0.7), g_diag=(0.2, 0.35), Omega=1.7, g_prime=0.25,
                    x_mode="diagonal")
    spec = TruncationSpec((3, 2), 3, 2)
    gen = assembly.build("general", p, spec).full.matrix
    cm = assembly.build("cm_diag", p, spec).block_diagonal().matrix
    assert np.max(np.abs(gen - cm)) <= 1e-12


def test_general_degenerates_to_extradiag():
    ge = extra(1, 3, 0.2, [(0, 1), (1, 2)])
    p = ModelParams(N=1, M=3, omega=1.1, epsilon=(0.3, 0.7, 0.9), g_extra=ge, Omega=1.7, g_prime=0.25,
                    x_mode="extradiagonal")
    spec = TruncationSpec((3,), 2, 3)
    gen = assembly.build("general", p, spec)
    ext = assembly.build("extradiag", p, spec)
    assert np.max(np.abs(gen.full.matrix - ext.full.matrix)) <= 1e-12
    c = gen.components
    assert np.max(np.abs(c["H1"].matrix + c["H2"].matrix - gen.full.matrix)) <= 1e-12
    assert np.max(np.abs(c["H_bf"].matrix + c["H_cmf"].matrix - gen.full.matrix)) <= 1e-12
    assert hermiticity_defect(gen.full.matrix) <= 1e-12


def test_displaced_eigenvector_residual():
    p = ModelParams(N=1, M=1, omega=1.0, epsilon=(0.2,), g_diag=(0.3,))
    spec = TruncationSpec((50,))
    h = assembly.build("diag", p, spec).sector("1").dense()
    for n in range(6):
        phi = assembly.displaced_eigenvector(p, spec, "diag", "1", n=(n,)).state
        resid = h.apply(phi).amplitudes - model.energy_diag(p, "1", (n,)) * phi.amplitudes
        assert np.linalg.norm(resid) <= 1e-8


def test_displaced_eigenvector_plain_without_coupling():
    p = ModelParams(N=2, M=1, omega=(1.0, 2.0), epsilon=(0.2,))
    spec = TruncationSpec((3, 3))
    phi = assembly.displaced_eigenvector(p, spec, "diag", "1", n=(2, 1)).state
    ref = np.zeros(16)
    ref[spec.flat_index((2, 1))] = 1
    assert np.allclose(phi.amplitudes, ref)


def test_degenerate_labels_orthonormal():
    p = ModelParams(N=2, M=1, omega=1.0, epsilon=(0.2,), g_diag=(0.3,))
    spec = TruncationSpec((30, 30))
    for n in (0, 3, 6):
        vecs = [assembly.displaced_eigenvector(p, spec, "diag", "1", n=n, j=j).state.amplitudes
                for j in range(1, model.degeneracy(n, 2) + 1)]
        gram = np.array([[np.vdot(u, v) for v in vecs] for u in vecs])
        assert np.max(np.abs(gram - np.eye(len(vecs)))) <= 1e-10
    with pytest.raises(ParameterError):
        assembly.displaced_eigenvector(p, spec, "diag", "1", n=3, j=5)


def test_extradiag_eigenvector_fermion_part():
    ge = extra(1, 2, 0.2, [(0, 1)])
    p = ModelParams(N=1, M=2, omega=1.0, epsilon=(0.0, 0.0), g_extra=ge, Omega=1.0)
    orbit = assembly.psi_orbit("01", 2)
    assert orbit.orbit == (1, 2)
    assert np.isclose(np.linalg.norm(orbit.vector), 1)
    assert assembly.psi_orbit("11", 2).orbit == (3,)
    vec = assembly.displaced_eigenvector(p, TruncationSpec((10,), 10, 2), "extradiag", "01", m=1, n=(2,))
    assert vec.state.amplitudes.size == 11 * 11 * 4


def test_numeric_spectrum_examples():
    assert np.allclose(assembly.numeric_spectrum(np.diag([3.0, 1.0, 2.0])).values, [1, 2, 3])
    assert np.allclose(assembly.numeric_spectrum(np.array([[0.0, 1.0], [1.0, 0.0]])).values, [-1, 1])
    with pytest.raises(ContractError):
        assembly.numeric_spectrum(np.array([[0.0, 1.0], [0.0, 0.0]]))


@given(st.integers(0, 10_000))
def test_numeric_spectrum_reconstruction(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(7, 7)) + 1j * rng.normal(size=(7, 7))
    h = x + x.conj().T
    s = assembly.numeric_spectrum(Operator(h, "h", True))
    assert np.all(np.diff(s.values) >= 0)
    recon = s.vectors @ np.diag(s.values) @ s.vectors.conj().T
    assert np.linalg.norm(h - recon) <= 1e-9 * np.linalg.norm(h)


def test_displaced_oscillator_oracle():
    w, g = 1.0, 0.5
    a = oracles.lower(60)
    vals = assembly.numeric_spectrum(w * a.T @ a + g * (a + a.T)).values
    assert np.max(np.abs(vals[:15] - (w * np.arange(15) - g * g / w))) <= 1e-8


def test_analytic_basis_resolves_identity():
    p = ModelParams(N=1, M=1, omega=1.0, epsilon=(0.0,), g_diag=(0.3,))
    spec = TruncationSpec((40,))
    vecs = np.array([assembly.displaced_eigenvector(p, spec, "diag", "1", n=(n,)).state.amplitudes for n in range(41)])
    proj = vecs.T @ vecs.conj()
    # columns near the cutoff leak; the low block is resolved exactly
    assert np.max(np.abs(proj[:20, :20] - np.eye(20))) <= 1e-8


def test_shifted_sector_grounds_vanish():
    p = ModelParams(N=1, M=2, omega=1.0, epsilon=(0.2, 0.4), g_diag=(0.1, 0.3), Omega=1.5, g_prime=0.2)
    spec = TruncationSpec((20,), 20, 2)
    bundle = assembly.build("cm_diag", p, spec)
    assert bundle.shifted[0].eigenvalues()[0] == pytest.approx(0.0, abs=1e-9)
    for k in range(4):
        assert bundle.shifted[k].eigenvalues()[0] == pytest.approx(0.0, abs=1e-9)
        vac = assembly.displaced_eigenvector(p, spec, "cm_diag", k).state
        assert bundle.shifted[k].expectation(vac) == pytest.approx(0.0, abs=1e-9)
