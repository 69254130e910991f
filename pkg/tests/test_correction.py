import numpy as np
import pytest

from oamcorr.channel import build_input_state, truncate_to_input_subspace
from oamcorr.correction import (
    CorrectionReport,
    assemble_kraus,
    correct_state,
    extract_state_vector,
    fidelity,
    negativity,
    partial_transpose,
    trace_distance,
)
from oamcorr.exceptions import (
    DegenerateColumn,
    DimensionMismatch,
    RankAmbiguous,
    ZeroPivot,
    ZeroTrace,
)


def random_state(d, rng):
    psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return psi / np.linalg.norm(psi)


def random_isometry(rows, cols, rng):
    a = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    q, _ = np.linalg.qr(a)
    return q[:, :cols]


def align_global_phase(a, b):
    """Rotate a by the global phase best matching b."""
    phase = np.vdot(a.ravel(), b.ravel())
    return a * (phase / abs(phase))


# ---- state extraction ----


def test_extract_exact_rank_one():
    rng = np.random.default_rng(1)
    psi = random_state(12, rng)
    rho = np.outer(psi, psi.conj())
    for method in ("column-division", "dominant-eigenvector"):
        got = extract_state_vector(rho, method=method)
        assert abs(np.vdot(got, psi)) == pytest.approx(1.0, abs=1e-10)


def test_extract_perturbed_state():
    rng = np.random.default_rng(2)
    d = 10
    psi = random_state(d, rng)
    rho = 0.98 * np.outer(psi, psi.conj()) + 0.02 * np.eye(d) / d
    col = extract_state_vector(rho, method="column-division")
    eig = extract_state_vector(rho, method="dominant-eigenvector")
    assert abs(np.vdot(col, psi)) > 0.99
    assert abs(np.vdot(eig, psi)) > 0.99
    assert np.abs(col - eig).max() < 1e-2


def test_extract_rank_ambiguous():
    rho = np.diag([0.5, 0.5, 0.0]).astype(complex)
    with pytest.raises(RankAmbiguous):
        extract_state_vector(rho)


def test_extract_zero_pivot():
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1e-12
    with pytest.raises(ZeroPivot):
        extract_state_vector(rho)


def test_extract_unknown_method():
    rho = np.diag([1.0, 0.0]).astype(complex)
    with pytest.raises(ValueError):
        extract_state_vector(rho, method="nope")


def test_extract_outer_product_near_dominant_part():
    # the extracted rank-one state deviates from the dominant eigenpair by
    # no more than twice the input's distance from rank one (= lambda_2)
    rng = np.random.default_rng(3)
    d = 8
    psi = random_state(d, rng)
    rho = 0.95 * np.outer(psi, psi.conj()) + 0.05 * np.eye(d) / d
    vals, vecs = np.linalg.eigh(rho)
    second, top = vals[-2], vecs[:, -1]
    got = extract_state_vector(rho)
    spectral_gap = np.linalg.norm(
        np.outer(got, got.conj()) - np.outer(top, top.conj()), ord=2
    )
    assert spectral_gap <= 2 * second + 1e-12


# ---- channel-matrix assembly ----


def test_assemble_identity_embedding():
    psi = np.zeros(15, dtype=complex)
    # wavelength-diagonal embedding: spatial slot k carries wavelength k
    for k in range(3):
        psi[k * 3 + k] = 1 / np.sqrt(3)
    kraus, norms = assemble_kraus(psi)
    assert kraus.shape == (5, 3)
    for k in range(3):
        expected = np.zeros(5)
        expected[k] = 1.0
        assert np.allclose(kraus[:, k], expected, atol=1e-12)
    assert np.allclose(norms, 1.0, atol=1e-12)


def test_assemble_recovers_isometry():
    rng = np.random.default_rng(4)
    v = random_isometry(20, 3, rng)
    psi_out = (v / np.sqrt(3.0)).reshape(-1)
    # route through extraction to involve the phase convention
    rho = np.outer(psi_out, psi_out.conj())
    psi_r = extract_state_vector(rho)
    kraus, _ = assemble_kraus(psi_r)
    assert np.abs(align_global_phase(kraus, v) - v).max() < 1e-8


def test_assemble_degenerate_column():
    psi = np.zeros(9, dtype=complex)
    psi[0] = 1.0  # only wavelength slot 0 is populated
    with pytest.raises(DegenerateColumn):
        assemble_kraus(psi)
    with pytest.raises(DimensionMismatch):
        assemble_kraus(np.ones(10, dtype=complex))


# ---- correction ----


def test_correct_identity_channel():
    from oamcorr.channel import InputStateSpec, OutputBasisSpec

    spec = InputStateSpec()
    basis = OutputBasisSpec(p_values=(0,), ell_range=(-2, 2))
    psi_in = build_input_state(spec)
    embed = np.zeros(basis.n_total, dtype=complex)
    embed[basis.input_positions(spec)] = psi_in
    rho_out = np.outer(embed, embed.conj())
    kraus, _ = assemble_kraus(extract_state_vector(rho_out))
    rho_c = correct_state(rho_out, kraus)
    assert fidelity(rho_c, psi_in) == pytest.approx(1.0, abs=1e-6)


def test_correct_synthetic_unitary_channel():
    # known isometry applied to the input, inverted exactly
    from oamcorr.channel import InputStateSpec

    rng = np.random.default_rng(5)
    psi_in = build_input_state(InputStateSpec())
    v = random_isometry(40, 3, rng)
    embed = np.kron(v, np.eye(3))
    psi_out = embed @ psi_in
    rho_out = np.outer(psi_out, psi_out.conj())
    kraus, _ = assemble_kraus(extract_state_vector(rho_out))
    rho_c = correct_state(rho_out, kraus)
    assert rho_c.shape == (9, 9)
    assert fidelity(rho_c, psi_in) == pytest.approx(1.0, abs=1e-8)


def test_correct_zero_trace():
    kraus = np.zeros((4, 3), dtype=complex)
    kraus[3, 0] = kraus[2, 1] = kraus[1, 2] = 1.0
    rho_out = np.zeros((12, 12), dtype=complex)
    rho_out[0, 0] = 1.0  # spatial slot 0, untouched by the channel columns
    with pytest.raises(ZeroTrace):
        correct_state(rho_out, kraus)


def test_correct_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        correct_state(np.eye(10, dtype=complex) / 10, np.zeros((4, 3)))


# ---- metrics ----


def test_fidelity_values():
    rng = np.random.default_rng(6)
    psi = random_state(9, rng)
    assert fidelity(np.outer(psi, psi.conj()), psi) == pytest.approx(1.0, abs=1e-12)
    phi = random_state(9, rng)
    phi -= psi * np.vdot(psi, phi)
    phi /= np.linalg.norm(phi)
    assert fidelity(np.outer(phi, phi.conj()), psi) == pytest.approx(0.0, abs=1e-7)
    assert fidelity(np.eye(9) / 9, psi) == pytest.approx(1 / 3, abs=1e-12)
    with pytest.raises(DimensionMismatch):
        fidelity(np.eye(8) / 8, psi)


def test_trace_distance_values():
    rng = np.random.default_rng(7)
    psi = random_state(5, rng)
    rho = np.outer(psi, psi.conj())
    assert trace_distance(rho, psi) == pytest.approx(0.0, abs=1e-12)
    phi = random_state(5, rng)
    phi -= psi * np.vdot(psi, phi)
    phi /= np.linalg.norm(phi)
    assert trace_distance(np.outer(phi, phi.conj()), psi) == pytest.approx(1.0, abs=1e-12)


def test_partial_transpose_block_structure():
    rho = np.arange(16, dtype=complex).reshape(4, 4)
    pt = partial_transpose(rho, 2, 2)
    # within each 2x2 wavelength block, indices transpose
    expected = np.array(
        [[0, 4, 2, 6], [1, 5, 3, 7], [8, 12, 10, 14], [9, 13, 11, 15]], dtype=complex
    )
    assert np.array_equal(pt, expected)
    with pytest.raises(DimensionMismatch):
        partial_transpose(rho, 3, 2)


def test_negativity_values():
    from oamcorr.channel import InputStateSpec

    # ideal three-mode state: partial-transpose spectrum is +-1/3
    psi = build_input_state(InputStateSpec())
    rho = np.outer(psi, psi.conj())
    vals = np.sort(np.linalg.eigvalsh(partial_transpose(rho, 3, 3)))
    assert np.allclose(vals[:3], -1 / 3, atol=1e-12)
    assert np.allclose(vals[-6:], 1 / 3, atol=1e-12)
    assert negativity(rho, 3, 3) == pytest.approx(1.0, abs=1e-10)
    # any product state has zero negativity
    rng = np.random.default_rng(8)
    for _ in range(5):
        a = random_state(3, rng)
        b = random_state(3, rng)
        prod = np.kron(a, b)
        assert negativity(np.outer(prod, prod.conj()), 3, 3) < 1e-10


def test_negativity_local_unitary_invariance():
    rng = np.random.default_rng(9)
    psi = random_state(9, rng)
    rho = np.outer(psi, psi.conj())
    base = negativity(rho, 3, 3)
    ua = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))[0]
    ub = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))[0]
    u = np.kron(ua, ub)
    rotated = u @ rho @ u.conj().T
    assert negativity(rotated, 3, 3) == pytest.approx(base, abs=1e-8)


def test_fuchs_van_de_graaf_bounds():
    rng = np.random.default_rng(10)
    for _ in range(50):
        psi = random_state(9, rng)
        # random mixed state
        a = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
        rho = a @ a.conj().T
        rho /= np.trace(rho).real
        f = fidelity(rho, psi)
        d = trace_distance(rho, psi)
        assert 1 - f <= d + 1e-8
        assert d <= np.sqrt(1 - f**2) + 1e-8


def test_ground_truth_correction_at_least_as_good(desk_choi):
    spec, basis, choi = desk_choi
    psi_in = build_input_state(spec)
    rho_out = np.outer(choi.state, choi.state.conj())
    gt = choi.kraus_true / np.linalg.norm(choi.kraus_true, axis=0)
    f_gt = fidelity(correct_state(rho_out, gt), psi_in)
    # tomography-free correction from the exact output state
    kraus_rec, _ = assemble_kraus(extract_state_vector(rho_out))
    f_rec = fidelity(correct_state(rho_out, kraus_rec), psi_in)
    assert f_gt >= f_rec - 1e-6


def test_correction_report_evaluate(desk_choi):
    spec, basis, choi = desk_choi
    psi_in = build_input_state(spec)
    rho_out = np.outer(choi.state, choi.state.conj())
    kraus, _ = assemble_kraus(extract_state_vector(rho_out))
    rho_c = correct_state(rho_out, kraus)
    rho_unc = truncate_to_input_subspace(rho_out, spec, basis)
    report = CorrectionReport.evaluate(rho_c, rho_unc, psi_in)
    assert 0.0 <= report.fidelity_corrected <= 1.0
    assert 0.0 <= report.trace_distance_corrected <= 1.0
    assert 0.0 <= report.negativity_corrected <= 1.0 + 1e-9
    assert report.fidelity_corrected > report.fidelity_uncorrected
    assert report.trace_distance_corrected < report.trace_distance_uncorrected
