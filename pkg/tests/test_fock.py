import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinmix.fock import (
    DensityMatrix,
    SectorError,
    StateVector,
    build_hamiltonian,
    build_sector,
    expectation,
    n0_diagonal,
)

from _oracles import brute_hamiltonian, closed_form_spectrum, enumerate_triples

SQRT2 = np.sqrt(2.0)


class TestBuildSector:
    def test_two_atoms_zero_magnetization(self):
        basis = build_sector(2, 0)
        assert basis.states == ((0, 2, 0), (1, 0, 1))
        assert basis.dim == 2

    def test_fully_stretched(self):
        basis = build_sector(1, 1)
        assert basis.states == ((1, 0, 0),)
        assert basis.dim == 1

    def test_hundred_atoms_dimension(self):
        basis = build_sector(100, 0)
        assert basis.dim == 51
        assert basis.dim == len(enumerate_triples(100, 0))

    def test_rejects_bad_sectors(self):
        with pytest.raises(SectorError):
            build_sector(0, 0)
        with pytest.raises(SectorError):
            build_sector(3, 4)
        with pytest.raises(SectorError):
            build_sector(3, -4)

    @given(n=st.integers(1, 40), frac=st.integers(-40, 40))
    @settings(max_examples=60, deadline=None)
    def test_matches_exhaustive_enumeration(self, n, frac):
        mag = max(-n, min(n, frac))
        basis = build_sector(n, mag)
        assert list(basis.states) == enumerate_triples(n, mag)
        assert basis.dim == (n - abs(mag)) // 2 + 1
        for i, triple in enumerate(basis.states):
            a, b, c = triple
            assert a + b + c == n and a - c == mag and min(triple) >= 0
            assert basis.index_of(triple) == i
        ks = [t[0] for t in basis.states]
        assert ks == sorted(ks)


class TestBuildHamiltonian:
    def test_two_atom_matrix(self):
        h = build_hamiltonian(build_sector(2, 0), +1, 0.0)
        assert np.allclose(h.dense(), [[0.0, 2 * SQRT2], [2 * SQRT2, -2.0]], atol=1e-15)

    def test_quadratic_shift_is_diagonal_in_n0(self):
        basis = build_sector(2, 0)
        q = 1.7
        h0 = build_hamiltonian(basis, +1, 0.0).dense()
        hq = build_hamiltonian(basis, +1, q).dense()
        assert np.allclose(hq, h0 - q * np.diag([2.0, 0.0]), atol=1e-15)

    def test_four_atom_eigenvalues(self):
        h = build_hamiltonian(build_sector(4, 0), +1, 0.0)
        w = np.sort(np.linalg.eigvalsh(h.dense()))
        assert np.allclose(w, [-8.0, -2.0, 12.0], atol=1e-12)
        assert np.allclose(w, closed_form_spectrum(4, +1), atol=1e-12)

    def test_rejects_bad_sigma(self):
        with pytest.raises(SectorError):
            build_hamiltonian(build_sector(2, 0), 2, 0.0)

    @given(
        n=st.integers(1, 14),
        mag=st.integers(-6, 6),
        sigma=st.sampled_from([+1, -1]),
        q=st.floats(-5.0, 5.0, allow_nan=False),
    )
    @settings(max_examples=60, deadline=None)
    def test_matches_operator_oracle(self, n, mag, sigma, q):
        mag = max(-n, min(n, mag))
        basis = build_sector(n, mag)
        h = build_hamiltonian(basis, sigma, q)
        dense = h.dense()
        oracle, triples = brute_hamiltonian(n, mag, sigma, q)
        assert list(basis.states) == triples
        assert np.allclose(dense, oracle, atol=1e-10, rtol=0.0)
        assert np.array_equal(dense, dense.T)

    def test_apply_matches_dense(self):
        basis = build_sector(9, 1)
        h = build_hamiltonian(basis, -1, 0.3)
        rng = np.random.default_rng(0)
        v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
        assert np.allclose(h.apply(v.copy()), h.dense() @ v, atol=1e-12)

    def test_pair_exchange_conserves_sector(self):
        # every off-diagonal coupling stays inside the enumerated sector
        for n, mag in [(6, 0), (7, 1), (8, -3)]:
            _, triples = brute_hamiltonian(n, mag, +1, 0.0)
            for a, b, c in triples:
                assert a + b + c == n and a - c == mag


class TestClosedFormSpectrum:
    @pytest.mark.parametrize("sigma", [+1, -1])
    @pytest.mark.parametrize("n", list(range(2, 21)))
    def test_collective_spin_levels(self, n, sigma):
        h = build_hamiltonian(build_sector(n, 0), sigma, 0.0)
        w = np.sort(np.linalg.eigvalsh(h.dense()))
        assert np.allclose(w, closed_form_spectrum(n, sigma), atol=1e-8)

    def test_two_atom_anchors(self):
        wa = np.sort(np.linalg.eigvalsh(build_hamiltonian(build_sector(2, 0), +1).dense()))
        assert np.allclose(wa, [-4.0, 2.0], atol=1e-12)
        wf = np.sort(np.linalg.eigvalsh(build_hamiltonian(build_sector(2, 0), -1).dense()))
        assert np.allclose(wf, [-2.0, 4.0], atol=1e-12)


class TestN0Diagonal:
    def test_two_atoms(self):
        assert np.array_equal(n0_diagonal(build_sector(2, 0)), [2.0, 0.0])

    def test_ladder_structure(self):
        n0 = n0_diagonal(build_sector(100, 0))
        assert np.array_equal(n0, np.arange(100, -1, -2, dtype=float))

    def test_magnetized_sector_from_enumeration(self):
        basis = build_sector(3, 1)
        triples = enumerate_triples(3, 1)
        assert np.array_equal(n0_diagonal(basis), [t[1] for t in triples])


class TestExpectation:
    def test_ground_state_population(self):
        basis = build_sector(2, 0)
        state = StateVector.from_amplitudes(basis, [-np.sqrt(1 / 3), np.sqrt(2 / 3)])
        assert expectation(state, n0_diagonal(basis)) == pytest.approx(2 / 3, abs=1e-12)

    def test_pure_basis_state(self):
        basis = build_sector(2, 0)
        assert expectation(basis.basis_state(0), n0_diagonal(basis)) == pytest.approx(2.0)

    def test_mixed_state(self):
        basis = build_sector(2, 0)
        rho = DensityMatrix.from_matrix(basis, np.diag([0.5, 0.5]))
        assert expectation(rho, n0_diagonal(basis)) == pytest.approx(1.0)

    def test_matrix_observable(self):
        basis = build_sector(2, 0)
        state = StateVector.from_amplitudes(basis, [1.0, 1.0])
        sx = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert expectation(state, sx) == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        basis = build_sector(2, 0)
        with pytest.raises(SectorError):
            expectation(basis.basis_state(0), np.zeros(3))
        with pytest.raises(SectorError):
            expectation(basis.basis_state(0), np.zeros((3, 3)))


class TestStateContainers:
    def test_state_normalization_enforced(self):
        basis = build_sector(2, 0)
        with pytest.raises(SectorError):
            StateVector(basis, np.array([1.0, 1.0], dtype=complex))
        state = StateVector.from_amplitudes(basis, [1.0, 1.0])
        assert np.isclose(np.sum(np.abs(state.amplitudes) ** 2), 1.0, atol=1e-12)

    def test_density_matrix_validation(self):
        basis = build_sector(2, 0)
        with pytest.raises(SectorError):
            DensityMatrix.from_matrix(basis, np.array([[1.0, 0.8], [0.8, 0.0]]))
        rho = basis.basis_state(0).density_matrix()
        assert rho.purity() == pytest.approx(1.0)
        with pytest.raises(SectorError):
            DensityMatrix.from_matrix(basis, np.zeros((2, 2)))

    def test_containers_are_readonly(self):
        basis = build_sector(4, 0)
        h = build_hamiltonian(basis, +1, 0.0)
        with pytest.raises(ValueError):
            h.diagonal[0] = 5.0
        state = basis.basis_state(0)
        with pytest.raises(ValueError):
            state.amplitudes[0] = 0.0
