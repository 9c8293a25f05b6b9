import numpy as np
import pytest

from spinmix.fock import SectorError, build_hamiltonian, build_sector, expectation, n0_diagonal
from spinmix.groundstates import afm_ground_state, fm_ground_manifold, spectrum

from _oracles import closed_form_spectrum


def fluctuation(state, basis):
    n0 = n0_diagonal(basis)
    mean = expectation(state, n0)
    return np.sqrt(max(expectation(state, n0 * n0) - mean**2, 0.0)), mean


class TestAfmGroundState:
    def test_two_atom_amplitudes(self):
        state = afm_ground_state(2)
        assert np.allclose(state.amplitudes, [np.sqrt(1 / 3), -np.sqrt(2 / 3)], atol=1e-12)

    def test_population_one_third(self):
        for n in (2, 4, 100):
            state = afm_ground_state(n)
            n0 = n0_diagonal(state.basis)
            assert expectation(state, n0) == pytest.approx(n / 3, abs=1e-8)

    def test_four_atom_hand_amplitudes(self):
        state = afm_ground_state(4)
        expected = np.array([1.0, -np.sqrt(4 / 3), np.sqrt(8 / 3)]) / np.sqrt(5.0)
        assert np.allclose(state.amplitudes, expected, atol=1e-12)

    def test_rejects_odd_or_tiny(self):
        with pytest.raises(SectorError):
            afm_ground_state(3)
        with pytest.raises(SectorError):
            afm_ground_state(0)

    @pytest.mark.parametrize("n", [2, 10, 36, 100, 200])
    def test_matches_diagonalization(self, n):
        state = afm_ground_state(n)
        spec = spectrum(state.basis, +1, 0.0)
        overlap = abs(np.vdot(state.amplitudes, spec.eigenvectors[:, 0]))
        assert overlap > 1 - 1e-8

    @pytest.mark.parametrize("n", list(range(2, 201, 2)))
    def test_is_eigenvector_with_known_energy(self, n):
        state = afm_ground_state(n)
        h = build_hamiltonian(state.basis, +1, 0.0)
        residual = np.linalg.norm(h.apply(state.amplitudes.copy()) - (-2.0 * n) * state.amplitudes)
        assert residual < 1e-8

    def test_super_poissonian_fluctuation(self):
        for n in (10, 50, 100):
            state = afm_ground_state(n)
            fluct, mean = fluctuation(state, state.basis)
            assert fluct > np.sqrt(mean)


class TestFmGroundManifold:
    def test_two_atom_member(self):
        state = fm_ground_manifold(2, 0)
        assert np.allclose(state.amplitudes, [np.sqrt(2 / 3), np.sqrt(1 / 3)], atol=1e-10)

    def test_one_dimensional_sector(self):
        state = fm_ground_manifold(2, 2)
        assert state.basis.dim == 1
        assert state.amplitudes[0] == pytest.approx(1.0)
        assert state.basis.states == ((0, 0, 2),)

    def test_empty_sector_rejected(self):
        with pytest.raises(SectorError):
            fm_ground_manifold(2, 3)

    def test_degenerate_across_manifold(self):
        n = 12
        energies = []
        for m in range(-n, n + 1):
            basis = build_sector(n, -m)
            energies.append(spectrum(basis, -1, 0.0).eigenvalues[0])
        assert np.ptp(energies) < 1e-8
        assert energies[n] == pytest.approx(-(n * n - n), abs=1e-8)

    def test_sub_poissonian_fluctuation(self):
        for n in (10, 100):
            state = fm_ground_manifold(n, 0)
            fluct, mean = fluctuation(state, state.basis)
            assert fluct < np.sqrt(mean)


class TestSpectrum:
    def test_two_atom_levels(self):
        spec = spectrum(build_sector(2, 0), +1, 0.0)
        assert np.allclose(spec.eigenvalues, [-4.0, 2.0], atol=1e-12)

    def test_first_gap_antiferromagnetic(self):
        assert spectrum(build_sector(100, 0), +1, 0.0).gap() == pytest.approx(6.0, abs=1e-8)

    def test_first_gap_ferromagnetic(self):
        assert spectrum(build_sector(100, 0), -1, 0.0).gap() == pytest.approx(398.0, abs=1e-8)

    @pytest.mark.parametrize("sigma", [+1, -1])
    def test_closed_form_all_small_n(self, sigma):
        for n in range(2, 21):
            spec = spectrum(build_sector(n, 0), sigma, 0.0)
            assert np.allclose(spec.eigenvalues, closed_form_spectrum(n, sigma), atol=1e-8)

    def test_eigenpairs_satisfy_residuals(self):
        basis = build_sector(60, 4)
        h = build_hamiltonian(basis, +1, 2.5)
        spec = spectrum(basis, +1, 2.5)
        for i in range(basis.dim):
            v = spec.eigenvectors[:, i]
            assert np.linalg.norm(h.apply(v.copy()) - spec.eigenvalues[i] * v) < 1e-8
        assert np.all(np.diff(spec.eigenvalues) >= 0)

    def test_eigenvectors_orthonormal(self):
        spec = spectrum(build_sector(80, 0), -1, 1.0)
        gram = spec.eigenvectors.T @ spec.eigenvectors
        assert np.allclose(gram, np.eye(spec.dim), atol=1e-8)

    def test_ground_state_phase_convention(self):
        state = spectrum(build_sector(30, 0), -1, 0.0).ground_state()
        amps = state.amplitudes
        assert amps[np.argmax(np.abs(amps))].real > 0
