"""
Lattice model tests: Hamiltonian, ground states, the one-site state,
source/sink operators, correlators and the spectral function.
"""
import math

import numpy as np
import pytest

from errors import DimensionCapError, UnsupportedError, ValidationError
from lattice import (
    build_hamiltonian, build_lz, evolution_operator, exact_correlator, exact_correlator_series,
    exact_evolve, exact_ground_state, gamma_state, onesite_ground_state, onesite_hamiltonian,
    onesite_ground_vector, overlap_scan, qubit_encoding, source_sink, spectral_function, zero_flux_state,
)
from qudit_core import Register, is_unitary, make_basis_state
from schemas import ModelParams

B_WORKING_POINT = (3 + math.sqrt(17)) / 2


class TestHamiltonian:
    """Hamiltonian assembly."""

    def test_term_layout(self, params):
        """Two on-site terms per link and one bond term per neighbour pair."""
        h = build_hamiltonian(params)
        labels = [t.label for t in h.terms]
        assert labels.count("lz2") == 4
        assert labels.count("ux") == 4
        assert labels.count("lzlz") == 3
        assert h.onsite_coeff == pytest.approx(3.0)

    def test_hermitian(self, params):
        """The dense matrix is real symmetric."""
        m = build_hamiltonian(params).matrix
        assert np.allclose(m, m.T)

    def test_matvec_matches_dense(self, params, rng):
        """Local-term matvec agrees with the dense matrix."""
        h = build_hamiltonian(params)
        v = rng.normal(size=h.dim)
        assert np.allclose(h.matvec(v), h.matrix @ v)

    def test_parts_sum_to_whole(self, small_params):
        """lz2, lzlz and ux parts add up to H."""
        h = build_hamiltonian(small_params)
        assert np.allclose(h.part("lz2") + h.part("lzlz") + h.part("ux"), h.matrix)

    def test_dimension_cap(self, monkeypatch, params):
        """Chains above the cap are rejected before anything is allocated."""
        monkeypatch.setenv("QSQED_DIM_CAP", "50")
        with pytest.raises(DimensionCapError):
            build_hamiltonian(params)


class TestEvolution:
    """Exact time evolution."""

    def test_zero_time_is_identity(self, small_params):
        """e^{-iH*0}|psi> = |psi>."""
        psi = gamma_state(small_params)
        out = exact_evolve(build_hamiltonian(small_params), 0.0, psi)
        assert np.allclose(out.amplitudes, psi.amplitudes)

    def test_evolution_operator_unitary(self, small_params):
        """The propagator is unitary and composes in time."""
        h = build_hamiltonian(small_params)
        u1 = evolution_operator(h, 0.3)
        assert is_unitary(u1)
        assert np.allclose(u1 @ u1, evolution_operator(h, 0.6))

    def test_rejects_non_hermitian(self):
        """Raw matrices must be Hermitian."""
        psi = make_basis_state(Register.qudits(1), [0])
        with pytest.raises(ValidationError):
            exact_evolve(np.triu(np.ones((3, 3))), 1.0, psi)


class TestGroundState:
    """Exact ground state oracle."""

    def test_dense_and_iterative_agree(self, monkeypatch):
        """Lanczos on local terms reproduces the dense ground state."""
        p = ModelParams(n_s=3)
        dense = exact_ground_state(build_hamiltonian(p))
        monkeypatch.setenv("QSQED_DENSE_MAX_DIM", "1")
        sparse = exact_ground_state(build_hamiltonian(p))
        assert sparse.energy == pytest.approx(dense.energy, abs=1e-9)
        assert abs(np.vdot(dense.state.amplitudes, sparse.state.amplitudes)) == pytest.approx(1.0, abs=1e-8)

    def test_not_degenerate(self, params):
        """The working point has a gapped ground state."""
        ground = exact_ground_state(build_hamiltonian(params))
        assert not ground.degenerate
        assert ground.state.norm() == pytest.approx(1.0)


class TestOneSiteState:
    """Closed-form (1, b, 1)/N state of one link."""

    def test_b_at_working_point(self, params):
        """U=5, X=2, Y=0.5 gives b = (3 + sqrt 17)/2."""
        state = onesite_ground_state(params)
        assert state.b == pytest.approx(B_WORKING_POINT)
        assert state.norm == pytest.approx(math.sqrt(2 + B_WORKING_POINT ** 2))

    def test_is_ground_eigenvector(self, params):
        """The closed form matches the numerical minimal eigenvector."""
        state = onesite_ground_state(params)
        assert np.allclose(state.amplitudes, onesite_ground_vector(params))
        h1 = onesite_hamiltonian(params)
        energy = state.amplitudes @ h1 @ state.amplitudes
        assert energy == pytest.approx(np.linalg.eigvalsh(h1)[0])

    def test_published_b_differs(self, params):
        """The printed closed form is kept for reference only."""
        state = onesite_ground_state(params)
        assert abs(state.published_b - state.b) > 1e-3

    def test_angles(self, params):
        """rho1 = arccos(1/N), rho2 = arcsin(-1/sqrt(N^2 - 1))."""
        state = onesite_ground_state(params)
        assert math.cos(state.rho1) == pytest.approx(1 / state.norm)
        assert math.sin(state.rho2) == pytest.approx(-1 / math.sqrt(state.norm ** 2 - 1))

    def test_requires_spin_one(self):
        """Only n_max = 1 has the closed form."""
        with pytest.raises(UnsupportedError):
            onesite_ground_state(ModelParams(n_max=2))

    def test_requires_positive_hopping(self):
        """X must be positive."""
        with pytest.raises(ValidationError):
            onesite_ground_state(ModelParams(X=0.0))


class TestProductStates:
    """|Gamma> and |1...1>."""

    def test_zero_flux_state(self, small_params):
        """Every link sits in the middle level."""
        psi = zero_flux_state(small_params)
        assert psi.amplitudes[4] == 1

    def test_gamma_normalized(self, params):
        """|Gamma> is a normalized product state."""
        assert gamma_state(params).norm() == pytest.approx(1.0)


class TestOverlapScan:
    """Ground-state overlaps over lattice sizes and couplings."""

    def test_gamma_beats_zero_flux(self):
        """|Gamma> has the larger overlap with the ground state."""
        rows = overlap_scan([2, 3], [5.0])
        assert len(rows) == 2
        for row in rows:
            assert 0 <= row.overlap_111 < row.overlap_gamma <= 1

    def test_overlap_decreases_with_size(self):
        """Overlaps of product states shrink as the chain grows."""
        rows = overlap_scan([2, 3, 4], [5.0])
        gammas = [r.overlap_gamma for r in rows]
        assert gammas == sorted(gammas, reverse=True)

    def test_working_point_overlap(self):
        """On four sites at coupling 5 |Gamma> overlaps the ground state above 0.9."""
        row = overlap_scan([4], [5.0])[0]
        assert (row.n_s, row.coupling) == (4, 5.0)
        assert row.overlap_gamma > 0.9
        assert row.overlap_111 < row.overlap_gamma

    def test_stops_at_cap(self, monkeypatch):
        """Sizes above the cap end the scan instead of failing it."""
        monkeypatch.setenv("QSQED_DIM_CAP", "30")
        rows = overlap_scan([2, 3, 4], [5.0, 6.0])
        assert sorted({r.n_s for r in rows}) == [2, 3]


class TestSourceSink:
    """U^+ and its unitary split."""

    @pytest.mark.parametrize("n_max", [1, 2])
    def test_split_averages_to_raising(self, n_max):
        """(A + B)/2 = U^+ with A, B unitary."""
        ss = source_sink(n_max)
        assert np.allclose((ss.split[0] + ss.split[1]) / 2, ss.plus)
        assert ss.parts_unitary

    def test_raising_shifts_flux_up(self):
        """U^+ maps level i to level i-1 (L^z up by one)."""
        ss = source_sink(1)
        lz = build_lz(1)
        assert np.allclose(lz @ ss.plus - ss.plus @ lz, ss.plus)

    def test_minus_split_is_adjoint(self):
        """minus_split averages to U^-."""
        ss = source_sink(1)
        a, b = ss.minus_split
        assert np.allclose((a + b) / 2, ss.minus)


class TestCorrelator:
    """Exact correlators."""

    def test_equal_time_same_site(self, params):
        """C(0) = (1 + b^2)/N^2 for |Gamma>."""
        assert exact_correlator(params, 0.0).real == pytest.approx(0.931902, abs=1e-6)
        assert exact_correlator(params, 0.0).imag == pytest.approx(0.0, abs=1e-12)

    def test_equal_time_other_site(self, params):
        """Different sites factorize on a product state."""
        state = onesite_ground_state(params)
        expected = (2 * state.b / state.norm ** 2) ** 2
        assert exact_correlator(params, 0.0, x=2, y=0).real == pytest.approx(expected)

    def test_series_matches_pointwise(self, small_params):
        """The vectorized series agrees with single-time calls."""
        times = [0.0, 0.39, 0.78]
        series = exact_correlator_series(small_params, times, x=1, y=0)
        for t, value in zip(times, series):
            assert value == pytest.approx(exact_correlator(small_params, t, x=1, y=0))

    def test_site_out_of_range(self, small_params):
        """Sites outside the chain are rejected."""
        with pytest.raises(ValidationError):
            exact_correlator(small_params, 0.1, x=2)

    def test_omega_initial_state(self, small_params):
        """The exact ground state can be used as the initial state."""
        value = exact_correlator(small_params, 0.5, initial="omega")
        assert abs(value) <= 1.0 + 1e-12
        with pytest.raises(ValidationError):
            exact_correlator(small_params, 0.5, initial="vacuum")


class TestSpectralFunction:
    """Trapezoid Fourier transform of the correlator."""

    def test_constant_series(self):
        """A constant series at E=0, p=0 integrates to t_max."""
        times = np.linspace(0, 2, 21)
        value = spectral_function(times, {0: np.ones(21)}, energy=0.0)
        assert value == pytest.approx(2.0)

    def test_truncated_window(self):
        """t_max cuts the integration window."""
        times = np.linspace(0, 2, 21)
        value = spectral_function(times, {0: np.ones(21)}, energy=0.0, t_max=1.0)
        assert value == pytest.approx(1.0)

    def test_momentum_phase(self):
        """Offsets pick up e^{ipx}."""
        times = np.linspace(0, 1, 11)
        value = spectral_function(times, {1: np.ones(11)}, energy=0.0, p=math.pi)
        assert value == pytest.approx(-1.0)

    def test_non_uniform_grid(self):
        """Non-uniform time grids are rejected."""
        with pytest.raises(ValidationError):
            spectral_function([0.0, 0.1, 0.3], {0: [1, 1, 1]}, energy=0.0)


class TestQubitEncoding:
    """Two-qubit Pauli forms of the link operators."""

    def test_restrictions_match(self):
        """L^z, (L^z)^2 and U^x restrict to the qutrit operators."""
        assert qubit_encoding().max_mismatch() < 1e-12

    def test_spin_one_only(self):
        """Only n_max = 1 has a qubit encoding."""
        with pytest.raises(UnsupportedError):
            qubit_encoding(2)
