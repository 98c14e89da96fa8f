"""
Gate library and decomposition tests.

Each decomposition is checked against the matrix exponential it stands for.
"""
import math

import numpy as np
import pytest
from scipy.linalg import expm

import config
from errors import ValidationError
from gates import (
    Axis, GateSequence, NativeGateSet, NoiseClass, PauliMode, UxMode, controlled, csum, csum_op,
    decompose_diagonal_rotation, decompose_lzlz, decompose_ux, euler_product, generalized_hadamard,
    lz2_coefficient_scaling, lz2_sequence, lz_values, lzlz_target, qubit_lz2_sequence, qubit_lzlz_sequence, qubit_ux_operator,
    qubit_ux_sequence, residual_up_to_phase, restrict_to_embedding, rotation, rotation_op,
    solve_diagonal_coeffs, su3_euler_fit, subspace_pauli, synthesize_two_qubit, ux_matrix,
)
from qudit_core import haar_unitary, is_unitary


class TestSubspacePauli:
    """Generalized Paulis on a level pair."""

    def test_sigma_y_convention(self):
        """sigma^y_{a,b}|a> = -i|b> and |b> -> i|a>."""
        sy = subspace_pauli(Axis.Y, 0, 2, 3)
        assert sy[2, 0] == -1j
        assert sy[0, 2] == 1j
        assert sy[1, 1] == 0

    def test_embedded_mode(self):
        """Embedded sigma^z acts as identity outside the pair."""
        sz = subspace_pauli(Axis.Z, 0, 1, 3, PauliMode.EMBEDDED)
        assert np.allclose(np.diag(sz), [1, -1, 1])

    def test_invalid_pair(self):
        """Pairs must satisfy 0 <= a < b < d."""
        with pytest.raises(ValidationError):
            subspace_pauli(Axis.X, 1, 1, 3)
        with pytest.raises(ValidationError):
            subspace_pauli(Axis.X, 0, 3, 3)


class TestRotation:
    """Subspace rotations."""

    @pytest.mark.parametrize("axis", ["x", "y", "z"])
    def test_matches_exponential(self, axis):
        """rotation equals exp(i theta sigma) restricted to the pair."""
        theta = 0.731
        sigma = subspace_pauli(axis, 1, 2, 3)
        expected = expm(1j * theta * sigma)
        assert np.allclose(rotation(axis, 1, 2, theta, 3), expected, atol=1e-12)

    def test_ry_on_ground_level(self):
        """R^y_{01}(theta)|0> = cos theta |0> + sin theta |1>."""
        theta = 0.4
        column = rotation(Axis.Y, 0, 1, theta, 3)[:, 0]
        assert np.allclose(column, [math.cos(theta), math.sin(theta), 0])

    def test_rejects_nan_angle(self):
        """Non-finite angles are rejected."""
        with pytest.raises(ValidationError):
            rotation(Axis.X, 0, 1, float("nan"), 3)

    def test_rz_is_virtual(self):
        """R^z gates carry the virtual noise class, others are noisy."""
        assert rotation_op(Axis.Z, 0, 1, 0.2, 3).noise_class is NoiseClass.RZ_VIRTUAL
        assert rotation_op(Axis.Y, 0, 1, 0.2, 3).noise_class is NoiseClass.ONE_QUDIT_NOISY


class TestTwoQuditPrimitives:
    """C_sum, the generalized Hadamard and controlled gates."""

    def test_csum_action(self):
        """C_sum|a, b> = |a, a + b mod d>."""
        m = csum(3)
        for a in range(3):
            for b in range(3):
                col = m[:, a * 3 + b]
                assert col[a * 3 + (a + b) % 3] == 1

    def test_csum_adjoint(self):
        """The adjoint flag gives the inverse."""
        assert np.allclose(csum(3) @ csum(3, adjoint=True), np.eye(9))
        assert np.allclose(np.linalg.matrix_power(csum(5), 5), np.eye(25))

    def test_generalized_hadamard_unitary(self):
        """The d-level Fourier matrix is unitary."""
        assert is_unitary(generalized_hadamard(5))

    def test_controlled_on_level(self):
        """controlled(u, level=0) only acts when the control is |0>."""
        shift = np.roll(np.eye(3), 1, axis=0)
        m = controlled(shift, 3, level=0)
        assert np.allclose(m[:3, :3], shift)
        assert np.allclose(m[3:, 3:], np.eye(6))


class TestDiagonalDecomposition:
    """Diagonal targets as R^z products."""

    def test_solve_reconstructs(self):
        """alpha0 * I + sum alpha_j sigma^z_{j,j+1} reproduces the target."""
        target = [0.3, -1.2, 2.5, 0.0, 4.0]
        coeffs = solve_diagonal_coeffs(target)
        assert np.allclose(coeffs.reconstruct(), target)

    @pytest.mark.parametrize("n_max", [1, 2, 3])
    def test_lz2_exact_including_phase(self, n_max):
        """lz2_sequence equals exp(i theta Lz^2) with its global phase."""
        theta = -0.83
        d = 2 * n_max + 1
        seq = lz2_sequence(theta, n_max)
        target = np.diag(np.exp(1j * theta * lz_values(n_max) ** 2))
        assert np.max(np.abs(seq.compose((d,)) - target)) < config.DECOMPOSITION_TOL

    def test_lz2_qutrit_cost(self):
        """(L^z)^2 on a qutrit needs two virtual R^z gates."""
        counts = lz2_sequence(0.7, 1).counts()
        assert counts[NoiseClass.RZ_VIRTUAL] == 2
        assert counts[NoiseClass.ONE_QUDIT_NOISY] == 0

    def test_coefficient_scaling(self):
        """alpha0 grows quadratically, the largest R^z angle close to cubically."""
        scaling = lz2_coefficient_scaling(range(3, 12))
        assert scaling.alpha0[0] == pytest.approx(4.0)
        assert scaling.alpha0_exponent == pytest.approx(2.0, abs=0.25)
        assert 2.5 < scaling.max_alpha_exponent < 3.1
        with pytest.raises(ValidationError):
            lz2_coefficient_scaling([2])

    def test_zero_angle_is_empty(self):
        """A zero angle gives the empty sequence."""
        assert len(decompose_diagonal_rotation(0.0, [1.0, 0.0, 1.0])) == 0


class TestLzLz:
    """exp(i theta Lz x Lz) in each native gate set."""

    @pytest.mark.parametrize("theta", [0.0, 0.35, -1.1, 2.9])
    def test_csum_native_qutrit(self, theta):
        """The C_sum construction uses three C_sum gates and matches the target."""
        seq = decompose_lzlz(theta, 1, NativeGateSet.CSUM_NATIVE)
        assert seq.counts()[NoiseClass.TWO_QUDIT] == 3
        assert residual_up_to_phase(seq.compose((3, 3)), lzlz_target(theta, 1)) < config.DECOMPOSITION_TOL

    def test_csum_native_five_levels(self):
        """For n_max = 2 the phase layers are re-derived."""
        seq = decompose_lzlz(0.6, 2)
        assert seq.counts()[NoiseClass.TWO_QUDIT] == 5
        assert residual_up_to_phase(seq.compose((5, 5)), lzlz_target(0.6, 2)) < config.DECOMPOSITION_TOL

    def test_lzlz_native_single_gate(self):
        """The L^z L^z native set uses one two-qudit gate."""
        seq = decompose_lzlz(0.6, 1, NativeGateSet.LZLZ_NATIVE)
        assert len(seq) == 1
        assert seq.counts()[NoiseClass.TWO_QUDIT] == 1

    def test_qubit_encoding(self):
        """The eight-CNOT qubit circuit realizes the target on the encoded subspace."""
        theta = 0.47
        seq = qubit_lzlz_sequence(theta)
        assert seq.counts()[NoiseClass.TWO_QUDIT] == 8
        restricted = restrict_to_embedding(seq.compose((2, 2, 2, 2)), 2)
        assert residual_up_to_phase(restricted, lzlz_target(theta, 1)) < config.DECOMPOSITION_TOL


class TestUx:
    """exp(i theta U^x)."""

    def test_qutrit_five_rotations(self):
        """n_max = 1: four R^y and one R^z."""
        theta = 0.9
        seq = decompose_ux(theta, 1)
        counts = seq.counts()
        assert counts[NoiseClass.ONE_QUDIT_NOISY] == 4
        assert counts[NoiseClass.RZ_VIRTUAL] == 1
        target = expm(1j * theta * ux_matrix(1))
        assert residual_up_to_phase(seq.compose((3,)), target) < config.DECOMPOSITION_TOL

    @pytest.mark.parametrize("n_max,c_bound", [(2, 0), (2, 1), (1, 1)])
    def test_eigenbasis_route(self, n_max, c_bound):
        """Larger truncations and the periodic hop go through the eigenbasis."""
        d = 2 * n_max + 1
        theta = -0.55
        seq = decompose_ux(theta, n_max, c_bound)
        target = expm(1j * theta * ux_matrix(n_max, c_bound))
        assert residual_up_to_phase(seq.compose((d,)), target) < config.DECOMPOSITION_TOL

    def test_trotterized_mode(self):
        """Trotterized mode is one R^x per adjacent pair."""
        seq = decompose_ux(0.3, 2, mode=UxMode.TROTTERIZED)
        assert len(seq) == 4
        assert all(op.name == "rx" for op in seq)

    def test_ux_matrix_corner_hop(self):
        """c_bound = 1 adds the (0, d-1) hop."""
        m = ux_matrix(1, 1)
        assert m[0, 2] == pytest.approx(0.5)
        assert ux_matrix(1)[0, 2] == 0
        with pytest.raises(ValidationError):
            ux_matrix(1, 2)


class TestEulerFit:
    """Eight-angle SU(3) Euler form."""

    def test_identity_angles(self):
        """Zero angles give the identity."""
        assert np.allclose(euler_product(np.zeros(8)), np.eye(3))

    def test_fits_random_unitary(self):
        """A Haar-random qutrit unitary is fitted up to a phase."""
        target = haar_unitary(3, 11)
        angles = su3_euler_fit(target, seed=5)
        assert residual_up_to_phase(euler_product(angles), target) < config.EULER_FIT_TOL

    def test_rejects_non_unitary(self):
        """Fit targets must be unitary."""
        with pytest.raises(ValidationError):
            su3_euler_fit(np.ones((3, 3)))


class TestQubitEncoding:
    """Qubit-pair encoding of a qutrit."""

    def test_lz2_on_embedding(self):
        """One R_z on the first qubit realizes exp(i theta Lz^2) exactly."""
        theta = 1.3
        restricted = restrict_to_embedding(qubit_lz2_sequence(theta).compose((2, 2)), 1)
        assert np.allclose(restricted, np.diag(np.exp(1j * theta * lz_values(1) ** 2)))

    def test_ux_operator_restricts(self):
        """The Pauli-string U^x restricts to the qutrit U^x."""
        assert np.allclose(restrict_to_embedding(qubit_ux_operator(), 1), ux_matrix(1))

    @pytest.mark.slow
    def test_synthesize_random(self):
        """Three-CNOT synthesis reproduces a random two-qubit unitary."""
        target = haar_unitary(4, 8)
        seq = synthesize_two_qubit(target, seed=3)
        assert seq.counts()[NoiseClass.TWO_QUDIT] == 3
        assert np.max(np.abs(seq.compose((2, 2)) - target)) < 1e-8

    @pytest.mark.slow
    def test_ux_sequence(self):
        """The synthesized U^x keeps the encoded subspace and matches the target."""
        theta = 0.7
        seq = qubit_ux_sequence(theta)
        target = expm(1j * theta * ux_matrix(1))
        restricted = restrict_to_embedding(seq.compose((2, 2)), 1)
        assert residual_up_to_phase(restricted, target) < config.DECOMPOSITION_TOL


class TestGateSequence:
    """Sequence composition helpers."""

    def test_time_order(self):
        """then() appends later gates on the left of the matrix product."""
        a = rotation_op(Axis.X, 0, 1, 0.3, 3)
        b = rotation_op(Axis.Y, 1, 2, 0.8, 3)
        seq = GateSequence((a,)).then(GateSequence((b,)))
        assert np.allclose(seq.compose((3,)), b.matrix @ a.matrix)

    def test_on_sites(self):
        """on_sites relabels local sites."""
        seq = GateSequence((csum_op(3),)).on_sites([4, 2])
        assert seq.ops[0].sites == (4, 2)

    def test_to_dict(self):
        """to_dict is JSON-friendly."""
        data = GateSequence((rotation_op(Axis.Z, 0, 1, 0.5, 3),), 1j).to_dict()
        assert data["global_phase"] == [0.0, 1.0]
        assert data["gates"][0]["levels"] == [0, 1]
        assert data["gates"][0]["noise_class"] == "rz_virtual"
