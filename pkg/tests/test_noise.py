"""
Pauli noise tests: channel construction, noise placement and the
density-matrix and trajectory backends.
"""
import numpy as np
import pytest

from circuits import Circuit, build_trotter_step
from errors import UnsupportedError, ValidationError
from gates import GateOp, GateSequence, NoiseClass, csum_op, rotation_op
from lattice import build_lz, gamma_state
from noise import (
    EXACT_EVOLUTION, NoiseEvent, NoisePolicy, attach_noise, build_1q_channel, build_2q_channel,
    identity_weight, pauli_terms, run_density_matrix, trajectory_expectation, two_qudit_operators,
)
from qudit_core import DensityMatrix, Register, apply_channel, expectation, make_basis_state
from schemas import PauliChannelSpec, TwoQuditNoise


def table_spec(mode="total"):
    return PauliChannelSpec(two_qudit=TwoQuditNoise(mode=mode))


class TestChannelConstruction:
    """One- and two-qutrit Pauli channels."""

    def test_one_qudit_terms(self):
        """Three level pairs times three axes."""
        terms = pauli_terms(table_spec())
        assert len(terms) == 9
        assert {label for label, _, _ in terms} >= {"x01", "y02", "z12"}

    def test_one_qudit_identity_weight(self):
        """Per-axis rates: no-error weight is 1 - 3 * sum of the table."""
        channel = build_1q_channel(table_spec())
        assert identity_weight(channel) == pytest.approx(1 - 3 * (0.00038 + 0.00143 + 0.00068))

    def test_per_pair_mode(self):
        """per_pair splits each pair's rate over the three axes."""
        spec = PauliChannelSpec(one_qudit_mode="per_pair")
        channel = build_1q_channel(spec)
        assert identity_weight(channel) == pytest.approx(1 - (0.00038 + 0.00143 + 0.00068))

    def test_two_qudit_operator_count(self):
        """Nine single-qutrit Paulis give 81 products."""
        assert len(two_qudit_operators(3)) == 81

    @pytest.mark.parametrize("mode,expected", [("total", 1 - 0.003), ("per_term", 1 - 81 * 0.003)])
    def test_two_qudit_modes(self, mode, expected):
        """total spreads p over the products, per_term gives each product p."""
        assert identity_weight(build_2q_channel(table_spec(mode))) == pytest.approx(expected)

    def test_rejects_probability_above_one(self):
        """Per-term rates summing past 1 are rejected."""
        spec = PauliChannelSpec(two_qudit=TwoQuditNoise(mode="per_term", p=0.02))
        with pytest.raises(ValidationError):
            build_2q_channel(spec)

    def test_zero_spec_is_identity(self):
        """The zero spec gives single-Kraus identity channels."""
        spec = PauliChannelSpec.zero()
        assert len(build_1q_channel(spec).kraus_ops) == 1
        assert len(build_2q_channel(spec).kraus_ops) == 1

    def test_channels_are_cptp(self):
        """Both channels keep density matrices valid."""
        reg = Register.qudits(2)
        psi = make_basis_state(reg, [0, 1])
        rho = DensityMatrix.from_statevector(psi)
        spec = table_spec("per_term")
        rho = apply_channel(rho, build_1q_channel(spec), [0])
        rho = apply_channel(rho, build_2q_channel(spec), [0, 1])
        assert abs(np.trace(rho.matrix) - 1) < 1e-12
        assert rho.violations() == []

    def test_bad_level_pair(self):
        """Pair keys must name two increasing levels."""
        with pytest.raises(ValueError):
            PauliChannelSpec(one_qudit={"10": 0.01})
        with pytest.raises(ValueError):
            PauliChannelSpec(one_qudit={"03": 0.01})


class TestNoisePlacement:
    """Which gates receive a channel."""

    def test_rz_is_noiseless(self, small_params):
        """Virtual R^z gates get no channel under the default policy."""
        circuit = build_trotter_step(small_params, 0.39)
        noisy = attach_noise(circuit, table_spec())
        counts = circuit.counts()
        assert noisy.n_channels == counts[NoiseClass.ONE_QUDIT_NOISY] + counts[NoiseClass.TWO_QUDIT]
        for before, after in zip(noisy.steps, noisy.steps[1:]):
            if isinstance(after, NoiseEvent):
                assert after.sites == before.sites

    def test_custom_policy(self, small_params):
        """A policy that includes R^z noises every gate."""
        circuit = build_trotter_step(small_params, 0.39)
        policy = NoisePolicy(noisy=frozenset(NoiseClass))
        assert attach_noise(circuit, table_spec(), policy).n_channels == len(circuit.sequence)
        assert NoisePolicy().noiseless == frozenset({NoiseClass.RZ_VIRTUAL})

    def test_rejects_exact_evolution(self):
        """Oracle blocks cannot be made noisy."""
        reg = Register.qudits(2)
        op = GateOp(EXACT_EVOLUTION, np.eye(9), (0, 1), NoiseClass.TWO_QUDIT)
        with pytest.raises(UnsupportedError):
            attach_noise(Circuit(reg, GateSequence((op,))), table_spec())

    def test_rejects_three_site_gate(self):
        """No channel exists for gates on three sites."""
        reg = Register.qudits(3)
        op = GateOp("big", np.eye(27), (0, 1, 2), NoiseClass.TWO_QUDIT)
        with pytest.raises(UnsupportedError):
            attach_noise(Circuit(reg, GateSequence((op,))), table_spec())

    def test_rejects_dimension_mismatch(self):
        """A qutrit spec cannot be attached to a qubit gate."""
        reg = Register.qudits(1, 2)
        op = GateOp("x", np.array([[0, 1], [1, 0]]), (0,), NoiseClass.ONE_QUDIT_NOISY)
        with pytest.raises(ValidationError):
            attach_noise(Circuit(reg, GateSequence((op,))), table_spec())


class TestBackends:
    """Density-matrix and trajectory execution."""

    def _circuit(self, small_params):
        return build_trotter_step(small_params, 0.39)

    def test_zero_noise_matches_statevector(self, small_params):
        """With the zero spec the density-matrix run is the pure state."""
        circuit = self._circuit(small_params)
        psi = gamma_state(small_params)
        rho = run_density_matrix(attach_noise(circuit, PauliChannelSpec.zero()), DensityMatrix.from_statevector(psi))
        out = circuit.run(psi)
        assert np.max(np.abs(rho.matrix - np.outer(out.amplitudes, out.amplitudes.conj()))) < 1e-12

    def test_noisy_run_is_valid(self, small_params):
        """Noisy evolution keeps trace one and positivity."""
        circuit = self._circuit(small_params)
        rho = run_density_matrix(
            attach_noise(circuit, table_spec("per_term")),
            DensityMatrix.from_statevector(gamma_state(small_params)),
        )
        assert rho.violations() == []

    def test_register_mismatch(self, small_params):
        """The initial state must live on the circuit register."""
        noisy = attach_noise(self._circuit(small_params), table_spec())
        rho = DensityMatrix.from_statevector(make_basis_state(Register.qudits(3), [0, 0, 0]))
        with pytest.raises(ValidationError):
            run_density_matrix(noisy, rho)

    def test_trajectories_match_density_matrix(self):
        """Trajectory averages converge to the density-matrix expectation."""
        reg = Register.qudits(2)
        seq = GateSequence((
            rotation_op("y", 0, 1, 0.7, 3, site=0),
            csum_op(3, 0, 1),
            rotation_op("x", 1, 2, 0.4, 3, site=1),
            csum_op(3, 1, 0),
        ))
        spec = PauliChannelSpec(one_qudit={"01": 0.03, "12": 0.02}, two_qudit=TwoQuditNoise(p=0.2))
        noisy = attach_noise(Circuit(reg, seq), spec)
        psi = make_basis_state(reg, [0, 0])
        lz = build_lz(1)
        exact = expectation(run_density_matrix(noisy, DensityMatrix.from_statevector(psi)), lz, [1])
        mean, err = trajectory_expectation(noisy, psi, lz, [1], trajectories=400, seed=17)
        assert err > 0
        assert abs(mean - exact) < 5 * err + 1e-3

    def test_trajectories_are_seeded(self):
        """Same seed, same estimate."""
        reg = Register.qudits(1)
        seq = GateSequence((rotation_op("y", 0, 1, 0.7, 3),))
        noisy = attach_noise(Circuit(reg, seq), PauliChannelSpec(one_qudit={"01": 0.1}))
        psi = make_basis_state(reg, [0])
        lz = build_lz(1)
        first = trajectory_expectation(noisy, psi, lz, [0], trajectories=50, seed=3)
        assert first == trajectory_expectation(noisy, psi, lz, [0], trajectories=50, seed=3)
        with pytest.raises(ValidationError):
            trajectory_expectation(noisy, psi, lz, [0], trajectories=1, seed=3)
