"""
Qutrit Pauli noise: channel construction, the gate-class noise policy,
noisy-circuit assembly and two execution backends (density matrix and
Monte-Carlo trajectories over statevectors).
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Sequence, Union

import numpy as np

import config
from errors import UnsupportedError, ValidationError
from gates import Axis, GateOp, NoiseClass, PauliMode, subspace_pauli
from qudit_core import (
    Channel, DensityMatrix, Register, StateVector, _apply_operator, apply_channel, apply_unitary, expectation,
)
from schemas import PauliChannelSpec

if TYPE_CHECKING:
    from circuits import Circuit

logger = logging.getLogger(__name__)

EXACT_EVOLUTION = "exact_evolution"


# === Policy ===

@dataclass(frozen=True)
class NoisePolicy:
    """Partition of gate classes into noisy and noiseless."""
    noisy: frozenset[NoiseClass] = frozenset({NoiseClass.ONE_QUDIT_NOISY, NoiseClass.TWO_QUDIT})

    def __post_init__(self):
        object.__setattr__(self, "noisy", frozenset(NoiseClass(c) for c in self.noisy))

    @property
    def noiseless(self) -> frozenset[NoiseClass]:
        return frozenset(NoiseClass) - self.noisy

    def is_noisy(self, noise_class: NoiseClass) -> bool:
        return noise_class in self.noisy


# === Channels ===

def pauli_terms(spec: PauliChannelSpec) -> list[tuple[str, float, np.ndarray]]:
    """(label, probability, embedded Pauli) for every one-qudit error term."""
    terms = []
    for pair in sorted(spec.one_qudit):
        a, b = int(pair[0]), int(pair[1])
        p = spec.one_qudit[pair]
        if spec.one_qudit_mode == "per_pair":
            p = p / 3
        for axis in Axis:
            terms.append((f"{axis.value}{pair}", p, subspace_pauli(axis, a, b, spec.d, PauliMode.EMBEDDED)))
    return terms


def two_qudit_operators(d: int) -> list[tuple[str, np.ndarray]]:
    """All sigma^alpha_{ij} (x) sigma^beta_{kl}: 81 terms for a qutrit pair."""
    singles = [
        (f"{axis.value}{a}{b}", subspace_pauli(axis, a, b, d, PauliMode.EMBEDDED))
        for a, b in itertools.combinations(range(d), 2)
        for axis in Axis
    ]
    return [(f"{la}.{lb}", np.kron(ma, mb)) for (la, ma), (lb, mb) in itertools.product(singles, singles)]


def _mixture_channel(weights: Sequence[float], unitaries: Sequence[np.ndarray], arity: int, name: str) -> Channel:
    total = float(sum(weights))
    if total >= 1:
        raise ValidationError(f"{name}: total error probability {total:.6g} >= 1")
    kraus = [math.sqrt(1 - total) * np.eye(unitaries[0].shape[0])]
    kraus += [math.sqrt(p) * u for p, u in zip(weights, unitaries) if p > 0]
    return Channel(tuple(kraus), arity=arity, name=name)


def build_1q_channel(spec: PauliChannelSpec) -> Channel:
    """sqrt(1 - sum p) I together with sqrt(p^alpha_ij) sigma^alpha_ij."""
    terms = pauli_terms(spec)
    if not terms:
        return Channel((np.eye(spec.d),), arity=1, name="pauli_1q")
    return _mixture_channel([p for _, p, _ in terms], [m for _, _, m in terms], 1, "pauli_1q")


def build_2q_channel(spec: PauliChannelSpec) -> Channel:
    """
    Two-qudit Pauli channel over all sigma (x) sigma products.

    per_term: every product carries p. total: p is spread uniformly.
    """
    ops = two_qudit_operators(spec.d)
    p = spec.two_qudit.p
    if p == 0:
        return Channel((np.eye(spec.d ** 2),), arity=2, name="pauli_2q")
    each = p if spec.two_qudit.mode == "per_term" else p / len(ops)
    return _mixture_channel([each] * len(ops), [m for _, m in ops], 2, "pauli_2q")


def identity_weight(channel: Channel) -> float:
    """Probability that no error occurs (weight of the identity Kraus operator)."""
    k0 = channel.kraus_ops[0]
    return float(abs(k0[0, 0]) ** 2)


# === Noisy circuits ===

@dataclass(frozen=True)
class NoiseEvent:
    channel: Channel
    sites: tuple[int, ...]


NoisyStep = Union[GateOp, NoiseEvent]


@dataclass(frozen=True, eq=False)
class NoisyCircuit:
    register: Register
    steps: tuple[NoisyStep, ...]
    metadata: dict = field(default_factory=dict)

    @property
    def n_channels(self) -> int:
        return sum(isinstance(s, NoiseEvent) for s in self.steps)

    @property
    def gates(self) -> list[GateOp]:
        return [s for s in self.steps if isinstance(s, GateOp)]


def attach_noise(circuit: "Circuit", spec: PauliChannelSpec, policy: NoisePolicy | None = None) -> NoisyCircuit:
    """Insert the matching Pauli channel after every noisy-class gate."""
    policy = policy or NoisePolicy()
    one, two = build_1q_channel(spec), build_2q_channel(spec)
    register = circuit.register
    steps: list[NoisyStep] = []
    for i, op in enumerate(circuit.sequence):
        if not isinstance(op.noise_class, NoiseClass):
            raise ValidationError(f"gate {i} ({op.name}) has no noise class")
        if op.name == EXACT_EVOLUTION:
            raise UnsupportedError("exact-evolution oracle blocks cannot be made noisy")
        steps.append(op)
        if not policy.is_noisy(op.noise_class):
            continue
        for site in op.sites:
            if register.dims[site] != spec.d:
                raise ValidationError(
                    f"gate {i} ({op.name}) acts on site {site} of dimension {register.dims[site]}; "
                    f"noise spec is for d={spec.d}"
                )
        if len(op.sites) == 1:
            steps.append(NoiseEvent(one, op.sites))
        elif len(op.sites) == 2:
            steps.append(NoiseEvent(two, op.sites))
        else:
            raise UnsupportedError(f"gate {i} ({op.name}) acts on {len(op.sites)} sites; no channel defined")
    return NoisyCircuit(register, tuple(steps), dict(circuit.metadata))


def run_density_matrix(noisy: NoisyCircuit, rho: DensityMatrix) -> DensityMatrix:
    if rho.register != noisy.register:
        raise ValidationError(f"register mismatch: {rho.register.dims} vs {noisy.register.dims}")
    for step in noisy.steps:
        if isinstance(step, GateOp):
            rho = apply_unitary(rho, step.matrix, step.sites)
        else:
            rho = apply_channel(rho, step.channel, step.sites)
    return rho


# === Trajectories ===

@lru_cache(maxsize=64)
def _mixture(channel: Channel) -> tuple[np.ndarray, tuple[np.ndarray, ...]] | None:
    """(probabilities, unitaries) if every Kraus operator is a scaled unitary."""
    weights, unitaries = [], []
    dim = channel.dim
    for k in channel.kraus_ops:
        gram = k.conj().T @ k
        w = float(np.trace(gram).real / dim)
        if not np.allclose(gram, w * np.eye(dim), atol=config.CONSTRUCTION_TOL):
            return None
        weights.append(w)
        unitaries.append(k / math.sqrt(w) if w > 0 else k)
    return np.array(weights) / sum(weights), tuple(unitaries)


def _jump(psi: StateVector, channel: Channel, sites: tuple[int, ...], rng: np.random.Generator) -> StateVector:
    mixture = _mixture(channel)
    if mixture is not None:
        probs, unitaries = mixture
        return apply_unitary(psi, unitaries[rng.choice(len(probs), p=probs)], sites)
    # general Kraus set: state-dependent jump probabilities
    branches = [_apply_operator(psi, k, sites) for k in channel.kraus_ops]
    probs = np.array([b.norm() ** 2 for b in branches])
    chosen = branches[rng.choice(len(branches), p=probs / probs.sum())]
    return StateVector(chosen.register, chosen.amplitudes / chosen.norm())


def sample_trajectory(noisy: NoisyCircuit, psi: StateVector, rng: np.random.Generator) -> StateVector:
    for step in noisy.steps:
        if isinstance(step, GateOp):
            psi = apply_unitary(psi, step.matrix, step.sites)
        else:
            psi = _jump(psi, step.channel, step.sites, rng)
    return psi


def trajectory_expectation(noisy: NoisyCircuit, psi: StateVector, observable: np.ndarray,
                           sites: Sequence[int], trajectories: int, seed: int) -> tuple[float, float]:
    """Monte-Carlo mean of <O> over `trajectories` unravellings and its standard error."""
    if trajectories < 2:
        raise ValidationError(f"need at least 2 trajectories, got {trajectories}")
    rng = np.random.default_rng(seed)
    values = np.array([
        expectation(sample_trajectory(noisy, psi, rng), observable, sites) for _ in range(trajectories)
    ])
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(trajectories))
