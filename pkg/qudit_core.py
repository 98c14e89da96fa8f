"""
Dense qudit simulation substrate.

Registers of heterogeneous local dimension, statevectors, density matrices,
unitary and channel application on site subsets, expectation values and
seeded shot sampling.

Basis ordering: site 0 is the most significant mixed-radix digit, so the flat
index of |i_0, i_1, ..., i_{n-1}> is sum_k i_k * prod_{j>k} d_j.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy.stats import unitary_group

import config
from errors import DimensionCapError, ValidationError

logger = logging.getLogger(__name__)

MAX_EMBED_DIM = 4096


# === Types ===

@dataclass(frozen=True)
class Register:
    """Per-site local dimensions; site labels are 0..n-1."""
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not dims:
            raise ValidationError("register needs at least one site")
        for site, d in enumerate(dims):
            if d < 2:
                raise ValidationError(f"site {site}: local dimension {d} < 2")
        cap = config.dim_cap()
        if self.total_dim > cap:
            raise DimensionCapError(self.total_dim, cap)

    @classmethod
    def qudits(cls, n_sites: int, d: int = 3, ancilla_dim: int | None = None) -> "Register":
        """n_sites working qudits, optionally followed by one ancilla site."""
        dims = [d] * n_sites
        if ancilla_dim is not None:
            dims.append(ancilla_dim)
        return cls(tuple(dims))

    @property
    def n_sites(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def sub_dim(self, sites: Sequence[int]) -> int:
        return math.prod(self.dims[s] for s in sites)

    def check_sites(self, sites: Sequence[int]) -> tuple[int, ...]:
        sites = tuple(int(s) for s in sites)
        if not sites:
            raise ValidationError("empty site list")
        if len(set(sites)) != len(sites):
            raise ValidationError(f"repeated site in {sites}")
        for s in sites:
            if not 0 <= s < self.n_sites:
                raise ValidationError(f"site {s} outside register of {self.n_sites} sites")
        return sites


@dataclass(frozen=True, eq=False)
class StateVector:
    register: Register
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (self.register.total_dim,):
            raise ValidationError(
                f"{amps.size} amplitudes for a register of dimension {self.register.total_dim}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.register.dims)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    register: Register
    matrix: np.ndarray

    def __post_init__(self):
        dim = self.register.total_dim
        rho = np.array(self.matrix, dtype=complex)
        if rho.shape != (dim, dim):
            raise ValidationError(f"density matrix shape {rho.shape} for register dimension {dim}")
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)

    @classmethod
    def from_statevector(cls, state: StateVector) -> "DensityMatrix":
        amps = state.amplitudes
        return cls(state.register, np.outer(amps, amps.conj()))

    def tensor(self) -> np.ndarray:
        return self.matrix.reshape(self.register.dims * 2)

    def violations(self) -> list[str]:
        """Broken density-matrix invariants (empty when valid)."""
        problems = []
        rho = self.matrix
        if np.max(np.abs(rho - rho.conj().T)) > config.CONSERVATION_TOL:
            problems.append("not Hermitian")
        if abs(np.trace(rho) - 1) > config.CONSERVATION_TOL:
            problems.append(f"trace {np.trace(rho).real:.15f}")
        min_eig = float(np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)))
        if min_eig < -config.CONSTRUCTION_TOL:
            problems.append(f"negative eigenvalue {min_eig:.3e}")
        return problems


State = Union[StateVector, DensityMatrix]


@dataclass(frozen=True, eq=False)
class Channel:
    """Kraus representation of a CPTP map on `arity` sites."""
    kraus_ops: tuple[np.ndarray, ...]
    arity: int = 1
    name: str = "channel"

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise ValidationError(f"{self.name}: empty Kraus set")
        dim = ops[0].shape[0]
        for k in ops:
            if k.shape != (dim, dim):
                raise ValidationError(f"{self.name}: Kraus operators of mixed shape {k.shape}")
        completeness = sum(k.conj().T @ k for k in ops)
        residual = float(np.max(np.abs(completeness - np.eye(dim))))
        if residual > config.CONSTRUCTION_TOL:
            raise ValidationError(f"{self.name}: incomplete Kraus set (|sum K^dag K - I| = {residual:.3e})")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    @cached_property
    def superoperator(self) -> np.ndarray:
        """sum_k K (x) conj(K), acting on (row, column) index pairs."""
        return sum(np.kron(k, k.conj()) for k in self.kraus_ops)


@dataclass(frozen=True)
class MeasurementRecord:
    outcome: tuple[int, ...]
    count: int
    seed: int


# === Matrix predicates ===

def is_unitary(u: np.ndarray, tol: float = config.CONSTRUCTION_TOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.allclose(u @ u.conj().T, np.eye(u.shape[0]), atol=tol, rtol=0)


def is_hermitian(m: np.ndarray, tol: float = config.CONSTRUCTION_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.allclose(m, m.conj().T, atol=tol, rtol=0)


def haar_unitary(d: int, seed: int | np.random.Generator | None = None) -> np.ndarray:
    """Haar-random d x d unitary."""
    return unitary_group.rvs(d, random_state=np.random.default_rng(seed))


# === Tensor kernels ===

def _contract(tensor: np.ndarray, op: np.ndarray, axes: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    k = len(axes)
    op_t = op.reshape(tuple(dims) * 2)
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def apply_local_operator(vector: np.ndarray, op: np.ndarray, sites: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Apply an arbitrary local operator to a flat vector (no checks)."""
    tensor = np.asarray(vector).reshape(tuple(dims))
    sub = [dims[s] for s in sites]
    return _contract(tensor, op, sites, sub).reshape(-1)


def _apply_operator(state: State, op: np.ndarray, sites: tuple[int, ...]):
    reg = state.register
    sub = [reg.dims[s] for s in sites]
    if isinstance(state, StateVector):
        out = _contract(state.tensor(), op, sites, sub)
        return StateVector(reg, out.reshape(-1))
    n = reg.n_sites
    rho = _contract(state.tensor(), op, sites, sub)
    rho = _contract(rho, op.conj(), [n + s for s in sites], sub)
    dim = reg.total_dim
    return DensityMatrix(reg, rho.reshape(dim, dim))


def _checked_operator(state: State, op: np.ndarray, sites: Sequence[int]) -> tuple[np.ndarray, tuple[int, ...]]:
    sites = state.register.check_sites(sites)
    op = np.asarray(op, dtype=complex)
    sub = state.register.sub_dim(sites)
    if op.shape != (sub, sub):
        raise ValidationError(f"operator shape {op.shape} does not match sites {sites} (dimension {sub})")
    return op, sites


# === Operations ===

def make_basis_state(register: Register, indices: Sequence[int]) -> StateVector:
    indices = tuple(int(i) for i in indices)
    if len(indices) != register.n_sites:
        raise ValidationError(f"{len(indices)} indices for {register.n_sites} sites")
    for site, (i, d) in enumerate(zip(indices, register.dims)):
        if not 0 <= i < d:
            raise ValidationError(f"site {site}: basis index {i} outside 0..{d - 1}")
    amps = np.zeros(register.total_dim, dtype=complex)
    amps[np.ravel_multi_index(indices, register.dims)] = 1.0
    return StateVector(register, amps)


def product_state(register: Register, local_vectors: Sequence[np.ndarray]) -> StateVector:
    """Tensor product of one normalized vector per site."""
    if len(local_vectors) != register.n_sites:
        raise ValidationError(f"{len(local_vectors)} local vectors for {register.n_sites} sites")
    amps = np.ones(1, dtype=complex)
    for site, (v, d) in enumerate(zip(local_vectors, register.dims)):
        v = np.asarray(v, dtype=complex)
        if v.shape != (d,):
            raise ValidationError(f"site {site}: local vector of shape {v.shape}, expected ({d},)")
        amps = np.kron(amps, v)
    return StateVector(register, amps)


def apply_unitary(state: State, u: np.ndarray, sites: Sequence[int]) -> State:
    """u|psi> or u rho u^dag with u acting on `sites` (in the given order)."""
    u, sites = _checked_operator(state, u, sites)
    if not is_unitary(u):
        raise ValidationError(f"operator on sites {sites} is not unitary")
    return _apply_operator(state, u, sites)


def apply_channel(rho: DensityMatrix, channel: Channel, sites: Sequence[int]) -> DensityMatrix:
    if not isinstance(rho, DensityMatrix):
        raise ValidationError("channels act on density matrices")
    if len(tuple(sites)) != channel.arity:
        raise ValidationError(f"{channel.name} acts on {channel.arity} site(s), got {tuple(sites)}")
    _, sites = _checked_operator(rho, channel.kraus_ops[0], sites)
    reg = rho.register
    sub = [reg.dims[s] for s in sites]
    axes = list(sites) + [reg.n_sites + s for s in sites]
    out = _contract(rho.tensor(), channel.superoperator, axes, sub + sub)
    return DensityMatrix(reg, out.reshape(reg.total_dim, reg.total_dim))


def expectation(state: State, observable: np.ndarray, sites: Sequence[int]) -> float:
    observable, sites = _checked_operator(state, observable, sites)
    if not is_hermitian(observable):
        raise ValidationError(f"observable on sites {sites} is not Hermitian")
    reg = state.register
    sub = [reg.dims[s] for s in sites]
    if isinstance(state, StateVector):
        value = np.vdot(state.amplitudes, _contract(state.tensor(), observable, sites, sub).reshape(-1))
    else:
        o_rho = _contract(state.tensor(), observable, sites, sub).reshape(reg.total_dim, reg.total_dim)
        value = np.trace(o_rho)
    if abs(value.imag) > config.CONSTRUCTION_TOL:
        raise ValidationError(f"expectation has imaginary part {value.imag:.3e}; state is not valid")
    return float(value.real)


def probabilities(state: State) -> np.ndarray:
    """Computational-basis outcome distribution (flat, mixed-radix order)."""
    if isinstance(state, StateVector):
        p = np.abs(state.amplitudes) ** 2
    else:
        p = np.clip(np.real(np.diag(state.matrix)), 0.0, None)
    return p / p.sum()


def sample_measurements(state: State, shots: int, seed: int) -> list[MeasurementRecord]:
    if shots < 1:
        raise ValidationError(f"shots must be >= 1, got {shots}")
    probs = probabilities(state)
    counts = np.random.default_rng(seed).multinomial(shots, probs)
    records = []
    for flat in np.flatnonzero(counts):
        outcome = tuple(int(i) for i in np.unravel_index(flat, state.register.dims))
        records.append(MeasurementRecord(outcome=outcome, count=int(counts[flat]), seed=int(seed)))
    return records


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b>"""
    if a.register != b.register:
        raise ValidationError(f"register mismatch: {a.register.dims} vs {b.register.dims}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def project_site(state: StateVector, site: int, level: int) -> tuple[float, StateVector]:
    """
    Project `site` onto |level> and drop it from the register.

    Returns the branch probability and the normalized remaining state.
    """
    reg = state.register
    (site,) = reg.check_sites([site])
    if not 0 <= level < reg.dims[site]:
        raise ValidationError(f"site {site}: level {level} outside 0..{reg.dims[site] - 1}")
    if reg.n_sites == 1:
        raise ValidationError("cannot project out the only site")
    branch = np.take(state.tensor(), level, axis=site).reshape(-1)
    prob = float(np.vdot(branch, branch).real)
    rest = Register(tuple(d for s, d in enumerate(reg.dims) if s != site))
    if prob == 0.0:
        return 0.0, StateVector(rest, branch)
    return prob, StateVector(rest, branch / np.sqrt(prob))


def embed_operator(op: np.ndarray, sites: Sequence[int], register: Register) -> np.ndarray:
    """Full-register matrix of a local operator (dense oracle for small registers)."""
    dim = register.total_dim
    if dim > MAX_EMBED_DIM:
        raise DimensionCapError(dim, MAX_EMBED_DIM)
    sites = register.check_sites(sites)
    op = np.asarray(op, dtype=complex)
    sub = [register.dims[s] for s in sites]
    identity = np.eye(dim, dtype=complex).reshape(register.dims + (dim,))
    return _contract(identity, op, sites, sub).reshape(dim, dim)


# === Seeds ===

def derive_seed(root: int, *keys: int) -> int:
    """Deterministic 64-bit child seed of `root` for the stream labelled by `keys`."""
    seq = np.random.SeedSequence(entropy=int(root), spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
