"""
Truncated (1+1)d scalar QED on an open chain of links.

Operators and Hamiltonian for arbitrary spin truncation n_max, exact
evolution and ground-state oracles, the one-site approximate ground state,
source/sink operators, correlators, the spectral function and the spin-1
qubit encoding.

H = (U + 2Y)/2 sum_i (L^z_i)^2 + Y sum_i L^z_i L^z_{i+1} - X sum_i U^x_i
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import LinAlgError, eigh
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

import config
from errors import DimensionCapError, EigensolveError, UnsupportedError, ValidationError
from gates import (
    Axis, PauliMode, QUBIT_EMBEDDING, embedding_isometry, lz_values, qubit_ux_operator,
    report_deviation, restrict_to_embedding, subspace_pauli, ux_matrix,
)
from qudit_core import MAX_EMBED_DIM, Register, StateVector, apply_local_operator, product_state
from schemas import ModelParams

logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-9


# === Operators ===

def build_lz(n_max: int) -> np.ndarray:
    return np.diag(lz_values(n_max))


def build_ux(n_max: int, c_bound: int = 0) -> np.ndarray:
    return ux_matrix(n_max, c_bound).real


def z2_operator(n_max: int) -> np.ndarray:
    """diag(1, ..., 1, -1): -1 on the lowest L^z level."""
    z = np.ones(2 * n_max + 1)
    z[-1] = -1
    return np.diag(z)


# === Hamiltonian ===

@dataclass(frozen=True)
class LocalTerm:
    coeff: float
    matrix: np.ndarray
    sites: tuple[int, ...]
    label: str


@dataclass(frozen=True, eq=False)
class HamiltonianTerms:
    params: ModelParams
    onsite_coeff: float
    bond_coeff: float
    hop_coeff: float
    terms: tuple[LocalTerm, ...]

    @property
    def register(self) -> Register:
        return Register.qudits(self.params.n_s, self.params.local_dim)

    @property
    def dim(self) -> int:
        return self.params.total_dim

    def matvec(self, vector: np.ndarray) -> np.ndarray:
        dims = self.register.dims
        out = np.zeros_like(vector)
        for term in self.terms:
            out = out + term.coeff * apply_local_operator(vector, term.matrix, term.sites, dims)
        return out

    def linear_operator(self) -> LinearOperator:
        return LinearOperator((self.dim, self.dim), matvec=self.matvec, dtype=float)

    def _dense(self, terms: Sequence[LocalTerm]) -> np.ndarray:
        if self.dim > MAX_EMBED_DIM:
            raise DimensionCapError(self.dim, MAX_EMBED_DIM)
        d, n_s = self.params.local_dim, self.params.n_s
        h = np.zeros((self.dim, self.dim))
        for term in terms:
            left = d ** term.sites[0]
            right = d ** (n_s - term.sites[-1] - 1)
            h += term.coeff * np.kron(np.kron(np.eye(left), term.matrix), np.eye(right))
        return h

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense matrix built from Kronecker products of the local terms."""
        return self._dense(self.terms)

    def part(self, label: str) -> np.ndarray:
        """Dense matrix of the terms labelled `label` ("lz2", "lzlz" or "ux")."""
        return self._dense([t for t in self.terms if t.label == label])

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        try:
            return eigh(self.matrix)
        except LinAlgError as exc:
            raise EigensolveError(f"dense eigensolve failed for n_s={self.params.n_s}: {exc}") from exc


def build_hamiltonian(params: ModelParams) -> HamiltonianTerms:
    # Register construction enforces the dimension cap
    Register.qudits(params.n_s, params.local_dim)
    lz, ux = build_lz(params.n_max), build_ux(params.n_max, params.c_bound)
    onsite = (params.U + 2 * params.Y) / 2
    terms = []
    for i in range(params.n_s):
        terms.append(LocalTerm(onsite, lz @ lz, (i,), "lz2"))
        terms.append(LocalTerm(-params.X, ux, (i,), "ux"))
    for i in range(params.n_s - 1):
        terms.append(LocalTerm(params.Y, np.kron(lz, lz), (i, i + 1), "lzlz"))
    return HamiltonianTerms(params, onsite, params.Y, -params.X, tuple(terms))


def _as_matrix(h: HamiltonianTerms | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(h, HamiltonianTerms):
        return h.spectrum
    h = np.asarray(h)
    if not np.allclose(h, h.conj().T, atol=config.CONSTRUCTION_TOL, rtol=0):
        raise ValidationError("Hamiltonian is not Hermitian")
    try:
        return eigh(h)
    except LinAlgError as exc:
        raise EigensolveError(str(exc)) from exc


def exact_evolve(h: HamiltonianTerms | np.ndarray, t: float, state: StateVector) -> StateVector:
    """e^{-iHt}|psi> by spectral decomposition."""
    evals, evecs = _as_matrix(h)
    if evecs.shape[0] != state.register.total_dim:
        raise ValidationError(f"Hamiltonian of dimension {evecs.shape[0]} vs state of {state.register.total_dim}")
    coeffs = evecs.conj().T @ state.amplitudes
    return StateVector(state.register, evecs @ (np.exp(-1j * evals * t) * coeffs))


def evolution_operator(h: HamiltonianTerms | np.ndarray, t: float) -> np.ndarray:
    evals, evecs = _as_matrix(h)
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T


class GroundState(NamedTuple):
    energy: float
    state: StateVector
    degenerate: bool


def _fix_phase(vector: np.ndarray) -> np.ndarray:
    pivot = vector[np.argmax(np.abs(vector))]
    return vector * (abs(pivot) / pivot)


def exact_ground_state(h: HamiltonianTerms) -> GroundState:
    """Lowest eigenpair; dense for small registers, Lanczos on the local terms otherwise."""
    if h.dim <= config.dense_max_dim():
        evals, evecs = h.spectrum
        energies, vector = evals[:2], evecs[:, 0]
    else:
        logger.info("iterative ground state for n_s=%d (dimension %d)", h.params.n_s, h.dim)
        v0 = np.ones(h.dim) / math.sqrt(h.dim)
        try:
            energies, vectors = eigsh(h.linear_operator(), k=2, which="SA", v0=v0, tol=1e-12)
        except ArpackNoConvergence as exc:
            raise EigensolveError(f"Lanczos did not converge for n_s={h.params.n_s}") from exc
        order = np.argsort(energies)
        energies, vector = energies[order], vectors[:, order[0]]
    degenerate = len(energies) > 1 and abs(energies[1] - energies[0]) < DEGENERACY_TOL
    if degenerate:
        logger.warning("degenerate ground space (gap %.2e); returning one minimal eigenvector", energies[1] - energies[0])
    vector = _fix_phase(vector / np.linalg.norm(vector))
    return GroundState(float(energies[0]), StateVector(h.register, vector), bool(degenerate))


# === One-site ground state ===

def published_b(coupling: float) -> float:
    """Printed closed form for the middle amplitude (not an eigenvector of the one-site operator)."""
    return (coupling + 1 - math.sqrt((coupling - 1) ** 2 + 32)) / 4


@dataclass(frozen=True)
class OneSiteGroundState:
    b: float
    norm: float
    amplitudes: np.ndarray
    rho1: float
    rho2: float
    published_b: float

    @property
    def norm_prime(self) -> float:
        """Norm of U^+ applied to the one-site state."""
        return math.sqrt(1 + self.b ** 2) / self.norm


def onesite_ground_state(params: ModelParams) -> OneSiteGroundState:
    """Closed-form (1, b, 1)/N ground state of one spin-1 link."""
    if params.n_max != 1:
        raise UnsupportedError(f"closed-form one-site state needs n_max=1, got {params.n_max}")
    if params.X <= 0:
        raise ValidationError(f"closed form needs X > 0, got {params.X}")
    a, h = (params.U + 2 * params.Y) / 2, params.X / 2
    b = (a + math.sqrt(a * a + 8 * h * h)) / (2 * h)
    norm = math.sqrt(2 + b * b)
    printed = published_b(params.U)
    if abs(printed - b) > config.CONSTRUCTION_TOL:
        report_deviation(
            "onesite-b",
            f"printed one-site amplitude b={printed:.6f} is not an eigenvector; using b={b:.6f}",
        )
    return OneSiteGroundState(
        b=b,
        norm=norm,
        amplitudes=np.array([1.0, b, 1.0]) / norm,
        rho1=math.acos(1 / norm),
        rho2=math.asin(-1 / math.sqrt(norm * norm - 1)),
        published_b=printed,
    )


def onesite_hamiltonian(params: ModelParams) -> np.ndarray:
    return build_hamiltonian(params.model_copy(update={"n_s": 1})).matrix


def onesite_ground_vector(params: ModelParams) -> np.ndarray:
    """Minimal eigenvector of the one-site operator, any n_max, sign-fixed positive."""
    _, vecs = eigh(onesite_hamiltonian(params))
    v = vecs[:, 0]
    return v * np.sign(v[np.argmax(np.abs(v))])


def gamma_state(params: ModelParams) -> StateVector:
    """|Gamma>: the one-site ground state on every link."""
    v = onesite_ground_vector(params)
    return product_state(Register.qudits(params.n_s, params.local_dim), [v] * params.n_s)


def zero_flux_state(params: ModelParams) -> StateVector:
    """|1...1>_q: every link in the L^z = 0 level."""
    local = np.zeros(params.local_dim)
    local[params.n_max] = 1
    return product_state(Register.qudits(params.n_s, params.local_dim), [local] * params.n_s)


@dataclass(frozen=True)
class OverlapPoint:
    n_s: int
    coupling: float
    overlap_gamma: float
    overlap_111: float
    degenerate: bool


def overlap_scan(n_s_values: Sequence[int], couplings: Sequence[float],
                 base: ModelParams | None = None) -> list[OverlapPoint]:
    """|<Gamma|Omega>|^2 and |<1...1|Omega>|^2 over a (n_s, coupling) grid."""
    base = base or ModelParams()
    cap = config.dim_cap()
    rows = []
    for n_s in n_s_values:
        dim = base.local_dim ** n_s
        if dim > cap:
            logger.warning("overlap scan truncated at n_s=%d: dimension %d exceeds cap %d", n_s, dim, cap)
            break
        for coupling in couplings:
            params = base.model_copy(update={"n_s": n_s, "U": float(coupling)})
            ground = exact_ground_state(build_hamiltonian(params))
            omega = ground.state.amplitudes
            rows.append(OverlapPoint(
                n_s=n_s,
                coupling=float(coupling),
                overlap_gamma=float(abs(np.vdot(gamma_state(params).amplitudes, omega)) ** 2),
                overlap_111=float(abs(np.vdot(zero_flux_state(params).amplitudes, omega)) ** 2),
                degenerate=ground.degenerate,
            ))
        logger.info("overlap scan: n_s=%d done", n_s)
    return rows


# === Source / sink ===

@dataclass(frozen=True, eq=False)
class SourceSink:
    plus: np.ndarray
    minus: np.ndarray
    split: tuple[np.ndarray, np.ndarray]
    parts_hermitian: bool
    parts_unitary: bool

    @property
    def minus_split(self) -> tuple[np.ndarray, np.ndarray]:
        """Unitary parts averaging to U^-."""
        return tuple(p.conj().T for p in self.split)


def _split_residual(parts: Sequence[np.ndarray], target: np.ndarray) -> float:
    return float(np.max(np.abs((parts[0] + parts[1]) / 2 - target)))


def source_sink(n_max: int) -> SourceSink:
    d = 2 * n_max + 1
    plus = np.zeros((d, d))
    for i in range(1, d):
        plus[i - 1, i] = 1
    parts = None
    if n_max == 1:
        x01 = subspace_pauli(Axis.X, 0, 1, 3, PauliMode.EMBEDDED)
        x12 = subspace_pauli(Axis.X, 1, 2, 3, PauliMode.EMBEDDED)
        z01 = subspace_pauli(Axis.Z, 0, 1, 3, PauliMode.EMBEDDED)
        z2 = z2_operator(1)
        printed = (x01 @ x12, x01 @ z2 @ x12)
        if _split_residual(printed, plus) < config.CONSERVATION_TOL:
            parts = printed
        else:
            report_deviation(
                "source-sink-split",
                "printed source/sink split does not average to U^+; using (X12 X01 + X12 Z01 X01)/2",
            )
            parts = (x12 @ x01, x12 @ z01 @ x01)
    else:
        shift = np.roll(np.eye(d), -1, axis=0)
        z = np.eye(d)
        z[0, 0] = -1
        parts = (shift, shift @ z)
    parts = tuple(np.asarray(p, dtype=complex) for p in parts)
    residual = _split_residual(parts, plus)
    if residual > config.CONSERVATION_TOL:
        raise ValidationError(f"no valid source/sink split for n_max={n_max} (residual {residual:.2e})")
    hermitian = all(np.allclose(p, p.conj().T, atol=config.CONSTRUCTION_TOL) for p in parts)
    unitary = all(np.allclose(p @ p.conj().T, np.eye(d), atol=config.CONSTRUCTION_TOL) for p in parts)
    return SourceSink(plus=plus, minus=plus.T.copy(), split=parts, parts_hermitian=hermitian, parts_unitary=unitary)


# === Correlators ===

def initial_state(params: ModelParams, initial: str) -> StateVector:
    if initial in ("gamma", "Γ"):
        return gamma_state(params)
    if initial in ("omega", "Ω"):
        return exact_ground_state(build_hamiltonian(params)).state
    raise ValidationError(f"initial state must be 'gamma' or 'omega', got {initial!r}")


def exact_correlator_series(params: ModelParams, times: Sequence[float], initial: str = "gamma",
                            x: int = 0, y: int = 0) -> np.ndarray:
    """<psi| e^{iHt} U^-_x e^{-iHt} U^+_y |psi> for each t."""
    for site in (x, y):
        if not 0 <= site < params.n_s:
            raise ValidationError(f"site {site} outside chain of {params.n_s} sites")
    h = build_hamiltonian(params)
    psi = initial_state(params, initial)
    ss = source_sink(params.n_max)
    dims = psi.register.dims
    phi = apply_local_operator(psi.amplitudes, ss.plus, (y,), dims)
    evals, evecs = h.spectrum
    psi_c, phi_c = evecs.conj().T @ psi.amplitudes, evecs.conj().T @ phi
    out = np.empty(len(times), dtype=complex)
    for k, t in enumerate(times):
        phase = np.exp(-1j * evals * t)
        psi_t, phi_t = evecs @ (phase * psi_c), evecs @ (phase * phi_c)
        out[k] = np.vdot(psi_t, apply_local_operator(phi_t, ss.minus, (x,), dims))
    return out


def exact_correlator(params: ModelParams, t: float, initial: str = "gamma", x: int = 0, y: int = 0) -> complex:
    return complex(exact_correlator_series(params, [t], initial, x, y)[0])


def spectral_function(times: Sequence[float], series: Mapping[int, Sequence[complex]],
                      energy: float, p: float = 0.0, t_max: float | None = None) -> complex:
    """sum_x int_0^t_max dt C(x, t) e^{-iEt + ipx} by the trapezoidal rule."""
    times = np.asarray(times, dtype=float)
    if not series or times.size == 0:
        raise ValidationError("empty correlator series")
    if times.size > 1:
        steps = np.diff(times)
        if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
            raise ValidationError("time grid is not uniform")
    t_max = times[-1] if t_max is None else t_max
    if t_max > times[-1] + 1e-12 or t_max < times[0]:
        raise ValidationError(f"t_max={t_max} outside the time grid [{times[0]}, {times[-1]}]")
    mask = times <= t_max + 1e-12
    kernel = np.exp(-1j * energy * times[mask])
    total = 0j
    for x, values in series.items():
        values = np.asarray(values, dtype=complex)
        if values.shape != times.shape:
            raise ValidationError(f"series for x={x} has {values.size} points for {times.size} times")
        total += np.exp(1j * p * x) * trapezoid(values[mask] * kernel, times[mask])
    return complex(total)


# === Qubit encoding ===

@dataclass(frozen=True, eq=False)
class QubitEncoding:
    lz: np.ndarray
    lz2: np.ndarray
    ux: np.ndarray
    embedding: tuple[int, ...]

    def isometry(self, n_qutrits: int = 1) -> np.ndarray:
        return embedding_isometry(n_qutrits)

    def restricted(self, name: str) -> np.ndarray:
        return restrict_to_embedding(getattr(self, name), 1)

    def max_mismatch(self) -> float:
        qutrit = {"lz": build_lz(1), "lz2": build_lz(1) @ build_lz(1), "ux": build_ux(1)}
        return max(float(np.max(np.abs(self.restricted(k) - v))) for k, v in qutrit.items())


def qubit_encoding(n_max: int = 1) -> QubitEncoding:
    """Two-qubit Pauli-string forms of L^z, (L^z)^2 and U^x."""
    if n_max != 1:
        raise UnsupportedError(f"qubit encoding is defined for n_max=1 only, got {n_max}")
    z, i2 = np.diag([1.0, -1.0]), np.eye(2)
    z1, z2 = np.kron(z, i2), np.kron(i2, z)
    encoding = QubitEncoding(
        lz=(z2 + z1 @ z2) / 2,
        lz2=(np.eye(4) + z1) / 2,
        ux=qubit_ux_operator().real,
        embedding=QUBIT_EMBEDDING,
    )
    mismatch = encoding.max_mismatch()
    if mismatch > config.CONSERVATION_TOL:
        raise ValidationError(f"qubit encoding does not reproduce the qutrit operators (mismatch {mismatch:.2e})")
    return encoding
