"""
Command-line experiment runner.

    python cli.py gate-counts
    python cli.py verify-decompositions
    python cli.py overlap-scan --config scan.json --out overlap.csv
    python cli.py emulate --dt 0.39 --steps 10 --native csum --native lzlz
    python cli.py exact-correlator --config spectral.json

Every CSV starts with `#` metadata lines (config hash, seed, noise mode,
software version); identical config and seed give identical bytes.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
import pydantic

import config
from circuits import correlator_protocol, gate_count_report, readout_statistics, run_circuit, verify_trotter_step
from errors import DecompositionError, QsqedError, ValidationError
from gates import (
    NativeGateSet, decompose_lzlz, decompose_ux, embedding_isometry, euler_product, lz2_sequence, lz_values,
    lzlz_target, qubit_lzlz_sequence, qubit_ux_operator, qubit_ux_sequence, residual_up_to_phase,
    restrict_to_embedding, su3_euler_fit, ux_matrix,
)
from lattice import exact_correlator_series, overlap_scan, source_sink, spectral_function
from qudit_core import derive_seed, haar_unitary
from schemas import (
    CorrelatorRow, ExperimentConfig, GateCountRow, ModelParams, OverlapRow, SignalLossEntry, SpectralRow,
    VerificationRow,
)

logger = logging.getLogger(__name__)

PARTS = ("real", "imag")
VERIFY_ANGLES = 100


# === Config and CSV ===

def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the canonical config JSON; the output path is not part of the experiment."""
    canonical = json.dumps(cfg.model_dump(mode="json", exclude={"out"}), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def load_config(path: Optional[str] = None, **overrides) -> ExperimentConfig:
    """Read a JSON config (or the defaults) and apply non-None overrides with validation."""
    data = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except pydantic.ValidationError as exc:
        raise ValidationError(str(exc)) from exc


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def render_csv(rows: Sequence, cfg: Optional[ExperimentConfig] = None, extra: Sequence[str] = ()) -> str:
    """CSV text with `#` metadata lines; rows are pydantic models or dicts."""
    buffer = io.StringIO()
    if cfg is not None:
        buffer.write(f"# config_hash={config_hash(cfg)}\n")
        buffer.write(f"# seed={cfg.seed}\n")
        buffer.write(f"# noise_mode={cfg.noise_mode}\n")
    buffer.write(f"# software_version={config.SOFTWARE_VERSION}\n")
    for line in extra:
        buffer.write(f"# {line}\n")
    dicts = [r.model_dump() if isinstance(r, pydantic.BaseModel) else dict(r) for r in rows]
    if dicts:
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(list(dicts[0]))
        for d in dicts:
            writer.writerow([_fmt(v) for v in d.values()])
    return buffer.getvalue()


def write_output(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
        logger.info("wrote %s", out)
    else:
        sys.stdout.write(text)


# === verify-decompositions ===

def _angles(seed: int, n: int = VERIFY_ANGLES) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-np.pi, np.pi, n)


def _lz2_residual(seed: int) -> float:
    worst = 0.0
    for n_max in range(1, 6):
        for theta in _angles(seed, 20):
            target = np.diag(np.exp(1j * theta * lz_values(n_max) ** 2))
            composed = lz2_sequence(theta, n_max).compose((2 * n_max + 1,))
            worst = max(worst, float(np.max(np.abs(composed - target))))
    return worst


def _ux_residual(n_max: int, c_bound: int, seed: int) -> float:
    d = 2 * n_max + 1
    evals, vecs = np.linalg.eigh(ux_matrix(n_max, c_bound))
    worst = 0.0
    for theta in _angles(seed):
        target = (vecs * np.exp(1j * theta * evals)) @ vecs.conj().T
        worst = max(worst, residual_up_to_phase(decompose_ux(theta, n_max, c_bound).compose((d,)), target))
    return worst


def _lzlz_residual(n_max: int, seed: int) -> float:
    d = 2 * n_max + 1
    return max(
        residual_up_to_phase(decompose_lzlz(theta, n_max).compose((d, d)), lzlz_target(theta, n_max))
        for theta in _angles(seed)
    )


def _qubit_lzlz_residual(seed: int) -> float:
    return max(
        residual_up_to_phase(restrict_to_embedding(qubit_lzlz_sequence(theta).compose((2, 2, 2, 2)), 2),
                             lzlz_target(theta, 1))
        for theta in _angles(seed, 20)
    )


def _qubit_ux_residual(seed: int) -> float:
    evals, vecs = np.linalg.eigh(qubit_ux_operator())
    iso = embedding_isometry(1)
    worst = 0.0
    for theta in _angles(seed, 3):
        target = (vecs * np.exp(1j * theta * evals)) @ vecs.conj().T
        composed = qubit_ux_sequence(float(theta)).compose((2, 2))
        worst = max(worst, residual_up_to_phase(composed, target))
        leak = np.linalg.norm(composed @ iso - iso @ (iso.T @ composed @ iso))
        worst = max(worst, float(leak))
    return worst


def _euler_residual(seed: int) -> float:
    target = haar_unitary(3, seed)
    return residual_up_to_phase(euler_product(su3_euler_fit(target, seed=seed)), target)


def _source_sink_residual() -> float:
    worst = 0.0
    for n_max in (1, 2, 3):
        ss = source_sink(n_max)
        worst = max(worst, float(np.max(np.abs((ss.split[0] + ss.split[1]) / 2 - ss.plus))))
    return worst


def _trotter_residual(native: NativeGateSet, seed: int) -> float:
    params = ModelParams(n_s=2)
    return max(verify_trotter_step(params, float(dt), native) for dt in np.abs(_angles(seed, 3)) / 4)


def default_checks(seed: int = config.DEFAULT_SEED) -> dict[str, Callable[[], float]]:
    return {
        "lz2(n_max<=5)": lambda: _lz2_residual(seed),
        "ux(n_max=1)": lambda: _ux_residual(1, 0, seed),
        "ux(n_max=2)": lambda: _ux_residual(2, 0, seed),
        "ux(n_max=1, c_bound=1)": lambda: _ux_residual(1, 1, seed),
        "lzlz(csum, n_max=1)": lambda: _lzlz_residual(1, seed),
        "lzlz(csum, n_max=2)": lambda: _lzlz_residual(2, seed),
        "lzlz(qubit)": lambda: _qubit_lzlz_residual(seed),
        "ux(qubit)": lambda: _qubit_ux_residual(seed),
        "su3_euler": lambda: _euler_residual(seed),
        "source_sink_split": _source_sink_residual,
        "trotter_step(csum)": lambda: _trotter_residual(NativeGateSet.CSUM_NATIVE, seed),
        "trotter_step(lzlz)": lambda: _trotter_residual(NativeGateSet.LZLZ_NATIVE, seed),
        "trotter_step(qubit)": lambda: _trotter_residual(NativeGateSet.QUBIT_CNOT, seed),
    }


def cmd_verify_decompositions(checks: Optional[Mapping[str, Callable[[], float]]] = None,
                              seed: int = config.DEFAULT_SEED) -> list[VerificationRow]:
    """Run every decomposition-equivalence check; a check passes below the decomposition tolerance."""
    checks = checks if checks is not None else default_checks(seed)
    rows = []
    for name, check in checks.items():
        try:
            residual = float(check())
        except DecompositionError as exc:
            residual = exc.residual
        passed = bool(np.isfinite(residual) and residual <= config.DECOMPOSITION_TOL)
        if not passed:
            logger.error("decomposition check %s failed: residual %.3e", name, residual)
        rows.append(VerificationRow(name=name, max_residual=residual, tolerance=config.DECOMPOSITION_TOL, passed=passed))
    return rows


# === overlap-scan / gate-counts ===

def cmd_overlap_scan(cfg: ExperimentConfig) -> list[OverlapRow]:
    points = overlap_scan(cfg.scan_n_s, cfg.scan_couplings, cfg.params)
    return [OverlapRow(**vars(p)) for p in points]


def cmd_gate_counts() -> list[GateCountRow]:
    return gate_count_report(1)


# === emulate ===

@dataclass
class SignalLossReport:
    threshold: float
    window: int
    entries: list[SignalLossEntry] = field(default_factory=list)

    def step(self, native: str) -> Optional[int]:
        for entry in self.entries:
            if entry.native == native:
                return entry.loss_step
        raise KeyError(native)

    def lines(self) -> list[str]:
        return [
            f"signal_loss native={e.native} step={'none' if e.loss_step is None else e.loss_step} "
            f"threshold={e.threshold} window={e.window}"
            for e in self.entries
        ]


@dataclass
class EmulationResult:
    rows: list[CorrelatorRow]
    signal_loss: SignalLossReport


def envelope(values: Sequence[float], window: int) -> np.ndarray:
    """max |v| over the forward window [N, N + window), truncated at the end of the series."""
    values = np.abs(np.asarray(values, dtype=float))
    return np.array([values[n:n + window].max() for n in range(len(values))])


def signal_loss_step(noisy: Sequence[float], noiseless: Sequence[float], stat_err: Sequence[float],
                     threshold: float, window: int) -> Optional[int]:
    """First N >= 1 whose noisy envelope drops below threshold * noiseless envelope or under 2 sigma."""
    a_noisy, a_clean = envelope(noisy, window), envelope(noiseless, window)
    for n in range(1, len(a_noisy)):
        ratio = a_noisy[n] / a_clean[n] if a_clean[n] > 0 else 0.0
        if ratio < threshold or a_noisy[n] < 2 * stat_err[n]:
            return n
    return None


def _emulate_native(cfg: ExperimentConfig, native_index: int, native_name: str,
                    exact: Sequence[complex]) -> tuple[list[CorrelatorRow], SignalLossEntry]:
    """Noiseless and noisy circuit series for one native gate set; its shots use streams keyed by native_index."""
    params = cfg.params
    noise = cfg.effective_noise()
    times = [n * cfg.dt for n in range(cfg.steps + 1)]
    site = cfg.source_site
    logger.info("emulating native gate set %s (%d steps, dt=%g)", native_name, cfg.steps, cfg.dt)
    protocol = correlator_protocol(params, cfg.dt, native_name, site)
    clean = protocol.prep.run()
    noisy = run_circuit(protocol.prep, noise)
    rows: list[CorrelatorRow] = []
    noisy_re, clean_re, err_re = [], [], []
    for n_t, t in enumerate(times):
        if n_t:
            clean = protocol.step.run(clean)
            noisy = run_circuit(protocol.step, noise, state=noisy)
        rows.append(CorrelatorRow(n_t=n_t, t=t, native=native_name, provenance="exact",
                                  re=exact[n_t].real, im=exact[n_t].imag))
        values, noisy_values = {}, {}
        for part_index, part in enumerate(PARTS):
            tail = protocol.tails[part]
            values[part] = readout_statistics(tail.run(clean), tail.measurement)
            final = run_circuit(tail, noise, state=noisy)
            seed = derive_seed(cfg.seed, native_index, n_t, part_index)
            noisy_values[part] = readout_statistics(final, tail.measurement, cfg.shots, seed)
            if part == "real":
                noisy_re.append(readout_statistics(final, tail.measurement)[0])
        rows.append(CorrelatorRow(n_t=n_t, t=t, native=native_name, provenance="circuit_noiseless",
                                  re=values["real"][0], im=values["imag"][0]))
        rows.append(CorrelatorRow(
            n_t=n_t, t=t, native=native_name, provenance="circuit_noisy",
            re=noisy_values["real"][0], im=noisy_values["imag"][0],
            stat_err_re=noisy_values["real"][1], stat_err_im=noisy_values["imag"][1],
        ))
        clean_re.append(values["real"][0])
        err_re.append(noisy_values["real"][1])
    step = signal_loss_step(noisy_re, clean_re, err_re, cfg.signal_threshold, cfg.signal_window)
    logger.info("native %s: signal-loss step %s", native_name, step)
    return rows, SignalLossEntry(native=native_name, loss_step=step,
                                 threshold=cfg.signal_threshold, window=cfg.signal_window)


def cmd_emulate(cfg: ExperimentConfig) -> EmulationResult:
    """Exact, noiseless-circuit and noisy-circuit correlator series for each native gate set.

    Native gate sets run on separate threads; rows come back in the order of cfg.natives.
    """
    times = [n * cfg.dt for n in range(cfg.steps + 1)]
    exact = exact_correlator_series(cfg.params, times, "gamma", cfg.source_site, cfg.source_site)
    report = SignalLossReport(cfg.signal_threshold, cfg.signal_window)
    rows: list[CorrelatorRow] = []
    with ThreadPoolExecutor(max_workers=max(1, len(cfg.natives))) as pool:
        futures = [pool.submit(_emulate_native, cfg, index, name, exact) for index, name in enumerate(cfg.natives)]
        for future in futures:
            native_rows, entry = future.result()
            rows.extend(native_rows)
            report.entries.append(entry)
    return EmulationResult(rows, report)


# === exact-correlator ===

def cmd_exact_correlator(cfg: ExperimentConfig) -> tuple[list[CorrelatorRow], list[SpectralRow]]:
    params = cfg.params
    times = [n * cfg.dt for n in range(cfg.steps + 1)]
    y = cfg.source_site
    series = exact_correlator_series(params, times, cfg.initial, y, y)
    rows = [
        CorrelatorRow(n_t=n, t=t, native="none", provenance="exact", re=c.real, im=c.imag)
        for n, (t, c) in enumerate(zip(times, series))
    ]
    spectral_rows = []
    if cfg.spectral is not None:
        spec = cfg.spectral
        by_offset = {x - y: exact_correlator_series(params, times, cfg.initial, x, y) for x in range(params.n_s)}
        for energy in np.linspace(spec.e_min, spec.e_max, spec.n_e):
            g = spectral_function(times, by_offset, float(energy), spec.p, spec.t_max)
            spectral_rows.append(SpectralRow(energy=float(energy), p=spec.p, re=g.real, im=g.imag))
    return rows, spectral_rows


# === Entry point ===

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="root seed (unsigned 64-bit)")
    common.add_argument("--out", help="output CSV path (stdout when omitted)")
    common.add_argument("--dt", type=float, help="Trotter step size, e.g. 0.235, 0.31 or 0.39")
    common.add_argument("--steps", type=int, help="largest number of Trotter steps")
    common.add_argument("--native", action="append", choices=[n.value for n in NativeGateSet],
                        help="native gate set (repeatable)")
    common.add_argument("--noise-mode", choices=["total", "table-total", "per-term", "off"])
    common.add_argument("--two-qudit-total", type=float, help="per-gate two-qutrit error budget of the total mode")
    common.add_argument("--shots", type=int)
    common.add_argument("--log-level", default=None, help="overrides QSQED_LOG_LEVEL")

    parser = argparse.ArgumentParser(prog="qsqed", description="Qudit simulations of truncated scalar QED")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("verify-decompositions", "check every gate decomposition against its target"),
        ("overlap-scan", "ground-state overlaps over lattice size and coupling"),
        ("gate-counts", "gate costs of the Trotter building blocks"),
        ("emulate", "noiseless and noisy correlator emulation"),
        ("exact-correlator", "exact correlator and spectral function"),
    ):
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config.configure_logging(args.log_level)
    try:
        cfg = load_config(
            args.config, seed=args.seed, out=args.out, dt=args.dt, steps=args.steps, natives=args.native,
            noise_mode=args.noise_mode, two_qudit_total=args.two_qudit_total, shots=args.shots,
        )
        out = cfg.out
        if args.command == "verify-decompositions":
            rows = cmd_verify_decompositions(seed=cfg.seed)
            write_output(render_csv(rows, cfg), out)
            return 0 if all(r.passed for r in rows) else 1
        if args.command == "overlap-scan":
            write_output(render_csv(cmd_overlap_scan(cfg), cfg), out)
        elif args.command == "gate-counts":
            write_output(render_csv(cmd_gate_counts(), cfg), out)
        elif args.command == "emulate":
            result = cmd_emulate(cfg)
            write_output(render_csv(result.rows, cfg, result.signal_loss.lines()), out)
        elif args.command == "exact-correlator":
            rows, spectral = cmd_exact_correlator(cfg)
            write_output(render_csv(rows, cfg), out)
            if spectral:
                target = f"{Path(out).with_suffix('')}.spectral.csv" if out else None
                write_output(render_csv(spectral, cfg), target)
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DecompositionError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    except QsqedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
