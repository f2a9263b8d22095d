"""
Optimizer Module
Haar-random starts, constrained local optimization of the figure of merit over U(n),
and multistart campaigns
"""

import logging
import time
from dataclasses import asdict, dataclass
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy.linalg import expm, polar, qr
from scipy.optimize import minimize

from src.compiler import (DEFAULT_NODE_CEILING, EvaluationPlan, compile_plan, evaluate,
                          evaluate_with_gradient)
from src.evolve import UnitaryMatrix
from src.exceptions import ConfigError
from src.fock import AncillaSpec
from src.objective import (figure_of_merit, figure_of_merit_gradient, pattern,
                           success_probability)
from src.records import CampaignSummary, RunRecord, append_record, read_records, summary_path
from src.utils import format_duration, validate_optimizer_section

logger = logging.getLogger(__name__)

SUMMARY_CHECKPOINT_EVERY = 10

# line search cannot improve further at a kink of f (SLSQP exit 8, BFGS exit 2)
STALLED_STATUS = {'constrained': 8, 'exponential': 2}


@dataclass
class OptimizerConfig:
    """Local optimizer and campaign settings"""

    max_iterations: int = 1000
    f_tolerance: float = 1e-10
    constraint_tolerance: float = 1e-9
    eps_zero: float = 1e-9
    restarts: int = 100
    seed: int = 0
    parameterization: str = 'constrained'

    def __post_init__(self):
        is_valid, error = validate_optimizer_section(asdict(self))
        if not is_valid:
            raise ConfigError(error)

    @classmethod
    def from_mapping(cls, section: Optional[Mapping[str, Any]],
                     **overrides) -> 'OptimizerConfig':
        """Build from a config section; keyword overrides win when not None"""
        values = dict(section or {})
        is_valid, error = validate_optimizer_section(values)
        if not is_valid:
            raise ConfigError(error)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def run_rng(master_seed: int, run_index: int) -> np.random.Generator:
    """Independent stream for one run, derived from the master seed by counter"""
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=(run_index,)))


def haar_unitary(n: int, rng: np.random.Generator) -> UnitaryMatrix:
    """
    Sample U(n) from the Haar measure

    Args:
        n: Dimension
        rng: Seeded generator

    Returns:
        Validated UnitaryMatrix
    """
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = qr(z)
    d = np.diag(r)
    return UnitaryMatrix(q * (d / np.abs(d)))


def to_variables(matrix: np.ndarray) -> np.ndarray:
    """(Re U, Im U) flattened row-major into 2 n^2 reals"""
    return np.concatenate([matrix.real.ravel(), matrix.imag.ravel()])


def from_variables(x: np.ndarray, n: int) -> np.ndarray:
    return (x[:n * n] + 1j * x[n * n:]).reshape(n, n)


def orthonormality_constraints(x: np.ndarray, n: int) -> np.ndarray:
    """
    n^2 real equations: Re<r_i, r_j> - delta_ij for i <= j and Im<r_i, r_j> for i < j
    """
    gram = from_variables(x, n)
    gram = gram @ gram.conj().T
    upper = np.triu_indices(n)
    strict = np.triu_indices(n, k=1)
    return np.concatenate([(gram - np.eye(n))[upper].real, gram[strict].imag])


def orthonormality_jacobian(x: np.ndarray, n: int) -> np.ndarray:
    """Analytic Jacobian of orthonormality_constraints, shape (n^2, 2 n^2)"""
    a = x[:n * n].reshape(n, n)
    b = x[n * n:].reshape(n, n)
    offset = n * n
    jacobian = np.zeros((n * n, 2 * n * n))
    row = 0
    for i, j in zip(*np.triu_indices(n)):
        jacobian[row, i * n:(i + 1) * n] += a[j]
        jacobian[row, j * n:(j + 1) * n] += a[i]
        jacobian[row, offset + i * n:offset + (i + 1) * n] += b[j]
        jacobian[row, offset + j * n:offset + (j + 1) * n] += b[i]
        row += 1
    for i, j in zip(*np.triu_indices(n, k=1)):
        jacobian[row, i * n:(i + 1) * n] -= b[j]
        jacobian[row, j * n:(j + 1) * n] += b[i]
        jacobian[row, offset + i * n:offset + (i + 1) * n] += a[j]
        jacobian[row, offset + j * n:offset + (j + 1) * n] -= a[i]
        row += 1
    return jacobian


def _hermitian(h: np.ndarray, n: int) -> np.ndarray:
    """Hermitian matrix from n^2 reals: diagonal, then Re and Im of the strict upper triangle"""
    matrix = np.diag(h[:n]).astype(complex)
    upper = np.triu_indices(n, k=1)
    m = len(upper[0])
    matrix[upper] = h[n:n + m] + 1j * h[n + m:]
    matrix[(upper[1], upper[0])] = h[n:n + m] - 1j * h[n + m:]
    return matrix


def _optimize_constrained(plan: EvaluationPlan, start: np.ndarray, cfg: OptimizerConfig):
    n = plan.n

    def objective(x):
        with np.errstate(over='ignore', invalid='ignore'):
            table, gradient = evaluate_with_gradient(
                plan, UnitaryMatrix(from_variables(x, n), validate=False), cfg.eps_zero)
            return figure_of_merit(table), figure_of_merit_gradient(table, gradient)

    last_finite = [to_variables(start)]

    def remember(x):
        if np.all(np.isfinite(x)):
            last_finite[0] = np.copy(x)

    result = minimize(
        objective,
        to_variables(start),
        jac=True,
        method='SLSQP',
        callback=remember,
        constraints=[{
            'type': 'eq',
            'fun': orthonormality_constraints,
            'jac': orthonormality_jacobian,
            'args': (n,),
        }],
        options={'maxiter': cfg.max_iterations, 'ftol': cfg.f_tolerance},
    )
    if not np.all(np.isfinite(result.x)):
        result.success = False
        result.status = -1
        result.message = f"non-finite iterate, kept iteration before it ({result.message})"
        return from_variables(last_finite[0], n), result
    return from_variables(result.x, n), result


def _optimize_exponential(plan: EvaluationPlan, start: np.ndarray, cfg: OptimizerConfig):
    n = plan.n

    def unitary_of(h):
        return start @ expm(1j * _hermitian(h, n))

    def objective(h):
        table = evaluate(plan, UnitaryMatrix(unitary_of(h), validate=False), cfg.eps_zero)
        return figure_of_merit(table)

    result = minimize(objective, np.zeros(n * n), method='BFGS',
                      options={'maxiter': cfg.max_iterations, 'gtol': 1e-6})
    return unitary_of(result.x), result


def local_optimize(plan: EvaluationPlan, start: UnitaryMatrix, cfg: OptimizerConfig,
                   run_index: int = 0) -> RunRecord:
    """
    Locally minimize f from ``start``

    Args:
        plan: Compiled evaluation plan
        start: Start unitary (need not be validated)
        cfg: Optimizer settings
        run_index: Index recorded in the run record

    Returns:
        RunRecord; non-convergence is flagged, not raised
    """
    if start.n != plan.n:
        raise ConfigError(f"Start unitary has n={start.n}, plan expects n={plan.n}")

    began = time.perf_counter()
    if cfg.parameterization == 'exponential':
        raw, result = _optimize_exponential(plan, start.matrix, cfg)
    else:
        raw, result = _optimize_constrained(plan, start.matrix, cfg)

    message = str(result.message)
    finite = bool(np.all(np.isfinite(raw)))
    if not finite:
        # nothing usable from the optimizer; report the start instead
        raw = start.matrix
        message = f"non-finite iterate ({message})"
    violation = float(np.max(np.abs(raw @ raw.conj().T - np.eye(plan.n))))
    stalled = getattr(result, 'status', None) == STALLED_STATUS[cfg.parameterization]
    converged = (finite and (bool(result.success) or stalled)
                 and violation <= cfg.constraint_tolerance)
    projected, _ = polar(raw)
    final = UnitaryMatrix(projected, tolerance=cfg.constraint_tolerance)

    table = evaluate(plan, final, cfg.eps_zero)
    record = RunRecord(
        run_index=run_index,
        seed=cfg.seed,
        start_hash=start.fingerprint(),
        unitary=final.to_dict(),
        f=figure_of_merit(table),
        p_succ=success_probability(table),
        pattern=list(pattern(table).values),
        iterations=int(getattr(result, 'nit', 0)),
        converged=converged,
        wall_time=time.perf_counter() - began,
        constraint_violation=violation,
        message=message,
    )
    if converged:
        logger.debug(f"Run {run_index}: f={record.f:.9f}, P_succ={record.p_succ:.9f}, "
                     f"{record.iterations} iterations")
    else:
        logger.warning(f"Run {run_index} did not converge: {record.message} "
                       f"(violation {violation:.2e})")
    return record


_WORKER: Dict[str, Any] = {}


def _init_worker(plan: EvaluationPlan, cfg: OptimizerConfig):
    _WORKER['plan'] = plan
    _WORKER['cfg'] = cfg


def _run_one(run_index: int) -> RunRecord:
    plan, cfg = _WORKER['plan'], _WORKER['cfg']
    start = haar_unitary(plan.n, run_rng(cfg.seed, run_index))
    return local_optimize(plan, start, cfg, run_index)


def _check_resumable(record: RunRecord, spec: AncillaSpec, n: int,
                      cfg: OptimizerConfig, output: str):
    """Refuse to resume a records file written by a different campaign"""
    if record.seed != cfg.seed:
        raise ConfigError(f"{output} holds runs with seed {record.seed}, campaign seed is {cfg.seed}")
    if record.ancilla is not None and record.ancilla != spec.key:
        raise ConfigError(f"{output} holds runs for ancilla {record.ancilla}, not {spec.key}")
    if record.n is not None and record.n != n:
        raise ConfigError(f"{output} holds runs with n={record.n}, campaign has n={n}")


def campaign(spec: AncillaSpec, n: int, runs: int, cfg: OptimizerConfig,
             parallelism: int = 1, output: Optional[str] = None,
             node_ceiling: int = DEFAULT_NODE_CEILING,
             cache_directory: Optional[str] = None,
             plan: Optional[EvaluationPlan] = None) -> CampaignSummary:
    """
    Run independent local optimizations from Haar-random starts

    Args:
        spec: Ancilla
        n: Mode count
        runs: Number of run indices 0..runs-1
        cfg: Optimizer settings; cfg.seed is the master seed
        parallelism: Worker processes
        output: Optional JSON Lines records file; existing run indices are skipped
        node_ceiling: Compile resource ceiling
        cache_directory: Optional plan cache directory
        plan: Precompiled plan (compiled here when None)

    Returns:
        CampaignSummary over all runs, including resumed ones
    """
    if runs < 1:
        raise ConfigError(f"runs must be >= 1, got {runs}")
    if plan is None:
        plan = compile_plan(spec, n, node_ceiling=node_ceiling, cache_directory=cache_directory)

    summary = CampaignSummary(
        ancilla=spec.to_dict(),
        label=spec.label,
        n=n,
        k=spec.photon_count,
        master_seed=cfg.seed,
        optimizer=cfg.to_dict(),
        plan=plan.summary(),
    )

    done = set()
    if output:
        previous, skipped = read_records(output)
        for record in previous:
            _check_resumable(record, spec, n, cfg, output)
            if record.run_index < runs and record.run_index not in done:
                summary.add(record)
                done.add(record.run_index)
        if previous:
            logger.info(f"Resuming campaign: {len(done)} runs already in {output}"
                        + (f", {skipped} corrupt lines skipped" if skipped else ""))

    pending = [i for i in range(runs) if i not in done]
    logger.info(f"Campaign {spec.key}, n={n}: {len(pending)} runs on {parallelism} worker(s)")
    began = time.perf_counter()

    def collect(record: RunRecord):
        record.ancilla = spec.key
        record.n = n
        summary.add(record)
        if output:
            append_record(record, output)
            if summary.runs % SUMMARY_CHECKPOINT_EVERY == 0:
                summary.save_to_json(str(summary_path(output)))

    if parallelism <= 1 or len(pending) <= 1:
        _init_worker(plan, cfg)
        for run_index in pending:
            collect(_run_one(run_index))
    else:
        with Pool(parallelism, initializer=_init_worker, initargs=(plan, cfg)) as pool:
            for record in pool.imap_unordered(_run_one, pending):
                collect(record)

    summary.records.sort(key=lambda r: r.run_index)
    if output:
        summary.save_to_json(str(summary_path(output)))
    best = summary.best_p_succ
    logger.info(f"Campaign finished in {format_duration(time.perf_counter() - began)}: "
                f"best P_succ = {best if best is not None else 'n/a'}")
    return summary


def perturbation_study(plan: EvaluationPlan, unitary: UnitaryMatrix,
                       magnitudes: Sequence[float], seed: int = 0,
                       cfg: Optional[OptimizerConfig] = None,
                       keep_tolerance: float = 1e-7) -> List[Dict[str, Any]]:
    """
    Re-optimize from Gaussian-perturbed copies of a scheme

    Args:
        plan: Evaluation plan matching the unitary
        unitary: Scheme to perturb
        magnitudes: Standard deviations of the complex Gaussian noise
        seed: Noise seed
        cfg: Optimizer settings
        keep_tolerance: Largest P_succ change that still counts as kept

    Returns:
        One entry per magnitude with the reference and re-optimized P_succ
    """
    cfg = cfg or OptimizerConfig()
    reference = success_probability(evaluate(plan, unitary, cfg.eps_zero))
    rng = np.random.default_rng(seed)
    outcomes = []
    for magnitude in magnitudes:
        noise = (rng.standard_normal((plan.n, plan.n))
                 + 1j * rng.standard_normal((plan.n, plan.n))) / np.sqrt(2)
        start = UnitaryMatrix(unitary.matrix + magnitude * noise, validate=False)
        record = local_optimize(plan, start, cfg)
        kept = abs(record.p_succ - reference) <= keep_tolerance
        outcomes.append({
            'magnitude': float(magnitude),
            'reference_p_succ': reference,
            'final_p_succ': record.p_succ,
            'final_f': record.f,
            'converged': record.converged,
            'kept': kept,
        })
        logger.info(f"Perturbation {magnitude:.1e}: P_succ {reference:.9f} -> "
                    f"{record.p_succ:.9f} ({'kept' if kept else 'left'})")
    return outcomes


def default_output_path(directory: str, spec: AncillaSpec, n: int) -> str:
    return str(Path(directory) / f"{spec.key}_n{n}.jsonl")
