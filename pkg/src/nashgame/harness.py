"""Experiment orchestration: config loading, runs, sweeps, and persistence.

Configs are JSON; trajectories are CSV with 17-significant-digit floats so
parse-back is exact; full records are JSON with deterministic key order.
Reruns of the same config and seed are byte-identical (wall-clock time is
stored but excluded from identity).
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NashGameError
from .game import (
    EquilibriumCertificate,
    GameSpec,
    PreferenceMatrix,
    random_preference_matrix,
    random_ref_logits,
    solve_equilibrium,
)
from .neural import NEURAL_ALGORITHMS, MlpPolicy, mlp_forward, mlp_init, neural_step
from .records import MetricRow, RunRecord, is_finite_row, rows_from_csv, rows_to_csv
from .solvers import (
    LOGIT_ABORT,
    SolverRunConfig,
    make_estimator,
    metric_row,
    run_solver,
)
from .bounds import optimizer_to_theory_eta, theorem_step_size

SEED_ENV_VAR = "NASHGAME_SEED"


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved experiment: one game, several solver runs."""

    matrix_spec: dict
    ref_spec: dict
    beta: float
    algorithms: tuple[SolverRunConfig, ...]
    policy_class: str = "tabular"
    init: dict | str = "ref"
    qre_tol: float = 1e-12
    qre_max_iters: int = 10**6
    plot_floor: float = 1e-6
    output_dir: str | None = None

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix_spec,
            "ref": self.ref_spec,
            "beta": self.beta,
            "policy_class": self.policy_class,
            "init": self.init,
            "qre_tol": self.qre_tol,
            "qre_max_iters": self.qre_max_iters,
            "plot_floor": self.plot_floor,
            "output_dir": self.output_dir,
            "algorithms": [a.to_dict() for a in self.algorithms],
        }

    def build_matrix(self) -> PreferenceMatrix:
        if "entries" in self.matrix_spec:
            return PreferenceMatrix.from_dict(self.matrix_spec)
        return random_preference_matrix(int(self.matrix_spec["seed"]), int(self.matrix_spec["n"]))

    def build_ref_logits(self, n: int) -> np.ndarray:
        if "logits" in self.ref_spec:
            return np.asarray(self.ref_spec["logits"], dtype=np.float64)
        return random_ref_logits(int(self.ref_spec["seed"]), n)

    def build_initial_logits(self, game: GameSpec) -> np.ndarray:
        if isinstance(self.init, dict):
            return np.asarray(self.init["logits"], dtype=np.float64)
        if self.init == "uniform":
            return np.zeros(game.n)
        return game.ref_logits.copy()


def _require(data: dict, key: str):
    if key not in data:
        raise ConfigError(f"missing required field {key!r}", field=key)
    return data[key]


def _resolve_eta(entry: dict, beta: float, n: int) -> float:
    has_eta = "eta" in entry
    has_opt = "eta_optimizer" in entry
    if has_eta and has_opt:
        raise ConfigError("give either eta or eta_optimizer, not both", field="eta")
    if has_opt:
        return optimizer_to_theory_eta(float(entry["eta_optimizer"]), beta, n)
    if not has_eta:
        raise ConfigError("missing required field 'eta'", field="eta")
    if entry["eta"] == "auto_theorem":
        return theorem_step_size(beta)
    return float(entry["eta"])


def _resolve_mode(entry: dict) -> tuple[str, float, int]:
    mode = entry.get("mode", "exact")
    if mode == "exact":
        return "exact", 0.0, 0
    if isinstance(mode, dict):
        kind = mode.get("kind")
        if kind == "gaussian":
            return "gaussian", float(_require(mode, "sigma")), 0
        if kind == "sampled":
            return "sampled", 0.0, int(_require(mode, "n_samples"))
    # flat form, as emitted by serialized configs
    if mode == "gaussian":
        return "gaussian", float(_require(entry, "sigma")), 0
    if mode == "sampled":
        return "sampled", 0.0, int(_require(entry, "n_samples"))
    raise ConfigError(f"unrecognized mode {mode!r}", field="mode")


def parse_config(data: dict, seed_override: int | None = None) -> ExperimentConfig:
    """Validate raw JSON data and resolve every default explicitly."""
    matrix_spec = dict(_require(data, "matrix"))
    ref_spec = dict(_require(data, "ref"))
    beta = float(_require(data, "beta"))
    if beta <= 0:
        raise ConfigError("beta must be positive", field="beta")
    if "entries" in matrix_spec:
        n = int(matrix_spec["n"])
    else:
        _require(matrix_spec, "seed")
        n = int(_require(matrix_spec, "n"))
    policy_class = data.get("policy_class", "tabular")
    if policy_class not in ("tabular", "neural"):
        raise ConfigError(f"unknown policy_class {policy_class!r}", field="policy_class")
    if policy_class == "neural" and "seed" not in ref_spec:
        raise ConfigError("neural runs need ref = {'seed': ...}", field="ref")
    if "logits" in ref_spec and len(ref_spec["logits"]) != n:
        raise ConfigError("ref logits length must match matrix size", field="ref")

    raw_algorithms = _require(data, "algorithms")
    if not raw_algorithms:
        raise ConfigError("at least one algorithm entry is required", field="algorithms")
    if seed_override is not None:
        if "entries" not in matrix_spec:
            matrix_spec["seed"] = seed_override
        if "logits" not in ref_spec:
            ref_spec["seed"] = seed_override

    algorithms = []
    for entry in raw_algorithms:
        mode, sigma, n_samples = _resolve_mode(entry)
        algorithm = _require(entry, "algorithm")
        if policy_class == "neural" and algorithm not in NEURAL_ALGORITHMS:
            raise ConfigError(
                f"algorithm {algorithm!r} is not available for neural policies",
                field="algorithms",
            )
        seed = seed_override if seed_override is not None else int(_require(entry, "seed"))
        try:
            cfg = SolverRunConfig(
                algorithm=algorithm,
                eta=_resolve_eta(entry, beta, n),
                iters=int(_require(entry, "iters")),
                seed=seed,
                mode=mode,
                sigma=sigma,
                n_samples=n_samples,
                mixture_gamma=entry.get("mixture_gamma", "auto"),
                metric_every=int(entry.get("metric_every", 1)),
                record_half=bool(entry.get("record_half", False)),
                enforce_theorem_step=bool(entry.get("enforce_theorem_step", False)),
                label=entry.get("label"),
            )
        except NashGameError as exc:
            raise ConfigError(str(exc), field="algorithms") from exc
        algorithms.append(cfg)

    init = data.get("init", "ref")
    if isinstance(init, dict):
        if len(init.get("logits", ())) != n:
            raise ConfigError("init logits length must match matrix size", field="init")
    elif init not in ("ref", "uniform"):
        raise ConfigError(f"unknown init {init!r}", field="init")

    return ExperimentConfig(
        matrix_spec=matrix_spec,
        ref_spec=ref_spec,
        beta=beta,
        algorithms=tuple(algorithms),
        policy_class=policy_class,
        init=init,
        qre_tol=float(data.get("qre_tol", 1e-12)),
        qre_max_iters=int(data.get("qre_max_iters", 10**6)),
        plot_floor=float(data.get("plot_floor", 1e-6)),
        output_dir=data.get("output_dir"),
    )


def env_seed_override() -> int | None:
    """Integer value of NASHGAME_SEED when set; it replaces every seed."""
    env = os.environ.get(SEED_ENV_VAR)
    if env is None:
        return None
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from exc


def load_config(path: str) -> ExperimentConfig:
    """Load and validate an experiment config file.

    The NASHGAME_SEED environment variable, when set, overrides every seed
    in the file (generators and per-run seeds alike).
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_config(data, seed_override=env_seed_override())


def run_neural(
    game: GameSpec,
    config: SolverRunConfig,
    initial_policy: MlpPolicy,
    certificate: EquilibriumCertificate,
) -> tuple[RunRecord, MlpPolicy]:
    """Train a fresh copy of the initial network with the configured update."""
    start = time.perf_counter()
    policy = initial_policy.copy()
    estimator = make_estimator(config)
    gamma = config.resolved_gamma(game.beta)
    echo = config.to_dict()
    echo["mixture_gamma"] = gamma if config.algorithm == "nash_md" else 0.0
    echo["policy_class"] = "neural"

    logits = mlp_forward(policy)
    rows = [metric_row(game, certificate, logits, 0)]
    status, error = "ok", None
    for t in range(1, config.iters + 1):
        try:
            neural_step(game, policy, config.algorithm, estimator, config.eta, gamma)
            logits = mlp_forward(policy)
            if not np.isfinite(logits).all() or np.abs(logits).max() > LOGIT_ABORT:
                raise NashGameError("logits left the representable range")
        except (NashGameError, FloatingPointError) as exc:
            status, error = "diverged", f"{exc} at iteration {t}"
            break
        if t % config.metric_every == 0 or t == config.iters:
            row = metric_row(game, certificate, logits, t)
            rows.append(row)
            if not is_finite_row(row):
                status, error = "diverged", f"non-finite metric at iteration {t}"
                break

    return RunRecord(
        config=echo,
        certificate=certificate.to_dict(),
        rows=rows,
        final_logits=[float(x) for x in logits],
        status=status,
        error=error,
        rng_draws=estimator.draws,
        wall_clock_s=time.perf_counter() - start,
    ), policy


def _record_name(index: int, config: SolverRunConfig) -> str:
    return f"{index:02d}_{config.label or config.algorithm}"


def run_experiment(config: ExperimentConfig, out_dir: str | None = None) -> list[RunRecord]:
    """Solve the equilibrium once, then execute every configured run.

    Records are written as soon as each run finishes so partial results
    survive an interrupted sweep; failures are flagged on the record and
    the remaining runs continue.
    """
    out_dir = out_dir or config.output_dir
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    matrix = config.build_matrix()
    initial_policy = None
    if config.policy_class == "neural":
        initial_policy = mlp_init(int(config.ref_spec["seed"]), matrix.n)
        ref_logits = mlp_forward(initial_policy)
    else:
        ref_logits = config.build_ref_logits(matrix.n)
    game = GameSpec(matrix=matrix, ref_logits=ref_logits, beta=config.beta)
    certificate = solve_equilibrium(game, tol=config.qre_tol, max_iters=config.qre_max_iters)

    records = []
    for i, run_cfg in enumerate(config.algorithms):
        try:
            if config.policy_class == "neural":
                record, policy = run_neural(game, run_cfg, initial_policy, certificate)
                if out_dir:
                    ckpt = os.path.join(out_dir, _record_name(i, run_cfg) + "_policy.json")
                    with open(ckpt, "w") as fh:
                        json.dump(policy.to_dict(), fh, sort_keys=True)
                    record.checkpoint_path = ckpt
            else:
                initial = config.build_initial_logits(game)
                record = run_solver(game, run_cfg, initial, certificate)
        except NashGameError as exc:
            record = RunRecord(
                config=run_cfg.to_dict(),
                certificate=certificate.to_dict(),
                rows=[],
                final_logits=[],
                status="error",
                error=str(exc),
            )
        records.append(record)
        if out_dir:
            write_record(record, os.path.join(out_dir, _record_name(i, run_cfg)))
    return records


def _sweep_worker(args) -> list[RunRecord]:
    config, out_dir = args
    return run_experiment(config, out_dir)


def run_sweep(
    configs: list[ExperimentConfig],
    parallelism: int = 1,
    out_dirs: list[str | None] | None = None,
) -> list[RunRecord]:
    """Run independent experiments, optionally in parallel processes.

    Output is identical to sequential execution because every run owns its
    random streams; parallelism only changes wall-clock time.
    """
    if out_dirs is None:
        out_dirs = [c.output_dir for c in configs]
    jobs = list(zip(configs, out_dirs))
    if parallelism <= 1 or len(jobs) <= 1:
        results = [_sweep_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    return [record for batch in results for record in batch]


def write_record(record: RunRecord, basepath: str) -> None:
    """Write <base>.json (full record) and <base>.csv (metric rows)."""
    write_json(record, basepath + ".json")
    write_csv(record, basepath + ".csv")


def write_json(record: RunRecord, path: str) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(record.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise NashGameError(f"cannot write {path}: {exc}") from exc


def write_csv(record: RunRecord, path: str) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(rows_to_csv(record.rows))
    except OSError as exc:
        raise NashGameError(f"cannot write {path}: {exc}") from exc


def read_json(path: str) -> RunRecord:
    with open(path) as fh:
        return RunRecord.from_dict(json.load(fh))


def read_csv_rows(path: str) -> list[MetricRow]:
    with open(path) as fh:
        return rows_from_csv(fh.read())
