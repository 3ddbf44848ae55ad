"""Seeded Monte Carlo campaigns and their serialized outputs."""

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import bounds as bnd
from .errors import BgSupportError, ConfigError, DomainError
from .map_estimator import exhaustive_map, gamma_cost, greedy_map, regress_on_support
from .metrics import missed_energy, partition_supports
from .signal_model import ModelParams, estimate_rip, generate_instance

SOLVERS = ("exhaustive", "greedy")
RIP_MODES = ("exhaustive", "sampled", "none")


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    bounds: bnd.BoundParams = field(default_factory=bnd.BoundParams)
    trials: int = 1
    master_seed: int = 0
    solver: str = "exhaustive"
    cardinality_q: float = 2.0
    rip_mode: str = "none"
    rip_samples: int = 1000
    rip_level: int | None = None

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}")
        if not self.cardinality_q > 1:
            raise ConfigError("cardinality_q must exceed 1")
        if self.rip_mode not in RIP_MODES:
            raise ConfigError(f"rip_mode must be one of {RIP_MODES}")
        if self.rip_samples < 1:
            raise ConfigError("rip_samples must be positive")

    @property
    def cap(self):
        return self.params.cardinality_cap(self.cardinality_q)

    @property
    def effective_rip_level(self):
        if self.rip_level is not None:
            return int(self.rip_level)
        return min(int(math.floor(4 * self.params.Np + 1e-12)), self.params.M)

    def replace(self, **changes):
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return ExperimentConfig(**fields)

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        try:
            pdoc = dict(doc.pop("params"))
        except KeyError:
            raise ConfigError("config needs a 'params' object") from None
        try:
            if "snr_db" in pdoc:
                snr = pdoc.pop("snr_db")
                params = ModelParams.from_nominal_snr(
                    pdoc.pop("N"), pdoc.pop("M"), pdoc.pop("p"), snr, **pdoc
                )
            else:
                params = ModelParams(**pdoc)
            bounds = bnd.BoundParams(**doc.pop("bounds", {}))
            rip = doc.pop("rip_mode", "none")
            if isinstance(rip, dict):
                if set(rip) != {"sampled"}:
                    raise ConfigError(f"bad rip_mode {rip!r}")
                doc["rip_samples"] = int(rip["sampled"])
                rip = "sampled"
            return cls(params=params, bounds=bounds, rip_mode=rip, **doc)
        except TypeError as exc:
            raise ConfigError(f"bad config field: {exc}") from exc
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self):
        p = asdict(self.params)
        if p["epsilon"] is None:
            del p["epsilon"]
        rip = {"sampled": self.rip_samples} if self.rip_mode == "sampled" else self.rip_mode
        out = {
            "params": p,
            "bounds": asdict(self.bounds),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "solver": self.solver,
            "cardinality_q": self.cardinality_q,
            "rip_mode": rip,
        }
        if self.rip_level is not None:
            out["rip_level"] = self.rip_level
        return out


def load_config(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return ExperimentConfig.from_dict(doc)


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    seed: int
    true_support_size: int
    est_support_size: int
    missed_count: int
    false_count: int
    missed_energy: float
    theorem1_energy_bound: float
    bound_satisfied: bool
    event_E: bool
    cost_true: float
    cost_est: float
    solver: str
    epsilon_hat: float | None
    regression_error: float
    regression_bound: float | None


@dataclass(frozen=True)
class Aggregate:
    trials_run: int
    failures: int
    conditioned_trials: int
    frac_bound_satisfied: float | None
    frac_event_E: float | None
    frac_no_miss: float | None
    frac_perfect: float | None
    frac_bound_satisfied_unconditioned: float | None
    frac_no_miss_unconditioned: float | None
    frac_perfect_unconditioned: float | None
    mean_missed_energy: float | None
    event_E_prob_lower: float
    theorem1_prob_lower: float
    theorem1_vacuous: bool
    theorem2_prob_bounds: dict
    failed_trials: list


@dataclass
class ExperimentResult:
    aggregate: Aggregate
    records: list


class TrialError(BgSupportError):
    def __init__(self, trial_id, seed, cause):
        super().__init__(f"trial {trial_id} (seed {seed}) failed: {cause!r}")
        self.trial_id = trial_id
        self.seed = seed
        self.cause = cause


def trial_seed(master_seed, trial_id):
    """64-bit seed for one trial, a pure function of (master_seed, trial_id)."""
    words = np.random.SeedSequence([int(master_seed), int(trial_id)]).generate_state(2, np.uint32)
    return int(words[0]) << 32 | int(words[1])


def _theorem1_energy_bound(config):
    if config.params.p == 0:
        return math.inf
    return bnd.theorem1(config.params, config.bounds).energy_bound


def run_trial(config, trial_id):
    seed = trial_seed(config.master_seed, trial_id)
    try:
        return _run_trial(config, trial_id, seed)
    except Exception as exc:
        raise TrialError(trial_id, seed, exc) from exc


def _run_trial(config, trial_id, seed):
    prm = config.params
    inst = generate_instance(prm, seed)
    cap = config.cap
    solve = exhaustive_map if config.solver == "exhaustive" else greedy_map
    est = solve(inst, cap)
    truth = inst.signal.support
    part = partition_supports(truth, est.support, prm.N)
    energy = missed_energy(inst.signal, part)
    energy_bound = _theorem1_energy_bound(config)

    eps = None
    if config.rip_mode != "none":
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x52495000]))
        eps = estimate_rip(
            inst.matrix, config.effective_rip_level, config.rip_mode, config.rip_samples, rng
        ).epsilon_hat

    x_hat = regress_on_support(inst, est.support)
    reg_err = float(np.linalg.norm(x_hat - inst.signal.values))
    reg_bound = None
    if eps is not None and prm.p > 0 and 0 <= eps <= 1 / 3:
        reg_bound = bnd.regression_error_bound(prm, config.bounds, eps)

    return TrialRecord(
        trial_id=int(trial_id),
        seed=seed,
        true_support_size=len(truth),
        est_support_size=len(est.support),
        missed_count=len(part.missed),
        false_count=len(part.false_alarms),
        missed_energy=energy,
        theorem1_energy_bound=energy_bound,
        bound_satisfied=bool(energy <= energy_bound),
        event_E=bool(len(truth) <= 2 * prm.Np + 1e-12),
        cost_true=gamma_cost(truth, inst).total,
        cost_est=est.cost.total,
        solver=est.solver,
        epsilon_hat=eps,
        regression_error=reg_err,
        regression_bound=reg_bound,
    )


def _safe_trial(args):
    config, trial_id = args
    try:
        return run_trial(config, trial_id), None
    except TrialError as exc:
        return None, {"trial_id": exc.trial_id, "seed": exc.seed, "error": repr(exc.cause)}


def _frac(flags):
    flags = list(flags)
    return None if not flags else sum(bool(f) for f in flags) / len(flags)


def aggregate(config, records, failures=()):
    """Summarize trial records; ``records`` must be sorted by trial id."""
    cap = config.cap
    cond = [r for r in records if r.event_E and r.true_support_size <= cap]
    prm = config.params
    if prm.p > 0:
        t1 = bnd.theorem1(prm, config.bounds)
        t2 = bnd.theorem2(prm, config.bounds)
        t1_prob, t1_vac = t1.prob_lower, t1.vacuous
        t2_probs = {
            "prob_no_miss": t2.prob_no_miss,
            "prob_perfect": t2.prob_perfect,
            "prob_unclamped": t2.prob_unclamped,
            "vacuous": t2.vacuous,
            "mu_threshold_no_miss": t2.mu_threshold_no_miss,
            "mu_threshold_perfect": t2.mu_threshold_perfect,
        }
    else:
        t1_prob, t1_vac = 0.0, True
        t2_probs = {"prob_no_miss": 0.0, "prob_perfect": 0.0, "vacuous": True}
    energies = [r.missed_energy for r in records]

    def perfect(r):
        return r.missed_count == 0 and r.false_count == 0

    return Aggregate(
        trials_run=len(records),
        failures=len(failures),
        conditioned_trials=len(cond),
        frac_bound_satisfied=_frac(r.bound_satisfied for r in cond),
        frac_event_E=_frac(r.event_E for r in records),
        frac_no_miss=_frac(r.missed_count == 0 for r in cond),
        frac_perfect=_frac(perfect(r) for r in cond),
        frac_bound_satisfied_unconditioned=_frac(r.bound_satisfied for r in records),
        frac_no_miss_unconditioned=_frac(r.missed_count == 0 for r in records),
        frac_perfect_unconditioned=_frac(perfect(r) for r in records),
        mean_missed_energy=math.fsum(energies) / len(energies) if energies else None,
        event_E_prob_lower=bnd.event_E_prob_lower(prm),
        theorem1_prob_lower=t1_prob,
        theorem1_vacuous=t1_vac,
        theorem2_prob_bounds=t2_probs,
        failed_trials=list(failures),
    )


def run_experiment(config, workers=1):
    """Run every trial of ``config`` and aggregate.

    Results do not depend on ``workers``: each trial draws only from its own
    seed and records are reduced in trial-id order.
    """
    jobs = [(config, t) for t in range(config.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_safe_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        outcomes = [_safe_trial(j) for j in jobs]
    records = [r for r, _ in outcomes if r is not None]
    failures = [f for _, f in outcomes if f is not None]
    return ExperimentResult(aggregate(config, records, failures), records)


def _open_for_write(path):
    path = Path(path)
    try:
        return path.open("w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_records(records, path):
    """Write one JSON object per line."""
    with _open_for_write(path) as fh:
        for rec in records:
            fh.write(json.dumps(asdict(rec)) + "\n")


def read_records(path):
    with Path(path).open() as fh:
        return [TrialRecord(**json.loads(line)) for line in fh if line.strip()]


def emit_aggregate(agg, path):
    with _open_for_write(path) as fh:
        fh.write(json.dumps(asdict(agg), indent=2) + "\n")


def emit_fig1_csv(rows, path):
    with _open_for_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["beta", "k1", "prob_lower"])
        for row in rows:
            writer.writerow([f"{v:.12g}" for v in row])
