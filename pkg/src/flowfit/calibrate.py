"""Derivative-free calibration of stratum weights (mu, beta) against counts."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .assignment import PathSet, assign_iterative
from .demand import DemandStratum, distribute
from .metrics import (
    SplitExperimentResult,
    evaluate,
    geh_from_daily,
    split_counts,
)
from .network import Network, free_flow_times

# Brackets every plausible mobility / deterrence weight; calibration never
# steps outside these unless the model config overrides them.
DEFAULT_BOUNDS = {"mu": (0.0, 5.0), "beta": (0.0, 1.0)}

ASSIGNMENT_MODES = ("oneoff", "iterative")


class ObjectiveError(RuntimeError):
    """Pipeline failure during an objective evaluation, with the weights attached."""


@dataclass(frozen=True)
class WeightEntry:
    stratum: str
    param: str  # "mu" | "beta"
    value: float
    lower: float
    upper: float


@dataclass(frozen=True)
class WeightVector:
    """Flattened calibration weights: (mu, beta) per stratum, with bounds."""

    entries: tuple[WeightEntry, ...]

    @classmethod
    def from_strata(cls, strata, bounds=None, overrides=None) -> "WeightVector":
        """Pack stratum weights; bounds by parameter name, overridable per
        "<stratum>.<param>" key."""
        bounds = {**DEFAULT_BOUNDS, **(bounds or {})}
        overrides = overrides or {}
        entries = []
        for s in strata:
            for param in ("mu", "beta"):
                lo, hi = overrides.get(f"{s.name}.{param}", bounds[param])
                value = getattr(s, param)
                if not (math.isfinite(lo) and math.isfinite(hi)):
                    raise ValueError(f"{s.name}.{param}: bounds must be finite")
                if not lo <= value <= hi:
                    raise ValueError(
                        f"{s.name}.{param} = {value!r} outside bounds [{lo}, {hi}]"
                    )
                entries.append(WeightEntry(s.name, param, value, lo, hi))
        return cls(tuple(entries))

    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.entries])

    def lower(self) -> np.ndarray:
        return np.array([e.lower for e in self.entries])

    def upper(self) -> np.ndarray:
        return np.array([e.upper for e in self.entries])

    def with_values(self, x) -> "WeightVector":
        if len(x) != len(self.entries):
            raise ValueError("weight vector length mismatch")
        return WeightVector(tuple(
            dataclasses.replace(e, value=float(v)) for e, v in zip(self.entries, x)
        ))

    def apply(self, strata) -> list[DemandStratum]:
        """New strata with this vector's mu/beta substituted in."""
        updates: dict[str, dict[str, float]] = {}
        for e in self.entries:
            updates.setdefault(e.stratum, {})[e.param] = e.value
        out = []
        for s in strata:
            if s.name not in updates:
                raise ValueError(f"no weights for stratum {s.name!r}")
            out.append(dataclasses.replace(s, **updates[s.name]))
        return out


@dataclass
class OptimizeResult:
    """Raw optimizer output; history rows are (evaluation index, J, weights)."""

    x: np.ndarray
    objective: float
    history: list[tuple[int, float, np.ndarray]]
    n_evaluations: int
    converged: bool


@dataclass
class CalibrationResult:
    best_weights: WeightVector
    best_objective: float
    history: list[tuple[int, float, np.ndarray]]
    n_evaluations: int
    method: str
    converged: bool


class _Recorder:
    """Wraps an objective: logs every evaluation and tracks the running best."""

    def __init__(self, f):
        self.f = f
        self.history: list[tuple[int, float, np.ndarray]] = []
        self.best_x: np.ndarray | None = None
        self.best = math.inf

    @property
    def n(self) -> int:
        return len(self.history)

    def __call__(self, x: np.ndarray) -> float:
        value = float(self.f(x))
        self.history.append((self.n, value, np.array(x)))
        if value < self.best:
            self.best = value
            self.best_x = np.array(x)
        return value


def _unpack_bounds(bounds, n: int):
    if bounds is None:
        return np.full(n, -math.inf), np.full(n, math.inf)
    lo, hi = bounds
    lo = np.asarray(lo, dtype=float) * np.ones(n)
    hi = np.asarray(hi, dtype=float) * np.ones(n)
    if (lo > hi).any():
        raise ValueError("lower bound exceeds upper bound")
    return lo, hi


def _nelder_mead_core(rec, x0, lo, hi, xatol, fatol, max_evals):
    """Simplex descent with reflect 1, expand 2, contract 0.5, shrink 0.5.

    Candidate points are clipped to the bounds before evaluation, so the
    search can settle on a boundary.
    """
    n = x0.size

    def clip(x):
        return np.minimum(np.maximum(x, lo), hi)

    x0 = clip(np.asarray(x0, dtype=float))
    simplex = [x0]
    for i in range(n):
        span = hi[i] - lo[i]
        step = 0.05 * span if math.isfinite(span) and span > 0 else 0.05
        vertex = x0.copy()
        vertex[i] += step
        if clip(vertex)[i] == x0[i]:  # x0 sits on the upper bound
            vertex[i] = x0[i] - step
        simplex.append(clip(vertex))
    values = [rec(x) for x in simplex]

    converged = False
    while rec.n < max_evals:
        order = sorted(range(n + 1), key=lambda k: values[k])
        simplex = [simplex[k] for k in order]
        values = [values[k] for k in order]
        spread_x = max(np.abs(x - simplex[0]).max() for x in simplex[1:])
        spread_f = values[-1] - values[0]
        if spread_x < xatol and spread_f < fatol:
            converged = True
            break
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        reflected = clip(centroid + (centroid - worst))
        f_r = rec(reflected)
        if f_r < values[0]:
            expanded = clip(centroid + 2.0 * (centroid - worst))
            f_e = rec(expanded)
            if f_e < f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
        elif f_r < values[-2]:
            simplex[-1], values[-1] = reflected, f_r
        else:
            if f_r < values[-1]:
                contracted = clip(centroid + 0.5 * (reflected - centroid))
            else:
                contracted = clip(centroid + 0.5 * (worst - centroid))
            f_c = rec(contracted)
            if f_c < min(f_r, values[-1]):
                simplex[-1], values[-1] = contracted, f_c
            else:
                for i in range(1, n + 1):
                    simplex[i] = clip(simplex[0] + 0.5 * (simplex[i] - simplex[0]))
                    values[i] = rec(simplex[i])
    return converged


def nelder_mead(
    f,
    x0,
    bounds=None,
    *,
    xatol: float = 1e-6,
    fatol: float = 1e-8,
    max_evals: int = 2000,
) -> OptimizeResult:
    """Minimize f by the Nelder-Mead simplex method.

    The initial simplex spans x0 plus per-coordinate steps of 5% of the
    bound range (0.05 absolute for unbounded coordinates). Terminates when
    both the simplex spread and the objective spread fall below xatol /
    fatol, or when the evaluation budget is exhausted (converged=False).
    """
    x0 = np.asarray(x0, dtype=float)
    lo, hi = _unpack_bounds(bounds, x0.size)
    rec = _Recorder(f)
    converged = _nelder_mead_core(rec, x0, lo, hi, xatol, fatol, max_evals)
    return OptimizeResult(rec.best_x, rec.best, rec.history, rec.n, converged)


def _estimate_temperature(rec, x, fx, lo, hi, rng, n_probe=20, target_accept=0.8):
    """Initial temperature such that ~80% of probe uphill moves are accepted."""
    span = hi - lo
    uphill = []
    cur_x, cur_f = x, fx
    for _ in range(n_probe):
        cand = np.clip(cur_x + rng.uniform(-1.0, 1.0, size=x.size) * span * 0.5, lo, hi)
        f_c = rec(cand)
        if f_c > cur_f:
            uphill.append(f_c - cur_f)
        cur_x, cur_f = cand, f_c
    if not uphill:
        return 1.0
    return float(np.mean(uphill) / math.log(1.0 / target_accept))


def simulated_annealing(
    f,
    bounds,
    seed: int = 0,
    *,
    x0=None,
    initial_temp: float | None = None,
    cooling: float = 0.95,
    n_sweeps: int = 100,
    steps_per_sweep: int = 20,
    restarts: int = 1,
    polish: bool = True,
) -> OptimizeResult:
    """Metropolis search with geometric cooling and a Nelder-Mead polish.

    Proposal steps are uniform perturbations scaled by the bound range and
    the current temperature fraction. restarts adds independent runs from
    random in-bounds starts; the first run starts from x0 when given. Fully
    reproducible for a fixed seed.
    """
    lo, hi = bounds
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if not (np.isfinite(lo).all() and np.isfinite(hi).all()) or (lo > hi).any():
        raise ValueError("simulated annealing requires finite, ordered bounds")
    n = lo.size
    span = hi - lo
    rec = _Recorder(f)
    temp0 = initial_temp
    for run in range(restarts + 1):
        rng = np.random.default_rng([seed, run])
        if run == 0 and x0 is not None:
            x = np.clip(np.asarray(x0, dtype=float), lo, hi)
        else:
            x = lo + rng.uniform(size=n) * span
        fx = rec(x)
        if temp0 is None:
            temp0 = _estimate_temperature(rec, x, fx, lo, hi, rng)
        temp = temp0
        for _ in range(n_sweeps):
            scale = span * max(temp / temp0, 0.01) * 0.5
            for _ in range(steps_per_sweep):
                cand = np.clip(x + rng.uniform(-1.0, 1.0, size=n) * scale, lo, hi)
                f_c = rec(cand)
                delta = f_c - fx
                if delta <= 0 or rng.random() < math.exp(-delta / max(temp, 1e-300)):
                    x, fx = cand, f_c
            temp *= cooling
    if polish:
        _nelder_mead_core(rec, rec.best_x, lo, hi, 1e-8, 1e-10,
                          rec.n + 200 * max(n, 2))
    return OptimizeResult(rec.best_x, rec.best, rec.history, rec.n, True)


class ModelObjective:
    """J(weights): mean GEH between assigned and observed daily flows.

    In one-off mode the skim and path sets are frozen at free-flow times,
    so each evaluation reduces to gravity distribution plus a matrix
    product; iterative mode reruns the full MSA loop every evaluation.
    A prebuilt free-flow PathSet may be shared via paths=.
    """

    def __init__(
        self,
        zones,
        network: Network,
        strata,
        counts,
        *,
        assignment_mode: str = "oneoff",
        n_outer: int = 5,
        gap_tol: float = 1e-3,
        furness_tol: float = 1e-8,
        furness_max_iter: int = 1000,
        bounds=None,
        bound_overrides=None,
        paths: PathSet | None = None,
    ):
        if assignment_mode not in ASSIGNMENT_MODES:
            raise ValueError(f"unknown assignment mode {assignment_mode!r}")
        if not counts:
            raise ValueError("no traffic counts: objective undefined")
        self.zones = zones
        self.network = network
        self.strata = list(strata)
        self.counts = list(counts)
        self.assignment_mode = assignment_mode
        self.n_outer = n_outer
        self.gap_tol = gap_tol
        self.furness_tol = furness_tol
        self.furness_max_iter = furness_max_iter
        self.template = WeightVector.from_strata(self.strata, bounds, bound_overrides)
        for c in self.counts:
            if c.link_id not in network.links:
                raise ValueError(f"count references unknown link {c.link_id!r}")
        self._paths = None
        if assignment_mode == "oneoff":
            self._paths = paths or PathSet(network, free_flow_times(network))
            self._costs = self._paths.cost_matrix()
            self._count_idx = np.array(
                [self._paths.link_index[c.link_id] for c in self.counts]
            )
            self._observed = np.array([c.observed for c in self.counts])

    def __call__(self, x) -> float:
        weights = self.template.with_values(x)
        try:
            return self.evaluate_weights(weights)
        except Exception as exc:
            detail = ", ".join(
                f"{e.stratum}.{e.param}={e.value:g}" for e in weights.entries
            )
            raise ObjectiveError(f"objective failed at {detail}: {exc}") from exc

    def evaluate_weights(self, weights: WeightVector) -> float:
        strata = weights.apply(self.strata)
        if self._paths is not None:
            flows = np.zeros(len(self._paths.link_ids))
            for s in strata:
                if s.mu == 0.0:  # contributes no trips; skip the distribution
                    continue
                od = distribute(
                    self.zones, s, self._costs,
                    furness_tol=self.furness_tol,
                    furness_max_iter=self.furness_max_iter,
                )
                flows += self._paths.flow_vector(od)
            gehs = geh_from_daily(flows[self._count_idx], self._observed)
            return float(np.mean(gehs))
        result = assign_iterative(
            self.network, self.zones, strata, self.n_outer,
            gap_tol=self.gap_tol,
            furness_tol=self.furness_tol, furness_max_iter=self.furness_max_iter,
        )
        return evaluate(result.flows, self.counts).objective_j


def objective_fn(
    weights: WeightVector,
    zones,
    network: Network,
    strata,
    counts,
    *,
    assignment_mode: str = "oneoff",
    n_outer: int = 5,
    gap_tol: float = 1e-3,
) -> float:
    """One-shot objective evaluation at the given weights."""
    objective = ModelObjective(
        zones, network, strata, counts,
        assignment_mode=assignment_mode, n_outer=n_outer, gap_tol=gap_tol,
    )
    return objective(weights.values())


def predict_flows(
    zones,
    network: Network,
    strata,
    *,
    assignment_mode: str = "oneoff",
    n_outer: int = 5,
    gap_tol: float = 1e-3,
):
    """Link flows for fixed strata under the chosen assignment mode."""
    if assignment_mode not in ASSIGNMENT_MODES:
        raise ValueError(f"unknown assignment mode {assignment_mode!r}")
    outer = 1 if assignment_mode == "oneoff" else n_outer
    return assign_iterative(network, zones, strata, outer, gap_tol=gap_tol).flows


def calibrate(
    zones,
    network: Network,
    strata,
    counts,
    *,
    method: str = "nelder_mead",
    seed: int = 0,
    bounds=None,
    bound_overrides=None,
    assignment_mode: str = "oneoff",
    n_outer: int = 5,
    gap_tol: float = 1e-3,
    xatol: float = 1e-6,
    fatol: float = 1e-8,
    max_evals: int = 2000,
    sa_options: dict | None = None,
    paths: PathSet | None = None,
) -> CalibrationResult:
    """Minimize the mean-GEH objective over all stratum weights.

    The initial weights are taken from the strata themselves and are always
    part of the search, so the result can never be worse than the input.
    """
    if not strata:
        raise ValueError("at least one stratum is required")
    objective = ModelObjective(
        zones, network, strata, counts,
        assignment_mode=assignment_mode, n_outer=n_outer, gap_tol=gap_tol,
        bounds=bounds, bound_overrides=bound_overrides, paths=paths,
    )
    template = objective.template
    box = (template.lower(), template.upper())
    if method == "nelder_mead":
        res = nelder_mead(
            objective, template.values(), box,
            xatol=xatol, fatol=fatol, max_evals=max_evals,
        )
    elif method == "simulated_annealing":
        res = simulated_annealing(
            objective, box, seed, x0=template.values(), **(sa_options or {})
        )
    else:
        raise ValueError(f"unknown calibration method {method!r}")
    return CalibrationResult(
        best_weights=template.with_values(res.x),
        best_objective=res.objective,
        history=res.history,
        n_evaluations=res.n_evaluations,
        method=method,
        converged=res.converged,
    )


def split_test(
    zones,
    network: Network,
    strata,
    counts,
    *,
    fractions,
    seeds,
    method: str = "nelder_mead",
    assignment_mode: str = "oneoff",
    n_outer: int = 5,
    **calibrate_options,
) -> list[SplitExperimentResult]:
    """Train/test robustness grid: calibrate on a count subset, score both sides.

    Results are ordered by (fraction, seed). The free-flow path set is
    shared across all cells when the inner assignment is one-off.
    """
    shared_paths = None
    if assignment_mode == "oneoff":
        shared_paths = PathSet(network, free_flow_times(network))
    results = []
    for fraction in fractions:
        for seed in seeds:
            train, test = split_counts(counts, fraction, seed)
            res = calibrate(
                zones, network, strata, train,
                method=method, seed=seed, assignment_mode=assignment_mode,
                n_outer=n_outer, paths=shared_paths, **calibrate_options,
            )
            best_strata = res.best_weights.apply(strata)
            flows = predict_flows(
                zones, network, best_strata,
                assignment_mode=assignment_mode, n_outer=n_outer,
            )
            results.append(SplitExperimentResult(
                split_fraction=fraction,
                seed=seed,
                train_geh=evaluate(flows, train).objective_j,
                test_geh=evaluate(flows, test).objective_j,
            ))
    return results
