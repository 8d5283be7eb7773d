"""Propagation, optimization and checking of grounded billing problems.

Given a bound per future pay period everything else is determined:
``kw[t] = min(demand[t], bound[period(t)])`` on the future, the supply demand
of a period is the largest term its contract rows force, and the shed energy
is what the bounds cut off. :py:func:`evaluate` does that propagation; the
solvers search over bound vectors:

* :py:func:`solve_zero_budget`: closed form when no shedding is allowed.
* :py:func:`solve_breakpoints`: exhaustive search over demand breakpoints and
  budget water-fill levels followed by coordinate-wise golden-section
  refinement.
* :py:func:`local_search`: best-improvement single-period moves.
* :py:func:`brute_force_oracle`: dense grid enumeration for verification.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Sequence

import numpy as np
from typing_extensions import Literal

from mtsa.compiler import GroundInstance
from mtsa.config import SolverConfig
from mtsa.exceptions import (
    ComboLimitExceeded,
    DimensionMismatch,
    GridTooLarge,
    InfeasibleSeed,
    NonzeroBudget,
    UnsupportedObjective,
)

LOG = logging.getLogger(__name__)

__all__ = (
    "CheckReport",
    "Evaluation",
    "Solution",
    "Violation",
    "brute_force_oracle",
    "check_solution",
    "evaluate",
    "local_search",
    "solve",
    "solve_breakpoints",
    "solve_zero_budget",
)

Status = Literal["Optimal", "Feasible", "Infeasible"]

_ABS_TOL = 1e-9
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_GOLDEN_ITERS = 60
_ORACLE_CHUNK = 1 << 20


class Violation(NamedTuple):
    """A ground constraint that does not hold; ``slack`` is negative by how much."""

    constraint_id: str
    t: int | None
    p: int | None
    slack: float


def _slack(lhs: float, rhs: float) -> float:
    return lhs - rhs


def _allowance(a: float, b: float, tol: float) -> float:
    return max(tol * max(abs(a), abs(b)), _ABS_TOL)


def _geq(a: float, b: float, tol: float) -> bool:
    return a >= b - _allowance(a, b, tol)


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= _allowance(a, b, tol)


@dataclass
class Evaluation:
    """Everything a bound vector determines."""

    bounds: np.ndarray
    kw: np.ndarray
    ppsd: np.ndarray
    shed: float
    objective: float
    violations: List[Violation] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations


@dataclass
class Solution:
    """Learned parameters of a grounded problem.

    Attributes:
        periods (np.ndarray): Future pay periods ``1..P``.
        bounds (np.ndarray): Peak demand bound per period.
        ppsd (np.ndarray): Pay-period supply demand per period.
        kw (np.ndarray): Billed demand per calendar row.
        objective (float): Total charge.
        shed_total (float): Energy shed over the future horizon.
        status (str): ``Optimal``, ``Feasible`` or ``Infeasible``.
    """

    periods: np.ndarray
    bounds: np.ndarray
    ppsd: np.ndarray
    kw: np.ndarray
    objective: float
    shed_total: float
    status: Status
    solver: str = ""

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "status": self.status,
            "objective": float(self.objective),
            "shedTotal": float(self.shed_total),
            "periods": [int(p) for p in self.periods],
            "bounds": [float(b) for b in self.bounds],
            "ppsd": [float(v) for v in self.ppsd],
        }


class _ShedCurve:
    """Energy shed in one period as a function of its bound."""

    def __init__(self, demand: np.ndarray, dt: float):
        self.demand = np.sort(np.asarray(demand, dtype=np.float64))
        self.dt = dt
        self.suffix = np.concatenate([np.cumsum(self.demand[::-1])[::-1], [0.0]])
        self.max = float(self.demand[-1]) if len(self.demand) else 0.0

    def __call__(self, level: np.ndarray | float) -> np.ndarray:
        level = np.asarray(level, dtype=np.float64)
        idx = np.searchsorted(self.demand, level, side="right")
        above = len(self.demand) - idx
        return self.dt * np.maximum(self.suffix[idx] - level * above, 0.0)

    def inverse(self, allowance: float) -> float:
        """Smallest level ``b >= 0`` whose shed does not exceed ``allowance``."""
        if allowance < 0:
            return math.inf
        if float(self(0.0)) <= allowance:
            return 0.0
        points = np.concatenate([[0.0], np.unique(self.demand)])
        sheds = self(points)
        k = int(np.flatnonzero(sheds > allowance)[-1])
        count = len(self.demand) - int(np.searchsorted(self.demand, points[k], side="right"))
        return float(points[k] + (sheds[k] - allowance) / (self.dt * count))


class _Structure:
    """Propagation tables of a grounded problem, vectorized over bound vectors.

    Each supply group contributes ``coef * max(kw)`` over its rows; on the
    future ``max_t min(d_t, b) = min(max_t d_t, b)`` per period slot, so a
    group reduces to a constant for its historical rows plus one
    ``coef * min(m, b_q)`` term per future slot it touches.
    """

    def __init__(self, g: GroundInstance):
        n = g.n_periods
        self.g = g
        self.n = n
        self.const = np.full(n, max(g.supply_floor(), 0.0))
        terms: dict[tuple[int, int, float], float] = {}
        demand = g.demand
        for group in g.supply:
            s = int(np.searchsorted(g.future_periods, group.period))
            rows = group.rows
            future = g.future_mask[rows]
            past = rows[~future]
            if len(past):
                self.const[s] = max(self.const[s], group.coef * float(demand[past].max()))
            rows = rows[future]
            slots = g.period_slot[rows]
            for q in np.unique(slots).tolist():
                m = float(demand[rows[slots == q]].max())
                key = (s, q, group.coef)
                terms[key] = max(terms.get(key, -math.inf), m)
        self.terms = [[(q, c, m) for (s2, q, c), m in terms.items() if s2 == s] for s in range(n)]
        self.link = g.roles.link_cid is not None
        self.curves = [_ShedCurve(g.future_demand(s), g.time_interval_size) for s in range(n)]
        self.lower = max(g.lower_bound(), 0.0)
        self.upper = g.upper_bound()

    def ppsd(self, bounds: np.ndarray) -> np.ndarray:
        bounds = np.atleast_2d(bounds)
        out = np.tile(self.const, (bounds.shape[0], 1))
        if self.link:
            np.maximum(out, bounds, out=out)
        for s, terms in enumerate(self.terms):
            column = out[:, s]
            for q, coef, m in terms:
                np.maximum(column, coef * np.minimum(m, bounds[:, q]), out=column)
        return out

    def objective(self, bounds: np.ndarray) -> np.ndarray:
        return self.g.rate * self.ppsd(bounds).sum(axis=1) + self.g.offset * self.n

    def shed(self, bounds: np.ndarray) -> np.ndarray:
        bounds = np.atleast_2d(bounds)
        total = np.zeros(bounds.shape[0])
        for s, curve in enumerate(self.curves):
            total += curve(bounds[:, s])
        return total

    def feasible(self, bounds: np.ndarray, tol: float) -> np.ndarray:
        bounds = np.atleast_2d(bounds)
        budget = self.g.budget
        ok = self.shed(bounds) <= budget + max(tol * budget, _ABS_TOL)
        ok &= np.all(bounds >= self.lower - _ABS_TOL, axis=1)
        ok &= np.all(bounds <= self.upper + _ABS_TOL, axis=1)
        return ok

    def min_level(self, s: int, bounds: np.ndarray) -> float:
        """Lowest feasible bound of slot ``s`` with the other slots fixed."""
        others = sum(float(c(bounds[q])) for q, c in enumerate(self.curves) if q != s)
        return max(self.curves[s].inverse(self.g.budget - others), self.lower)


def _check_minimize(g: GroundInstance) -> None:
    if g.direction != "MINIMIZE":
        raise UnsupportedObjective(
            "only minimization is solved; export the model for other objectives",
            direction=g.direction,
        )


def _bounds_array(g: GroundInstance, bounds: Sequence[float] | np.ndarray) -> np.ndarray:
    array = np.asarray(bounds, dtype=np.float64).reshape(-1)
    if len(array) != g.n_periods:
        raise DimensionMismatch(
            "one bound per future pay period is needed", expected=g.n_periods, got=len(array)
        )
    return array


def evaluate(
    g: GroundInstance, bounds: Sequence[float] | np.ndarray, tol: float = 1e-6
) -> Evaluation:
    """Propagate a bound vector through the grounded problem.

    Args:
        g (GroundInstance): The grounded problem.
        bounds: One bound per future pay period, in period order.
        tol (float): Relative tolerance of the budget and bound checks.

    Returns:
        Evaluation: ``feasible`` is False when the shed exceeds the budget or a
        bound leaves its declared range.

    Raises:
        DimensionMismatch: when ``bounds`` does not have one entry per period.
    """
    b = _bounds_array(g, bounds)
    structure = _Structure(g)
    return _evaluate(structure, b, tol)


def _evaluate(structure: _Structure, b: np.ndarray, tol: float) -> Evaluation:
    g = structure.g
    kw = g.demand.copy()
    future = g.future_mask
    kw[future] = np.minimum(g.demand[future], b[g.period_slot[future]])
    ppsd = structure.ppsd(b)[0]
    shed = float(np.sum(g.demand[future] - kw[future]) * g.time_interval_size)
    objective = float(g.rate * ppsd.sum() + g.offset * g.n_periods)
    violations = []
    if not _geq(g.budget, shed, tol):
        violations.append(Violation("budget", None, None, _slack(g.budget, shed)))
    for limit in g.limits:
        if limit.param != g.roles.bound:
            continue
        for p, value in zip(g.future_periods.tolist(), b.tolist()):
            ok = _geq(value, limit.value, tol) if limit.sense == ">=" else _geq(limit.value, value, tol)
            if not ok:
                slack = value - limit.value if limit.sense == ">=" else limit.value - value
                violations.append(Violation(limit.cid, None, p, slack))
    return Evaluation(b, kw, ppsd, shed, objective, violations)


def _solution(evaluation: Evaluation, g: GroundInstance, status: Status, solver: str) -> Solution:
    if not evaluation.feasible:
        status = "Infeasible"
    return Solution(
        g.future_periods.copy(),
        evaluation.bounds,
        evaluation.ppsd,
        evaluation.kw,
        evaluation.objective,
        evaluation.shed,
        status,
        solver,
    )


def _raise_to_supply(structure: _Structure, current: Evaluation, tol: float) -> Evaluation:
    """Lift each bound to its period's supply demand where that costs nothing."""
    for s in range(structure.n):
        if current.bounds[s] >= current.ppsd[s]:
            continue
        trial = current.bounds.copy()
        trial[s] = min(current.ppsd[s], structure.upper)
        candidate = _evaluate(structure, trial, tol)
        if candidate.feasible and candidate.objective <= current.objective + _allowance(
            candidate.objective, current.objective, 1e-12
        ):
            current = candidate
    return current


def _zero_shed(structure: _Structure, tol: float) -> Evaluation:
    peaks = np.array([curve.max for curve in structure.curves])
    peaks = np.minimum(np.maximum(peaks, structure.lower), structure.upper)
    return _raise_to_supply(structure, _evaluate(structure, peaks, tol), tol)


def solve_zero_budget(g: GroundInstance, config: SolverConfig | None = None) -> Solution:
    """Closed-form optimum when no shedding is allowed.

    ``kw`` equals the demand, so ``ppsd[p]`` is the largest of zero, the
    period's own peaks, the weighted historical peaks and its largest future
    demand (which the bound has to admit); the bound is set equal to it.

    Raises:
        NonzeroBudget: when the shed budget is positive.
    """
    config = config or SolverConfig()
    _check_minimize(g)
    if g.budget > 0:
        raise NonzeroBudget("the closed form needs a zero shed budget", budget=g.budget)
    structure = _Structure(g)
    evaluation = _zero_shed(structure, config.tolerance)
    LOG.info(f"Zero-budget solution of {g.instance.event}: objective {evaluation.objective:.4f}")
    return _solution(evaluation, g, "Optimal", "zero_budget")


def _candidates(structure: _Structure, steps: int) -> list[np.ndarray]:
    g = structure.g
    levels = []
    for curve in structure.curves:
        fills = [curve.inverse(q * g.budget / steps) for q in range(steps + 1)] if steps else []
        values = np.unique(np.concatenate([curve.demand, fills, [curve.max]]))
        values = values[np.isfinite(values)]
        values = np.clip(values, structure.lower, structure.upper)
        standalone = curve(values) <= g.budget + _ABS_TOL
        levels.append(np.unique(values[standalone]))
    return levels


def _pick(objectives: np.ndarray, feasible: np.ndarray) -> int | None:
    """Index of the lowest objective; among ties, the last one."""
    if not feasible.any():
        return None
    masked = np.where(feasible, objectives, np.inf)
    best = masked.min()
    ties = np.flatnonzero(np.isclose(masked, best, rtol=1e-12, atol=1e-12))
    return int(ties[-1])


def _golden(f: Callable[[float], float], lo: float, hi: float) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(_GOLDEN_ITERS):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return c if fc <= fd else d


def _refine(structure: _Structure, current: Evaluation, passes: int, tol: float) -> Evaluation:
    for _ in range(passes):
        improved = False
        for s in range(structure.n):
            lo = structure.min_level(s, current.bounds)
            hi = max(lo, min(structure.curves[s].max, structure.upper))
            if not math.isfinite(lo):
                continue

            def cost(level: float, s: int = s) -> float:
                trial = current.bounds.copy()
                trial[s] = level
                if not structure.feasible(trial, tol)[0]:
                    return math.inf
                return float(structure.objective(trial)[0])

            for level in (_golden(cost, lo, hi), lo):
                if cost(level) < current.objective - _allowance(current.objective, 0.0, 1e-12):
                    trial = current.bounds.copy()
                    trial[s] = level
                    current = _evaluate(structure, trial, tol)
                    improved = True
        if not improved:
            break
    return current


def solve_breakpoints(g: GroundInstance, config: SolverConfig | None = None) -> Solution:
    """Search bound vectors built from demand breakpoints and water-fill levels.

    Every period's candidates are its distinct future demands and the levels
    at which that period alone sheds ``q * budget / Q`` for ``q = 0..Q``; the
    cross product is evaluated exhaustively, then every coordinate is refined
    by golden-section search between its lowest feasible level and its peak.

    Args:
        g (GroundInstance): The grounded problem.
        config (SolverConfig): ``max_exhaustive_combos``, ``water_fill_steps``,
            ``refinement_iters`` and ``tolerance`` are used.

    Returns:
        Solution: ``Optimal`` for a zero budget, ``Feasible`` otherwise.

    Raises:
        ComboLimitExceeded: when the cross product is larger than allowed.
    """
    config = config or SolverConfig()
    _check_minimize(g)
    structure = _Structure(g)
    candidates = _candidates(structure, config.water_fill_steps)
    combos = math.prod(len(c) for c in candidates)
    if combos > config.max_exhaustive_combos:
        raise ComboLimitExceeded(
            "too many breakpoint combinations",
            combos=combos,
            limit=config.max_exhaustive_combos,
        )
    LOG.debug(f"Evaluating {combos} breakpoint combinations")
    grid = np.stack(np.meshgrid(*candidates, indexing="ij"), axis=-1).reshape(-1, structure.n)
    best = _pick(structure.objective(grid), structure.feasible(grid, config.tolerance))
    if best is None:
        current = _zero_shed(structure, config.tolerance)
    else:
        current = _evaluate(structure, grid[best], config.tolerance)
    if g.budget > 0:
        current = _refine(structure, current, config.refinement_iters, config.tolerance)
    current = _raise_to_supply(structure, current, config.tolerance)
    status: Status = "Optimal" if g.budget == 0 else "Feasible"
    LOG.info(f"Breakpoint solution of {g.instance.event}: objective {current.objective:.4f}")
    return _solution(current, g, status, "breakpoints")


def local_search(
    g: GroundInstance, seed: Solution, config: SolverConfig | None = None
) -> Solution:
    """Improve a feasible solution one period at a time.

    Each iteration tries, for every period, lowering or raising its bound to
    the adjacent demand breakpoint and lowering it to the level at which the
    budget binds, then takes the best strictly improving move.

    Raises:
        InfeasibleSeed: when the seed violates the budget or a bound range.
    """
    config = config or SolverConfig()
    _check_minimize(g)
    structure = _Structure(g)
    current = _evaluate(structure, _bounds_array(g, seed.bounds), config.tolerance)
    if not current.feasible:
        raise InfeasibleSeed("the seed solution is infeasible", violations=len(current.violations))
    breakpoints = [np.unique(np.concatenate([c.demand, [structure.lower]])) for c in structure.curves]
    moved = False
    for iteration in range(config.max_local_iterations):
        best: Evaluation | None = None
        for s in range(structure.n):
            level = current.bounds[s]
            below = breakpoints[s][breakpoints[s] < level - _ABS_TOL]
            above = breakpoints[s][breakpoints[s] > level + _ABS_TOL]
            options = [structure.min_level(s, current.bounds)]
            if len(below):
                options.append(float(below[-1]))
            if len(above):
                options.append(float(above[0]))
            for option in options:
                if not math.isfinite(option) or abs(option - level) <= _ABS_TOL:
                    continue
                trial = current.bounds.copy()
                trial[s] = min(max(option, structure.lower), structure.upper)
                candidate = _evaluate(structure, trial, config.tolerance)
                if not candidate.feasible:
                    continue
                if best is None or candidate.objective < best.objective:
                    best = candidate
        if best is None or best.objective >= current.objective - _allowance(
            current.objective, 0.0, 1e-12
        ):
            break
        LOG.debug(f"Local search step {iteration + 1}: objective {best.objective:.4f}")
        current = best
        moved = True
    if not moved:
        return seed
    current = _raise_to_supply(structure, current, config.tolerance)
    return _solution(current, g, "Feasible", "local_search")


def _grid_chunk(
    structure: _Structure,
    levels: list[np.ndarray],
    offsets: np.ndarray,
    count: int,
    start: int,
    stop: int,
    tol: float,
) -> tuple[float, int] | None:
    """Best point of flat indexes ``start..stop`` of the pruned grid, as a full-grid flat index."""
    shape = tuple(len(lv) for lv in levels)
    index = np.unravel_index(np.arange(start, stop), shape)
    bounds = np.stack([lv[i] for lv, i in zip(levels, index)], axis=-1)
    objectives = structure.objective(bounds)
    picked = _pick(objectives, structure.feasible(bounds, tol))
    if picked is None:
        return None
    full_index = tuple(int(i[picked]) + int(o) for i, o in zip(index, offsets))
    flat = np.ravel_multi_index(full_index, (count,) * len(shape))
    return float(objectives[picked]), int(flat)


def brute_force_oracle(
    g: GroundInstance, grid_step: float, config: SolverConfig | None = None
) -> Solution:
    """Enumerate a dense grid of bound vectors.

    Levels are ``0, step, 2 step, ...`` with the last raised to the largest
    demand. Levels whose own period already sheds more than the budget are
    skipped before enumeration. Among equal objectives the lexicographically
    largest bound vector wins, so the result is identical for any number of
    workers.

    Raises:
        GridTooLarge: when the full grid exceeds ``config.grid_cap`` points.
    """
    config = config or SolverConfig()
    _check_minimize(g)
    if grid_step <= 0:
        raise GridTooLarge("grid step must be positive", grid_step=grid_step)
    structure = _Structure(g)
    top = g.max_demand
    count = int(math.ceil(top / grid_step - 1e-9)) + 1
    if count ** structure.n > config.grid_cap:
        raise GridTooLarge(
            "grid too large", points=count ** structure.n, cap=config.grid_cap, periods=structure.n
        )
    full = np.arange(count) * grid_step
    full[-1] = top
    levels, offsets = [], []
    for curve in structure.curves:
        keep = (curve(full) <= g.budget + _ABS_TOL) & (full >= structure.lower - _ABS_TOL)
        keep &= full <= structure.upper + _ABS_TOL
        first = int(np.argmax(keep)) if keep.any() else count
        levels.append(full[first:][keep[first:]] if keep.any() else full[:0])
        offsets.append(first)
    total = math.prod(len(lv) for lv in levels)
    LOG.debug(f"Oracle enumerating {total} of {count ** structure.n} grid points")
    chunks = [(start, min(start + _ORACLE_CHUNK, total)) for start in range(0, total, _ORACLE_CHUNK)]
    # pruned levels of a period stay contiguous, so local indexes map back by offset
    work = [
        (structure, levels, np.asarray(offsets), count, start, stop, config.tolerance)
        for start, stop in chunks
    ]
    if config.workers > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(lambda args: _grid_chunk(*args), work))
    else:
        results = [_grid_chunk(*args) for args in work]
    best: tuple[float, int] | None = None
    for result in results:
        if result is None:
            continue
        if best is None or result[0] < best[0] and not math.isclose(result[0], best[0], rel_tol=1e-12, abs_tol=1e-12):
            best = result
        elif math.isclose(result[0], best[0], rel_tol=1e-12, abs_tol=1e-12) and result[1] > best[1]:
            best = result
    if best is None:
        evaluation = _evaluate(structure, np.full(structure.n, top), config.tolerance)
    else:
        index = np.unravel_index(best[1], (count,) * structure.n)
        evaluation = _evaluate(structure, full[np.asarray(index)], config.tolerance)
    return _solution(evaluation, g, "Feasible", "oracle")


def solve(g: GroundInstance, config: SolverConfig | None = None) -> Solution:
    """Solve with the solver ``config.solver`` names.

    ``breakpoints`` falls back to local search from the no-shed solution when
    its cross product is too large.
    """
    config = config or SolverConfig()
    _check_minimize(g)
    if config.solver == "zero_budget":
        return solve_zero_budget(g, config)
    if config.solver == "breakpoints":
        try:
            return solve_breakpoints(g, config)
        except ComboLimitExceeded as e:
            LOG.warning(f"{e.text} ({e.combos} > {e.limit}); falling back to local search")
    structure = _Structure(g)
    seed = _solution(_zero_shed(structure, config.tolerance), g, "Feasible", "local_search")
    return local_search(g, seed, config)


@dataclass
class CheckReport:
    """Violations found by :py:func:`check_solution`."""

    violations: List[Violation] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    @property
    def ok(self) -> bool:
        return not self.violations

    def of(self, constraint_id: str) -> list[Violation]:
        return [v for v in self.violations if v.constraint_id == constraint_id]


def check_solution(g: GroundInstance, s: Solution, tol: float = 1e-6) -> CheckReport:
    """Verify every ground constraint of a solution.

    Never raises: a malformed solution is reported, not rejected.

    Args:
        g (GroundInstance): The grounded problem.
        s (Solution): Values to check.
        tol (float): Relative tolerance, floored at 1e-9 absolute.

    Returns:
        CheckReport: One :py:class:`Violation` per failing row, tagged with the
        constraint id (``C1``.., ``budget`` or ``objective``) and binding.
    """
    report = CheckReport()
    add = report.violations.append
    roles = g.roles
    periods = g.future_periods.tolist()
    n = len(periods)
    if len(s.bounds) != n or len(s.ppsd) != n or len(s.kw) != len(g.demand):
        add(Violation("shape", None, None, float(len(s.bounds) - n)))
        return report
    bounds = [float(b) for b in s.bounds]
    ppsd = [float(v) for v in s.ppsd]
    kw = np.asarray(s.kw, dtype=np.float64)
    demand = g.demand
    times = g.times.tolist()

    for limit in g.limits:
        values = bounds if limit.param == roles.bound else ppsd
        for p, value in zip(periods, values):
            slack = value - limit.value if limit.sense == ">=" else limit.value - value
            if not _geq(slack, 0.0, tol):
                add(Violation(limit.cid, None, p, slack))
    if roles.link_cid is not None:
        for p, b, v in zip(periods, bounds, ppsd):
            if not _geq(v, b, tol):
                add(Violation(roles.link_cid, None, p, _slack(v, b)))
    for group in g.supply:
        v = ppsd[periods.index(group.period)]
        for row in group.rows.tolist():
            need = group.coef * float(kw[row])
            if not _geq(v, need, tol):
                add(Violation(group.cid, times[row], group.period, _slack(v, need)))
    for row in g.fixed_kw.tolist():
        if not _close(float(kw[row]), float(demand[row]), tol):
            add(Violation(roles.within_cid, times[row], int(g.periods[row]), _slack(float(kw[row]), float(demand[row]))))
    slots = g.period_slot
    for row in g.min_records.tolist():
        d, b = float(demand[row]), bounds[int(slots[row])]
        expected, cid = (b, roles.exceed_cid) if d > b else (d, roles.within_cid)
        if not _close(float(kw[row]), expected, tol):
            add(Violation(cid, times[row], int(g.periods[row]), _slack(float(kw[row]), expected)))
    future = g.future_mask
    shed = float(np.sum(demand[future] - kw[future]) * g.time_interval_size)
    if not _geq(g.budget, shed, tol):
        add(Violation("budget", None, None, _slack(g.budget, shed)))
    objective = g.rate * sum(ppsd) + g.offset * n
    if not _close(float(s.objective), objective, tol):
        add(Violation("objective", None, None, _slack(float(s.objective), objective)))
    if report.violations:
        LOG.debug(f"check_solution: {len(report)} violations")
    return report
