"""Constrained pulse synthesis.

At fixed detuning the amplitudes ``f`` minimize a perturbative infidelity
subject to equality constraints on the effective Hamiltonian.  The detuning
is chosen by an outer scan with golden-section refinement.  Objective and
constraints are low-degree polynomials in ``f`` whose exact gradients come
from the lattice forms.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares, minimize

from .drive import PulseSpec, monochromatic_reference
from .effective import CONSTRAINT_SETS, constraint_forms
from .functionals import FunctionalKind, ImprovementReport, cycle_infidelity, objective_form
from .propagate import IntegrationError

__all__ = [
    "OptimizationProblem",
    "OptimizationResult",
    "SweepRow",
    "improvement_sweep",
    "solve",
    "solve_at_delta",
]

log = logging.getLogger(__name__)

FEASIBLE_TOL = 1e-9
KKT_TOL = 1e-8
GOLDEN = (np.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class OptimizationProblem:
    """Fixed physics plus objective, constraint variant and detuning scan."""

    m: int = 10
    n: int = 5
    eta: float = 0.05
    f_tg: float = 0.1
    objective: str = "state"
    initial: str = "g1"
    d: int = 2
    average: bool = False
    constraints: str = "five"
    delta_lo: float = 0.0
    delta_hi: float = 0.5
    delta_step: float = 0.01
    refine_iters: int = 20
    maxiter: int = 500
    restarts: int = 4
    restart_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        FunctionalKind(self.objective)
        if self.constraints not in CONSTRAINT_SETS:
            raise ValueError(f"constraints must be one of {sorted(CONSTRAINT_SETS)}")
        if not self.delta_lo < self.delta_hi or self.delta_step <= 0:
            raise ValueError("need delta_lo < delta_hi and delta_step > 0")
        if not self.m > self.n:
            raise ValueError("only m > n is supported")
        if self.refine_iters < 0 or self.restarts < 0:
            raise ValueError("refine_iters and restarts must be non-negative")

    def spec(self, delta: float, f) -> PulseSpec:
        return PulseSpec(m=self.m, n=self.n, delta=delta, f=f, eta=self.eta, f_tg=self.f_tg)

    def initial_guess(self) -> np.ndarray:
        """Monochromatic leading-order solution ``f0 = f_tg / eta``, other tones off."""
        f = np.zeros(2 * self.n + 1)
        f[self.n] = self.f_tg / self.eta
        return f

    def replace(self, **changes) -> "OptimizationProblem":
        data = asdict(self)
        data.update(changes)
        return OptimizationProblem(**data)

    def to_dict(self) -> dict:
        return {"schema": 1, **asdict(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizationProblem":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known - {"schema"}
        if unknown:
            raise KeyError(f"unknown problem keys: {sorted(unknown)}")
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass
class OptimizationResult:
    delta_opt: float
    f_opt: np.ndarray
    objective_value: float
    residuals: np.ndarray
    feasible: bool
    iterations: int
    delta_profile: list = field(default_factory=list)
    kkt_norm: float = float("nan")
    converged: bool = False
    message: str = ""

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals))) if len(self.residuals) else 0.0

    def spec(self, problem: OptimizationProblem) -> PulseSpec:
        return problem.spec(self.delta_opt, self.f_opt)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "delta_opt": self.delta_opt,
            "f_opt": [float(x) for x in self.f_opt],
            "objective_value": self.objective_value,
            "residuals": [float(x) for x in self.residuals],
            "feasible": self.feasible,
            "iterations": self.iterations,
            "kkt_norm": self.kkt_norm,
            "converged": self.converged,
            "message": self.message,
            "delta_profile": [[float(d), float(v)] for d, v in self.delta_profile],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizationResult":
        return cls(
            delta_opt=data["delta_opt"],
            f_opt=np.asarray(data["f_opt"], dtype=float),
            objective_value=data["objective_value"],
            residuals=np.asarray(data["residuals"], dtype=float),
            feasible=data["feasible"],
            iterations=data["iterations"],
            delta_profile=[tuple(p) for p in data.get("delta_profile", [])],
            kkt_norm=data.get("kkt_norm", float("nan")),
            converged=data.get("converged", False),
            message=data.get("message", ""),
        )

    @classmethod
    def load(cls, path) -> "OptimizationResult":
        return cls.from_dict(json.loads(Path(path).read_text()))


class _Model:
    """Objective and constraints at fixed detuning, with exact gradients."""

    def __init__(self, problem: OptimizationProblem, delta: float):
        spec = problem.spec(delta, problem.initial_guess())
        self.obj = objective_form(spec, problem.objective, problem.initial, problem.d, problem.average)
        self.rows = constraint_forms(spec, problem.constraints)
        self.f_tg = problem.f_tg

    def objective(self, f):
        return self.obj.value(f).real, self.obj.grad(f).real

    def residuals(self, f) -> np.ndarray:
        out = np.empty(len(self.rows))
        for i, (form, axis, rhs) in enumerate(self.rows):
            v = form.value(f)
            out[i] = (v.real if axis == "real" else v.imag) - (self.f_tg / 2 if rhs == "half_ftg" else rhs)
        return out

    def jacobian(self, f) -> np.ndarray:
        rows = []
        for form, axis, _ in self.rows:
            g = form.grad(f)
            rows.append(g.real if axis == "real" else g.imag)
        return np.array(rows)

    def kkt_norm(self, f) -> float:
        """Norm of the objective gradient projected off the constraint normals."""
        _, g = self.objective(f)
        J = self.jacobian(f)
        lam, *_ = np.linalg.lstsq(J.T, -g, rcond=None)
        return float(np.linalg.norm(g + J.T @ lam))


def _newton_polish(model: _Model, f, iters: int = 8):
    """Minimum-norm Newton steps onto the constraint manifold."""
    for _ in range(iters):
        r = model.residuals(f)
        if np.max(np.abs(r)) < 1e-14:
            break
        try:
            step, *_ = np.linalg.lstsq(model.jacobian(f), r, rcond=None)
        except np.linalg.LinAlgError:
            break
        f = f - step
    return f


def _feasibility(model: _Model, x0):
    """Least-squares solution of the constraint equations (phase one)."""
    sol = least_squares(model.residuals, x0, jac=model.jacobian, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return sol.x, int(sol.nfev)


def _local_solve(problem: OptimizationProblem, model: _Model, delta: float, x0) -> OptimizationResult:
    start, nfev = _feasibility(model, x0)
    r = model.residuals(start)
    if np.max(np.abs(r)) >= FEASIBLE_TOL:
        return OptimizationResult(
            delta_opt=float(delta), f_opt=start, objective_value=float(model.objective(start)[0]),
            residuals=r, feasible=False, iterations=nfev, message="no feasible point (least-squares compromise)",
        )
    with np.errstate(all="ignore"):
        sol = minimize(
            model.objective, start, jac=True, method="SLSQP",
            constraints=[{"type": "eq", "fun": model.residuals, "jac": model.jacobian}],
            options={"maxiter": problem.maxiter, "ftol": 1e-14},
        )
    f = sol.x if np.all(np.isfinite(sol.x)) else start
    f = _newton_polish(model, f)
    if not np.all(np.isfinite(f)) or np.max(np.abs(model.residuals(f))) >= FEASIBLE_TOL:
        f = start
    r = model.residuals(f)
    kkt = model.kkt_norm(f)
    return OptimizationResult(
        delta_opt=float(delta), f_opt=f, objective_value=float(model.objective(f)[0]), residuals=r,
        feasible=bool(np.max(np.abs(r)) < FEASIBLE_TOL), iterations=nfev + int(sol.nit), kkt_norm=kkt,
        converged=bool(sol.success and kkt < KKT_TOL), message=str(sol.message),
    )


def _rank(res: OptimizationResult) -> tuple:
    if res.feasible:
        return (0 if res.converged else 1, res.objective_value)
    return (2, float(np.linalg.norm(res.residuals)))


def solve_at_delta(problem: OptimizationProblem, delta: float, x0=None) -> OptimizationResult:
    """Equality-constrained minimization over ``f`` at fixed detuning.

    A least-squares solve of the constraints supplies a feasible start, then
    sequential least squares programming with analytic gradients minimizes
    the objective and Newton steps restore feasibility to round-off.  The
    same is repeated from ``problem.restarts`` seeded perturbations of the
    start and the best converged feasible point wins.  If none is feasible,
    the least-squares compromise is returned and flagged infeasible.
    """
    model = _Model(problem, delta)
    x0 = problem.initial_guess() if x0 is None else np.asarray(x0, dtype=float)
    rng = np.random.default_rng([problem.seed, int(round(abs(delta) * 1e9))])
    starts = [x0] + [x0 + rng.normal(scale=problem.restart_scale, size=x0.size) for _ in range(problem.restarts)]
    results = [_local_solve(problem, model, delta, s) for s in starts]
    best = min(results, key=_rank)
    best.iterations = sum(r.iterations for r in results)
    return best


def _score(res: OptimizationResult) -> tuple:
    # feasible points by objective, otherwise by residual size; ties to smaller delta
    if res.feasible:
        return (0, res.objective_value, res.delta_opt)
    return (1, float(np.linalg.norm(res.residuals)), res.delta_opt)


def solve(problem: OptimizationProblem) -> OptimizationResult:
    """Detuning scan plus golden-section refinement around the best grid point."""
    steps = int(np.floor((problem.delta_hi - problem.delta_lo) / problem.delta_step + 1e-9))
    grid = problem.delta_lo + problem.delta_step * np.arange(steps + 1)
    results = [solve_at_delta(problem, d) for d in grid]
    profile = [(r.delta_opt, r.objective_value if r.feasible else float("nan")) for r in results]
    best = min(results, key=_score)
    total_iters = sum(r.iterations for r in results)

    lo = max(problem.delta_lo, best.delta_opt - problem.delta_step)
    hi = min(problem.delta_hi, best.delta_opt + problem.delta_step)
    cache: dict[float, OptimizationResult] = {}

    def evaluate(d):
        if d not in cache:
            cache[d] = solve_at_delta(problem, d, x0=best.f_opt)
        return cache[d]

    a, b = lo, hi
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    for _ in range(problem.refine_iters):
        if _score(evaluate(c)) <= _score(evaluate(d)):
            b, d = d, c
            c = b - GOLDEN * (b - a)
        else:
            a, c = c, d
            d = a + GOLDEN * (b - a)
    refined = list(cache.values())
    total_iters += sum(r.iterations for r in refined)
    profile += [(r.delta_opt, r.objective_value if r.feasible else float("nan")) for r in refined]
    best = min(results + refined, key=_score)
    best.delta_profile = sorted(profile, key=lambda p: p[0])
    best.iterations = total_iters
    return best


@dataclass(frozen=True)
class SweepRow:
    n: int
    R_cycle: float
    R_theory: float
    I_mono: float
    I_poly: float
    delta_opt: float
    feasible: bool
    f_opt: tuple = ()
    error: str = ""

    @property
    def report(self) -> ImprovementReport:
        return ImprovementReport(self.I_mono, self.I_poly, self.R_cycle)


def improvement_sweep(base: OptimizationProblem, n_range, cycle_kwargs=None) -> list[SweepRow]:
    """Optimize for each ``n`` and compare one-cycle infidelities with the reference."""
    cycle_kwargs = cycle_kwargs or {}
    reference = monochromatic_reference(base.f_tg, base.eta, base.m)
    I_mono = cycle_infidelity(reference, base.initial, **cycle_kwargs).value
    ref_obj = objective_form(reference, base.objective, base.initial, base.d, base.average).value(reference.f).real
    rows = []
    for n in n_range:
        problem = base.replace(n=n)
        try:
            res = solve(problem)
            spec = res.spec(problem)
            I_poly = cycle_infidelity(spec, base.initial, **cycle_kwargs).value
            rows.append(SweepRow(n, I_mono / I_poly, ref_obj / res.objective_value, I_mono, I_poly,
                                 res.delta_opt, res.feasible, tuple(res.f_opt)))
        except (IntegrationError, ValueError, np.linalg.LinAlgError) as exc:
            log.warning("sweep point n=%s failed: %s", n, exc)
            rows.append(SweepRow(n, float("nan"), float("nan"), I_mono, float("nan"), float("nan"), False,
                                 error=str(exc)))
    return rows
