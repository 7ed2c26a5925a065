"""
Closed-form 1D advection-diffusion laboratory

-eps u'' + beta u' = f with closed-form subdomain solves, the exact trace
map of the middle interval and a three-interval alternating Schwarz whose
per-sweep gap ratios grow like exp(2 delta Pe). Gaps are propagated through
the homogeneous part of the sweep map with a log-scale accumulator so ratios
of order 1e13 keep full relative precision over many sweeps.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from hub.errors import CoefficientError, ConfigurationError
from hub.logger import get_logger


logger = get_logger("analytic1d")

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class Params1D:
    """
    -eps u'' + beta u' = f on (K, L) with u(K) = gamma, u(L) = mu

    Pe = |beta| / (2 eps): the sweep contraction exp(-(beta/eps) delta)
    then reads exp(-2 delta Pe).
    """
    eps: float = 1.0
    beta: float = 1.0
    f: float = 0.0
    K: float = 0.0
    L: float = 1.0
    gamma: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if not self.eps > 0:
            raise CoefficientError(f"eps must be positive, got {self.eps}")
        if self.beta == 0:
            raise CoefficientError("beta = 0 makes the closed form singular")
        if not self.K < self.L:
            raise ConfigurationError(f"interval needs K < L, got ({self.K}, {self.L})")

    @classmethod
    def from_peclet(cls, pe: float, f: float = 0.0, g0: float = 1.0) -> "Params1D":
        return cls(eps=1.0, beta=2.0 * float(pe), f=f, gamma=g0)

    @property
    def peclet(self) -> float:
        return abs(self.beta) / (2.0 * self.eps)

    @property
    def rate(self) -> float:
        return self.beta / self.eps

    def on(self, K: float, L: float, gamma: float = 0.0, mu: float = 0.0) -> "Params1D":
        return replace(self, K=float(K), L=float(L), gamma=float(gamma), mu=float(mu))


def _check_inside(x: np.ndarray, p: Params1D):
    slack = 1e-12 * max(1.0, abs(p.L), abs(p.K))
    if np.any(x < p.K - slack) or np.any(x > p.L + slack):
        raise ConfigurationError(f"x outside [{p.K}, {p.L}]")


def _profile(x: np.ndarray, p: Params1D) -> np.ndarray:
    """(exp(r(x-K)) - 1) / (exp(r(L-K)) - 1) without overflow"""
    r = p.rate
    if r > 0:
        return np.exp(r * (x - p.L)) * np.expm1(-r * (x - p.K)) / np.expm1(-r * (p.L - p.K))
    return np.expm1(r * (x - p.K)) / np.expm1(r * (p.L - p.K))


def exact_solution_1d(x: ArrayLike, p: Params1D) -> ArrayLike:
    """Closed-form Dirichlet solution on (K, L)"""
    xs = np.asarray(x, dtype=float)
    _check_inside(xs, p)
    jump = (p.beta * (p.mu - p.gamma) - p.f * (p.L - p.K)) / p.beta
    u = p.gamma + (p.f / p.beta) * (xs - p.K) + jump * _profile(xs, p)
    u = np.where(xs == p.K, p.gamma, np.where(xs == p.L, p.mu, u))
    return float(u) if np.ndim(x) == 0 else u


def exact_solution_1d_natural(x: ArrayLike, p: Params1D) -> ArrayLike:
    """Closed-form solution on (K, L) with u(K) = gamma and eps u'(L) = 0"""
    xs = np.asarray(x, dtype=float)
    _check_inside(xs, p)
    r = p.rate
    u = p.gamma + (p.f / p.beta) * (xs - p.K)
    if p.f:
        u = u - (p.f / (p.beta * r)) * (np.exp(r * (xs - p.L)) - np.exp(-r * (p.L - p.K)))
    u = np.where(xs == p.K, p.gamma, u)
    return float(u) if np.ndim(x) == 0 else np.broadcast_to(u, xs.shape).copy()


def _check_cuts(cuts: Sequence[float]) -> Tuple[float, float, float, float]:
    if len(cuts) != 4:
        raise ConfigurationError(f"expected four cuts, got {len(cuts)}")
    l1, l2, l3, l4 = (float(c) for c in cuts)
    if not (l1 < l2 <= l3 < l4):
        raise ConfigurationError(f"cuts {tuple(cuts)} violate L1 < L2 <= L3 < L4")
    return l1, l2, l3, l4


def exact_trace_map_1d(gamma: float, mu: float, cuts: Sequence[float],
                       p: Params1D) -> Tuple[float, float]:
    """tau(gamma, mu): values at L2 and L3 of the (L1, L4) solution with end data gamma, mu"""
    l1, l2, l3, l4 = _check_cuts(cuts)
    q = p.on(l1, l4, gamma, mu)
    values = exact_solution_1d(np.array([l2, l3]), q)
    return float(values[0]), float(values[1])


@dataclass(frozen=True)
class Geometry1D:
    """(K, L) split into (K, L2), (L1, L4), (L3, L)"""
    K: float
    cuts: Tuple[float, float, float, float]
    L: float

    @classmethod
    def laboratory(cls, pe: float, delta: float) -> "Geometry1D":
        """K=0, L1=2, L2=L1+delta, L3=L2+2/Pe, L4=L3+delta, L=L4+2"""
        if pe <= 0 or delta <= 0:
            raise ConfigurationError(f"Pe and delta must be positive, got Pe={pe}, delta={delta}")
        l1 = 2.0
        l2 = l1 + delta
        l3 = l2 + 2.0 / pe
        l4 = l3 + delta
        return cls(K=0.0, cuts=(l1, l2, l3, l4), L=l4 + 2.0)

    @property
    def overlaps(self) -> Tuple[float, float]:
        l1, l2, l3, l4 = self.cuts
        return l2 - l1, l4 - l3


@dataclass
class SolveCounter:
    """Evaluations of the middle interval: full solves vs trace-map calls"""
    omega2_solves: int = 0
    tau_calls: int = 0


# samples of the middle-interval solution in a full solve
_OMEGA2_SAMPLES = 65


def _solve_omega2(a: float, b: float, geometry: Geometry1D, p: Params1D,
                  counter: SolveCounter) -> Tuple[float, float]:
    l1, l2, l3, l4 = geometry.cuts
    grid = np.union1d(np.linspace(l1, l4, _OMEGA2_SAMPLES), [l2, l3])
    u2 = exact_solution_1d(grid, p.on(l1, l4, a, b))
    counter.omega2_solves += 1
    return float(u2[np.searchsorted(grid, l2)]), float(u2[np.searchsorted(grid, l3)])


def _tau(a: float, b: float, geometry: Geometry1D, p: Params1D,
         counter: SolveCounter) -> Tuple[float, float]:
    counter.tau_calls += 1
    return exact_trace_map_1d(a, b, geometry.cuts, p)


@dataclass
class RateReport1D:
    """Gap sequence e_k and ratios rho_k = e_k / e_{k+1} of a 1D Schwarz run"""
    pe: float
    delta: float
    log_errors: List[float] = field(default_factory=list)
    iterates: List[Tuple[float, float, float, float]] = field(default_factory=list)
    warmup: int = 8
    converged: bool = False
    diverged: bool = False
    omega2_solves: int = 0
    tau_calls: int = 0

    @property
    def errors(self) -> List[float]:
        return [math.exp(v) if v > -745.0 else 0.0 for v in self.log_errors]

    @property
    def ratios(self) -> List[float]:
        return [math.exp(a - b) for a, b in zip(self.log_errors[:-1], self.log_errors[1:])]

    @property
    def log_ratio_over_2delta(self) -> List[float]:
        return [(a - b) / (2.0 * self.delta) for a, b in zip(self.log_errors[:-1], self.log_errors[1:])]

    @property
    def fitted_log_rho(self) -> float:
        logs = [a - b for a, b in zip(self.log_errors[:-1], self.log_errors[1:])]
        tail = logs[self.warmup:] if len(logs) > self.warmup else logs[1:] or logs
        return float(np.mean(tail)) if tail else float('nan')

    @property
    def rho_fit(self) -> float:
        return math.exp(self.fitted_log_rho)

    @property
    def rate(self) -> float:
        """log(rho_fit) / (2 delta)"""
        return self.fitted_log_rho / (2.0 * self.delta)


def run_schwarz_1d(p: Params1D, delta: float, geometry: Optional[Geometry1D] = None,
                   tol: float = 1e-280, max_sweeps: int = 20,
                   use_exact_tau: bool = False, warmup: int = 8) -> RateReport1D:
    """
    Three-interval alternating Schwarz with closed-form solves.

    u(K) = p.gamma, natural right end. A sweep solves (K, L2) with u2(L2),
    (L3, L) with u2(L3), then (L1, L4) with u1(L1), u3(L4). The gap e_k sums
    |du1(L1)| + |du2(L2)| + |du2(L3)| + |du3(L4)| between sweeps.
    """
    geometry = geometry or Geometry1D.laboratory(p.peclet, delta)
    overlaps = geometry.overlaps
    if not (math.isclose(overlaps[0], delta, rel_tol=1e-9) and math.isclose(overlaps[1], delta, rel_tol=1e-9)):
        raise ConfigurationError(f"both overlaps must equal delta={delta}, got {overlaps}")
    if max_sweeps < 2:
        raise ConfigurationError("at least two sweeps are needed for a ratio")
    l1, l2, l3, l4 = geometry.cuts
    counter = SolveCounter()
    omega2 = _tau if use_exact_tau else _solve_omega2

    left = p.on(geometry.K, l2)
    right = p.on(l3, geometry.L)

    def sweep(prev: Tuple[float, float], hom: bool) -> Tuple[float, float, float, float]:
        p2, q2 = prev
        lp = replace(left, f=0.0) if hom else left
        rp = replace(right, f=0.0) if hom else right
        a = exact_solution_1d(l1, replace(lp, gamma=0.0 if hom else p.gamma, mu=p2))
        b = exact_solution_1d_natural(l4, replace(rp, gamma=q2))
        mp = replace(p, f=0.0) if hom else p
        new_p, new_q = omega2(a, b, geometry, mp, counter)
        return a, new_p, new_q, b

    report = RateReport1D(pe=p.peclet, delta=delta, warmup=warmup)

    # affine iterates from a zero initial guess
    state = (0.0, 0.0, 0.0, 0.0)
    for _ in range(max_sweeps):
        nxt = sweep((state[1], state[2]), hom=False)
        report.iterates.append(nxt)
        if len(report.iterates) == 1:
            gap = [abs(n - s) for n, s in zip(nxt, state)]
            direction = (nxt[1] - state[1], nxt[2] - state[2])
        state = nxt

    first = sum(gap)
    if first == 0.0:
        report.log_errors.append(-math.inf)
        report.converged = True
    else:
        report.log_errors.append(math.log(first))
        norm = abs(direction[0]) + abs(direction[1])
        scale = math.log(norm) if norm > 0 else -math.inf
        if norm > 0:
            direction = (direction[0] / norm, direction[1] / norm)
        for _ in range(1, max_sweeps):
            if report.log_errors[-1] < math.log(tol) or norm == 0:
                break
            a, new_p, new_q, b = sweep(direction, hom=True)
            total = abs(a) + abs(new_p) + abs(new_q) + abs(b)
            if total == 0.0:
                report.log_errors.append(-math.inf)
                break
            report.log_errors.append(scale + math.log(total))
            norm = abs(new_p) + abs(new_q)
            if norm == 0.0:
                break
            direction = (new_p / norm, new_q / norm)
            scale += math.log(norm)
        report.converged = report.log_errors[-1] < math.log(tol)

    tail = report.ratios[warmup:] if len(report.ratios) > warmup else report.ratios[1:]
    report.diverged = bool(tail) and all(r < 1.0 for r in tail)
    report.omega2_solves = counter.omega2_solves
    report.tau_calls = counter.tau_calls

    logger.debug("schwarz 1d", pe=report.pe, delta=delta, sweeps=len(report.log_errors),
                 rate=report.rate, exact_tau=use_exact_tau)
    return report


def reproduce_rate_table(pe_list: Sequence[float], delta_list: Sequence[float],
                         **run_options) -> List[Dict[str, float]]:
    """One row (Pe, delta, rho, log(rho)/2delta, relative deviation from Pe) per cell"""
    if not pe_list or not delta_list:
        raise ConfigurationError("rate table needs non-empty Pe and delta lists")
    rows = []
    for pe in pe_list:
        for delta in delta_list:
            report = run_schwarz_1d(Params1D.from_peclet(pe), delta, **run_options)
            rows.append({
                'Pe': float(pe),
                'delta': float(delta),
                'rho': report.rho_fit,
                'log_rho_over_2delta': report.rate,
                'rel_dev': abs(report.rate - pe) / pe,
                'diverged': report.diverged,
            })
    logger.info("rate table", cells=len(rows),
                max_rel_dev=max(row['rel_dev'] for row in rows))
    return rows
