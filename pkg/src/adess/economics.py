"""Closed-form attack profitability and the deterrence solvers.

Conventions: all monetary quantities are in abstract dollars at exchange
rate 1; block pace and honest hashrate are normalized to 1.  The penalty
parameter is `xi`; the marginal surplus hashrate the classic attacker adds
at its final block is stored separately as `epsilon_extra` (the two share a
glyph in the source analysis but are unrelated quantities).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Tuple

from .errors import DomainError, SolverFailure

#: slack used when taking ceilings of products like N*(1+xi), so that values
#: representable exactly (e.g. 2*5) do not round up from float noise.
_CEIL_EPS = 1e-9


def boundary_blocks(n_ic: int, xi: float) -> int:
    """Number of penalized-chain blocks needed at the canonical boundary:
    ceil(N*(1+xi)) with float-noise protection."""
    return math.ceil(n_ic * (1.0 + xi) - _CEIL_EPS)


@dataclass(frozen=True)
class AttackParams:
    """Economic parameter vector for one attack evaluation."""

    v: float = 0.0            # transaction value
    p_B: float = 1.0          # block reward
    c: float = 1.0            # cost of one hashrate unit per unit time
    delta: float = 1.0        # time discount per unit time, in (0, 1]
    xi: float = 1.0           # penalty parameter, >= 0
    alpha: int = 6            # confirmation depth, >= 1
    sigma: int = 0            # blocks between fork and tx inclusion
    epsilon_extra: float = 0.01  # classic attacker's marginal surplus hashrate
    beta: float = 1.0         # partial difficulty-adjustment factor
    latency: float = 0.0      # propagation delay bound
    N: Optional[int] = None   # post-fork IC blocks at the boundary (default alpha+sigma)
    B: int = 0                # extra secret blocks past the boundary

    def __post_init__(self):
        if self.v < 0 or self.p_B <= 0 or self.c <= 0:
            raise ValueError("v >= 0 and p_B, c > 0 required")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must be in (0, 1]")
        if self.xi < 0 or self.alpha < 1 or self.sigma < 0 or self.B < 0:
            raise ValueError("xi >= 0, alpha >= 1, sigma >= 0, B >= 0 required")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must be in (0, 1]")

    @property
    def horizon_blocks(self) -> int:
        """N: incumbent-chain post-fork blocks at the canonical boundary."""
        return self.N if self.N is not None else self.alpha + self.sigma


@dataclass(frozen=True)
class ProfitBreakdown:
    discounted_revenue: float
    discounted_cost: float
    blocks_on_attacker_chain: int

    @property
    def profit(self) -> float:
        return self.discounted_revenue - self.discounted_cost


# ---------------------------------------------------------------------------
# Classic (pre-penalty) protocol economics
# ---------------------------------------------------------------------------

def nakamoto_attack_profit(p: AttackParams) -> ProfitBreakdown:
    """Ex-ante expected profit of the classic double-spend strategy: match the
    incumbent pace for N-1 blocks, then add surplus hashrate at block N."""
    N = p.horizon_blocks
    if N < 1:
        raise ValueError("N must be >= 1")
    d, c = p.delta, p.c
    revenue = d ** (N - 1) * (p.v + p.p_B * N)
    cost = c * (sum(d ** (n - 1) for n in range(1, N))
                + (1.0 + p.epsilon_extra) * d ** (N - 1))
    return ProfitBreakdown(revenue, cost, N)


def nakamoto_zero_profit_v(p: AttackParams) -> float:
    """Transaction value at which the classic attack breaks even."""
    N = p.horizon_blocks
    d, c = p.delta, p.c
    bracket = sum(d ** (n - 1) for n in range(1, N)) \
        + (1.0 + p.epsilon_extra) * d ** (N - 1)
    return d ** (-(N - 1)) * c * bracket - p.p_B * N


def nakamoto_min_profitable_v(p: AttackParams) -> float:
    """delta -> 1 limit of the break-even value: (c - p_B)*N + c*eps."""
    N = p.horizon_blocks
    return (p.c - p.p_B) * N + p.c * p.epsilon_extra


def moroz_round_payoff(v: float, p_B: float, c: float, N: int,
                       gamma: float) -> float:
    """War-of-attrition round payoff for the player entering round N+1 when
    its opponent exits: v + p_B(N+1) - c(1+gamma)^(N+1)."""
    if N < 0:
        raise ValueError("N must be >= 0")
    return v + p_B * (N + 1) - c * (1.0 + gamma) ** (N + 1)


def guo_ren_bound(k: int, rho: float, lambda_rate: float, delta_prop: float,
                  variant: str = "abs") -> float:
    """Upper bound on the probability a confirmed receipt is later reversed,
    as a function of confirmation blocks k, honest fraction rho, mining rate
    lambda and propagation delay bound.

    `variant="literal"` evaluates the expression exactly as printed in its
    source, which is undefined for p <= 1; `variant="abs"` substitutes
    |p - 1| under the square root and restricts p to (0, 1), documented as a
    deviation because the printed formula is unusable on its stated domain.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must be in (0, 1]")
    if lambda_rate <= 0 or delta_prop < 0:
        raise ValueError("lambda_rate > 0 and delta_prop >= 0 required")
    p = rho * math.exp(lambda_rate * delta_prop)
    if variant == "literal":
        if p <= 1.0:
            raise DomainError(
                f"literal variant undefined for p = {p!r} <= 1 "
                "(square root of a non-positive quantity)")
        root = math.sqrt(1.0 / (p - 1.0))
    elif variant == "abs":
        if not 0.0 < p < 1.0:
            raise DomainError(
                f"abs-corrected variant requires p in (0, 1), got p = {p!r}")
        root = math.sqrt(1.0 / abs(p - 1.0))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return (2.0 + 2.0 * root) * 4.0 * p * (1.0 - p) ** k


# ---------------------------------------------------------------------------
# Penalized-protocol attack economics
# ---------------------------------------------------------------------------

def fork_depth_growth(N: int, xi: float, tau: int) -> float:
    """Growth rate needed to reach the boundary at incumbent block N when the
    fork starts tau blocks behind the head: gamma = xi + tau/N."""
    if N < 1 or tau < 0:
        raise ValueError("N >= 1 and tau >= 0 required")
    return xi + tau / N


def adess_attack_cost(N: int, xi: float, delta: float = 1.0,
                      c: float = 1.0) -> float:
    """Discounted cost of growing the attack chain at rate (1+xi) until the
    canonical boundary at incumbent block N."""
    if N < 1:
        raise ValueError("N must be >= 1")
    g = 1.0 + xi
    return c * sum(delta ** (n / g) * g ** n
                   for n in range(boundary_blocks(N, xi)))


def partial_adjustment_attack_cost(N: int, xi: float, beta: float,
                                   delta: float = 1.0, c: float = 1.0) -> float:
    """Attack cost when difficulty only partially adjusts: the hashrate base
    softens from (1+xi) to (1+beta*xi) while the block count and pace are
    still set by the penalty xi."""
    g = 1.0 + xi
    base = 1.0 + beta * xi
    return c * sum(delta ** (n / g) * base ** n
                   for n in range(boundary_blocks(N, xi)))


def attack_plan_profit(p: AttackParams, tau: int = 0,
                       N: Optional[int] = None, B: Optional[int] = None) -> ProfitBreakdown:
    """Profit of the general plan (fork tau blocks back, reach the boundary
    at incumbent block N, then mine B more secret blocks)."""
    N = p.horizon_blocks if N is None else N
    B = p.B if B is None else B
    if N < 1 or tau < 0 or B < 0:
        raise ValueError("N >= 1, tau >= 0, B >= 0 required")
    d, c = p.delta, p.c
    gamma = fork_depth_growth(N, p.xi, tau)
    g = 1.0 + gamma
    K = boundary_blocks(N, p.xi)
    revenue = d ** (N + B - 1) * (p.v + p.p_B * (K + B))
    cost = c * (sum(d ** (n / g) * g ** n for n in range(K))
                + sum(d ** (N + b) for b in range(B)))
    return ProfitBreakdown(revenue, cost, K + B)


def adess_attack_profit(p: AttackParams) -> ProfitBreakdown:
    """Profit of the cost-minimal plan: head fork, boundary at N = alpha +
    sigma incumbent blocks, immediate broadcast."""
    return attack_plan_profit(p, tau=0)


def broadcast_margin(p: AttackParams) -> float:
    """Marginal profit from secretly mining one block past the boundary;
    non-positive whenever p_B <= c."""
    N = p.horizon_blocks
    d = p.delta
    K = boundary_blocks(N, p.xi)
    return ((d ** N - d ** (N - 1)) * (p.v + p.p_B * (K + 1))
            + d ** N * (p.p_B - p.c))


# ---------------------------------------------------------------------------
# Marginal effect of the penalty parameter
# ---------------------------------------------------------------------------

def cost_term(n: int, xi: float, delta: float) -> float:
    """n-th term of the discounted attack cost: delta^(n/(1+xi)) (1+xi)^n."""
    g = 1.0 + xi
    return delta ** (n / g) * g ** n


def cost_term_derivative(n: int, xi: float, delta: float) -> float:
    """d/dxi of cost_term: n (1+xi)^(n-2) delta^(n/(1+xi)) [(1+xi) - ln delta].

    Positive for n >= 1 and delta in (0, 1); the n = 0 term is constant.
    """
    if n == 0:
        return 0.0
    g = 1.0 + xi
    return n * g ** (n - 2) * delta ** (n / g) * (g - math.log(delta))


def penalty_margin(xi: float, N: int, delta: float, c: float = 1.0,
                   p_B: float = 1.0, dxi: float = 1e-6) -> float:
    """Marginal effect of raising the penalty on attacker profit.  The block
    reward and extra-block terms enter only when the increase bumps the
    boundary block count (the ceiling increments under dxi)."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    if xi <= 0:
        raise ValueError("xi must be > 0")
    K = boundary_blocks(N, xi)
    jump = boundary_blocks(N, xi + dxi) > K
    margin = -c * sum(cost_term_derivative(n, xi, delta) for n in range(K))
    if jump:
        margin += delta ** N * p_B - delta ** N * c
    return margin


def affine_cost_term(n: int, xi: float, delta: float, rho_aff: float,
                     f_n: float) -> float:
    """Cost term when the growth schedule is affine in the penalty:
    gamma(n) = rho + xi*f(n)."""
    g = 1.0 + rho_aff + xi * f_n
    return delta ** (n / g) * g ** n


def affine_cost_term_derivative(n: int, xi: float, delta: float,
                                rho_aff: float, f_n: float) -> float:
    """d/dxi of affine_cost_term: n f(n) delta^(n/g) g^(n-2) [g - ln delta]
    with g = 1 + rho + xi f(n).  Positive for n >= 1, delta in (0, 1)."""
    if n == 0:
        return 0.0
    g = 1.0 + rho_aff + xi * f_n
    return n * f_n * delta ** (n / g) * g ** (n - 2) * (g - math.log(delta))


def affine_growth_cost_margin(xi: float, rho_aff: float,
                              f: Callable[[int], float], N: int, delta: float,
                              c: float = 1.0, p_B: float = 1.0) -> float:
    """Penalty margin under the affine growth schedule; negative whenever
    p_B <= c, so deterrence survives non-constant growth."""
    if rho_aff <= 0:
        raise ValueError("rho_aff must be > 0")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    K = boundary_blocks(N, xi)
    deriv_sum = sum(affine_cost_term_derivative(n, xi, delta, rho_aff, f(n))
                    for n in range(K))
    return p_B - c * deriv_sum - c


# ---------------------------------------------------------------------------
# Deterrence solvers
# ---------------------------------------------------------------------------

def min_deterring_xi(v: float, params: AttackParams, xi_lo: float = 1e-3,
                     tol: float = 1e-6, max_iter: int = 200,
                     tail_samples: int = 20) -> float:
    """Smallest penalty (on a bisection grid) rendering the attack
    unprofitable at transaction value v, verified to stay unprofitable at
    sampled larger penalties."""

    def profit(xi: float) -> float:
        return adess_attack_profit(replace(params, v=v, xi=xi)).profit

    if profit(xi_lo) < 0:
        xi_star = xi_lo
    else:
        hi = max(2 * xi_lo, 1.0)
        it = 0
        while profit(hi) >= 0:
            hi *= 2.0
            it += 1
            if it > 60:
                raise SolverFailure("no deterring penalty found",
                                    bracket=(xi_lo, hi))
        lo = xi_lo
        it = 0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if profit(mid) < 0:
                hi = mid
            else:
                lo = mid
            it += 1
            if it > max_iter:
                raise SolverFailure("bisection did not converge",
                                    bracket=(lo, hi))
        xi_star = hi
    for i in range(1, tail_samples + 1):
        probe = xi_star * (1.0 + 0.5 * i)
        if profit(probe) >= 0:
            raise SolverFailure(
                f"profit non-negative again at xi = {probe}",
                bracket=(xi_star, probe))
    return xi_star


def safe_value_interval(xi: float, params: AttackParams) -> float:
    """Largest v_max such that the attack is unprofitable for every
    transaction value in [0, v_max): v_max = -profit(xi, v=0)."""
    if xi <= 0:
        raise ValueError("xi must be > 0")
    return -adess_attack_profit(replace(params, v=0.0, xi=xi)).profit


# ---------------------------------------------------------------------------
# Protocol cost comparison and the hashrate dominance check
# ---------------------------------------------------------------------------

def malicious_cost_series(protocol: str, params: AttackParams,
                          horizon: int) -> Tuple[List[float], float]:
    """Per-block cost series of maintaining a permanent consensus split, and
    its present value.  The penalized-protocol attacker pays exponentially up
    to the boundary and nothing after; the classic attacker pays a constant
    matching cost forever."""
    N = params.horizon_blocks
    if horizon < N:
        raise ValueError("horizon must cover the boundary")
    c, d, xi = params.c, params.delta, params.xi
    if protocol == "adess":
        series = [c * (1.0 + xi) ** t if t <= N else 0.0
                  for t in range(1, horizon + 1)]
    elif protocol == "nakamoto":
        series = [c] * horizon
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    pv = sum(d ** t * s for t, s in zip(range(1, horizon + 1), series))
    return series, pv


@dataclass(frozen=True)
class HashrateComparison:
    xi: Fraction
    epsilon_extra: Fraction
    N: int
    adjustment: str
    adess_hashrate: Fraction
    nakamoto_hashrate: Fraction

    @property
    def adess_weakly_greater(self) -> bool:
        return self.adess_hashrate >= self.nakamoto_hashrate


def expected_attack_hashrate(xi: Fraction, N: int, adjustment: str) -> Fraction:
    """Total expected hashrate to make the attack chain canonical at
    incumbent block N: N(1+xi) with no difficulty adjustment, the compounding
    sum under full per-block adjustment."""
    xi = Fraction(xi)
    if adjustment == "none":
        return N * (1 + xi)
    if adjustment == "full":
        return sum((1 + xi) ** n for n in range(1, N + 1))
    raise ValueError(f"unknown adjustment {adjustment!r}")


def proposition1_check(grid: Iterable[Tuple[Fraction, Fraction, int, str]]
                       ) -> List[HashrateComparison]:
    """Exact-arithmetic comparison of attack hashrate across the grid of
    (xi, epsilon_extra, N, adjustment) points; requires xi > epsilon_extra."""
    out = []
    for xi, eps, N, adjustment in grid:
        xi, eps = Fraction(xi), Fraction(eps)
        if xi <= eps:
            raise ValueError("the comparison requires xi > epsilon_extra")
        adess = expected_attack_hashrate(xi, N, adjustment)
        nakamoto = Fraction(N) + eps
        out.append(HashrateComparison(xi, eps, N, adjustment, adess, nakamoto))
    return out


def brute_force_optimal_plan(p: AttackParams, tau_max: int = 10,
                             n_extra: int = 10, b_max: int = 20
                             ) -> Tuple[int, int, int]:
    """Exhaustive search over (tau, N, B) for the most profitable plan."""
    n0 = p.alpha + p.sigma
    best = None
    best_plan = None
    for tau in range(tau_max + 1):
        for N in range(n0, n0 + n_extra + 1):
            for B in range(b_max + 1):
                profit = attack_plan_profit(p, tau=tau, N=N, B=B).profit
                if best is None or profit > best:
                    best, best_plan = profit, (tau, N, B)
    assert best_plan is not None
    return best_plan
