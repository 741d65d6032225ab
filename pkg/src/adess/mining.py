"""Block production and difficulty adjustment.

Block discovery is a Bernoulli guessing process: with difficulty D and
hashrate h the expected waiting time is D/h.  Stochastic mode samples the
geometric waiting time over discrete ticks; certainty-equivalent mode
replaces the draw with its expectation.  The RNG is Python's Mersenne
Twister (`random.Random`), seeded from a 64-bit integer, so identical seeds
replay bit-exactly on any platform.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import List, Optional, Sequence

#: Sentinel returned when hashrate is zero: the chain is stalled.
NEVER_FOUND = math.inf


@dataclass(frozen=True)
class CertaintyEquivalent:
    """Deterministic block times: exactly D/h."""


@dataclass(frozen=True)
class Stochastic:
    """Geometric waiting time over ticks of fixed length."""

    seed: int = 0
    tick: float = 0.01

    def __post_init__(self):
        if self.tick <= 0:
            raise ValueError("tick must be > 0")


MiningMode = object  # CertaintyEquivalent | Stochastic


@dataclass(frozen=True)
class DifficultyRule:
    """Retargeting regime: full, partial-beta, or per-epoch adjustment."""

    mode: str  # "full" | "partial" | "epoch"
    beta: float = 1.0
    epoch_length: int = 1
    target_block_time: float = 1.0

    def __post_init__(self):
        if self.mode not in ("full", "partial", "epoch"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must be in (0, 1]")
        if self.epoch_length < 1:
            raise ValueError("epoch length must be >= 1")
        if self.target_block_time <= 0:
            raise ValueError("target block time must be > 0")

    @classmethod
    def full(cls, target_block_time: float = 1.0) -> "DifficultyRule":
        return cls("full", target_block_time=target_block_time)

    @classmethod
    def partial(cls, beta: float, target_block_time: float = 1.0) -> "DifficultyRule":
        return cls("partial", beta=beta, target_block_time=target_block_time)

    @classmethod
    def epoch(cls, length: int, target_block_time: float = 1.0) -> "DifficultyRule":
        return cls("epoch", epoch_length=length, target_block_time=target_block_time)


@dataclass(frozen=True)
class MinerAgent:
    """A mining participant: honest miners target the canonical chain, the
    attacker its own secret chain (resolved by the scenario runner)."""

    tag: str
    hashrate: float
    targets_canonical: bool = True

    def __post_init__(self):
        if self.hashrate < 0:
            raise ValueError("hashrate must be >= 0")


def next_block_time(difficulty: float, hashrate: float, mode: MiningMode,
                    rng: Optional[random.Random] = None) -> float:
    """Waiting time for the next block, or NEVER_FOUND at zero hashrate."""
    if difficulty <= 0:
        raise ValueError("difficulty must be > 0")
    if hashrate < 0:
        raise ValueError("hashrate must be >= 0")
    if hashrate == 0:
        return NEVER_FOUND
    if isinstance(mode, CertaintyEquivalent):
        return difficulty / hashrate
    if isinstance(mode, Stochastic):
        if rng is None:
            raise ValueError("stochastic mode needs an RNG")
        p = min(hashrate * mode.tick / difficulty, 1.0)
        if p >= 1.0:
            return mode.tick
        # inverse-CDF draw of the geometric trial count (first success)
        u = rng.random()
        ticks = math.ceil(math.log1p(-u) / math.log1p(-p))
        return max(ticks, 1) * mode.tick
    raise TypeError(f"unknown mining mode {mode!r}")


def adjust_difficulty(prev_difficulty: float, implied_hashrate: float,
                      rule: DifficultyRule,
                      epoch_history: Optional[Sequence[float]] = None) -> float:
    """Next-block difficulty given the hashrate implied by the last block.

    Full: retarget to implied hashrate.  Partial(beta): move a fraction beta
    of the way there.  Epoch(E): unchanged mid-epoch; `epoch_history` is the
    list of observed block times in the closing epoch and triggers a retarget
    when it holds E entries.
    """
    if prev_difficulty <= 0 or implied_hashrate <= 0:
        raise ValueError("inputs must be > 0")
    if rule.mode == "full":
        return implied_hashrate * rule.target_block_time
    if rule.mode == "partial":
        growth = implied_hashrate / prev_difficulty - 1.0
        return prev_difficulty * (1.0 + rule.beta * growth)
    # epoch
    history = epoch_history or ()
    if len(history) < rule.epoch_length:
        return prev_difficulty
    actual = sum(history)
    target = rule.epoch_length * rule.target_block_time
    return prev_difficulty * (target / actual)


def required_hashrate_series(growth: float, n_blocks: int,
                             rule: DifficultyRule) -> List[float]:
    """Per-block hashrate needed to sustain inter-block time 1/(1+growth),
    starting from unit difficulty and unit target pace."""
    if growth <= -1:
        raise ValueError("growth must be > -1")
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    g = 1.0 + growth
    if rule.mode == "full":
        return [g ** k for k in range(1, n_blocks + 1)]
    if rule.mode == "partial":
        base = 1.0 + rule.beta * growth
        return [g * base ** (k - 1) for k in range(1, n_blocks + 1)]
    # epoch: difficulty steps up by the realized growth factor each retarget
    E = rule.epoch_length
    return [g ** ((k - 1) // E + 1) for k in range(1, n_blocks + 1)]


def sustained_growth_cost(growth: float, n_blocks: int, rule: DifficultyRule,
                          delta: float = 1.0, unit_cost: float = 1.0) -> float:
    """Discounted dollar cost of sustaining the growth rate: each block costs
    hashrate times its duration 1/(1+growth), discounted from the block's
    start time."""
    g = 1.0 + growth
    series = required_hashrate_series(growth, n_blocks, rule)
    total = 0.0
    for k, h in enumerate(series):
        total += unit_cost * (h / g) * delta ** (k / g)
    return total
