"""Discrete-event simulation of honest miners, one attacker and observers.

The event loop is strictly sequential: events are processed in (time,
sequence-number) order, so identical configurations (including the seed)
replay bit-identically.  Honest hashrate is grouped by the canonical head
each mining node currently follows; a group mines jointly and regroups
whenever any miner's canonical head changes.  The attacker mines a secret
chain and broadcasts it according to its strategy.
"""

from __future__ import annotations

import heapq
import io
import math
import random
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Set, Tuple

from .chain import Block, BlockId, BlockTree, ChainRef
from .economics import AttackParams, boundary_blocks
from .errors import ConfigError
from .forkchoice import AdessParams, NodeView
from .mining import (CertaintyEquivalent, DifficultyRule, MiningMode,
                     NEVER_FOUND, Stochastic, adjust_difficulty,
                     next_block_time)

ATTACKER = "attacker"

STRATEGIES = ("paper_optimal", "fixed_growth", "accelerated", "budish")


def accelerated_rate(xi: float, N: int, delay: float) -> float:
    """Growth factor that closes the latency window at the boundary:
    1 + {xi + (delay/N)(1+xi)}."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return 1.0 + xi + (delay / N) * (1.0 + xi)


@dataclass(frozen=True)
class ScenarioConfig:
    protocol: str = "adess"                      # "adess" | "nakamoto"
    adess: AdessParams = field(default_factory=AdessParams)
    attack: AttackParams = field(default_factory=AttackParams)
    mining: MiningMode = field(default_factory=CertaintyEquivalent)
    difficulty: DifficultyRule = field(default_factory=DifficultyRule.full)
    n_honest_nodes: int = 1
    honest_hashrates: Optional[Dict[str, float]] = None  # node -> hashrate
    delay: float = 0.0                           # uniform per-link delay
    delays: Optional[Dict[Tuple[str, str], float]] = None  # (sender, node)
    attacker_strategy: str = "paper_optimal"
    growth: Optional[float] = None               # for fixed_growth
    eclipse_set: Tuple[str, ...] = ()            # hidden from attacker bcasts
    eclipse_from_honest: Tuple[str, ...] = ()    # hidden from honest bcasts
    attack_start_height: int = 2
    horizon: float = 40.0
    seed: int = 0

    def node_names(self) -> List[str]:
        return [f"n{i}" for i in range(self.n_honest_nodes)]

    def hashrates(self) -> Dict[str, float]:
        if self.honest_hashrates is not None:
            return dict(self.honest_hashrates)
        rates = {name: 0.0 for name in self.node_names()}
        rates["n0"] = 1.0
        return rates

    def link_delay(self, sender: str, node: str) -> float:
        if self.delays is not None and (sender, node) in self.delays:
            return self.delays[(sender, node)]
        if sender == node:
            return 0.0
        return self.delay

    def validate(self) -> None:
        if self.protocol not in ("adess", "nakamoto"):
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if self.attacker_strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.attacker_strategy!r}")
        if self.attacker_strategy == "fixed_growth" and self.growth is None:
            raise ConfigError("fixed_growth requires a growth rate")
        if self.horizon <= 0:
            raise ConfigError("horizon must be > 0")
        if self.n_honest_nodes < 1:
            raise ConfigError("need at least one honest node")
        rates = self.hashrates()
        if any(h < 0 for h in rates.values()) or not any(rates.values()):
            raise ConfigError("honest hashrates must be >= 0 with some > 0")
        unknown = set(rates) - set(self.node_names())
        if unknown:
            raise ConfigError(f"hashrates name unknown nodes: {sorted(unknown)}")
        if self.delay < 0:
            raise ConfigError("delay must be >= 0")
        if self.attack_start_height < 1:
            raise ConfigError("attack_start_height must be >= 1")
        if self.protocol == "adess" and self.adess.alpha != self.attack.alpha:
            raise ConfigError(
                "protocol and attack confirmation depths must agree")


@dataclass
class RunReport:
    protocol: str
    seed: int
    horizon: float
    attack_succeeded: bool
    split_persists: bool
    fork_block: Optional[BlockId]
    conveyed_time: Optional[float]
    broadcast_time: Optional[float]
    boundary_crossing_time: Optional[float]
    attacker_blocks: int
    realized_cost: float
    realized_revenue: float
    per_node_head: Dict[str, BlockId]
    per_node_height: Dict[str, int]
    series: List[Tuple[float, str, BlockId, int]]
    snapshot: str

    def to_text(self) -> str:
        out = io.StringIO()
        out.write("[run]\n")
        for key in ("protocol", "seed", "horizon", "attack_succeeded",
                    "split_persists", "fork_block", "conveyed_time",
                    "broadcast_time", "boundary_crossing_time",
                    "attacker_blocks", "realized_cost", "realized_revenue"):
            out.write(f"{key} = {getattr(self, key)!r}\n")
        out.write("[heads]\n")
        for node in sorted(self.per_node_head):
            out.write(f"{node} = {self.per_node_head[node]} "
                      f"height={self.per_node_height[node]}\n")
        out.write("[tree]\n")
        out.write(self.snapshot)
        return out.getvalue()

    def series_csv(self) -> str:
        lines = ["time,node,head,height"]
        for t, node, head, height in self.series:
            lines.append(f"{t!r},{node},{head},{height}")
        return "\n".join(lines) + "\n"


@dataclass
class ProbeReport:
    """Late-joining node diagnosis: penalty state under each rule."""

    join_time: float
    undecidable: bool
    undecidable_forks: List[BlockId]
    inferred_head: Optional[BlockId]
    inference_used: bool
    nakamoto_head: BlockId
    reference_head: BlockId


class _Simulation:
    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        self.tree = BlockTree(genesis_difficulty=1.0)
        self.time = 0.0
        self._seq = 0
        self._heap: List[tuple] = []
        self.rng_honest = random.Random(cfg.seed)
        self.rng_attacker = random.Random(cfg.seed ^ 0x5DEECE66D)

        self.nodes: Dict[str, NodeView] = {
            name: NodeView(cfg.adess, name=name)
            for name in cfg.node_names()}
        # passive observer tracking the honest chain on behalf of the attacker
        self.att_obs = NodeView(cfg.adess, name="att_obs")

        self._nextdiff: Dict[BlockId, float] = {self.tree.genesis_id: 1.0}
        self._epoch_hist: Dict[BlockId, Tuple[float, ...]] = {
            self.tree.genesis_id: ()}

        self._canonical: Dict[str, BlockId] = {
            name: self.tree.genesis_id for name in self.nodes}
        self._group_gen: Dict[BlockId, int] = {}
        self._active_groups: Dict[BlockId, float] = {}
        self.series: List[Tuple[float, str, BlockId, int]] = []

        # attacker state
        self.phase = "waiting"
        self.fork_block: Optional[BlockId] = None
        self.fork_time: Optional[float] = None
        self.attacker_chain: List[BlockId] = []
        self.attacker_blocks: Dict[BlockId, Block] = {}
        self.realized_cost = 0.0
        self.conveyed_time: Optional[float] = None
        self.broadcast_time: Optional[float] = None
        self._attacker_target: Optional[int] = None

    # -- event plumbing ----------------------------------------------------

    def _push(self, time: float, kind: str, payload: tuple):
        self._seq += 1
        heapq.heappush(self._heap, (time, self._seq, kind, payload))

    def run(self) -> RunReport:
        self._regroup()
        self._maybe_start_attack()
        while self._heap:
            time, _, kind, payload = heapq.heappop(self._heap)
            if time > self.cfg.horizon:
                break
            self.time = time
            if kind == "mine":
                self._on_mine(*payload)
            elif kind == "amine":
                self._on_attacker_mine(*payload)
            elif kind == "arrive":
                self._on_arrive(*payload)
        return self._report()

    # -- difficulty tracking -----------------------------------------------

    def _register_block(self, bid: BlockId, parent: BlockId, difficulty: float,
                        hashrate: float, duration: float):
        rule = self.cfg.difficulty
        if rule.mode == "epoch":
            hist = self._epoch_hist[parent] + (duration,)
            if len(hist) >= rule.epoch_length:
                nd = adjust_difficulty(difficulty, hashrate, rule, hist)
                hist = ()
            else:
                nd = difficulty
            self._epoch_hist[bid] = hist
        else:
            # applied hashrate stands in for the implied hashrate so that the
            # deterministic retarget recurrences are reproduced exactly
            nd = adjust_difficulty(difficulty, hashrate, rule)
            self._epoch_hist[bid] = ()
        self._nextdiff[bid] = nd

    # -- honest mining -----------------------------------------------------

    def _mining_nodes(self) -> List[Tuple[str, float]]:
        rates = self.cfg.hashrates()
        return [(name, rates[name]) for name in sorted(rates)
                if rates[name] > 0]

    def _regroup(self):
        """Regroup honest hashrate by canonical head and (re)schedule one
        block-found event per group.  Groups whose head and hashrate are
        unchanged keep their pending event so rescheduling never resets a
        slow group's progress."""
        groups: Dict[BlockId, float] = {}
        for name, rate in self._mining_nodes():
            head = self._canonical[name]
            groups[head] = groups.get(head, 0.0) + rate
        for head, rate in list(self._active_groups.items()):
            if groups.get(head) != rate:
                self._group_gen[head] = self._group_gen.get(head, 0) + 1
                del self._active_groups[head]
        for head in sorted(groups):
            hashrate = groups[head]
            if self._active_groups.get(head) == hashrate:
                continue  # pending event still valid
            self._group_gen[head] = self._group_gen.get(head, 0) + 1
            self._active_groups[head] = hashrate
            difficulty = self._nextdiff[head]
            dur = next_block_time(difficulty, hashrate, self.cfg.mining,
                                  self.rng_honest)
            if dur == NEVER_FOUND:
                continue
            self._push(self.time + dur, "mine",
                       (self._group_gen[head], head, hashrate, difficulty, dur))

    def _on_mine(self, generation: int, head: BlockId, hashrate: float,
                 difficulty: float, duration: float):
        if generation != self._group_gen.get(head):
            return  # stale schedule, superseded by a regroup
        self._group_gen[head] = generation + 1
        self._active_groups.pop(head, None)
        miner = self._leader_for(head)
        bid = self.tree.append_block(head, difficulty, miner=miner,
                                     time=self.time)
        self._register_block(bid, head, difficulty, hashrate, duration)
        block = self.tree.block(bid)
        self._push(self.time, "arrive", ("att_obs", block))
        for node in sorted(self.nodes):
            if node in self.cfg.eclipse_from_honest:
                continue
            delay = self.cfg.link_delay(miner, node)
            self._push(self.time + delay, "arrive", (node, block))
        # the group that mined must be rescheduled even if no head changes
        self._regroup()
        self._maybe_start_attack()
        self._check_broadcast_condition()

    def _leader_for(self, head: BlockId) -> str:
        for name, _ in self._mining_nodes():
            if self._canonical[name] == head:
                return name
        return self._mining_nodes()[0][0]

    # -- observation -------------------------------------------------------

    def _node_canonical(self, view: NodeView) -> ChainRef:
        if self.cfg.protocol == "adess":
            return view.adess_canonical()
        return view.nakamoto_canonical()

    def _on_arrive(self, node: str, block: Block):
        view = self.att_obs if node == "att_obs" else self.nodes[node]
        view.observe(block, self.time)
        if node == "att_obs":
            self._maybe_start_attack()
            self._check_broadcast_condition()
            return
        head = self._node_canonical(view).head
        if head != self._canonical[node]:
            self._canonical[node] = head
            self.series.append(
                (self.time, node, head, self.tree.block(head).height))
            self._regroup()
        self._check_conveyance(node, block)
        self._check_broadcast_condition()

    def _check_conveyance(self, node: str, block: Block):
        """The victim (n0) conveys the exchange item once it has observed
        alpha confirmation blocks of the transaction on the incumbent chain."""
        if node != "n0" or self.conveyed_time is not None:
            return
        if self.fork_block is None or block.miner == ATTACKER:
            return
        need = self.cfg.attack.alpha + self.cfg.attack.sigma
        fork_h = self.tree.block(self.fork_block).height
        if (block.height - fork_h >= need
                and self.tree.is_ancestor(self.fork_block, block.id)):
            self.conveyed_time = self.time

    # -- attacker ----------------------------------------------------------

    def _maybe_start_attack(self):
        if self.phase != "waiting":
            return
        head = self._honest_tip()
        if self.tree.block(head).height < self.cfg.attack_start_height:
            return
        self.phase = "mining"
        self.fork_block = head
        self.fork_time = self.time
        if self.cfg.attacker_strategy in ("paper_optimal", "fixed_growth"):
            self._attacker_target = boundary_blocks(
                self.cfg.attack.horizon_blocks, self.cfg.attack.xi)
        elif self.cfg.attacker_strategy == "accelerated":
            # enough blocks that even the last node to hear the broadcast
            # still observes the boundary crossed
            N = self.cfg.attack.horizon_blocks
            self._attacker_target = math.ceil(
                (N + self.cfg.delay) * (1.0 + self.cfg.attack.xi) - 1e-9)
        else:  # budish
            self._attacker_target = None
        self._schedule_attacker_block()

    def _honest_tip(self) -> BlockId:
        return self._node_canonical(self.att_obs).head

    def _attacker_growth(self) -> float:
        xi = self.cfg.attack.xi
        if self.cfg.attacker_strategy == "paper_optimal":
            return 1.0 + xi
        if self.cfg.attacker_strategy == "fixed_growth":
            assert self.cfg.growth is not None
            return 1.0 + self.cfg.growth
        if self.cfg.attacker_strategy == "accelerated":
            return accelerated_rate(xi, self.cfg.attack.horizon_blocks,
                                    self.cfg.delay)
        raise AssertionError

    def _schedule_attacker_block(self):
        if self.phase != "mining":
            return
        parent = self.attacker_chain[-1] if self.attacker_chain \
            else self.fork_block
        assert parent is not None
        difficulty = self._nextdiff[parent]
        if self.cfg.attacker_strategy == "budish":
            N = self.cfg.attack.horizon_blocks
            surplus = len(self.attacker_chain) >= N - 1
            hashrate = 1.0 + (self.cfg.attack.epsilon_extra if surplus else 0.0)
        else:
            hashrate = difficulty * self._attacker_growth()
        dur = next_block_time(difficulty, hashrate, self.cfg.mining,
                              self.rng_attacker)
        if dur == NEVER_FOUND:
            return
        self._push(self.time + dur, "amine", (difficulty, hashrate, dur))

    def _on_attacker_mine(self, difficulty: float, hashrate: float,
                          duration: float):
        if self.phase != "mining":
            return
        parent = self.attacker_chain[-1] if self.attacker_chain \
            else self.fork_block
        assert parent is not None and self.fork_time is not None
        bid = self.tree.append_block(parent, difficulty, miner=ATTACKER,
                                     time=self.time)
        self._register_block(bid, parent, difficulty, hashrate, duration)
        self.attacker_chain.append(bid)
        self.attacker_blocks[bid] = self.tree.block(bid)
        start = self.time - duration - self.fork_time
        self.realized_cost += (self.cfg.attack.c * hashrate * duration
                               * self.cfg.attack.delta ** max(start, 0.0))
        target = self._attacker_target
        if target is None or len(self.attacker_chain) < target:
            self._schedule_attacker_block()
        self._check_broadcast_condition()

    def _broadcast_ready(self) -> bool:
        if self.phase != "mining" or self.conveyed_time is None:
            return False
        n_a = len(self.attacker_chain)
        if n_a == 0:
            return False
        if self.cfg.attacker_strategy == "budish":
            a_cum = self.tree.cumulative_difficulty(self.attacker_chain[-1])
            ic_cum = self.tree.cumulative_difficulty(self._honest_tip())
            return a_cum > ic_cum
        assert self._attacker_target is not None
        return n_a >= self._attacker_target

    def _check_broadcast_condition(self):
        if not self._broadcast_ready():
            return
        self.phase = "done"
        self.broadcast_time = self.time
        for node in sorted(self.nodes):
            if node in self.cfg.eclipse_set:
                continue
            delay = self.cfg.link_delay(ATTACKER, node)
            for bid in self.attacker_chain:
                self._push(self.time + delay, "arrive",
                           (node, self.attacker_blocks[bid]))
        for bid in self.attacker_chain:
            self._push(self.time, "arrive",
                       ("att_obs", self.attacker_blocks[bid]))

    # -- reporting ---------------------------------------------------------

    def _report(self) -> RunReport:
        cfg = self.cfg
        heads = {n: self._canonical[n] for n in self.nodes}
        heights = {n: self.tree.block(h).height for n, h in heads.items()}
        on_attack = {
            n: bool(self.attacker_chain)
            and self.tree.is_ancestor(self.attacker_chain[0], heads[n])
            for n in heads}
        succeeded = (self.broadcast_time is not None
                     and self.conveyed_time is not None
                     and any(on_attack.values()))
        split = len(set(heads.values())) > 1
        crossing = None
        victim = self.nodes["n0"]
        for rec in victim.penalty_records():
            if rec.deactivated_at is not None and (
                    crossing is None or rec.deactivated_at < crossing):
                crossing = rec.deactivated_at
        revenue = 0.0
        if succeeded and self.broadcast_time is not None:
            assert self.fork_time is not None
            elapsed = self.broadcast_time - self.fork_time
            revenue = (cfg.attack.delta ** max(elapsed - 1.0, 0.0)
                       * (cfg.attack.v
                          + cfg.attack.p_B * len(self.attacker_chain)))
        return RunReport(
            protocol=cfg.protocol,
            seed=cfg.seed,
            horizon=cfg.horizon,
            attack_succeeded=succeeded,
            split_persists=split,
            fork_block=self.fork_block,
            conveyed_time=self.conveyed_time,
            broadcast_time=self.broadcast_time,
            boundary_crossing_time=crossing,
            attacker_blocks=len(self.attacker_chain),
            realized_cost=self.realized_cost,
            realized_revenue=revenue,
            per_node_head=heads,
            per_node_height=heights,
            series=list(self.series),
            snapshot=self.tree.snapshot(),
        )


def run_scenario(cfg: ScenarioConfig) -> RunReport:
    """Run one end-to-end scenario and return its report."""
    return _Simulation(cfg).run()


def latency_split_check(cfg: ScenarioConfig) -> RunReport:
    """Engineer the latency split conditions: two honest mining nodes, one of
    which receives attacker broadcasts with the full delay bound, and more
    honest hashrate on the attacker's side of the partition."""
    if cfg.protocol != "adess":
        raise ConfigError("latency split check applies to the penalty protocol")
    if cfg.attacker_strategy not in ("fixed_growth", "accelerated"):
        raise ConfigError("use fixed_growth or accelerated strategy")
    engineered = replace(
        cfg,
        n_honest_nodes=2,
        honest_hashrates={"n0": 0.55, "n1": 0.45},
        delays={(ATTACKER, "n0"): 0.0, (ATTACKER, "n1"): cfg.delay,
                ("n0", "n1"): 0.0, ("n1", "n0"): 0.0},
        # large epoch: no retarget inside the run, so both sides keep pace
        difficulty=DifficultyRule.epoch(10 ** 6),
    )
    return run_scenario(engineered)


def disconnected_node_probe(cfg: ScenarioConfig, join_time: float
                            ) -> ProbeReport:
    """Replay a finished run into a node that joins at `join_time`: earlier
    blocks are bulk-synced without temporal order, later ones observed
    normally.  Penalty assignment at pre-join forks is undecidable; the
    operational fallback adopts the chain being actively mined."""
    sim = _Simulation(cfg)
    sim.run()
    reference = sim.nodes["n0"]
    late = NodeView(cfg.adess, name="late")
    post_join = 0
    for bid, arrival in reference.log.entries:
        if bid == reference.tree.genesis_id:
            continue
        block = reference.tree.block(bid)
        if arrival < join_time:
            late.sync_observe(block, arrival)
        else:
            late.observe(block, arrival)
            post_join += 1
    undecidable = bool(late.undecidable_forks)
    inferred = None
    inference_used = False
    if undecidable:
        inference_used = True
        # actively-mined chain: the head above the most recently arrived block
        if post_join:
            last = late.log.entries[-1][0]
            for head in sorted(late.tree.heads):
                if late.tree.is_ancestor(last, head):
                    inferred = head
                    break
        if inferred is None:
            inferred = late.nakamoto_canonical().head
    else:
        inferred = late.adess_canonical().head
    return ProbeReport(
        join_time=join_time,
        undecidable=undecidable,
        undecidable_forks=late.undecidable_forks,
        inferred_head=inferred,
        inference_used=inference_used,
        nakamoto_head=late.nakamoto_canonical().head,
        reference_head=sim._canonical["n0"],
    )
