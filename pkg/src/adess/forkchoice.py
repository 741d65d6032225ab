"""Canonical-chain selection: Nakamoto scoring and the penalty protocol.

A NodeView is one network participant's subjective state: an arrival-ordered
observation log over a private copy of the block tree, plus the penalty
machinery derived from it.  Penalty assignment is driven purely by the order
in which this node observed blocks, so two views fed the same blocks in
different orders may disagree; identical orders agree exactly.

Penalty state is kept per (fork-block, branch) pair, where a branch is
identified by the fork-block child it passes through.  Every head descending
through a penalized branch is penalized; the first branch observed to reach
the confirmation depth is the baseline and is never penalized at that fork.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .chain import Block, BlockId, BlockTree, ChainRef
from .errors import NotPenalized

#: Tolerance used when comparing weighted lengths at the canonical boundary.
_BOUNDARY_EPS = 1e-9


@dataclass(frozen=True)
class AdessParams:
    """Protocol parameters for penalty scoring.

    alpha: confirmation depth in blocks (>= 1).
    xi: penalty parameter; a penalized chain scores 1/(1+xi) per block.
    epsilon: score bump granted on crossing the canonical boundary.
    latency_bound: propagation delay upper bound, carried for scenario use.
    """

    alpha: int = 6
    xi: float = 1.0
    epsilon: float = 1e-6
    latency_bound: float = 0.0

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if self.xi <= 0:
            raise ValueError("xi must be > 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.latency_bound < 0:
            raise ValueError("latency_bound must be >= 0")


class ObservationLog:
    """Arrival-ordered log of observed blocks with a first-seen index."""

    def __init__(self):
        self.entries: List[Tuple[BlockId, float]] = []
        self.first_seen: Dict[BlockId, int] = {}

    def append(self, bid: BlockId, arrival: float) -> int:
        if bid in self.first_seen:
            raise ValueError(f"block {bid} already logged")
        if self.entries and arrival < self.entries[-1][1]:
            raise ValueError("arrival times must be non-decreasing")
        idx = len(self.entries)
        self.entries.append((bid, arrival))
        self.first_seen[bid] = idx
        return idx

    def __len__(self):
        return len(self.entries)

    def __contains__(self, bid: BlockId) -> bool:
        return bid in self.first_seen


@dataclass
class PenaltyRecord:
    """An assigned penalty: (penalized chain, fork, baseline chain, active?)."""

    penalized: ChainRef
    fork: BlockId
    baseline: ChainRef
    active: bool
    assigned_at: float
    deactivated_at: Optional[float] = None
    # branch children at the fork; the ChainRef fields above are refreshed
    # from these when records are read back out.
    penalized_branch: BlockId = -1
    baseline_branch: BlockId = -1


@dataclass
class _ForkState:
    fork: BlockId
    # branch child -> (observation index, achieving block) of the alpha-th
    # post-fork block on that branch
    alpha_reached: Dict[BlockId, Tuple[int, BlockId]] = field(default_factory=dict)
    # branch child -> (max post-fork length, deepest block achieving it)
    branch_len: Dict[BlockId, Tuple[int, BlockId]] = field(default_factory=dict)
    records: Dict[BlockId, PenaltyRecord] = field(default_factory=dict)
    assigned: bool = False
    suppressed: bool = False
    undecidable: bool = False
    baseline_branch: Optional[BlockId] = None
    # lazily filled block -> branch-child map with path compression
    memo: Dict[BlockId, Optional[BlockId]] = field(default_factory=dict)


class NodeView:
    """Single-threaded subjective state of one observing node."""

    def __init__(self, params: AdessParams, name: str = "node",
                 genesis_difficulty: float = 1.0):
        self.params = params
        self.name = name
        self.tree = BlockTree(genesis_difficulty=genesis_difficulty)
        self.log = ObservationLog()
        self.log.append(self.tree.genesis_id, 0.0)
        self._forks: Dict[BlockId, _ForkState] = {}
        self._pending: Dict[BlockId, List[Tuple[Block, float]]] = {}
        # reset anchor block -> (cumdiff at anchor, re-based score at anchor)
        self._resets: Dict[BlockId, Tuple[float, float]] = {}
        self._synced_blocks: int = 0

    # -- observation -------------------------------------------------------

    def observe(self, block: Block, arrival: float) -> "NodeView":
        """Record the arrival of `block`; orphans are buffered until their
        parent is observed (in-order delivery per chain)."""
        if block.id in self.tree:
            return self
        if block.parent not in self.tree:
            self._pending.setdefault(block.parent, []).append((block, arrival))
            return self
        self._connect(block, arrival)
        return self

    def sync_observe(self, block: Block, arrival: float) -> "NodeView":
        """Ingest a block without temporal-order information (bulk sync for a
        node that was not connected when the blocks were broadcast).  Forks
        discovered this way can never receive a penalty assignment and are
        flagged undecidable."""
        if block.id in self.tree:
            return self
        if block.parent not in self.tree:
            self._pending.setdefault(block.parent, []).append((block, arrival))
            return self
        self._connect(block, arrival, synced=True)
        return self

    def _connect(self, block: Block, arrival: float, synced: bool = False):
        self.tree.insert(block)
        idx = self.log.append(block.id, arrival)
        if synced:
            self._synced_blocks += 1
        parent = block.parent
        assert parent is not None
        siblings = self.tree.children[parent]

        if len(siblings) == 2 and parent not in self._forks:
            self._new_fork(parent, block, idx, arrival, synced)
        elif parent in self._forks and len(siblings) > 2:
            self._new_branch(self._forks[parent], block, idx, arrival, synced)

        self._advance(block, idx, arrival, synced)

        # flush any orphans waiting on this block
        for child, child_arrival in self._pending.pop(block.id, []):
            self._connect(child, max(child_arrival, arrival), synced=synced)

    # -- fork bookkeeping --------------------------------------------------

    def _new_fork(self, fork: BlockId, new_child: Block, idx: int,
                  arrival: float, synced: bool):
        fs = _ForkState(fork=fork, undecidable=synced)
        self._forks[fork] = fs
        if synced:
            fs.assigned = True
            fs.suppressed = True
        existing = [c for c in self.tree.children[fork] if c != new_child.id]
        for c in existing:
            self._scan_branch(fs, c)
        fs.branch_len[new_child.id] = (1, new_child.id)
        fs.memo[new_child.id] = new_child.id
        if not synced and any(fs.alpha_reached):
            self._fire(fs, arrival)

    def _scan_branch(self, fs: _ForkState, branch: BlockId):
        """Initialize length and alpha bookkeeping for a pre-existing branch."""
        fork_h = self.tree.block(fs.fork).height
        alpha = self.params.alpha
        best_len, best_block = 0, branch
        alpha_idx: Optional[Tuple[int, BlockId]] = None
        stack = [branch]
        while stack:
            bid = stack.pop()
            fs.memo[bid] = branch
            depth = self.tree.block(bid).height - fork_h
            if depth > best_len or (depth == best_len and bid < best_block):
                best_len, best_block = depth, bid
            if depth == alpha:
                cand = (self.log.first_seen[bid], bid)
                if alpha_idx is None or cand < alpha_idx:
                    alpha_idx = cand
            stack.extend(self.tree.children[bid])
        fs.branch_len[branch] = (best_len, best_block)
        if alpha_idx is not None:
            fs.alpha_reached[branch] = alpha_idx

    def _new_branch(self, fs: _ForkState, block: Block, idx: int,
                    arrival: float, synced: bool):
        fs.branch_len[block.id] = (1, block.id)
        fs.memo[block.id] = block.id
        if synced or fs.undecidable:
            return
        if fs.assigned and not fs.suppressed:
            # late sibling at an already-resolved fork: penalized immediately
            rec = self._make_record(fs, block.id, arrival)
            self._cross_check(fs, rec, arrival)

    def _branch_at(self, fs: _ForkState, bid: BlockId) -> Optional[BlockId]:
        """Branch child of fs.fork through which `bid` descends, or None."""
        memo = fs.memo
        fork_h = self.tree.block(fs.fork).height
        path: List[BlockId] = []
        cur = bid
        res: Optional[BlockId] = None
        while True:
            hit = memo.get(cur, _MISS)
            if hit is not _MISS:
                res = hit
                break
            blk = self.tree.block(cur)
            if blk.height <= fork_h:
                res = None
                break
            if blk.parent == fs.fork:
                path.append(cur)
                res = cur
                break
            path.append(cur)
            cur = blk.parent
        for p in path:
            memo[p] = res
        return res

    # -- penalty assignment ------------------------------------------------

    def _advance(self, block: Block, idx: int, arrival: float, synced: bool):
        """Update per-fork lengths for the new block, record alpha arrivals,
        fire assignments and sweep the canonical boundary."""
        alpha = self.params.alpha
        for fs in self._forks.values():
            c = self._branch_at(fs, block.id)
            if c is None:
                continue
            depth = block.height - self.tree.block(fs.fork).height
            cur_len, _ = fs.branch_len[c]
            if depth > cur_len:
                fs.branch_len[c] = (depth, block.id)
            if synced or fs.undecidable:
                continue
            if depth == alpha and c not in fs.alpha_reached:
                fs.alpha_reached[c] = (idx, block.id)
                if not fs.assigned:
                    self._fire(fs, arrival)
            if fs.assigned and not fs.suppressed:
                rec = fs.records.get(c)
                if rec is not None and rec.active and depth > cur_len:
                    self._cross_check(fs, rec, arrival)

    def _fire(self, fs: _ForkState, arrival: float):
        """Penalty assignment at a fork whose first branch just reached alpha."""
        if fs.assigned or not fs.alpha_reached:
            return
        baseline = min(fs.alpha_reached, key=fs.alpha_reached.get)
        fs.assigned = True
        fs.baseline_branch = baseline
        _, alpha_block = fs.alpha_reached[baseline]
        if self._chain_has_active_penalty(alpha_block, exclude=fs):
            # generalized rule: a first-to-alpha chain that is itself under an
            # active penalty suppresses assignment at this fork entirely
            fs.suppressed = True
            return
        new = [self._make_record(fs, c, arrival)
               for c in self.tree.children[fs.fork] if c != baseline]
        for rec in new:
            self._cross_check(fs, rec, arrival)

    def _make_record(self, fs: _ForkState, branch: BlockId,
                     arrival: float) -> PenaltyRecord:
        assert fs.baseline_branch is not None
        rec = PenaltyRecord(
            penalized=ChainRef(fs.branch_len[branch][1]),
            fork=fs.fork,
            baseline=ChainRef(fs.branch_len[fs.baseline_branch][1]),
            active=True,
            assigned_at=arrival,
            penalized_branch=branch,
            baseline_branch=fs.baseline_branch,
        )
        fs.records[branch] = rec
        return rec

    def _chain_has_active_penalty(self, bid: BlockId,
                                  exclude: Optional[_ForkState] = None) -> bool:
        for fs in self._forks.values():
            if fs is exclude or not fs.assigned or fs.suppressed:
                continue
            c = self._branch_at(fs, bid)
            if c is None:
                continue
            rec = fs.records.get(c)
            if rec is not None and rec.active:
                return True
        return False

    # -- canonical boundary ------------------------------------------------

    def _cross_check(self, fs: _ForkState, rec: PenaltyRecord, arrival: float):
        """Deactivate `rec` if the penalized branch has reached the canonical
        boundary, re-basing the chain's score when its last penalty clears."""
        if not rec.active:
            return
        assert fs.baseline_branch is not None
        len_pen, head_pen = fs.branch_len[rec.penalized_branch]
        len_base, _ = fs.branch_len[fs.baseline_branch]
        if len_pen < (1.0 + self.params.xi) * len_base - _BOUNDARY_EPS:
            return
        rec.active = False
        rec.deactivated_at = arrival
        if self._chain_has_active_penalty(head_pen):
            return
        # last active penalty on this chain: re-base to the highest-scoring
        # baseline among penalties deactivated at this instant
        best = None
        for other in self._forks.values():
            if not other.assigned or other.suppressed:
                continue
            c = self._branch_at(other, head_pen)
            if c is None:
                continue
            orec = other.records.get(c)
            if orec is None or orec.active or orec.deactivated_at != arrival:
                continue
            score = self._best_baseline_score(other)
            if best is None or score > best:
                best = score
        if best is not None:
            self._resets[head_pen] = (
                self.tree.cumulative_difficulty(head_pen),
                best + self.params.epsilon,
            )

    def _best_baseline_score(self, fs: _ForkState) -> float:
        assert fs.baseline_branch is not None
        best = None
        for h in self.tree.heads:
            if self._branch_at(fs, h) == fs.baseline_branch:
                s = self.adjusted_score(ChainRef(h))
                if best is None or s > best:
                    best = s
        if best is None:  # baseline branch has no head only if it IS a head
            best = self.adjusted_score(ChainRef(fs.baseline_branch))
        return best

    def check_boundary(self, rec: PenaltyRecord,
                       at_time: Optional[float] = None) -> PenaltyRecord:
        """Re-evaluate one record against current lengths and return it."""
        fs = self._forks[rec.fork]
        when = at_time if at_time is not None else (
            self.log.entries[-1][1] if self.log.entries else 0.0)
        self._cross_check(fs, rec, when)
        return rec

    # -- scoring -----------------------------------------------------------

    def adjusted_score(self, chain: ChainRef) -> float:
        """Cumulative difficulty, re-based past the deepest crossing anchor
        on the chain's path."""
        head = chain.head
        cum = self.tree.cumulative_difficulty(head)
        best_anchor = None
        best_height = -1
        for anchor in self._resets:
            h = self.tree.block(anchor).height
            if h > best_height and self.tree.is_ancestor(anchor, head):
                best_anchor, best_height = anchor, h
        if best_anchor is None:
            return cum
        anchor_cum, value = self._resets[best_anchor]
        return value + (cum - anchor_cum)

    def penalized_score(self, chain: ChainRef, fork: BlockId) -> float:
        """Discounted post-fork length of an actively penalized chain."""
        fs = self._forks.get(fork)
        if fs is None or not fs.assigned or fs.suppressed:
            raise NotPenalized(f"no active penalty at fork {fork}")
        c = self._branch_at(fs, chain.head)
        rec = fs.records.get(c) if c is not None else None
        if rec is None or not rec.active:
            raise NotPenalized(f"chain {chain.head} not penalized at {fork}")
        n = self.tree.post_fork_length(chain, fork)
        return n / (1.0 + self.params.xi)

    def active_penalties(self, chain: ChainRef) -> List[PenaltyRecord]:
        out = []
        for fs in self._forks.values():
            if not fs.assigned or fs.suppressed:
                continue
            c = self._branch_at(fs, chain.head)
            if c is None:
                continue
            rec = fs.records.get(c)
            if rec is not None and rec.active:
                out.append(rec)
        return out

    def penalty_records(self) -> List[PenaltyRecord]:
        """All records ever assigned, with chain refs refreshed to the current
        deepest head of each branch."""
        out = []
        for fork in sorted(self._forks):
            fs = self._forks[fork]
            for branch in sorted(fs.records):
                rec = fs.records[branch]
                rec.penalized = ChainRef(fs.branch_len[branch][1])
                assert fs.baseline_branch is not None
                rec.baseline = ChainRef(fs.branch_len[fs.baseline_branch][1])
                out.append(rec)
        return out

    # -- canonical choice --------------------------------------------------

    def _pick(self, scored: List[Tuple[float, BlockId]]) -> ChainRef:
        best_score = max(s for s, _ in scored)
        tied = [h for s, h in scored if s == best_score]
        if len(tied) > 1:
            tied.sort(key=lambda h: (self.log.first_seen[h], h))
        return ChainRef(tied[0])

    def nakamoto_canonical(self) -> ChainRef:
        """Head with maximal raw cumulative difficulty; ties broken by
        earliest first-seen arrival, then lowest id."""
        scored = [(self.tree.cumulative_difficulty(h), h)
                  for h in self.tree.heads]
        return self._pick(scored)

    def adess_canonical(self) -> ChainRef:
        """Head with maximal (possibly re-based) cumulative difficulty among
        chains carrying no active penalty."""
        eligible = [h for h in self.tree.heads
                    if not self.active_penalties(ChainRef(h))]
        if not eligible:
            raise RuntimeError(
                "no penalty-free chain: internal invariant violation")
        scored = [(self.adjusted_score(ChainRef(h)), h) for h in eligible]
        return self._pick(scored)

    # -- diagnostics -------------------------------------------------------

    @property
    def undecidable_forks(self) -> List[BlockId]:
        return sorted(f for f, fs in self._forks.items() if fs.undecidable)

    def never_penalized_witness(self) -> ChainRef:
        """Constructive path walk from genesis choosing an un-penalized branch
        at every fork; returns a head that never carried a penalty."""
        cur = self.tree.genesis_id
        while self.tree.children[cur]:
            kids = sorted(self.tree.children[cur])
            fs = self._forks.get(cur)
            if fs is None or not fs.assigned or fs.suppressed:
                cur = kids[0]
                continue
            clean = [c for c in kids if c not in fs.records]
            assert clean, f"every branch penalized at fork {cur}"
            cur = clean[0]
        return ChainRef(cur)

    def penalty_ledger(self) -> str:
        """Dump records as `penalty chain=... fork=... baseline=...` lines."""
        lines = []
        for rec in self.penalty_records():
            t_off = "-" if rec.deactivated_at is None else repr(rec.deactivated_at)
            lines.append(
                f"penalty chain={rec.penalized.head} fork={rec.fork} "
                f"baseline={rec.baseline.head} active={1 if rec.active else 0} "
                f"t_on={rec.assigned_at!r} t_off={t_off}")
        return "\n".join(lines) + ("\n" if lines else "")


_MISS = object()
