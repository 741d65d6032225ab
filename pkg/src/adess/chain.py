"""Block-tree data model: blocks, chains, heads and cumulative difficulty.

Blocks are identified by assigned integers rather than content hashes; ids
are only used for lookups and deterministic tie-breaking.  A "chain" is
always represented by its head block; segments are derived on demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Set

from .errors import InvalidDifficulty, NotAnAncestor, UnknownBlock

BlockId = int

GENESIS_ID: BlockId = 0


@dataclass(frozen=True)
class Block:
    id: BlockId
    parent: Optional[BlockId]
    height: int
    difficulty: float
    miner: str
    created_at: float


@dataclass(frozen=True, order=True)
class ChainRef:
    """A chain is the unique path genesis -> head."""

    head: BlockId


class BlockTree:
    """Append-only block tree with cached cumulative difficulty.

    Single writer per tree; all read operations are pure.
    """

    def __init__(self, genesis_difficulty: float = 1.0, miner: str = "genesis",
                 time: float = 0.0, genesis_id: BlockId = GENESIS_ID):
        if genesis_difficulty <= 0:
            raise InvalidDifficulty("genesis difficulty must be > 0")
        genesis = Block(genesis_id, None, 0, genesis_difficulty, miner, time)
        self.blocks: Dict[BlockId, Block] = {genesis_id: genesis}
        self.children: Dict[BlockId, List[BlockId]] = {genesis_id: []}
        self.heads: Set[BlockId] = {genesis_id}
        self._cumdiff: Dict[BlockId, float] = {genesis_id: genesis_difficulty}
        self._next_id: BlockId = genesis_id + 1
        self.genesis_id = genesis_id

    # -- writes ------------------------------------------------------------

    def append_block(self, parent: BlockId, difficulty: float, miner: str = "",
                     time: float = 0.0) -> BlockId:
        """Create a fresh block under `parent` and return its id."""
        if parent not in self.blocks:
            raise UnknownBlock(f"unknown parent {parent}")
        bid = self._next_id
        block = Block(bid, parent, self.blocks[parent].height + 1,
                      difficulty, miner, time)
        self.insert(block)
        return bid

    def insert(self, block: Block) -> None:
        """Insert a fully formed block (used when replaying observed blocks)."""
        if block.id in self.blocks:
            return
        if block.parent is None or block.parent not in self.blocks:
            raise UnknownBlock(f"unknown parent {block.parent}")
        if block.difficulty <= 0:
            raise InvalidDifficulty(f"difficulty {block.difficulty} <= 0")
        parent = self.blocks[block.parent]
        if block.height != parent.height + 1:
            raise ValueError(
                f"height {block.height} != parent height {parent.height} + 1")
        self.blocks[block.id] = block
        self.children[block.id] = []
        self.children[block.parent].append(block.id)
        self.heads.discard(block.parent)
        self.heads.add(block.id)
        self._cumdiff[block.id] = self._cumdiff[block.parent] + block.difficulty
        self._next_id = max(self._next_id, block.id + 1)

    # -- reads -------------------------------------------------------------

    def __contains__(self, bid: BlockId) -> bool:
        return bid in self.blocks

    def block(self, bid: BlockId) -> Block:
        try:
            return self.blocks[bid]
        except KeyError:
            raise UnknownBlock(f"unknown block {bid}") from None

    def cumulative_difficulty(self, bid: BlockId) -> float:
        if bid not in self._cumdiff:
            raise UnknownBlock(f"unknown block {bid}")
        return self._cumdiff[bid]

    def ancestors(self, bid: BlockId) -> Iterator[BlockId]:
        """Yield bid, then each ancestor up to and including genesis."""
        cur: Optional[BlockId] = bid
        while cur is not None:
            yield cur
            cur = self.blocks[cur].parent

    def ancestor_at_height(self, bid: BlockId, height: int) -> Optional[BlockId]:
        b = self.block(bid)
        if height > b.height or height < 0:
            return None
        cur = bid
        while self.blocks[cur].height > height:
            cur = self.blocks[cur].parent
        return cur

    def is_ancestor(self, anc: BlockId, desc: BlockId) -> bool:
        """True iff `anc` lies on the genesis path of `desc` (inclusive)."""
        return self.ancestor_at_height(desc, self.block(anc).height) == anc

    def fork_block(self, a: ChainRef, b: ChainRef) -> BlockId:
        """Deepest common ancestor of the two head paths."""
        x, y = a.head, b.head
        bx, by = self.block(x), self.block(y)
        while bx.height > by.height:
            x = bx.parent
            bx = self.blocks[x]
        while by.height > bx.height:
            y = by.parent
            by = self.blocks[y]
        while x != y:
            x, y = bx.parent, by.parent
            bx, by = self.blocks[x], self.blocks[y]
        return x

    def post_fork_length(self, chain: ChainRef, fork: BlockId) -> int:
        """Blocks strictly after `fork` up to and including the head."""
        if not self.is_ancestor(fork, chain.head):
            raise NotAnAncestor(f"{fork} is not an ancestor of {chain.head}")
        return self.block(chain.head).height - self.block(fork).height

    # -- serialization -----------------------------------------------------

    def snapshot(self) -> str:
        """Line-oriented dump, one `block ...` line per block, id order."""
        lines = []
        for bid in sorted(self.blocks):
            b = self.blocks[bid]
            parent = "-" if b.parent is None else str(b.parent)
            lines.append(
                f"block {b.id} parent={parent} h={b.height} "
                f"d={b.difficulty!r} t={b.created_at!r} miner={b.miner}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_snapshot(cls, text: str) -> "BlockTree":
        tree: Optional[BlockTree] = None
        for line in text.splitlines():
            line = line.strip()
            if not line or not line.startswith("block "):
                continue
            parts = line.split()
            bid = int(parts[1])
            fields = dict(p.split("=", 1) for p in parts[2:])
            parent = None if fields["parent"] == "-" else int(fields["parent"])
            if parent is None:
                tree = cls(genesis_difficulty=float(fields["d"]),
                           miner=fields["miner"], time=float(fields["t"]),
                           genesis_id=bid)
            else:
                assert tree is not None, "genesis line must come first"
                tree.insert(Block(bid, parent, int(fields["h"]),
                                  float(fields["d"]), fields["miner"],
                                  float(fields["t"])))
        if tree is None:
            raise ValueError("snapshot contains no genesis block")
        return tree


def recompute_cumulative_difficulty(tree: BlockTree, bid: BlockId) -> float:
    """Path-walk oracle for cumulative difficulty, kept for tests."""
    return sum(tree.block(b).difficulty for b in tree.ancestors(bid))
