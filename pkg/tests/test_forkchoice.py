"""Fork-choice engine tests: penalty assignment, scoring, boundary crossing,
suppression, tie-breaking and subjective disagreement."""

from __future__ import annotations

import pytest

from adess.chain import Block, ChainRef
from adess.errors import NotPenalized
from adess.forkchoice import AdessParams, NodeView, ObservationLog


class Script:
    """Block factory with locally tracked heights, decoupled from any view,
    so the same blocks can be fed to several views in different orders."""

    def __init__(self, genesis: int = 0):
        self.height = {genesis: 0}
        self.next_id = genesis + 1

    def block(self, parent: int, difficulty: float = 1.0) -> Block:
        bid = self.next_id
        self.next_id += 1
        self.height[bid] = self.height[parent] + 1
        return Block(bid, parent, self.height[bid], difficulty, "", 0.0)

    def chain(self, parent: int, n: int, difficulty: float = 1.0) -> list:
        out = []
        for _ in range(n):
            out.append(self.block(parent, difficulty))
            parent = out[-1].id
        return out


def feed(view: NodeView, blocks, start: float = 1.0) -> float:
    t = start
    for b in blocks:
        view.observe(b, t)
        t += 1.0
    return t


# -- parameter and log validation ---------------------------------------------

def test_params_validation():
    for bad in (dict(alpha=0), dict(xi=0.0), dict(xi=-1.0),
                dict(epsilon=0.0), dict(latency_bound=-1.0)):
        with pytest.raises(ValueError):
            AdessParams(**bad)
    assert AdessParams().alpha == 6


def test_observation_log_rules():
    log = ObservationLog()
    log.append(1, 1.0)
    with pytest.raises(ValueError):
        log.append(1, 2.0)  # duplicate
    with pytest.raises(ValueError):
        log.append(2, 0.5)  # time went backwards
    log.append(2, 1.0)
    assert len(log) == 3 - 1 and 1 in log and 9 not in log


# -- assignment and retroactive scoring ---------------------------------------

def race_view():
    """Two branches at genesis; B reaches alpha=2 first, A grows longer.

    Feed order: b1 a1 b2 b3 a2 a3 a4, so at b2 branch B wins the race and
    branch A (then one block) is penalized retroactively.
    """
    s = Script()
    b1 = s.block(0)           # id 1
    a1 = s.block(0)           # id 2
    b2, b3 = s.chain(b1.id, 2)  # ids 3, 4
    a2, a3, a4 = s.chain(a1.id, 3)  # ids 5, 6, 7
    view = NodeView(AdessParams(alpha=2, xi=1.0))
    feed(view, [b1, a1, b2, b3, a2, a3, a4])
    return view, a4.id, b3.id


def test_alpha_race_assigns_penalty_to_loser():
    view, a_head, b_head = race_view()
    recs = view.penalty_records()
    assert len(recs) == 1
    rec = recs[0]
    assert rec.fork == 0 and rec.active
    assert rec.penalized.head == a_head and rec.baseline.head == b_head
    assert rec.assigned_at == 3.0  # the moment b2 arrived


def test_retroactive_discounted_score():
    view, a_head, _ = race_view()
    # four post-fork blocks at xi = 1: weighted length 4 / (1 + 1)
    assert view.penalized_score(ChainRef(a_head), 0) == pytest.approx(2.0)


def test_canonical_diverges_from_nakamoto():
    view, a_head, b_head = race_view()
    assert view.nakamoto_canonical() == ChainRef(a_head)  # cumdiff 5 vs 4
    assert view.adess_canonical() == ChainRef(b_head)


def test_never_penalized_witness_is_baseline_head():
    view, _, b_head = race_view()
    w = view.never_penalized_witness()
    assert w == ChainRef(b_head)
    assert view.active_penalties(w) == []


def test_penalty_ledger_format():
    view, _, _ = race_view()
    assert view.penalty_ledger() == (
        "penalty chain=7 fork=0 baseline=4 active=1 t_on=3.0 t_off=-\n")


def test_penalized_score_longer_chain():
    # alpha = 1: baseline settles instantly, then both branches grow
    s = Script()
    b1 = s.block(0)
    a1 = s.block(0)
    bs = s.chain(b1.id, 5)   # B length 6
    as_ = s.chain(a1.id, 9)  # A length 10, below the boundary 12
    view = NodeView(AdessParams(alpha=1, xi=1.0))
    feed(view, [b1, a1] + bs + as_)
    assert view.penalized_score(ChainRef(as_[-1].id), 0) == pytest.approx(5.0)
    with pytest.raises(NotPenalized):
        view.penalized_score(ChainRef(bs[-1].id), 0)  # baseline never scored
    with pytest.raises(NotPenalized):
        view.penalized_score(ChainRef(as_[-1].id), b1.id)  # not a fork block


# -- canonical boundary --------------------------------------------------------

def boundary_view():
    """Baseline IC of length 5; penalized branch A pushed to the boundary.

    xi = 1 puts the boundary at 2 * 5 = 10 post-fork blocks.
    """
    s = Script()
    ic1 = s.block(0)             # id 1
    a1 = s.block(0)              # id 2
    ic_rest = s.chain(ic1.id, 4)  # ids 3..6, IC length 5
    a_rest = s.chain(a1.id, 9)    # ids 7..15, A length 10
    view = NodeView(AdessParams(alpha=2, xi=1.0))
    t = feed(view, [ic1, a1, ic_rest[0]] + ic_rest[1:] + a_rest[:-1])
    return view, s, ic_rest[-1].id, a_rest, t


def test_below_boundary_stays_penalized():
    view, _, ic_head, a_rest, _ = boundary_view()
    rec = view.penalty_records()[0]
    assert rec.active and rec.deactivated_at is None
    assert view.adess_canonical() == ChainRef(ic_head)
    # check_boundary on a still-short branch is a no-op
    assert view.check_boundary(rec).active


def test_crossing_deactivates_and_rebases():
    view, s, ic_head, a_rest, t = boundary_view()
    a10 = a_rest[-1]
    view.observe(a10, t)
    rec = view.penalty_records()[0]
    assert not rec.active and rec.deactivated_at == t
    # re-based score: best baseline score plus epsilon, not raw cumdiff 11
    assert view.adjusted_score(ChainRef(a10.id)) == pytest.approx(
        6.0 + 1e-6, abs=1e-12)
    assert view.adess_canonical() == ChainRef(a10.id)
    assert view.nakamoto_canonical() == ChainRef(a10.id)
    # check_boundary is idempotent after deactivation
    assert view.check_boundary(rec).deactivated_at == t


def test_post_crossing_comparison_uses_rebased_score():
    view, s, ic_head, a_rest, t = boundary_view()
    view.observe(a_rest[-1], t)
    ic6 = s.block(ic_head)
    view.observe(ic6, t + 1.0)
    # one honest block outruns the epsilon lead under the penalty rule,
    # while raw heaviest-chain still prefers the long attacker branch
    assert view.adess_canonical() == ChainRef(ic6.id)
    assert view.nakamoto_canonical() == ChainRef(a_rest[-1].id)


# -- multi-branch forks and the generalized rules -----------------------------

def test_three_branches_share_one_baseline():
    s = Script()
    a1 = s.block(0)
    b1 = s.block(0)
    c1 = s.block(0)
    view = NodeView(AdessParams(alpha=1, xi=1.0))
    feed(view, [a1, b1, c1])
    recs = view.penalty_records()
    assert len(recs) == 2
    assert {r.penalized.head for r in recs} == {b1.id, c1.id}
    assert all(r.baseline.head == a1.id for r in recs)
    assert all(r.active for r in recs)
    assert view.adess_canonical() == ChainRef(a1.id)


def test_late_sibling_penalized_immediately():
    s = Script()
    a1 = s.block(0)
    b1 = s.block(0)
    view = NodeView(AdessParams(alpha=1, xi=1.0))
    t = feed(view, [a1, b1])
    assert len(view.penalty_records()) == 1
    c1 = s.block(0)
    view.observe(c1, t)
    recs = [r for r in view.penalty_records() if r.penalized.head == c1.id]
    assert len(recs) == 1 and recs[0].active and recs[0].assigned_at == t


def test_penalized_winner_suppresses_inner_fork():
    # branch X is penalized at genesis; a fork inside X is then won by a
    # chain that is itself under that active penalty, so no penalty fires
    s = Script()
    b1, b2, b3 = s.chain(0, 3)
    x1 = s.block(0)
    x2 = s.block(x1.id)
    y1 = s.block(x1.id)
    view = NodeView(AdessParams(alpha=1, xi=1.0))
    feed(view, [b1, b2, b3, x1, x2, y1])
    recs = view.penalty_records()
    assert len(recs) == 1 and recs[0].fork == 0  # nothing at fork x1
    with pytest.raises(NotPenalized):
        view.penalized_score(ChainRef(y1.id), x1.id)
    # both X heads still carry the single outer penalty
    assert len(view.active_penalties(ChainRef(x2.id))) == 1
    assert len(view.active_penalties(ChainRef(y1.id))) == 1
    assert view.adess_canonical() == ChainRef(b3.id)


# -- tie-breaking and Nakamoto equivalence ------------------------------------

def test_tie_broken_by_first_seen():
    s = Script()
    a1 = s.block(0)
    b1 = s.block(0)
    v1 = NodeView(AdessParams(alpha=6, xi=1.0))
    feed(v1, [a1, b1])
    v2 = NodeView(AdessParams(alpha=6, xi=1.0))
    feed(v2, [b1, a1])
    assert v1.nakamoto_canonical() == v1.adess_canonical() == ChainRef(a1.id)
    assert v2.nakamoto_canonical() == v2.adess_canonical() == ChainRef(b1.id)


def test_equivalent_to_nakamoto_when_no_fork_reaches_alpha():
    s = Script()
    main = s.chain(0, 8)
    side = s.chain(main[2].id, 3)  # 3 < alpha = 6: never resolved
    view = NodeView(AdessParams(alpha=6, xi=1.0))
    feed(view, main[:4] + side + main[4:])
    assert view.penalty_records() == []
    assert view.adess_canonical() == view.nakamoto_canonical() \
        == ChainRef(main[-1].id)


# -- orphans, sync and subjectivity -------------------------------------------

def test_orphans_buffer_until_parent_arrives():
    s = Script()
    a1, a2, a3 = s.chain(0, 3)
    view = NodeView(AdessParams(alpha=2, xi=1.0))
    view.observe(a2, 1.0)
    view.observe(a3, 2.0)
    assert a2.id not in view.tree and a3.id not in view.tree
    view.observe(a1, 3.0)
    assert view.tree.heads == {a3.id}
    # buffered blocks are logged after the parent, at the flush time
    order = [bid for bid, _ in view.log.entries]
    assert order == [0, a1.id, a2.id, a3.id]
    assert [t for _, t in view.log.entries][1:] == [3.0, 3.0, 3.0]


def test_sync_observed_fork_is_undecidable():
    s = Script()
    a1, a2 = s.chain(0, 2)
    b1, b2 = s.chain(0, 2)
    view = NodeView(AdessParams(alpha=1, xi=1.0))
    feed(view, [a1, a2])
    view.sync_observe(b1, 3.0)
    view.sync_observe(b2, 4.0)
    assert view.undecidable_forks == [0]
    assert view.penalty_records() == []
    assert view.adess_canonical() == view.nakamoto_canonical() \
        == ChainRef(a2.id)


def test_live_observation_has_no_undecidable_forks():
    view, _, _ = race_view()
    assert view.undecidable_forks == []


def test_subjective_views_may_disagree():
    s = Script()
    a1, a2 = s.chain(0, 2)
    b1, b2 = s.chain(0, 2)
    v1 = NodeView(AdessParams(alpha=2, xi=1.0), name="v1")
    feed(v1, [a1, a2, b1, b2])
    v2 = NodeView(AdessParams(alpha=2, xi=1.0), name="v2")
    feed(v2, [b1, b2, a1, a2])
    assert v1.adess_canonical() == ChainRef(a2.id)
    assert v2.adess_canonical() == ChainRef(b2.id)
    r1, r2 = v1.penalty_records()[0], v2.penalty_records()[0]
    assert r1.baseline.head == a2.id and r2.baseline.head == b2.id


def test_identical_order_gives_identical_state():
    s = Script()
    blocks = [s.block(0)]
    blocks += s.chain(blocks[0].id, 3)
    blocks.insert(2, s.block(0))
    blocks += s.chain(blocks[2].id, 2)
    views = [NodeView(AdessParams(alpha=2, xi=0.7)) for _ in range(2)]
    for v in views:
        feed(v, blocks)
    assert views[0].penalty_ledger() == views[1].penalty_ledger()
    assert views[0].adess_canonical() == views[1].adess_canonical()
    assert views[0].tree.snapshot() == views[1].tree.snapshot()
