import random

import pytest

from manetsim.aodv import (
    ACTIVE_ROUTE_TIMEOUT,
    ALLOWED_HELLO_LOSS,
    NET_TRAVERSAL_TIME,
    RREQ_RETRIES,
    AodvNode,
    Broadcast,
    Hello,
    Rerr,
    RouteEstablished,
    RoutingTableEntry,
    Rrep,
    Rreq,
    SelfDestination,
    TraceNote,
    Unicast,
    UnreachableVerdict,
    fresher,
)


def first_message(actions, kind):
    for action in actions:
        if isinstance(action, (Broadcast, Unicast)) and isinstance(action.message, kind):
            return action
    return None


class TestFresher:
    def test_sequence_dominates(self):
        assert fresher((5, 9), (4, 1)) is True

    def test_hop_tiebreak(self):
        assert fresher((5, 2), (5, 3)) is True

    def test_reflexive_is_false(self):
        assert fresher((5, 3), (5, 3)) is False

    def test_lower_seq_loses(self):
        assert fresher((3, 1), (4, 9)) is False


class TestDiscovery:
    def test_cache_hit_returns_route(self):
        node = AodvNode(0)
        node.routes[5] = RoutingTableEntry(5, 2, 3, 7, expiry=10.0)
        start = node.originate_discovery(5, now=1.0)
        assert start.route is not None and start.route.next_hop == 2
        assert start.actions == []

    def test_never_seen_dest_has_null_seq(self):
        node = AodvNode(0)
        start = node.originate_discovery(9, now=0.0)
        rreq = start.actions[0].message
        assert rreq.dest_seq_known is None
        assert rreq.origin == 0 and rreq.dest == 9 and rreq.hop_count == 0
        assert start.retry_at == pytest.approx(NET_TRAVERSAL_TIME)

    def test_known_stale_seq_is_carried(self):
        node = AodvNode(0)
        node.routes[9] = RoutingTableEntry(9, 1, 2, 6, expiry=0.5, active=False)
        start = node.originate_discovery(9, now=1.0)
        assert start.actions[0].message.dest_seq_known == 6

    def test_self_destination_rejected(self):
        with pytest.raises(SelfDestination):
            AodvNode(3).originate_discovery(3, now=0.0)

    def test_retry_budget_then_unreachable(self):
        node = AodvNode(0)
        start = node.originate_discovery(9, now=0.0)
        transmissions = 1
        t, verdict = start.retry_at, None
        while verdict is None:
            actions, verdict, retry_at = node.discovery_timeout(9, t)
            if actions:
                transmissions += 1
                t = retry_at
        assert transmissions == 1 + RREQ_RETRIES
        assert isinstance(verdict, UnreachableVerdict) and verdict.dest == 9

    def test_pending_discovery_not_duplicated(self):
        node = AodvNode(0)
        node.originate_discovery(9, now=0.0)
        again = node.originate_discovery(9, now=0.5)
        assert again.already_pending and again.actions == []

    def test_own_seq_increases_per_transmission(self):
        node = AodvNode(0)
        node.originate_discovery(9, now=0.0)
        seq_before = node.own_seq
        node.discovery_timeout(9, 2.8)
        assert node.own_seq == seq_before + 1


class TestHandleRreq:
    def test_duplicate_dropped(self):
        node = AodvNode(1)
        rreq = Rreq(origin=0, origin_seq=1, rreq_id=0, dest=5,
                    dest_seq_known=None, hop_count=0)
        accepted, _ = node.handle_rreq(rreq, prev_hop=0, now=0.0)
        assert accepted
        routes_before = {d: (e.dest_seq, e.hop_count)
                         for d, e in node.routes.items()}
        accepted, actions = node.handle_rreq(rreq, prev_hop=0, now=0.1)
        assert not accepted and actions == []
        assert {d: (e.dest_seq, e.hop_count)
                for d, e in node.routes.items()} == routes_before

    def test_own_flood_echo_dropped(self):
        node = AodvNode(0)
        start = node.originate_discovery(5, now=0.0)
        rreq = start.actions[0].message
        echoed = Rreq(rreq.origin, rreq.origin_seq, rreq.rreq_id, rreq.dest,
                      rreq.dest_seq_known, hop_count=1)
        accepted, actions = node.handle_rreq(echoed, prev_hop=3, now=0.01)
        assert not accepted and actions == []

    def test_three_node_chain(self):
        # A(0) discovers C(2) through B(1); hand-traced expectations.
        a, b, c = AodvNode(0), AodvNode(1), AodvNode(2)
        start = a.originate_discovery(2, now=0.0)
        rreq = start.actions[0].message

        accepted, b_actions = b.handle_rreq(rreq, prev_hop=0, now=0.001)
        assert accepted
        reverse = b.routes[0]
        assert reverse.next_hop == 0 and reverse.hop_count == 1
        forwarded = first_message(b_actions, Rreq).message
        assert forwarded.hop_count == 1

        accepted, c_actions = c.handle_rreq(forwarded, prev_hop=1, now=0.002)
        assert accepted
        assert c.routes[0].next_hop == 1 and c.routes[0].hop_count == 2
        reply = first_message(c_actions, Rrep)
        assert reply is not None and reply.to == 1
        assert reply.message.hop_count == 0 and reply.message.dest_seq >= 1

        b_actions = b.handle_rrep(reply.message, prev_hop=2, now=0.003)
        assert b.routes[2].next_hop == 2 and b.routes[2].hop_count == 1
        fwd_reply = first_message(b_actions, Rrep)
        assert fwd_reply is not None and fwd_reply.to == 0
        assert fwd_reply.message.hop_count == 1

        a_actions = a.handle_rrep(fwd_reply.message, prev_hop=1, now=0.004)
        assert a.routes[2].next_hop == 1 and a.routes[2].hop_count == 2
        assert any(isinstance(act, RouteEstablished) for act in a_actions)
        assert 2 not in a.pending

    def test_destination_answers_with_fresh_seq(self):
        node = AodvNode(5)
        rreq = Rreq(origin=0, origin_seq=3, rreq_id=1, dest=5,
                    dest_seq_known=9, hop_count=2)
        accepted, actions = node.handle_rreq(rreq, prev_hop=4, now=1.0)
        assert accepted
        reply = first_message(actions, Rrep)
        assert reply.message.dest_seq >= 9
        assert node.own_seq == reply.message.dest_seq

    def test_intermediate_reply_with_fresh_route(self):
        node = AodvNode(1)
        node.routes[5] = RoutingTableEntry(5, 3, 2, 8, expiry=100.0)
        rreq = Rreq(origin=0, origin_seq=1, rreq_id=0, dest=5,
                    dest_seq_known=7, hop_count=0)
        accepted, actions = node.handle_rreq(rreq, prev_hop=0, now=1.0)
        assert accepted
        reply = first_message(actions, Rrep)
        assert reply is not None
        assert reply.message.dest_seq == 8 and reply.message.hop_count == 2

    def test_intermediate_stays_quiet_without_known_seq(self):
        # First-ever discovery (null seq) must reach the destination itself.
        node = AodvNode(1)
        node.routes[5] = RoutingTableEntry(5, 3, 2, 8, expiry=100.0)
        rreq = Rreq(origin=0, origin_seq=1, rreq_id=0, dest=5,
                    dest_seq_known=None, hop_count=0)
        accepted, actions = node.handle_rreq(rreq, prev_hop=0, now=1.0)
        assert accepted
        assert first_message(actions, Rrep) is None
        assert first_message(actions, Rreq) is not None

    def test_intermediate_reply_can_be_disabled(self):
        node = AodvNode(1, intermediate_reply=False)
        node.routes[5] = RoutingTableEntry(5, 3, 2, 8, expiry=100.0)
        rreq = Rreq(origin=0, origin_seq=1, rreq_id=0, dest=5,
                    dest_seq_known=7, hop_count=0)
        _, actions = node.handle_rreq(rreq, prev_hop=0, now=1.0)
        assert first_message(actions, Rrep) is None

    def test_stale_route_triggers_rebroadcast(self):
        node = AodvNode(1)
        node.routes[5] = RoutingTableEntry(5, 3, 2, 4, expiry=100.0)
        rreq = Rreq(origin=0, origin_seq=1, rreq_id=0, dest=5,
                    dest_seq_known=7, hop_count=0)
        _, actions = node.handle_rreq(rreq, prev_hop=0, now=1.0)
        assert first_message(actions, Rrep) is None
        assert first_message(actions, Rreq) is not None


class TestHandleRrep:
    def test_stale_reply_changes_nothing(self):
        node = AodvNode(0)
        node.routes[5] = RoutingTableEntry(5, 1, 2, 9, expiry=100.0)
        stale = Rrep(origin=0, dest=5, dest_seq=7, hop_count=0, lifetime=3.0)
        node.handle_rrep(stale, prev_hop=2, now=1.0)
        assert node.routes[5].next_hop == 1 and node.routes[5].dest_seq == 9

    def test_diamond_race_equal_seq_fewer_hops_wins(self):
        # Two replies for the same discovery arrive over paths of different
        # length; whichever order they come in, the short one must stand.
        short = Rrep(origin=0, dest=5, dest_seq=8, hop_count=1, lifetime=3.0)
        long_ = Rrep(origin=0, dest=5, dest_seq=8, hop_count=2, lifetime=3.0)

        node = AodvNode(0)
        node.handle_rrep(short, prev_hop=1, now=0.0)
        node.handle_rrep(long_, prev_hop=2, now=0.001)
        assert node.routes[5].hop_count == 2 and node.routes[5].next_hop == 1

        node = AodvNode(0)
        node.handle_rrep(long_, prev_hop=2, now=0.0)
        assert node.routes[5].hop_count == 3
        node.handle_rrep(short, prev_hop=1, now=0.001)
        assert node.routes[5].hop_count == 2 and node.routes[5].next_hop == 1

    def test_forward_without_reverse_route_is_dropped(self):
        node = AodvNode(3)
        reply = Rrep(origin=0, dest=5, dest_seq=8, hop_count=1, lifetime=3.0)
        actions = node.handle_rrep(reply, prev_hop=4, now=0.0)
        assert any(isinstance(a, TraceNote) for a in actions)
        assert first_message(actions, Rrep) is None


class TestHelloLiveness:
    def test_silent_then_heard_resets_counter(self):
        node = AodvNode(0)
        node.routes[1] = RoutingTableEntry(1, 1, 1, 2, expiry=100.0)
        node.hello_tick(1.0)
        node.hello_tick(2.0)  # two silent intervals
        assert node._missed[1] == 2
        node.handle_hello(Hello(1), prev_hop=1, now=2.5)
        _, failed = node.hello_tick(3.0)
        assert failed == [] and node._missed[1] == 0

    def test_three_silent_intervals_fail_the_link(self):
        node = AodvNode(0)
        node.routes[1] = RoutingTableEntry(1, 1, 1, 2, expiry=100.0)
        failed = []
        for t in (1.0, 2.0, 3.0):
            _, failed = node.hello_tick(t)
        assert failed == [1]
        assert ALLOWED_HELLO_LOSS == 3

    def test_hello_emitted_every_tick(self):
        node = AodvNode(7)
        actions, _ = node.hello_tick(0.0)
        hello = first_message(actions, Hello)
        assert hello is not None and hello.message.sender == 7

    def test_hello_installs_no_routes(self):
        node = AodvNode(0)
        node.handle_hello(Hello(3), prev_hop=3, now=0.0)
        assert node.routes == {}

    def test_unmonitored_neighbor_not_tracked(self):
        node = AodvNode(0)
        node.note_neighbor_alive(9)
        _, failed = node.hello_tick(1.0)
        assert failed == [] and 9 not in node._missed


class TestLinkFailure:
    def test_no_affected_routes_suppresses_announcement(self):
        node = AodvNode(0)
        assert node.handle_link_failure(4, now=1.0) == []

    def test_invalidates_exactly_routes_via_lost_hop(self):
        rng = random.Random(123)
        for _ in range(30):
            node = AodvNode(0)
            n_routes = rng.randint(1, 12)
            for dest in range(1, n_routes + 1):
                node.routes[dest] = RoutingTableEntry(
                    dest, rng.randint(1, 4), rng.randint(1, 5),
                    rng.randint(1, 9), expiry=100.0,
                    active=rng.random() > 0.2)
            lost = rng.randint(1, 4)
            before = {d: (e.active, e.dest_seq, e.next_hop)
                      for d, e in node.routes.items()}
            actions = node.handle_link_failure(lost, now=1.0)
            affected = {d for d, (act, _, nh) in before.items()
                        if act and nh == lost}
            for dest, entry in node.routes.items():
                was_active, old_seq, next_hop = before[dest]
                if dest in affected:
                    assert not entry.active
                    assert entry.dest_seq == old_seq + 1
                else:
                    assert entry.active == was_active
                    assert entry.dest_seq == old_seq
            if affected:
                rerr = actions[0].message
                assert isinstance(rerr, Rerr)
                assert {d for d, _ in rerr.unreachable} == affected
            else:
                assert actions == []

    def test_rerr_cascades_upstream(self):
        # B(1) lost its next hop toward 5; A(0) routed through B.
        a = AodvNode(0)
        a.routes[5] = RoutingTableEntry(5, 1, 3, 6, expiry=100.0)
        b = AodvNode(1)
        b.routes[5] = RoutingTableEntry(5, 2, 2, 6, expiry=100.0)
        b_actions = b.handle_link_failure(2, now=1.0)
        rerr = b_actions[0].message
        a_actions = a.handle_rerr(rerr, prev_hop=1, now=1.001)
        assert not a.routes[5].active
        assert a.routes[5].dest_seq == 7
        assert isinstance(a_actions[0].message, Rerr)

    def test_rerr_from_unrelated_hop_ignored(self):
        a = AodvNode(0)
        a.routes[5] = RoutingTableEntry(5, 1, 3, 6, expiry=100.0)
        actions = a.handle_rerr(Rerr(((5, 7),)), prev_hop=2, now=1.0)
        assert a.routes[5].active and actions == []


class TestRouteExpiry:
    def test_unused_route_goes_inactive(self):
        node = AodvNode(0)
        node.routes[5] = RoutingTableEntry(5, 1, 1, 2,
                                           expiry=ACTIVE_ROUTE_TIMEOUT)
        expired = node.expire_routes(ACTIVE_ROUTE_TIMEOUT + 0.001)
        assert expired == [5] and not node.routes[5].active

    def test_refresh_extends_expiry(self):
        node = AodvNode(0)
        node.routes[5] = RoutingTableEntry(5, 1, 1, 2, expiry=3.0)
        node.refresh_route(5, now=2.5)
        assert node.routes[5].expiry == 2.5 + ACTIVE_ROUTE_TIMEOUT

    def test_route_for_honors_expiry(self):
        node = AodvNode(0)
        node.routes[5] = RoutingTableEntry(5, 1, 1, 2, expiry=3.0)
        assert node.route_for(5, 3.0) is not None
        assert node.route_for(5, 3.1) is None


class TestSequenceMonotonicity:
    def test_own_seq_never_decreases(self):
        rng = random.Random(55)
        node = AodvNode(0)
        last = node.own_seq
        for step in range(300):
            now = step * 0.1
            op = rng.randrange(5)
            try:
                if op == 0:
                    node.originate_discovery(rng.randint(1, 5), now)
                elif op == 1:
                    node.discovery_timeout(rng.randint(1, 5), now)
                elif op == 2:
                    rreq = Rreq(origin=rng.randint(1, 5), origin_seq=rng.randint(1, 9),
                                rreq_id=rng.randint(0, 50), dest=rng.randint(0, 5),
                                dest_seq_known=rng.choice([None, rng.randint(1, 9)]),
                                hop_count=rng.randint(0, 3))
                    if rreq.origin != 0:
                        node.handle_rreq(rreq, prev_hop=rreq.origin, now=now)
                elif op == 3:
                    node.handle_link_failure(rng.randint(1, 5), now)
                else:
                    node.hello_tick(now)
            except SelfDestination:
                pass
            assert node.own_seq >= last
            last = node.own_seq

    def test_rebroadcast_at_most_once_per_flood(self):
        node = AodvNode(1)
        rreq = Rreq(origin=0, origin_seq=1, rreq_id=4, dest=9,
                    dest_seq_known=None, hop_count=0)
        rebroadcasts = 0
        for prev_hop in (0, 2, 3, 4):
            _, actions = node.handle_rreq(rreq, prev_hop=prev_hop, now=0.001)
            if first_message(actions, Rreq) is not None:
                rebroadcasts += 1
        assert rebroadcasts == 1
