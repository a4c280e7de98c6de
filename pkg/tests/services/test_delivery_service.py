"""Unit Tests for Delivery Service

Every delivery step is checked against the hand-worked example instances,
then whole schedules are checked for decodability and exact rates.
"""

from fractions import Fraction
from itertools import product

import pytest

from ccsim.core.entities import FragmentId, PacketId, Stage, SystemParams, Transmission
from ccsim.core.exceptions import SchedulerDefectException
from ccsim.services import delivery_service
from ccsim.services.analysis_service import rate_of_schedule, worst_rate
from ccsim.services.delivery_service import (
    LastStageResult,
    PacketType,
    classify_packets,
    deliver_last_stage,
    deliver_type1,
    deliver_type2,
    deliver_type3,
    deliver_type4_step1,
    deliver_type4_step2,
    deliver_type4_step3,
    search_packet_groups,
    search_request_sets,
)
from ccsim.services.verification_service import verify_all
from tests.conftest import make_instance

# ============================================================================
# Helpers
# ============================================================================


def S(file: int, combo: tuple[int, ...], cache: int) -> FragmentId:
    return FragmentId(file, combo, cache)


def payloads(transmissions, stage: Stage) -> list[set[FragmentId]]:
    return [set(t.payload) for t in transmissions if t.stage is stage]


# ============================================================================
# Classification
# ============================================================================


class TestClassifyPackets:
    """Test classify_packets()"""

    def test_type1_example(self, type1_example):
        """Group 2 holds (1,2) as Type-II, groups 1 and 3 as Type-III"""
        pclass = classify_packets(type1_example.placement, type1_example.profile)

        assert pclass.types[PacketId((1, 2), 2)] is PacketType.TYPE_II
        assert pclass.types[PacketId((1, 2), 1)] is PacketType.TYPE_III
        assert pclass.types[PacketId((1, 2), 3)] is PacketType.TYPE_III
        assert pclass.of_type(1, PacketType.TYPE_I) == (PacketId((1, 3), 1), PacketId((2, 3), 1))

    def test_census(self, type1_example):
        """Per-cache class counts cover every packet"""
        census = classify_packets(type1_example.placement, type1_example.profile).census()

        assert census[0] == {"TypeI": 2, "TypeII": 0, "TypeIII": 1, "TypeIV": 0, "Inactive": 0}
        assert census[1] == {"TypeI": 2, "TypeII": 1, "TypeIII": 0, "TypeIV": 0, "Inactive": 0}

    def test_type2_counts(self, type2_example):
        """Type-II packets per cache"""
        pclass = classify_packets(type2_example.placement, type2_example.profile)

        counts = [len(pclass.of_type(m, PacketType.TYPE_II)) for m in (1, 2, 3)]

        assert counts == [3, 4, 4]

    def test_inactive(self):
        """Combos of unrequested files only are inactive"""
        inst = make_instance(4, 2, 2, [[1], [2]])
        pclass = classify_packets(inst.placement, inst.profile)

        assert pclass.types[PacketId((3, 4), 1)] is PacketType.INACTIVE

    def test_local_files(self, type2_example):
        """Local files are the caching group's own requests in the combo"""
        pclass = classify_packets(type2_example.placement, type2_example.profile)

        assert pclass.local_files[PacketId((1, 2), 1)] == (1, 2)
        assert pclass.local_files[PacketId((1, 4), 1)] == (1,)
        assert PacketId((1, 4), 2) not in pclass.local_files


# ============================================================================
# Type-I
# ============================================================================


class TestTypeOneDelivery:
    """Test deliver_type1()"""

    def test_load(self, type1_example):
        """Six requested fragments are sent directly"""
        pclass = classify_packets(type1_example.placement, type1_example.profile)

        result = deliver_type1(pclass)

        assert len(result.transmissions) == 6
        assert all(not t.is_coded for t in result.transmissions)
        assert {t.payload[0].file for t in result.transmissions} == {1, 2}
        assert result.remaining == []


# ============================================================================
# Type-II
# ============================================================================


class TestTypeTwoDelivery:
    """Test deliver_type2()"""

    def test_steps(self, type2_example):
        """Eleven non-local fragments, three pairs, three leftovers"""
        pclass = classify_packets(type2_example.placement, type2_example.profile)

        result = deliver_type2(pclass)

        assert result.count(Stage.TYPE_II_1) == 11
        assert payloads(result.transmissions, Stage.TYPE_II_2) == [
            {S(1, (1, 4), 1), S(1, (1, 2), 3)},
            {S(2, (2, 4), 1), S(2, (1, 2), 2)},
            {S(3, (3, 4), 1), S(3, (1, 3), 2)},
        ]
        assert result.remaining == [S(1, (1, 3), 3), S(2, (2, 4), 2), S(3, (3, 4), 2)]
        assert result.reference_caches == {1: 1, 2: 1, 3: 1}

    def test_single_requester_needs_no_pairing(self, type2_example):
        """File 4 is asked by group 3 alone: its local fragments are done"""
        pclass = classify_packets(type2_example.placement, type2_example.profile)

        result = deliver_type2(pclass)

        assert 4 not in result.reference_caches
        assert all(f.file != 4 for f in result.remaining)

    def test_every_group_wants_every_requested_file(self, delivery):
        """D_m = N_R for all m: each fully requested packet holds two local files"""
        inst = make_instance(4, 3, 2, [[1, 2, 3]] * 3)
        pclass = classify_packets(inst.placement, inst.profile)

        result = deliver_type2(pclass)
        _, stats = delivery.build_schedule(inst.placement, inst.profile)

        assert all(pclass.of_type(m, PacketType.TYPE_II) == () for m in pclass.caches)
        assert result.transmissions == []
        assert result.remaining == []
        assert result.reference_caches == {}
        assert stats.t_ii1 == stats.t_ii2 == stats.t_ii_rm == 0


# ============================================================================
# Type-III
# ============================================================================


class TestTypeThreeDelivery:
    """Test deliver_type3()"""

    def test_steps(self, type3_example):
        """Nine fragments, two pairs, nothing left"""
        pclass = classify_packets(type3_example.placement, type3_example.profile)

        result = deliver_type3(pclass)

        assert result.count(Stage.TYPE_III_1) == 9
        assert result.untransmitted_local == (1, 1, 1)
        assert result.reference_cache == 1
        assert payloads(result.transmissions, Stage.TYPE_III_2) == [
            {S(2, (2, 3), 1), S(2, (2, 3), 2)},
            {S(2, (2, 3), 1), S(2, (2, 3), 3)},
        ]
        assert result.remaining == []

    def test_keeps_least_requested(self, type3_example):
        """File 1 is kept over file 2 in cache 1's (1,2)"""
        pclass = classify_packets(type3_example.placement, type3_example.profile)

        result = deliver_type3(pclass)

        assert S(1, (1, 2), 1) in result.kept
        assert S(2, (1, 2), 1) in {t.payload[0] for t in result.transmissions}

    def test_no_type3_packets(self):
        """alpha=2 caches with one local file in every packet: nothing to do"""
        inst = make_instance(4, 2, 2, [[1], [2]])
        pclass = classify_packets(inst.placement, inst.profile)

        result = deliver_type3(pclass)

        assert result.transmissions == []
        assert result.untransmitted_local == (0, 0)
        assert result.reference_cache is None


# ============================================================================
# Type-IV
# ============================================================================


class TestRequestSets:
    """Test search_request_sets() and deliver_type4_step1()"""

    def test_single_set(self, type4_example):
        """V = {1,3,5} served by all three groups"""
        pclass = classify_packets(type4_example.placement, type4_example.profile)

        sets = search_request_sets(pclass)

        assert len(sets) == 1
        assert sets[0].files == (1, 3, 5)
        assert sets[0].groups == (1, 2, 3)
        assert sets[0].packets == (
            PacketId((3, 5), 1),
            PacketId((1, 5), 2),
            PacketId((1, 3), 3),
        )

    def test_step1_load(self, type4_example):
        """Four payloads deliver three packets: gain 2"""
        pclass = classify_packets(type4_example.placement, type4_example.profile)

        result = deliver_type4_step1(search_request_sets(pclass), pclass)

        assert len(result.transmissions) == 4
        assert result.gain == 2
        assert result.delivered_packets == 3
        assert set(result.transmissions[-1].payload) == {
            S(1, (1, 5), 2),
            S(3, (1, 3), 3),
            S(5, (3, 5), 1),
        }

    def test_acceptance_order(self, request_set_example):
        """Seven sets, in acceptance order"""
        pclass = classify_packets(request_set_example.placement, request_set_example.profile)

        sets = search_request_sets(pclass)

        assert [s.files for s in sets] == [
            (1, 4, 5, 6),
            (1, 4, 5, 8),
            (1, 4, 6, 8),
            (3, 4, 7, 8),
            (1, 5, 6, 8),
            (2, 5, 7, 8),
            (4, 5, 6, 8),
        ]

    def test_claim_conflict_rejected(self, request_set_example):
        """{2,5,6,8} would reuse a packet of {1,5,6,8}"""
        pclass = classify_packets(request_set_example.placement, request_set_example.profile)

        files = [s.files for s in search_request_sets(pclass)]

        assert (2, 5, 6, 8) not in files

    def test_singleton_requests(self, singleton_example):
        """Four sets consume every Type-IV packet"""
        pclass = classify_packets(singleton_example.placement, singleton_example.profile)

        sets = search_request_sets(pclass)

        assert [s.files for s in sets] == [(1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4)]
        assert sum(len(s.packets) for s in sets) == 15

    def test_uncoded_has_no_sets(self):
        """alpha = 1 skips the search"""
        inst = make_instance(3, 3, 1, [[1], [2], [3]])

        assert search_request_sets(classify_packets(inst.placement, inst.profile)) == []

    def test_reused_packet_is_a_defect(self, type4_example):
        """Two sets claiming the same packet abort the step"""
        pclass = classify_packets(type4_example.placement, type4_example.profile)
        (rset,) = search_request_sets(pclass)

        with pytest.raises(SchedulerDefectException):
            deliver_type4_step1([rset, rset], pclass)


class TestPacketGroups:
    """Test search_packet_groups() and deliver_type4_step2()"""

    def test_pair(self, type4_example):
        """(4,5)^2 and (2,3)^3 form a group keeping files 5 and 3"""
        pclass = classify_packets(type4_example.placement, type4_example.profile)
        consumed = {p for s in search_request_sets(pclass) for p in s.packets}

        groups = search_packet_groups(pclass, exclude=consumed)

        assert len(groups) == 1
        assert groups[0].caches == (2, 3)
        assert groups[0].members == (PacketId((4, 5), 2), PacketId((2, 3), 3))
        assert groups[0].kept == (S(5, (4, 5), 2), S(3, (2, 3), 3))

        result = deliver_type4_step2(groups)

        assert len(result.transmissions) == 3
        assert result.gain == 1
        assert payloads(result.transmissions, Stage.TYPE_IV_2)[-1] == {
            S(5, (4, 5), 2),
            S(3, (2, 3), 3),
        }

    def test_four_cache_group(self, packet_group_example):
        """Only the full cache set escapes the outside requests"""
        pclass = classify_packets(packet_group_example.placement, packet_group_example.profile)

        assert search_request_sets(pclass) == []
        groups = search_packet_groups(pclass)

        assert len(groups) == 1
        assert groups[0].caches == (1, 2, 3, 4)
        assert len(deliver_type4_step2(groups).transmissions) == 11

    def test_leftovers(self, type4_example):
        """Step 3 sends the more-requested fragment and keeps the other"""
        pclass = classify_packets(type4_example.placement, type4_example.profile)
        consumed = {p for s in search_request_sets(pclass) for p in s.packets}
        groups = search_packet_groups(pclass, exclude=consumed)
        consumed.update(p for g in groups for p in g.members)

        result = deliver_type4_step3(pclass, exclude=consumed)

        assert [t.payload for t in result.transmissions] == [
            (S(4, (1, 4), 2),),
            (S(2, (1, 2), 3),),
        ]
        assert result.remaining == [S(1, (1, 4), 2), S(1, (1, 2), 3)]


# ============================================================================
# Last Stage
# ============================================================================


class TestLastStage:
    """Test deliver_last_stage()"""

    def test_star_pairing(self):
        """Reference fragments pair same-combo partners first"""
        inst = make_instance(3, 3, 2, [[1, 2, 3], [2, 3], [1]])
        remaining = [
            S(1, (1, 2), 1),
            S(2, (1, 2), 2),
            S(3, (1, 3), 2),
            S(1, (1, 2), 3),
            S(1, (1, 3), 3),
        ]

        result = deliver_last_stage(remaining, inst.profile)

        assert result.remaining_counts == (1, 2, 2)
        assert result.gain == 1
        assert result.reference_cache == 1
        assert payloads(result.transmissions, Stage.LAST_1) == [
            {S(1, (1, 2), 1), S(2, (1, 2), 2)},
            {S(1, (1, 2), 1), S(1, (1, 2), 3)},
        ]
        assert payloads(result.transmissions, Stage.LAST_2) == [
            {S(3, (1, 3), 2)},
            {S(1, (1, 3), 3)},
        ]

    def test_empty_cache_means_no_gain(self):
        """A cache with no leftovers leaves every fragment direct"""
        inst = make_instance(3, 3, 2, [[1, 2, 3], [2, 3], [1]])
        remaining = [S(1, (1, 2), 1), S(2, (1, 2), 2)]

        result = deliver_last_stage(remaining, inst.profile)

        assert result.gain == 0
        assert result.reference_cache is None
        assert len(result.transmissions) == 2


# ============================================================================
# Full Schedules
# ============================================================================


class TestBuildSchedule:
    """Test DeliveryService.build_schedule() on the worked examples"""

    def test_type1_example(self, delivery, type1_example):
        inst = type1_example
        schedule, stats = delivery.build_schedule(inst.placement, inst.profile)

        assert stats.t_i == 6
        assert stats.total_transmissions == len(schedule) == 11
        assert rate_of_schedule(stats, inst.params, inst.profile) == (
            Fraction(11, 6),
            Fraction(11, 6),
        )

    def test_type2_example(self, delivery, type2_example):
        inst = type2_example
        _, stats = delivery.build_schedule(inst.placement, inst.profile)

        assert stats.t_ii1 == 11
        assert stats.t_ii2 == 3
        assert stats.t_ii_rm == 3
        assert stats.type2_reference_caches == {1: 1, 2: 1, 3: 1}

    def test_type3_example(self, delivery, type3_example):
        inst = type3_example
        _, stats = delivery.build_schedule(inst.placement, inst.profile)

        assert stats.t_iii1 == 9
        assert stats.t_iii2 == 2
        assert stats.t_iii_rm == 0
        assert stats.untransmitted_local == (1, 1, 1)

    def test_type4_example(self, delivery, type4_example):
        inst = type4_example
        _, stats = delivery.build_schedule(inst.placement, inst.profile)

        assert stats.t_iv == 9
        assert stats.t_iv_rm == 2
        assert stats.delta == 3
        assert stats.request_sets == 1
        assert stats.packet_groups == 1
        assert stats.type4_delivered_packets == 5

    def test_last_stage_example(self, delivery, last_stage_example):
        """Fifteen transmissions: R = 5/2"""
        inst = last_stage_example
        schedule, stats = delivery.build_schedule(inst.placement, inst.profile)

        assert stats.t_ii1 == 4
        assert stats.t_iii1 == 4
        assert stats.untransmitted_local == (3, 1, 0)
        assert stats.remaining_before_last == (3, 3, 3)
        assert stats.last_stage_gain == 3
        assert stats.t_rm == 6
        assert stats.total_transmissions == 15
        assert rate_of_schedule(stats, inst.params, inst.profile)[0] == Fraction(5, 2)
        assert (S(3, (2, 3), 3),) in [t.payload for t in schedule if t.stage is Stage.TYPE_IV_3]

    def test_last_stage_is_needed(self, delivery, last_stage_example):
        """Dropping the last stage leaves group 2 short of S2(2,3)^1"""
        inst = last_stage_example
        schedule, _ = delivery.build_schedule(inst.placement, inst.profile)

        report = verify_all(
            inst.profile, inst.placement, schedule.without_stages(Stage.LAST_1, Stage.LAST_2)
        )

        assert not report.passed
        assert S(2, (2, 3), 1) in report.groups[1].missing

    def test_packet_group_example(self, delivery, packet_group_example):
        inst = packet_group_example
        _, stats = delivery.build_schedule(inst.placement, inst.profile)

        assert stats.request_sets == 0
        assert stats.packet_groups == 1
        assert stats.delta == 1
        assert stats.t_iv == 11
        assert stats.t_iv_rm == 0

    def test_singleton_example(self, delivery, singleton_example):
        inst = singleton_example
        _, stats = delivery.build_schedule(inst.placement, inst.profile)

        assert stats.delta == 8
        assert stats.packet_groups == 0
        assert stats.type4_delivered_packets == 15

    def test_single_cache_holds_everything(self, delivery):
        """alpha = 1 and M = 1: the only cache stores every file"""
        inst = make_instance(5, 1, 1, [[1, 2, 3, 4, 5]])

        schedule, stats = delivery.build_schedule(inst.placement, inst.profile)
        rate, _ = rate_of_schedule(stats, inst.params, inst.profile)

        assert len(schedule) == 0
        assert stats.total_transmissions == 0
        assert rate == 0
        assert verify_all(inst.profile, inst.placement, schedule).passed

    def test_metrics(self, delivery, metrics, type1_example):
        """One schedule built, six Type-I payloads counted"""
        delivery.build_schedule(type1_example.placement, type1_example.profile)

        assert metrics.value("ccsim_schedules_built_total") == 1
        assert metrics.value("ccsim_transmissions_total", {"stage": "TypeI"}) == 6
        assert metrics.value("ccsim_fallback_activations_total") == 0

    def test_deterministic(self, delivery, type4_example):
        """Same inputs, same schedule"""
        inst = type4_example

        first, _ = delivery.build_schedule(inst.placement, inst.profile)
        second, _ = delivery.build_schedule(inst.placement, inst.profile)

        assert first.to_list() == second.to_list()

    @pytest.mark.parametrize(
        "n_files, requests",
        [
            (3, [[1, 2], [2], [1, 2]]),
            (4, [[1, 2, 3], [2, 3], [1, 4]]),
            (5, [[1, 2, 3], [2, 3, 4], [2, 3, 5]]),
            (5, [[1, 2, 4], [2, 3], [4, 5]]),
            (3, [[1, 2, 3], [2, 3], [1]]),
        ],
    )
    def test_worked_examples_decode(self, delivery, n_files, requests):
        """Every worked example verifies without the fallback"""
        inst = make_instance(n_files, len(requests), 2, requests)

        schedule, stats = delivery.build_schedule(inst.placement, inst.profile)

        assert verify_all(inst.profile, inst.placement, schedule).passed
        assert not stats.fallback_fired


class TestSingleRequestWorstCase:
    """Exhaustive single-request profiles reach the worst-case formula"""

    @pytest.mark.parametrize("n_groups, expected", [(3, Fraction(5, 3)), (4, Fraction(2))])
    def test_max_rate(self, delivery, n_groups, expected):
        params = SystemParams(n_files=3, n_groups=n_groups, alpha=2)
        placement = make_instance(3, n_groups, 2, [[1]] * n_groups).placement

        rates = []
        for choice in product((1, 2, 3), repeat=n_groups):
            if set(choice) != {1, 2, 3}:
                continue
            profile = make_instance(3, n_groups, 2, [[n] for n in choice]).profile
            _, stats = delivery.build_schedule(placement, profile)
            rates.append(rate_of_schedule(stats, params, profile)[0])

        assert max(rates) == expected
        assert worst_rate(params, [1] * n_groups) == expected


# ============================================================================
# Fallback
# ============================================================================


class TestFallback:
    """Test the split-to-singletons safety net"""

    def test_undecodable_payloads_are_split(
        self, monkeypatch, delivery, metrics, last_stage_example
    ):
        """XORs of three leftovers are split until every group decodes"""

        def triples(remaining, profile):
            ordered = sorted(remaining, key=lambda f: f.sort_key)
            result = LastStageResult()
            for i in range(0, len(ordered), 3):
                result.transmissions.append(Transmission.of(Stage.LAST_1, *ordered[i : i + 3]))
            return result

        monkeypatch.setattr(delivery_service, "deliver_last_stage", triples)
        inst = last_stage_example

        schedule, stats = delivery.build_schedule(inst.placement, inst.profile)

        assert stats.fallback_fired
        assert stats.fallback_splits == 3
        assert stats.t_rm == 9
        assert verify_all(inst.profile, inst.placement, schedule).passed
        assert metrics.value("ccsim_fallback_activations_total") == 1

    def test_nothing_to_split_is_a_defect(self, monkeypatch, delivery, last_stage_example):
        """Missing fragments with no coded payload cannot be repaired"""
        monkeypatch.setattr(
            delivery_service, "deliver_last_stage", lambda remaining, profile: LastStageResult()
        )
        inst = last_stage_example

        with pytest.raises(SchedulerDefectException):
            delivery.build_schedule(inst.placement, inst.profile)
