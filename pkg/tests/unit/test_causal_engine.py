import copy

import numpy as np
import pytest

from causal_engine import (
    CausalLedger,
    CausalStatus,
    Rule,
    RuleInputs,
    apply_rule_table,
    apply_rules,
    choose_object,
    delta_contradiction,
    delta_property,
    merge_rules,
    predict_reward,
    select_rule,
)
from episodic_memory import RecallHit, build_episode
from fable_models import CHANNELS, Channel, MapActivation
from hubs import ActionGoal, BodyState, DualDyadConnectivity, HubCode, HubKind


def _act(channel, winner):
    if winner is None:
        return MapActivation.empty(channel, 10)
    activity = np.zeros((10, 10))
    activity[winner] = 1.0
    return MapActivation(channel=channel, activity=activity, winner=winner)


def _hit(obj, reward, score=1.0, index=1):
    bits = -np.ones(50, dtype=np.int8)
    bits[[0, 10, 20, 30, 40]] = 1
    episode = build_episode(
        BodyState.GOAL_UNREACHABLE, HubCode(HubKind.OBJECT, bits), ActionGoal.DROP, reward, obj.id, index,
    )
    return RecallHit(episode=episode, score=score, distance=int(round((1 - score) * 50)))


def _inputs(dp_channels=(), dc=False, expected=365.0, observed=365.0):
    return RuleInputs(
        delta_property={ch: ch in dp_channels for ch in CHANNELS},
        delta_contradiction=dc,
        expected_reward=expected,
        observed_reward=observed,
    )


@pytest.mark.parametrize(
    "bottom,top,expected",
    [((0, 0), (9, 9), True), ((4, 4), (4, 4), False), ((4, 4), (5, 5), False), ((4, 4), (4, 6), True), ((4, 4), None, False)],
)
def test_delta_property(bottom, top, expected):
    assert delta_property(_act(Channel.COLOR, bottom), _act(Channel.COLOR, top)) is expected


def test_delta_property_requires_one_channel():
    with pytest.raises(ValueError, match="channel mismatch"):
        delta_property(_act(Channel.COLOR, (0, 0)), _act(Channel.SHAPE, (0, 0)))


@pytest.mark.parametrize(
    "expected,observed,result",
    [(365.0, 365.0, False), (365.0, 24.0, True), (None, 24.0, False), (365.3, 14.0, True),
     (370.0, 365.34, False), (11.0, 10.0, False), (14.0, 0.0, True)],
)
def test_delta_contradiction(expected, observed, result):
    assert delta_contradiction(expected, observed) is result


@pytest.mark.parametrize(
    "dp,dc,rule,status,gain,certainty",
    [
        (True, False, Rule.ELIMINATION, CausalStatus.IRRELEVANT, 0.0, 1.0),
        (True, True, Rule.GROWTH, CausalStatus.DOMINANT, 1.0, 1.0),
        (False, True, Rule.UNCERTAINTY, CausalStatus.LIKELY_IRRELEVANT, 0.8, 0.25),
        (False, False, Rule.STATUS_QUO, CausalStatus.UNKNOWN, 1.0, 0.0),
    ],
)
def test_rule_table_on_a_fresh_channel(dp, dc, rule, status, gain, certainty):
    assert select_rule(dp, dc) is rule
    ledger, conn = CausalLedger(), DualDyadConnectivity()
    outcome = apply_rules(_inputs({Channel.WEIGHT} if dp else (), dc), ledger, conn)
    assert outcome.tags[Channel.WEIGHT] is rule
    assert ledger[Channel.WEIGHT].status is status
    assert ledger[Channel.WEIGHT].certainty == pytest.approx(certainty)
    assert conn.gains[Channel.WEIGHT] == pytest.approx(gain)
    assert outcome.encode_flag is (rule is Rule.GROWTH)


def test_status_quo_is_an_identity():
    ledger, conn = CausalLedger(), DualDyadConnectivity()
    conn.set_gain(Channel.SHAPE, 0.8)
    ledger_before, gains_before = copy.deepcopy(ledger), dict(conn.gains)
    apply_rules(_inputs(), ledger, conn)
    assert ledger == ledger_before
    assert conn.gains == gains_before


def test_episode_two_and_three_sequence():
    ledger, conn = CausalLedger(), DualDyadConnectivity()
    second = apply_rules(_inputs({Channel.COLOR}, dc=False), ledger, conn)
    assert second.tags[Channel.COLOR] is Rule.ELIMINATION
    assert conn.gains[Channel.COLOR] == 0.0
    assert not second.encode_flag

    third = apply_rules(_inputs({Channel.WEIGHT}, dc=True, observed=14.0), ledger, conn)
    assert third.tags[Channel.WEIGHT] is Rule.GROWTH
    assert third.tags[Channel.SHAPE] is Rule.UNCERTAINTY
    assert third.tags[Channel.SIZE] is Rule.UNCERTAINTY
    assert third.tags[Channel.COLOR] is Rule.NONE
    assert ledger[Channel.SHAPE].certainty == pytest.approx(0.25)
    assert conn.gains[Channel.SIZE] == pytest.approx(0.8)
    assert third.encode_flag


def test_settled_channels_do_not_move():
    ledger, conn = CausalLedger(), DualDyadConnectivity()
    apply_rules(_inputs({Channel.WEIGHT}, dc=True), ledger, conn)
    outcome = apply_rules(_inputs({Channel.WEIGHT}, dc=False), ledger, conn)
    assert outcome.tags[Channel.WEIGHT] is Rule.NONE
    assert ledger[Channel.WEIGHT].status is CausalStatus.DOMINANT
    assert conn.gains[Channel.WEIGHT] == 1.0


def test_uncertainty_certainty_is_capped():
    ledger, conn = CausalLedger(), DualDyadConnectivity()
    for _ in range(6):
        apply_rules(_inputs(dc=True, observed=14.0), ledger, conn)
    assert ledger[Channel.SIZE].certainty == pytest.approx(0.99)
    assert ledger[Channel.SIZE].status is CausalStatus.LIKELY_IRRELEVANT
    assert 0.0 < conn.gains[Channel.SIZE] < 1.0


def test_nothing_recalled_forces_encoding():
    outcome = apply_rules(_inputs(expected=None), CausalLedger(), DualDyadConnectivity(), recalled_any=False)
    assert outcome.encode_flag
    assert set(outcome.tags.values()) == {Rule.STATUS_QUO}


def test_merge_prefers_growth_then_elimination():
    a = {ch: Rule.STATUS_QUO for ch in CHANNELS}
    b = {**a, Channel.COLOR: Rule.ELIMINATION, Channel.SIZE: Rule.UNCERTAINTY}
    c = {**a, Channel.COLOR: Rule.GROWTH, Channel.SHAPE: Rule.UNCERTAINTY}
    merged = merge_rules([a, b, c])
    assert merged[Channel.COLOR] is Rule.GROWTH
    assert merged[Channel.SHAPE] is Rule.UNCERTAINTY
    assert merged[Channel.SIZE] is Rule.UNCERTAINTY
    assert merged[Channel.WEIGHT] is Rule.STATUS_QUO
    assert merge_rules([]) == a


def test_apply_rule_table_reports_none_for_settled_channels():
    ledger, conn = CausalLedger(), DualDyadConnectivity()
    ledger[Channel.COLOR].status, ledger[Channel.COLOR].certainty = CausalStatus.IRRELEVANT, 1.0
    outcome = apply_rule_table({Channel.COLOR: Rule.GROWTH}, ledger, conn, recalled_any=True)
    assert outcome.tags[Channel.COLOR] is Rule.NONE
    assert not outcome.encode_flag


def _weight_dominant_ledger():
    ledger = CausalLedger()
    ledger[Channel.WEIGHT].status, ledger[Channel.WEIGHT].certainty = CausalStatus.DOMINANT, 1.0
    return ledger


def test_predict_reward_empty_and_single(make_cylinder):
    heavy = make_cylinder("A", weight_g=420)
    objects = {"A": heavy}
    assert predict_reward(heavy, [], CausalLedger(), objects) is None
    assert predict_reward(make_cylinder("B", "blue"), [_hit(heavy, 365.0)], CausalLedger(), objects) == 365.0


def test_predict_reward_two_point_kernel(make_cylinder):
    heavy, light = make_cylinder("A", weight_g=420), make_cylinder("C", weight_g=14)
    hits = [_hit(heavy, 365.0, index=1), _hit(light, 24.0, index=3)]
    target = make_cylinder("D", weight_g=200)
    predicted = predict_reward(target, hits, _weight_dominant_ledger(), {"A": heavy, "C": light})
    assert predicted == pytest.approx(180.3, abs=0.05)


def test_predict_reward_uses_only_bracketing_neighbours(make_cylinder):
    objs = {f"w{w}": make_cylinder(f"w{w}", weight_g=w) for w in (14, 200, 300, 420)}
    rewards = {"w14": 14.0, "w200": 200.0, "w300": 300.0, "w420": 365.34}
    hits = [_hit(obj, rewards[key], index=i) for i, (key, obj) in enumerate(objs.items())]
    predicted = predict_reward(make_cylinder("p", weight_g=250), hits, _weight_dominant_ledger(), objs)
    assert predicted == pytest.approx(250.0)
    exact = predict_reward(make_cylinder("q", weight_g=300), hits, _weight_dominant_ledger(), objs)
    assert exact == pytest.approx(300.0, rel=0.005)
    beyond = predict_reward(make_cylinder("r", weight_g=500), hits, _weight_dominant_ledger(), objs)
    assert beyond == pytest.approx(365.34)


def test_predict_reward_without_dominant_channel_weights_by_score(make_cylinder):
    a, b = make_cylinder("A", weight_g=420), make_cylinder("C", weight_g=14)
    hits = [_hit(a, 300.0, score=1.0), _hit(b, 100.0, score=0.5)]
    predicted = predict_reward(make_cylinder("x"), hits, CausalLedger(), {"A": a, "C": b})
    assert predicted == pytest.approx((300.0 + 50.0) / 1.5)


def test_predict_reward_scales_with_rewards(make_cylinder):
    heavy, light = make_cylinder("A", weight_g=420), make_cylinder("C", weight_g=14)
    objects = {"A": heavy, "C": light}
    target = make_cylinder("D", weight_g=200)
    base = predict_reward(target, [_hit(heavy, 365.0), _hit(light, 24.0)], _weight_dominant_ledger(), objects)
    scaled = predict_reward(target, [_hit(heavy, 730.0), _hit(light, 48.0)], _weight_dominant_ledger(), objects)
    assert scaled == pytest.approx(2 * base)


def test_choose_object(make_cylinder):
    heavy, light, novel = make_cylinder("A", weight_g=420), make_cylinder("C", weight_g=14), make_cylinder("N")
    table = {"A": 365.0, "C": 24.0, "N": None}
    anticipate = lambda obj: table[obj.id]
    assert choose_object([heavy], anticipate) == 0
    assert choose_object([light, heavy], anticipate) == 1
    assert choose_object([heavy, novel], anticipate) == 1
    assert choose_object([heavy, make_cylinder("A2", weight_g=420)], lambda _obj: 365.0) == 0
    with pytest.raises(ValueError):
        choose_object([], anticipate)


def test_dominant_channel_is_confirmed_by_growth():
    ledger, conn = _weight_dominant_ledger(), DualDyadConnectivity()
    outcome = apply_rules(_inputs({Channel.WEIGHT}, dc=True, expected=200.0, observed=14.0), ledger, conn)
    assert outcome.tags[Channel.WEIGHT] is Rule.GROWTH
    assert outcome.encode_flag
    assert ledger[Channel.WEIGHT].status is CausalStatus.DOMINANT
    assert ledger[Channel.WEIGHT].certainty == 1.0
    assert conn.gains[Channel.WEIGHT] == 1.0
    # the weight change accounts for the miss, so nothing else is doubted
    for channel in (Channel.COLOR, Channel.SHAPE, Channel.SIZE):
        assert outcome.tags[channel] is Rule.STATUS_QUO
        assert ledger[channel].status is CausalStatus.UNKNOWN
        assert conn.gains[channel] == 1.0


def test_contradiction_without_a_dominant_change_still_raises_uncertainty():
    ledger, conn = _weight_dominant_ledger(), DualDyadConnectivity()
    outcome = apply_rules(_inputs(dc=True, expected=200.0, observed=14.0), ledger, conn)
    assert outcome.tags[Channel.WEIGHT] is Rule.NONE
    assert outcome.tags[Channel.SHAPE] is Rule.UNCERTAINTY
    assert ledger[Channel.SHAPE].certainty == pytest.approx(0.25)
    assert not outcome.encode_flag


@pytest.mark.parametrize(
    "recalled_any,novel,expected",
    [(True, False, False), (True, True, True), (False, False, True)],
)
def test_encode_flag_sources(recalled_any, novel, expected):
    table = {ch: Rule.STATUS_QUO for ch in CHANNELS}
    outcome = apply_rule_table(
        table, _weight_dominant_ledger(), DualDyadConnectivity(), recalled_any=recalled_any, novel_dominant_value=novel,
    )
    assert outcome.encode_flag is expected
    assert outcome.tags[Channel.WEIGHT] is Rule.NONE
