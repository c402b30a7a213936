import numpy as np
import pytest

from episodic_memory import (
    EpisodicNetwork,
    MemoryFullError,
    build_episode,
    capacity_probe,
    object_cue,
)
from fable_models import CHANNELS
from feature_maps import bottom_up_activate, encode_feature
from hubs import (
    BODY_CODES,
    PADDING_ROW,
    ActionGoal,
    BodyState,
    DualDyadConnectivity,
    HubCode,
    HubKind,
    bind_object,
    code_distance,
    code_for,
)


def _object_code(rng):
    bits = -np.ones(50, dtype=np.int8)
    for slot in range(5):
        bits[slot * 10 + int(rng.integers(10))] = 1
    return HubCode(HubKind.OBJECT, bits)


def _episode(rng, index=1, reward=100.0):
    return build_episode(
        body=BodyState.GOAL_UNREACHABLE,
        object_code=_object_code(rng),
        action=ActionGoal.DROP,
        reward_cm3=reward,
        object_id=f"obj{index}",
        index=index,
    )


def _full_cue(episode):
    return {row: episode.rows[row] for row in range(episode.rows.shape[0])}


def test_empty_memory_recalls_nothing():
    net = EpisodicNetwork()
    assert net.recall(object_cue(_object_code(np.random.default_rng(0)))) == []


def test_episode_sheet_layout():
    ep = _episode(np.random.default_rng(1))
    assert ep.rows.shape == (20, 50)
    assert ep.flatten().shape == (1000,)
    assert np.array_equal(ep.rows[4], ep.rows[19])


def test_encoding_keeps_weights_symmetric_with_zero_diagonal():
    rng = np.random.default_rng(2)
    net = EpisodicNetwork()
    for index in range(5):
        net.encode(_episode(rng, index))
    assert np.array_equal(net.weights, net.weights.T)
    assert not np.any(np.diag(net.weights))
    assert net.stored_count == 5


def test_capacity_is_enforced():
    rng = np.random.default_rng(3)
    net = EpisodicNetwork(capacity=2)
    net.encode(_episode(rng, 1))
    net.encode(_episode(rng, 2))
    with pytest.raises(MemoryFullError, match="episodic memory full"):
        net.encode(_episode(rng, 3))


def test_single_pattern_is_a_fixed_point():
    ep = _episode(np.random.default_rng(4), reward=365.0)
    net = EpisodicNetwork()
    net.encode(ep)
    settled = net.settle(_full_cue(ep))
    assert settled.converged
    assert np.array_equal(settled.pattern, ep.rows)
    hits = net.recall(_full_cue(ep))
    assert [hit.episode.meta.object_id for hit in hits] == ["obj1"]
    assert hits[0].score == 1.0
    assert hits[0].episode.meta.reward_cm3 == 365.0


def test_exact_self_cue_recalls_each_of_fifty_patterns_first():
    rng = np.random.default_rng(5)
    net = EpisodicNetwork()
    episodes = [_episode(rng, index) for index in range(50)]
    for ep in episodes:
        net.encode(ep)
    for ep in episodes[::7]:
        hits = net.recall(_full_cue(ep))
        assert hits[0].score == 1.0
        assert hits[0].episode.object_code == ep.object_code


def test_object_row_cue_scores_by_hamming_distance():
    rng = np.random.default_rng(6)
    net = EpisodicNetwork()
    stored = _episode(rng, 1)
    net.encode(stored)
    bits = stored.object_code.bits.copy()
    on = np.flatnonzero(bits[30:40] == 1)[0] + 30
    bits[on] = -1
    bits[30 + (on - 30 + 1) % 10] = 1
    hits = net.recall(object_cue(HubCode(HubKind.OBJECT, bits)))
    assert len(hits) == 1
    assert hits[0].distance == 2
    assert hits[0].score == pytest.approx(48 / 50)


def test_recall_misses_codes_beyond_radius():
    rng = np.random.default_rng(7)
    net = EpisodicNetwork()
    stored = _episode(rng, 1)
    net.encode(stored)
    bits = -np.ones(50, dtype=np.int8)
    for slot in range(5):
        own = np.flatnonzero(stored.object_code.bits[slot * 10:(slot + 1) * 10] == 1)[0]
        bits[slot * 10 + (own + 1) % 10] = 1
    assert net.recall(object_cue(HubCode(HubKind.OBJECT, bits))) == []


def test_reprojection_hook_is_applied_to_stored_codes():
    rng = np.random.default_rng(8)
    net = EpisodicNetwork()
    stored = _episode(rng, 1)
    net.encode(stored)
    cue = _object_code(np.random.default_rng(99))
    hits = net.recall(object_cue(cue), reproject=lambda _code: cue)
    assert len(hits) == 1 and hits[0].score == 1.0


def test_duplicate_encoding_keeps_fixed_points():
    rng = np.random.default_rng(9)
    episodes = [_episode(rng, index) for index in range(3)]
    once, twice = EpisodicNetwork(), EpisodicNetwork()
    for ep in episodes:
        once.encode(ep)
        twice.encode(ep)
        twice.encode(ep)
    for ep in episodes:
        cue = {row: ep.rows[row] for row in range(4)}
        assert np.array_equal(once.settle(cue).pattern, twice.settle(cue).pattern)


def test_energy_never_rises_while_settling():
    ep = _episode(np.random.default_rng(10))
    net = EpisodicNetwork()
    net.encode(ep)
    result = net.settle({row: ep.rows[row] for row in range(4)})
    assert np.array_equal(result.pattern, ep.rows)
    assert all(b <= a + 1e-9 for a, b in zip(result.energies, result.energies[1:]))


def test_cue_must_clamp_something():
    with pytest.raises(ValueError, match="at least one row"):
        EpisodicNetwork().settle({})


def test_capacity_probe_single_pattern_is_perfect():
    assert capacity_probe(1, 1.0, seed=0)["accuracy"] == 1.0


@pytest.mark.parametrize("seed", range(10))
def test_capacity_probe_fifty_patterns_quarter_cue(seed):
    assert capacity_probe(50, 0.25, seed=seed)["accuracy"] >= 0.95


def test_capacity_probe_at_the_enforced_bound():
    result = capacity_probe(120, 0.5, seed=1)
    assert result["clamped_rows"] == 10
    assert 0.0 <= result["accuracy"] <= 1.0


def test_capacity_probe_rejects_out_of_range_arguments():
    with pytest.raises(ValueError):
        capacity_probe(121, 0.5, seed=0)
    with pytest.raises(ValueError):
        capacity_probe(10, 0.0, seed=0)


def test_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    net = EpisodicNetwork()
    for index in range(3):
        net.encode(_episode(rng, index, reward=10.0 * index))
    path = net.save(tmp_path / "memory.epimem")

    assert path.read_bytes()[:7] == b"EPIMEM1"
    assert path.stat().st_size > 7 + 1000 * 1000 * 4
    loaded = EpisodicNetwork.load(path)
    assert np.allclose(loaded.weights, net.weights, atol=1e-6)
    assert [ep.meta for ep in loaded.episodes] == [ep.meta for ep in net.episodes]
    for original, restored in zip(net.episodes, loaded.episodes):
        assert np.array_equal(original.rows, restored.rows)


def test_load_rejects_foreign_files(tmp_path):
    path = tmp_path / "other.bin"
    path.write_bytes(b"NOTMEM" + b"\x00" * 16)
    with pytest.raises(ValueError, match="not an episodic memory snapshot"):
        EpisodicNetwork.load(path)


def test_outcome_row_holds_the_body_state_after_acting():
    ep = build_episode(
        body=BodyState.GOAL_UNREACHABLE,
        object_code=_object_code(np.random.default_rng(12)),
        action=ActionGoal.DROP,
        reward_cm3=14.0,
        object_id="light",
        index=1,
        outcome=BodyState.GOAL_FAILED,
    )
    assert np.array_equal(ep.rows[0], BODY_CODES[BodyState.GOAL_UNREACHABLE].bits)
    assert np.array_equal(ep.rows[4], BODY_CODES[BodyState.GOAL_FAILED].bits)
    assert np.array_equal(ep.rows[5], PADDING_ROW)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_free_unit_energy_never_rises_with_fifty_stored(seed):
    rng = np.random.default_rng(seed)
    net = EpisodicNetwork()
    episodes = [_episode(rng, index, reward=float(rng.uniform(0.0, 500.0))) for index in range(50)]
    for ep in episodes:
        net.encode(ep)
    for ep in episodes:
        energies = net.settle({row: ep.rows[row] for row in range(5)}).energies
        assert all(b <= a + 1e-9 for a, b in zip(energies, energies[1:]))


def test_free_unit_energy_differs_from_sheet_energy_by_the_clamped_term():
    rng = np.random.default_rng(13)
    net = EpisodicNetwork()
    for index in range(3):
        net.encode(_episode(rng, index))
    state = np.where(rng.random((20, 50)) < 0.5, 1, -1)
    clamped = np.zeros((20, 50), dtype=bool)
    clamped[:4] = True
    xc = np.where(clamped.reshape(-1), state.reshape(-1), 0).astype(np.float64)
    assert net.energy(state, clamped) == pytest.approx(net.energy(state) - net.energy(xc.reshape(20, 50)))


def test_recall_reaches_cylinders_of_another_size(trained_maps, make_cylinder):
    conn = DualDyadConnectivity(seed=42)
    net = EpisodicNetwork()

    def bind(obj):
        acts = {ch: bottom_up_activate(trained_maps[ch], encode_feature(obj, ch)) for ch in CHANNELS}
        return bind_object(acts, conn)

    big = make_cylinder("big", weight_g=420)
    small = make_cylinder("small", weight_g=100, radius_cm=2.0, height_cm=6.0)
    for index, (obj, reward) in enumerate([(big, 365.34), (small, 75.4)], start=1):
        net.encode(build_episode(BodyState.GOAL_UNREACHABLE, bind(obj), ActionGoal.DROP, reward, obj.id, index))

    cue = code_for(
        {ch: bottom_up_activate(trained_maps[ch], encode_feature(make_cylinder("new", weight_g=250), ch)) for ch in CHANNELS},
        conn,
    )
    hits = net.recall(object_cue(cue), distance=lambda a, b: code_distance(a, b, conn))
    assert [hit.episode.meta.object_id for hit in hits] == ["big", "small"]
    assert [hit.distance for hit in hits] == [pytest.approx(2.0), pytest.approx(4.0)]
