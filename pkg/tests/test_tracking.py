import numpy as np
import pytest

from mvtrack3d.core import BBox2D, CameraPose, Detection, Vec3, Viewpoint
from mvtrack3d.estimation import NoiseParams
from mvtrack3d.tracking import (
    TrackerConfig,
    TrackerVariant,
    tracker_new,
    tracker_run,
    tracker_step,
)

BOX = BBox2D(0, 0, 10, 10)
POSE = CameraPose(Vec3(0, 0, 0))


def unit_feature(seed, dim=16):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=dim)
    return f / np.linalg.norm(f)


def det(x, y, z, feature=None, conf=0.9):
    return Detection(BOX, Vec3(x, y, z), conf, feature)


def vp(index, *detections):
    return Viewpoint(index=index, pose=POSE, detections=tuple(detections))


def position_config(**kw):
    return TrackerConfig(variant=TrackerVariant.POSITION_ONLY, **kw)


def feature_config(**kw):
    return TrackerConfig(variant=TrackerVariant.FEATURE_BASED, **kw)


class TestLifecycle:
    def test_new_tracker_is_empty(self):
        state = tracker_new(position_config())
        assert state.tracks == []
        assert state.next_id == 1
        assert state.config.variant is TrackerVariant.POSITION_ONLY

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            position_config(mahalanobis_gate=-1.0)
        with pytest.raises(ValueError):
            feature_config(feature_momentum=1.5)

    def test_all_birth(self):
        state = tracker_new(position_config())
        state, outputs = tracker_step(state, vp(0, det(0, 0, 0), det(1, 1, 1)))
        assert [o.track_id for o in outputs] == [1, 2]
        assert state.next_id == 3

    def test_match_within_gate_keeps_id(self):
        state = tracker_new(position_config())
        state, _ = tracker_step(state, vp(0, det(0, 0, 0)))
        state, outputs = tracker_step(state, vp(1, det(0, 0, 0.001)))
        assert [o.track_id for o in outputs] == [1]
        assert len(state.tracks) == 1

    def test_beyond_gate_births_new_id(self):
        state = tracker_new(position_config())
        state, _ = tracker_step(state, vp(0, det(0, 0, 0)))
        state, outputs = tracker_step(state, vp(1, det(1.0, 0, 0)))
        assert [o.track_id for o in outputs] == [2]
        assert len(state.tracks) == 2  # the unmatched track survives

    def test_low_confidence_ignored(self):
        state = tracker_new(position_config(min_confidence=0.5))
        state, outputs = tracker_step(state, vp(0, det(0, 0, 0, conf=0.2), det(1, 1, 1, conf=0.9)))
        assert len(outputs) == 1
        assert len(state.tracks) == 1

    def test_feature_mode_requires_features(self):
        state = tracker_new(feature_config())
        with pytest.raises(ValueError, match="viewpoint 3"):
            tracker_step(state, vp(3, det(0, 0, 0)))


class TestRun:
    def test_empty_sequence(self):
        assert tracker_run(position_config(), []) == []

    def test_single_viewpoint_distinct_ids(self):
        outputs = tracker_run(position_config(), [vp(0, *(det(i, 0, 0) for i in range(4)))])
        assert sorted(o.track_id for o in outputs) == [1, 2, 3, 4]

    def test_static_object_single_id(self):
        seq = [vp(i, det(0.5, 0.2, 0.8)) for i in range(3)]
        outputs = tracker_run(position_config(), seq)
        assert [o.track_id for o in outputs] == [1, 1, 1]

    def test_non_monotone_indices_rejected(self):
        seq = [vp(1, det(0, 0, 0)), vp(1, det(0, 0, 0))]
        with pytest.raises(ValueError, match="strictly increasing"):
            tracker_run(position_config(), seq)


class TestIdStability:
    """Noise-free sequences: one id per object, no switches, for both variants."""

    def build_sequence(self, n_objects=5, n_frames=8, seed=41):
        rng = np.random.default_rng(seed)
        positions = [Vec3(*rng.uniform(0, 1, 3)) for _ in range(n_objects)]
        features = [unit_feature(100 + k) for k in range(n_objects)]
        seq = []
        for t in range(n_frames):
            # each object skips a couple of frames to exercise persistence
            visible = [k for k in range(n_objects) if (t + k) % 4 != 0]
            dets = [det(positions[k].x, positions[k].y, positions[k].z, features[k]) for k in visible]
            seq.append((vp(t, *dets), visible))
        return seq

    @pytest.mark.parametrize("make_config", [position_config, feature_config])
    def test_one_id_per_object(self, make_config):
        seq = self.build_sequence()
        outputs = tracker_run(make_config(), [v for v, _ in seq])
        by_frame = {}
        for o in outputs:
            by_frame.setdefault(o.viewpoint_index, []).append(o.track_id)
        id_of_object = {}
        for (v, visible), _ in zip(seq, range(len(seq))):
            ids = by_frame.get(v.index, [])
            assert len(ids) == len(visible)
            for k, track_id in zip(visible, ids):
                id_of_object.setdefault(k, track_id)
                assert id_of_object[k] == track_id
        assert len(set(id_of_object.values())) == len(id_of_object)

    def test_reappearance_after_long_gap(self):
        # unmatched for several viewpoints, then matched again with the same id
        seq = [vp(0, det(0.5, 0.5, 0.5))]
        seq += [vp(i, ) for i in range(1, 6)]
        seq += [vp(6, det(0.5, 0.5, 0.5))]
        outputs = tracker_run(position_config(), seq)
        assert [o.track_id for o in outputs] == [1, 1]


class TestInvariants:
    def test_ids_strictly_increasing_and_never_reused(self):
        rng = np.random.default_rng(43)
        cfg = position_config()
        state = tracker_new(cfg)
        born = []
        for t in range(30):
            dets = [det(*rng.uniform(0, 2, 3)) for _ in range(rng.integers(0, 5))]
            state, outputs = tracker_step(state, vp(t, *dets))
            assert len(outputs) == len(dets)
            for o in outputs:
                if o.track_id not in born:
                    assert not born or o.track_id > max(born)
                    born.append(o.track_id)
        assert born == sorted(born)
        assert len(born) == len(set(born))

    def test_feature_momentum_blend(self):
        f0 = unit_feature(1)
        f1 = unit_feature(2)
        cfg = feature_config(feature_momentum=0.25, cosine_gate=2.0)
        state = tracker_new(cfg)
        state, _ = tracker_step(state, vp(0, det(0, 0, 0, f0)))
        state, _ = tracker_step(state, vp(1, det(0, 0, 0, f1)))
        expected = 0.75 * f0 + 0.25 * f1
        expected /= np.linalg.norm(expected)
        assert np.allclose(state.tracks[0].feature, expected, atol=1e-12)

    def test_feature_track_position_follows_detection(self):
        f = unit_feature(3)
        state = tracker_new(feature_config())
        state, _ = tracker_step(state, vp(0, det(0, 0, 0, f)))
        state, outputs = tracker_step(state, vp(1, det(0.3, 0.1, -0.2, f)))
        assert outputs[0].position == Vec3(0.3, 0.1, -0.2)
