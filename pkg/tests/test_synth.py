import numpy as np
import pytest

from erasorpp.ingest import SequenceSource, write_sequence
from erasorpp.pipeline import accumulate_map
from erasorpp.synth import (
    MOVING_CAR,
    MovingBox,
    SceneConfig,
    StaticBox,
    ablation_scene,
    box_surface_counts,
    generate_scene,
    linear_trajectory,
    reference_scene,
    sample_box_surface,
    scene_from_dict,
)


def tiny(**kw):
    base = dict(n_frames=3, ground_extent=(-20, 20, -20, 20), ground_density=2.0, seed=11)
    base.update(kw)
    return SceneConfig(**base)


def test_no_moving_boxes_all_static():
    src = generate_scene(tiny(static_boxes=[StaticBox((5, 5), (2, 2, 2))]))
    assert all(not np.isin(f.semantic, range(252, 260)).any() for f in src.frames)


def test_moving_box_leaves_twenty_meter_trace():
    cfg = tiny(n_frames=20, trajectory=linear_trajectory(20, step=(0, 0, 0)),
               ground_extent=(-40, 40, -40, 40),
               moving_boxes=[MovingBox((-10.0, 5.0), (1.0, 0.0))])
    m = accumulate_map(generate_scene(cfg))
    trace = m.xyz[m.semantic == MOVING_CAR]
    extent = trace[:, 0].max() - trace[:, 0].min()
    # 19 m of travel plus the 4 m box length
    assert 19 + 4 - 0.2 <= extent <= 19 + 4 + 0.2
    assert np.all(m.semantic[np.isin(m.semantic, range(252, 260))] == MOVING_CAR)


def test_labels_by_construction():
    cfg = tiny(moving_boxes=[MovingBox((5.0, 5.0), (0.5, 0.0))])
    for f in generate_scene(cfg).frames:
        dyn = f.semantic == MOVING_CAR
        assert dyn.any()
        # the car floats 0.3 m above the ground and never overlaps other geometry
        assert np.all(f.xyz[dyn, 2] > f.xyz[~dyn & (f.semantic == 40), 2].max())


def test_deterministic():
    a = generate_scene(tiny(moving_boxes=[MovingBox((3, 3), (1, 0))]))
    b = generate_scene(tiny(moving_boxes=[MovingBox((3, 3), (1, 0))]))
    for fa, fb in zip(a.frames, b.frames):
        assert fa.xyz.tobytes() == fb.xyz.tobytes()
        assert fa.semantic.tobytes() == fb.semantic.tobytes()
    c = generate_scene(tiny(seed=12))
    assert c.frames[0].xyz.tobytes() != a.frames[0].xyz.tobytes()


def test_density_scaling_within_one_point_per_face(rng):
    size = (3.3, 1.7, 2.1)
    base = box_surface_counts(size, 10.0)
    for k in (2, 3, 5):
        scaled = box_surface_counts(size, 10.0 * k)
        for b, s in zip(base, scaled):
            assert abs(s - k * b) <= k
    pts = sample_box_surface(rng, (0, 0), 0.0, size, 10.0)
    assert len(pts) == sum(base)


def test_write_sequence_round_trip(tmp_path):
    src = generate_scene(tiny(moving_boxes=[MovingBox((3, 3), (1, 0))]))
    write_sequence(tmp_path, src.frames, src.poses)
    back = SequenceSource.from_directory(tmp_path)
    for i in src.indices():
        a, b = src.load_frame(i), back.load_frame(i)
        assert a.xyz.tobytes() == b.xyz.tobytes()
        assert np.array_equal(a.semantic, b.semantic) and np.array_equal(a.instance, b.instance)
        assert np.array_equal(src.pose(i).matrix(), back.pose(i).matrix())


def test_presets_are_valid():
    ref = reference_scene()
    assert ref.n_frames == 20 and len(ref.moving_boxes) == 1
    abl = ablation_scene()
    assert len(abl.vegetation) == 1 and len(abl.static_boxes) == len(ref.static_boxes) + 1


def test_scene_from_dict():
    cfg = scene_from_dict({
        "n_frames": 2,
        "trajectory": [[0, 0, 1.6, 0], [1, 0, 1.6, 0.1]],
        "static_boxes": [{"center": [5, 5], "size": [1, 1, 1]}],
        "moving_boxes": [{"start": [0, 5], "velocity": [1, 0]}],
        "seed": 4,
    })
    assert cfg.static_boxes[0].size == (1, 1, 1)
    assert np.allclose(cfg.trajectory[1].translation, [1, 0, 1.6])
    with pytest.raises(KeyError):
        scene_from_dict({"n_frame": 2})
    with pytest.raises(KeyError):
        scene_from_dict({"static_boxes": [{"centre": [0, 0], "size": [1, 1, 1]}]})


def test_scene_validation():
    with pytest.raises(ValueError):
        SceneConfig(n_frames=0)
    with pytest.raises(ValueError):
        SceneConfig(ground_density=0)
