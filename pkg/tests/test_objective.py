"""Fitness component and objective-variant tests, plus closed-loop batch scoring.

Scores for the batch evaluator are cross-checked by rendering reference
frames from a known pose and asserting the generating pose wins.
"""

import numpy as np
import pytest

from mocaplab.camera import TsaiCamera
from mocaplab.imaging import Roi
from mocaplab.objective import (
    BadConfig,
    BatchEvaluator,
    FitnessComponents,
    ObjectiveConfig,
    components,
    evaluate_batch,
    f1,
    f1_labeled,
    f2,
    objective,
    pooled,
    scores_from_components,
)
from mocaplab.pipeline import FeatureConfig, features_from_model_frame
from mocaplab.render import render_model


def comp(area_ref=0, area_model=0, overlap=0, edge_count=0, distance_q=0):
    return FitnessComponents(area_ref, area_model, overlap, edge_count, distance_q)


# -- component tallies ---------------------------------------------------------------


def test_components_two_by_two_worked_example():
    ref = np.zeros((2, 2), dtype=np.uint8)
    ref[0, 0] = 0x80
    ref[0, 1] = 0x80
    img = np.zeros((2, 2), dtype=np.uint8)
    img[0, 0] = 3
    img[1, 0] = 3
    c = components(img, ref, Roi(0, 0, 2, 2))
    assert c.area_ref == 2
    assert c.area_model == 2
    assert c.overlap == 1


def test_components_empty_model_image():
    ref = np.full((4, 4), 0x80, dtype=np.uint8)
    c = components(np.zeros((4, 4), dtype=np.uint8), ref, Roi(0, 0, 4, 4))
    assert c.area_ref == 16
    assert c.area_model == 0
    assert c.overlap == 0
    assert c.edge_count == 0
    assert c.distance_q == 0


def test_components_perfect_edges_give_distance_equal_to_count():
    ref = np.full((3, 3), 127, dtype=np.uint8)  # n = 1 everywhere, no silhouette
    img = np.zeros((3, 3), dtype=np.uint8)
    img[1, :] = 0x80 | 5
    c = components(img, ref, Roi(0, 0, 3, 3))
    assert c.edge_count == 3
    assert c.distance_q == 3 * 127
    assert c.distance_sum == c.edge_count


def test_components_respect_roi():
    ref = np.full((4, 4), 0x80, dtype=np.uint8)
    img = np.full((4, 4), 1, dtype=np.uint8)
    c = components(img, ref, Roi(1, 1, 2, 3))
    assert c.area_ref == 6
    assert c.area_model == 6
    assert c.overlap == 6


def test_components_invariants_on_random_images():
    rng = np.random.default_rng(13)
    for _ in range(20):
        img = rng.integers(0, 256, size=(16, 16)).astype(np.uint8)
        ref = rng.integers(0, 256, size=(16, 16)).astype(np.uint8)
        c = components(img, ref, Roi(0, 0, 16, 16))
        assert c.overlap <= min(c.area_ref, c.area_model)
        assert c.distance_sum <= c.edge_count + 1e-12


def test_components_labeled_buckets_sum_to_totals():
    rng = np.random.default_rng(29)
    img = rng.integers(0, 4, size=(12, 12)).astype(np.uint8)
    img |= (rng.random((12, 12)) < 0.3).astype(np.uint8) << 7
    ref = rng.integers(0, 256, size=(12, 12)).astype(np.uint8)
    c, per = components(img, ref, Roi(0, 0, 12, 12), labeled=True)
    assert per["area_model"].sum() == c.area_model
    assert per["overlap"].sum() == c.overlap
    assert per["edge_count"].sum() == c.edge_count
    assert per["distance_q"].sum() == c.distance_q
    assert per["area_model"][0] == 0


# -- f1 / f2 -------------------------------------------------------------------------


def test_f1_worked_example():
    assert f1(comp(area_ref=2, area_model=2, overlap=1), beta=0.5) == 0.5


def test_f1_perfect_and_zero():
    perfect = comp(area_ref=9, area_model=9, overlap=9)
    for beta in (0.0, 0.3, 1.0):
        assert f1(perfect, beta=beta) == 1.0
    assert f1(comp(area_ref=9, area_model=9, overlap=0)) == 0.0


def test_f1_zero_denominators_contribute_zero():
    assert f1(comp(area_ref=0, area_model=4, overlap=0)) == 0.0
    assert f1(comp(area_ref=4, area_model=0, overlap=0)) == 0.0
    assert f1(comp()) == 0.0


def test_f1_beta_weighs_the_two_directions():
    c = comp(area_ref=10, area_model=5, overlap=5)
    assert np.isclose(f1(c, beta=1.0), 0.5)
    assert np.isclose(f1(c, beta=0.0), 1.0)
    assert np.isclose(f1(c, beta=0.25), 0.25 * 0.5 + 0.75 * 1.0)


def test_f1_never_decreases_with_matched_pixel():
    rng = np.random.default_rng(43)
    for _ in range(200):
        ar, am = rng.integers(1, 50, size=2)
        ov = rng.integers(0, min(ar, am) + 1)
        base = f1(comp(area_ref=int(ar), area_model=int(am), overlap=int(ov)))
        grown = f1(
            comp(area_ref=int(ar) + 1, area_model=int(am) + 1, overlap=int(ov) + 1)
        )
        assert grown >= base - 1e-12


def test_f2_values():
    assert f2(comp(edge_count=4, distance_q=4 * 127)) == 1.0
    assert f2(comp(edge_count=0, distance_q=0)) == 0.0
    assert f2(comp(edge_count=4, distance_q=2 * 127)) == 0.5


def test_f1_labeled_matches_single_label_f1():
    per = {
        "area_model": np.zeros(128, dtype=np.int64),
        "overlap": np.zeros(128, dtype=np.int64),
        "edge_count": np.zeros(128, dtype=np.int64),
        "distance_q": np.zeros(128, dtype=np.int64),
    }
    per["area_model"][3] = 10
    per["overlap"][3] = 6
    per["area_model"][5] = 20
    per["overlap"][5] = 5
    only3 = f1_labeled(per, area_ref=30, beta=0.5, weights={3: 1.0})
    assert np.isclose(only3, f1(comp(area_ref=30, area_model=10, overlap=6)))
    equal = f1_labeled(per, area_ref=30, beta=0.5)
    both = 0.5 * (
        f1(comp(area_ref=30, area_model=10, overlap=6))
        + f1(comp(area_ref=30, area_model=20, overlap=5))
    )
    assert np.isclose(equal, both)


# -- objective variants ------------------------------------------------------------------


def perfect_comp():
    return comp(area_ref=10, area_model=10, overlap=10, edge_count=5,
                distance_q=5 * 127)


@pytest.mark.parametrize("variant", ["ws", "sp", "aows", "aosp", "posp"])
def test_objective_perfect_fit_scores_one(variant):
    cfg = ObjectiveConfig(variant=variant)
    comps = [perfect_comp(), perfect_comp()]
    assert np.isclose(objective(comps, cfg), 1.0, atol=1e-12)


def test_objective_sp_worked_example():
    c = comp(area_ref=100, area_model=100, overlap=81, edge_count=100,
             distance_q=8128)
    cfg = ObjectiveConfig(variant="sp", omega1=0.5, omega2=0.5)
    assert np.isclose(objective(c, cfg), 0.72, atol=1e-12)


def test_objective_ws_worked_example():
    c = comp(area_ref=100, area_model=100, overlap=40, edge_count=100,
             distance_q=7620)
    cfg = ObjectiveConfig(variant="ws", w1=0.5, w2=0.5)
    assert np.isclose(objective(c, cfg), 0.5, atol=1e-12)


def test_objective_zero_to_the_zero_is_one():
    c = comp(area_ref=100, area_model=100, overlap=0, edge_count=100,
             distance_q=8128)
    cfg = ObjectiveConfig(variant="sp", omega1=0.0, omega2=0.5)
    assert np.isclose(objective(c, cfg), np.sqrt(0.64), atol=1e-12)


def test_objective_pooled_forms_sum_components_across_cameras():
    a = comp(area_ref=50, area_model=100, overlap=40, edge_count=10,
             distance_q=635)
    b = comp(area_ref=150, area_model=100, overlap=60, edge_count=30,
             distance_q=1905)
    cfg = ObjectiveConfig(variant="ws", w1=0.5, w2=0.5)
    p = pooled([a, b])
    assert p.area_ref == 200 and p.overlap == 100
    want = 0.5 * f1(p) + 0.5 * f2(p)
    assert np.isclose(objective([a, b], cfg), want, atol=1e-12)


def test_objective_per_camera_forms():
    a = comp(area_ref=50, area_model=100, overlap=40, edge_count=10,
             distance_q=635)
    b = comp(area_ref=150, area_model=100, overlap=60, edge_count=30,
             distance_q=1905)
    f1a, f2a = f1(a), f2(a)
    f1b, f2b = f1(b), f2(b)
    got = objective([a, b], ObjectiveConfig(variant="aows", w1=0.5, w2=0.5))
    want = 0.5 * ((0.5 * f1a + 0.5 * f2a) + (0.5 * f1b + 0.5 * f2b))
    assert np.isclose(got, want, atol=1e-12)
    got = objective([a, b], ObjectiveConfig(variant="aosp", omega1=0.7, omega2=0.3))
    want = 0.5 * (f1a**0.7 * f2a**0.3 + f1b**0.7 * f2b**0.3)
    assert np.isclose(got, want, atol=1e-12)
    got = objective([a, b], ObjectiveConfig(variant="posp", omega1=0.7, omega2=0.3))
    want = (f1a**0.7 * f2a**0.3) * (f1b**0.7 * f2b**0.3)
    assert np.isclose(got, want, atol=1e-12)


def test_objective_values_stay_in_unit_interval():
    rng = np.random.default_rng(61)
    for _ in range(50):
        cs = []
        for _ in range(3):
            ar, am = rng.integers(1, 40, size=2)
            ov = rng.integers(0, min(ar, am) + 1)
            ec = rng.integers(0, 20)
            dq = rng.integers(0, 127 * ec + 1) if ec else 0
            cs.append(comp(int(ar), int(am), int(ov), int(ec), int(dq)))
        for variant in ("ws", "sp", "aows", "aosp", "posp"):
            s = objective(cs, ObjectiveConfig(variant=variant))
            assert 0.0 <= s <= 1.0


def test_sp_equal_exponents_rank_like_plain_product():
    rng = np.random.default_rng(67)
    cfg = ObjectiveConfig(variant="sp", omega1=0.5, omega2=0.5)
    scored = []
    plain = []
    for _ in range(30):
        ar, am = rng.integers(1, 40, size=2)
        ov = rng.integers(1, min(ar, am) + 1)
        ec = rng.integers(1, 20)
        dq = rng.integers(1, 127 * ec + 1)
        c = comp(int(ar), int(am), int(ov), int(ec), int(dq))
        scored.append(objective(c, cfg))
        plain.append(f1(c) * f2(c))
    assert np.argmax(scored) == np.argmax(plain)
    assert np.array_equal(np.argsort(scored), np.argsort(plain))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"variant": "nope"},
        {"beta": 1.5},
        {"beta": -0.1},
        {"w1": 0.7, "w2": 0.7},
        {"w1": -0.2, "w2": 1.2},
        {"omega1": 1.0},
        {"omega2": -0.1},
    ],
)
def test_objective_config_validation(kwargs):
    with pytest.raises(BadConfig):
        ObjectiveConfig(**kwargs)


def test_scores_from_components_flags_behind_poses():
    comps = np.array([[[10, 10, 5, 635]], [[10, 10, 5, 635]]], dtype=np.int64)
    area_ref = np.array([10], dtype=np.int64)
    behind = np.array([0, 1], dtype=np.uint8)
    s = scores_from_components(comps, area_ref, behind, ObjectiveConfig())
    assert s[0] > 0.0
    assert s[1] == 0.0


# -- batch evaluation ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def closed_loop(model, ring_rig):
    """Reference features rendered from a known pose on the default rig."""
    pose = model.bind_pose.copy()
    fcfg = FeatureConfig()
    refs, rois = [], []
    for cam in ring_rig:
        img, ok, _, _ = render_model(model, pose, cam)
        assert ok
        ref, roi, _ = features_from_model_frame(img, fcfg)
        refs.append(ref)
        rois.append(roi)
    return pose, refs, rois


def test_generating_pose_scores_high(model, ring_rig, closed_loop):
    pose, refs, rois = closed_loop
    score = evaluate_batch(pose[None], model, ring_rig, refs, rois)[0]
    assert score >= 0.95


def test_generating_pose_beats_perturbed(model, ring_rig, closed_loop):
    pose, refs, rois = closed_loop
    bent = pose.copy()
    hip = model.dof_names.index("LeftHip.r_x")
    bent[hip] += np.deg2rad(10.0)
    scores = evaluate_batch(np.stack([pose, bent]), model, ring_rig, refs, rois)
    assert scores[0] > scores[1]


def test_duplicate_poses_score_identically(model, ring_rig, closed_loop):
    pose, refs, rois = closed_loop
    scores = evaluate_batch(np.stack([pose, pose, pose]), model, ring_rig,
                            refs, rois)
    assert scores[0] == scores[1] == scores[2]


def test_all_background_reference_scores_zero(model, ring_rig):
    refs = [np.zeros((c.img_h, c.img_w), dtype=np.uint8) for c in ring_rig]
    rois = [Roi(0, 0, c.img_w, c.img_h) for c in ring_rig]
    scores = evaluate_batch(model.bind_pose[None], model, ring_rig, refs, rois)
    assert scores[0] == 0.0


def test_behind_camera_scores_zero(model):
    cam = TsaiCamera(
        r_x=0.0, r_y=0.0, r_z=0.0, t_x=0.0, t_y=0.0, t_z=-5000.0,
        f=8.0, kappa=0.0, c_x=80.0, c_y=60.0, s_x=1.0,
        d_px=0.05, d_py=0.05, img_w=160, img_h=120,
    )
    refs = [np.full((120, 160), 0xFF, dtype=np.uint8)]
    rois = [Roi(0, 0, 160, 120)]
    scores = evaluate_batch(model.bind_pose[None], model, [cam], refs, rois)
    assert scores[0] == 0.0


def test_batch_scores_independent_of_worker_count(model, ring_rig, closed_loop, rng):
    pose, refs, rois = closed_loop
    poses = pose[None] + rng.normal(scale=0.02, size=(16, pose.size))
    one = evaluate_batch(poses, model, ring_rig, refs, rois, workers=1)
    two = evaluate_batch(poses, model, ring_rig, refs, rois, workers=2)
    assert np.array_equal(one, two)


def test_batch_order_matches_individual_scores(model, ring_rig, closed_loop, rng):
    pose, refs, rois = closed_loop
    poses = pose[None] + rng.normal(scale=0.02, size=(5, pose.size))
    batch = evaluate_batch(poses, model, ring_rig, refs, rois, workers=1)
    singles = np.array(
        [
            evaluate_batch(p[None], model, ring_rig, refs, rois, workers=1)[0]
            for p in poses
        ]
    )
    assert np.array_equal(batch, singles)


def test_evaluator_requires_frame_before_evaluate(model, ring_rig):
    with BatchEvaluator(model, ring_rig, workers=1) as ev:
        with pytest.raises(RuntimeError):
            ev.evaluate(model.bind_pose[None])


def test_evaluator_counts_evaluations(model, ring_rig, closed_loop):
    pose, refs, rois = closed_loop
    with BatchEvaluator(model, ring_rig, workers=1) as ev:
        ev.set_frame(refs, rois)
        ev.evaluate(np.stack([pose, pose]))
        ev.evaluate(pose[None])
        assert ev.evaluations == 3
