from itertools import combinations

import numpy as np
from pytest import approx, fixture, raises

from planeable.enums import Preset
from planeable.geometry import CameraPose
from planeable.mesh import UNASSIGNED, TriMesh, sample_mesh_surface
from planeable.metrics import chamfer_f1
from planeable.parsers.archive import load_scene_archive
from planeable.synth import (
    ANCHOR_MIN_DISTANCE,
    ANCHOR_RADIUS,
    CLUTTER_PROBABILITY,
    NoiseModel,
    ScenePiece,
    SyntheticScene,
    default_intrinsics,
    ground_truth_mesh,
    make_box_room,
    make_scene,
    make_two_rooms,
    render_keyframe,
    render_sequence,
    sample_anchors,
    synthesize_archive,
)

QUIET = NoiseModel(depth_sigma=0.0, embedding_sigma=0.0, rotate_embeddings=False)
K = default_intrinsics()


def world_points(keyframe):
    """Ray-cast points of every pixel, from depth along the pixel ray."""
    h, w = keyframe.depth.shape
    k = keyframe.pose.intrinsics
    v, u = np.mgrid[0:h, 0:w].astype(float)
    rays = np.stack([(u - k[0, 2]) / k[0, 0], (v - k[1, 2]) / k[1, 1], np.ones_like(u)], -1)
    rays = rays @ keyframe.pose.rotation.T
    return keyframe.pose.translation + keyframe.depth[..., None] * rays


@fixture
def wall_scene():
    # One 10 m square wall in the x = 2 plane
    wall = ScenePiece(0, (2.0, -5.0, -5.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), 10.0, 10.0)
    return SyntheticScene([wall], {0: np.array([1.5, 0.0, 0.0]), -1: np.zeros(3)}, noise=QUIET)


class TestBoxRoom:
    def test_six_instances(self):
        scene = make_box_room()
        assert scene.instance_ids == [0, 1, 2, 3, 4, 5]
        assert scene.overlays == []
        assert len(scene.trajectory) == 30

    def test_picture_overlay(self):
        scene = make_box_room(overlays=1)
        assert scene.instance_ids == [0, 1, 2, 3, 4, 5, 6]
        (picture,) = scene.overlays
        host = scene.planes[picture.host_id]
        assert scene.planes[6].normal == approx(host.normal)
        assert scene.planes[6].offset == approx(host.offset)

    def test_seed_is_deterministic(self):
        a = make_box_room(overlays=2, clutter=2, seed=5)
        b = make_box_room(overlays=2, clutter=2, seed=5)
        assert a.pieces == b.pieces
        for iid in a.anchors:
            assert np.array_equal(a.anchors[iid], b.anchors[iid])

    def test_clutter_is_not_an_instance(self):
        scene = make_box_room(clutter=3)
        assert len(scene.instance_ids) == 6
        assert len(scene.pieces) == 9

    def test_rejects_bad_extent(self):
        with raises(ValueError):
            make_box_room(extent=(3.0, 0.0, 2.0))

    def test_rejects_too_many_overlays(self):
        with raises(ValueError):
            make_box_room(overlays=5)
        with raises(ValueError):
            make_box_room(clutter=-1)


class TestTwoRooms:
    def test_instances_and_trajectory(self):
        scene = make_two_rooms(n_frames=10)
        assert scene.instance_ids == list(range(14))
        assert len(scene.trajectory) == 10

    def test_floor_spans_both_rooms(self):
        scene = make_two_rooms(n_frames=6)
        floor = [p for p in scene.pieces if p.instance_id == 0]
        assert len(floor) == 3
        assert {p.plane.offset for p in floor} == {0.0}

    def test_too_few_frames(self):
        with raises(ValueError):
            make_two_rooms(n_frames=5)


def test_make_scene_presets():
    assert len(make_scene(Preset.BOX6, n_frames=4).instance_ids) == 6
    assert len(make_scene("picture-wall", n_frames=4).overlays) == 1
    assert len(make_scene(Preset.TWO_ROOMS, n_frames=8).instance_ids) == 14
    with raises(ValueError):
        make_scene("attic")


class TestAnchors:
    def test_separated_on_sphere(self):
        anchors = sample_anchors(list(range(14)), np.random.default_rng(0))
        vectors = list(anchors.values())
        assert np.linalg.norm(vectors, axis=1) == approx(np.full(14, ANCHOR_RADIUS))
        for a, b in combinations(vectors, 2):
            # at least the embedding separation margin of 0.9
            assert np.linalg.norm(a - b) > ANCHOR_MIN_DISTANCE

    def test_impossible_packing(self):
        with raises(RuntimeError):
            sample_anchors(list(range(500)), np.random.default_rng(0), max_tries=200)


class TestRenderKeyframe:
    def test_fronto_parallel_depth(self, wall_scene):
        pose = CameraPose.look_at(K, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
        keyframe, ids = render_keyframe(wall_scene, pose)
        assert keyframe.depth.shape == (60, 80)
        assert keyframe.depth == approx(np.full((60, 80), 2.0))
        assert (ids == 0).all()
        assert (keyframe.planar_prob == 1.0).all()

    def test_looking_away(self, wall_scene):
        pose = CameraPose.look_at(K, (0.0, 0.0, 0.0), (-1.0, 0.0, 0.0))
        keyframe, ids = render_keyframe(wall_scene, pose)
        assert (keyframe.depth == 0).all()
        assert (keyframe.planar_prob == 0).all()
        assert (ids == UNASSIGNED).all()

    def test_box_room_depth_lies_on_planes(self):
        scene = make_box_room(noise=QUIET)
        keyframe, ids = render_keyframe(scene, scene.trajectory[0])
        assert (keyframe.depth > 0).all()
        assert set(np.unique(ids)) <= set(range(6))
        points = world_points(keyframe)
        for iid, plane in scene.planes.items():
            sel = ids == iid
            if sel.any():
                assert np.abs(plane.signed_distance(points[sel])).max() < 1e-9

    def test_overlay_wins_over_host(self):
        scene = make_box_room(overlays=1, noise=QUIET)
        picture = scene.overlays[0]
        center = (
            np.asarray(picture.origin)
            + picture.width / 2 * np.asarray(picture.axis_u)
            + picture.height / 2 * np.asarray(picture.axis_v)
        )
        eye = center + 1.0 * picture.normal
        keyframe, ids = render_keyframe(scene, CameraPose.look_at(K, eye, center))
        assert ids[30, 40] == 6
        assert keyframe.depth[30, 40] == approx(1.0)
        assert picture.host_id in set(ids.ravel().tolist())

    def test_clutter_probability(self):
        scene = make_box_room(clutter=1, noise=QUIET)
        eye = (0.6, 0.6, 1.5)
        pose = CameraPose.look_at(K, eye, (0.6, 0.6, 0.0), up=(1.0, 0.0, 0.0))
        keyframe, ids = render_keyframe(scene, pose)
        assert keyframe.planar_prob[30, 40] == approx(CLUTTER_PROBABILITY)
        assert ids[30, 40] == UNASSIGNED
        assert keyframe.depth[30, 40] == approx(1.0)
        assert keyframe.pixel_embedding[30, 40] == approx(scene.anchors[UNASSIGNED])

    def test_embeddings_are_anchors_without_noise(self):
        scene = make_box_room(noise=QUIET)
        keyframe, ids = render_keyframe(scene, scene.trajectory[1])
        for iid in np.unique(ids):
            assert keyframe.pixel_embedding[ids == iid] == approx(
                np.tile(scene.anchors[iid], (int((ids == iid).sum()), 1))
            )

    def test_frame_rotation_preserves_within_frame_structure(self):
        noise = NoiseModel(depth_sigma=0.0, embedding_sigma=0.0, rotate_embeddings=True)
        scene = make_box_room(noise=noise)
        pose = scene.trajectory[0]
        a, ids = render_keyframe(scene, pose, frame_id=0)
        b, _ = render_keyframe(scene, pose, frame_id=1)

        first = {iid: a.pixel_embedding[ids == iid][0] for iid in np.unique(ids)}
        assert len(first) > 1
        for (i, ei), (j, ej) in combinations(first.items(), 2):
            assert np.linalg.norm(ei - ej) == approx(
                np.linalg.norm(scene.anchors[i] - scene.anchors[j])
            )
        assert np.linalg.norm(a.pixel_embedding, axis=-1) == approx(np.full((60, 80), ANCHOR_RADIUS))
        # same pixels, different frame: a different rotation
        assert not np.allclose(a.pixel_embedding, b.pixel_embedding)

    def test_deterministic(self):
        scene = make_box_room(seed=2)
        a, ids_a = render_keyframe(scene, scene.trajectory[3], frame_id=3)
        b, ids_b = render_keyframe(scene, scene.trajectory[3], frame_id=3)
        assert np.array_equal(a.depth, b.depth)
        assert np.array_equal(a.pixel_embedding, b.pixel_embedding)
        assert np.array_equal(ids_a, ids_b)

    def test_depth_noise(self):
        scene = make_box_room(noise=NoiseModel(depth_sigma=0.01))
        clean, _ = render_keyframe(scene, scene.trajectory[0], noise=QUIET)
        noisy, _ = render_keyframe(scene, scene.trajectory[0])
        residual = noisy.depth - clean.depth
        assert abs(residual.std() - 0.01) < 0.002

    def test_sequence(self):
        scene = make_box_room(n_frames=3)
        frames = render_sequence(scene)
        assert [f.frame_id for f in frames] == [0, 1, 2]
        assert frames[2].timestamp == approx(2 / 30)


class TestGroundTruthMesh:
    def test_box_room(self):
        mesh = ground_truth_mesh(make_box_room(), resolution=0.1)
        assert set(mesh.vertex_labels.tolist()) == set(range(6))
        assert mesh.face_areas().sum() == approx(2 * (3.0 * 2.5 + 3.0 * 2.2 + 2.5 * 2.2))

    def test_overlay_cut_out_of_host(self):
        scene = make_box_room(overlays=1)
        mesh = ground_truth_mesh(scene, resolution=0.05)
        host = scene.overlays[0].host_id
        areas = mesh.face_areas()
        face_labels = mesh.vertex_labels[mesh.faces[:, 0]]
        assert areas[face_labels == 6].sum() == approx(0.8 * 0.6)
        full = make_box_room()
        full_mesh = ground_truth_mesh(full, resolution=0.05)
        full_host = full_mesh.face_areas()[full_mesh.vertex_labels[full_mesh.faces[:, 0]] == host].sum()
        # cells are removed when their centre lies under the picture
        assert abs(full_host - areas[face_labels == host].sum() - 0.48) < 2.8 * 0.05

    def test_clutter_has_no_ground_truth(self):
        mesh = ground_truth_mesh(make_box_room(clutter=2), resolution=0.2)
        assert UNASSIGNED not in mesh.vertex_labels.tolist()

    def test_refinement(self):
        scene = make_box_room()
        coarse = ground_truth_mesh(scene, resolution=0.1)
        fine = ground_truth_mesh(scene, resolution=0.05)
        assert len(fine.faces) > len(coarse.faces)
        scores = chamfer_f1(
            sample_mesh_surface(coarse, 20_000, rng_seed=0),
            sample_mesh_surface(fine, 20_000, rng_seed=1),
        )
        assert scores.chamfer < 0.1


def test_synthesize_archive(tmp_path):
    scene = synthesize_archive(Preset.BOX6, 4, tmp_path / "scene", n_frames=2)
    keyframes = load_scene_archive(tmp_path / "scene")
    assert [k.frame_id for k in keyframes] == [0, 1]
    assert keyframes[0].depth.shape == (60, 80)
    assert keyframes[0].pixel_embedding.shape == (60, 80, 3)
    gt = TriMesh.read(tmp_path / "scene" / "gt_mesh.ply")
    assert set(gt.vertex_labels.tolist()) == set(scene.instance_ids)
