from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass
from logging import getLogger
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree
from scipy.stats import entropy
from sklearn.metrics import rand_score
from sklearn.metrics.cluster import contingency_matrix

from .config import MetricConfig
from .errors import DegenerateGeometryError
from .geometry import PointCloud, project
from .mesh import UNASSIGNED, TriMesh, sample_mesh_surface
from .tsdf import Keyframe

logger = getLogger(__name__)

WORST = float("inf")
_CANDIDATES = 4


@dataclass(frozen=True)
class GeometryScores:
    """Point-cloud distances in meters, and precision/recall/F1 at a threshold."""

    accuracy: float
    completion: float
    chamfer: float
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class EvaluationReport:
    """
    All scores of one evaluated scene. Distances are in centimeters.

    Empty or missing predictions report infinite distances and zero scores.
    """

    chamfer: float
    f1: float
    accuracy: float
    completion: float
    voi: float
    ri: float
    sc: float
    planar_fidelity: float
    planar_accuracy: float
    planar_chamfer: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def nearest_neighbors(
    query: ArrayLike, reference: ArrayLike, prefer: ArrayLike | None = None
) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    """
    Exact Euclidean nearest reference point for every query point.

    A k-d tree proposes a few candidates whose distances are recomputed exactly.
    Among equally distant candidates the reference index given in `prefer` wins,
    then the lowest reference index.

    Args:
        query: (N, 3) query points.
        reference: (M, 3) reference points.
        prefer: Optional (N,) preferred reference index per query point.

    Returns:
        tuple: (N,) reference indices and (N,) distances.
    """
    q = np.asarray(query, dtype=np.float64).reshape(-1, 3)
    r = np.asarray(reference, dtype=np.float64).reshape(-1, 3)
    if not len(r):
        raise ValueError("nearest_neighbors needs a non-empty reference set")
    if not len(q):
        return np.zeros(0, dtype=np.int64), np.zeros(0)

    k = min(_CANDIDATES, len(r))
    _, cand = cKDTree(r).query(q, k=k)
    cand = np.asarray(cand, dtype=np.int64).reshape(len(q), k)
    dist = np.sqrt(((q[:, None, :] - r[cand]) ** 2).sum(axis=-1))
    if prefer is None:
        other = np.zeros_like(cand)
    else:
        other = (cand != np.asarray(prefer, dtype=np.int64)[:, None]).astype(np.int64)
    # Lowest distance first, then the preferred index, then lowest index
    order = np.lexsort((cand, other, dist), axis=1)
    best = order[:, 0]
    rows = np.arange(len(q))
    return cand[rows, best], dist[rows, best]


def _nn_distances(query: NDArray, reference: NDArray) -> NDArray[np.float64]:
    return cKDTree(reference).query(query)[0]


def chamfer_f1(
    pred: PointCloud, gt: PointCloud, cfg: MetricConfig | None = None
) -> GeometryScores:
    """
    Accuracy, completion, chamfer distance and F1 between two point clouds.

    Accuracy averages the distance from each predicted point to the ground truth,
    completion the distance from each ground-truth point to the prediction, and
    chamfer is their mean. Precision and recall count distances below
    `f1_threshold`.

    Args:
        pred: Predicted points.
        gt: Ground-truth points.
        cfg: Uses `f1_threshold`.

    Returns:
        GeometryScores: Distances in meters; infinite with F1 0 if either cloud is empty.
    """
    cfg = cfg or MetricConfig()
    if not len(pred) or not len(gt):
        return GeometryScores(WORST, WORST, WORST, 0.0, 0.0, 0.0)

    _, d_pred = nearest_neighbors(pred.points, gt.points)
    _, d_gt = nearest_neighbors(gt.points, pred.points)
    accuracy = float(d_pred.mean())
    completion = float(d_gt.mean())
    precision = float(np.mean(d_pred < cfg.f1_threshold))
    recall = float(np.mean(d_gt < cfg.f1_threshold))
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return GeometryScores(
        accuracy, completion, (accuracy + completion) / 2, precision, recall, f1
    )


def visibility_mask(
    points: PointCloud, keyframes: Sequence[Keyframe], margin: float = 0.05
) -> PointCloud:
    """
    Keep the points observed by at least one keyframe.

    A point is observed when it projects inside the image in front of the camera
    onto a pixel with valid depth, and lies no more than `margin` behind that
    depth.
    """
    seen = np.zeros(len(points), dtype=bool)
    for frame in keyframes:
        h, w = frame.shape
        uv, z = project(points.points, frame.pose)
        u = np.rint(np.nan_to_num(uv[:, 0], nan=-1.0))
        v = np.rint(np.nan_to_num(uv[:, 1], nan=-1.0))
        inside = (z > 0) & (u >= 0) & (u < w) & (v >= 0) & (v < h)
        idx = np.flatnonzero(inside & ~seen)
        depth = frame.depth[v[idx].astype(np.int64), u[idx].astype(np.int64)]
        seen[idx[(depth > 0) & (z[idx] <= depth + margin)]] = True
    logger.debug(f"Visibility mask keeps {int(seen.sum())} of {len(points)} points.")
    return points.select(seen)


def transfer_labels(pred_mesh: TriMesh, gt_mesh: TriMesh) -> NDArray[np.int64]:
    """
    Give every ground-truth vertex the label of its nearest predicted vertex.

    Coincident predicted vertices (unwelded seams between planes) are resolved
    toward the predicted vertex with the same index, so a mesh transfers its own
    labels unchanged.

    Returns:
        NDArray: (V_gt,) labels; all -1 when the prediction is empty.
    """
    if not len(pred_mesh.vertices):
        return np.full(len(gt_mesh.vertices), UNASSIGNED, dtype=np.int64)
    idx, _ = nearest_neighbors(
        gt_mesh.vertices, pred_mesh.vertices, prefer=np.arange(len(gt_mesh.vertices))
    )
    return pred_mesh.labels_or_unassigned()[idx]


def segmentation_metrics(
    pred_labels: ArrayLike, gt_labels: ArrayLike
) -> tuple[float, float, float]:
    """
    Variation of information, Rand index and segmentation covering.

    Positions labeled -1 on either side are ignored. Entropies use natural
    logarithms. Segmentation covering weights every ground-truth region by its size
    and credits it with its best intersection-over-union against a predicted region.

    Args:
        pred_labels: Predicted partition.
        gt_labels: Ground-truth partition of the same elements.

    Returns:
        tuple: (voi, ri, sc); (inf, 0, 0) when no element remains.

    Raises:
        ValueError: If the label arrays differ in length.
    """
    a = np.asarray(pred_labels, dtype=np.int64).reshape(-1)
    b = np.asarray(gt_labels, dtype=np.int64).reshape(-1)
    if len(a) != len(b):
        raise ValueError(f"Label arrays differ in length: {len(a)} != {len(b)}")
    keep = (a >= 0) & (b >= 0)
    a, b = a[keep], b[keep]
    n = len(a)
    if n == 0:
        return WORST, 0.0, 0.0

    joint = contingency_matrix(b, a)
    h_joint = entropy(joint[joint > 0])
    h_gt = entropy(joint.sum(axis=1))
    h_pred = entropy(joint.sum(axis=0))
    voi = max(0.0, float(2 * h_joint - h_gt - h_pred))

    ri = float(rand_score(b, a))

    gt_sizes = joint.sum(axis=1, keepdims=True)
    pred_sizes = joint.sum(axis=0, keepdims=True)
    iou = joint / (gt_sizes + pred_sizes - joint)
    sc = float((gt_sizes[:, 0] * iou.max(axis=1)).sum() / n)
    return voi, ri, sc


def planar_metrics(
    pred: PointCloud,
    gt: PointCloud,
    cfg: MetricConfig | None = None,
    gt_sizes: Mapping[int, int] | None = None,
) -> tuple[float, float, float]:
    """
    Planar fidelity, accuracy and chamfer over the largest ground-truth planes.

    For each of the `k_planes` largest ground-truth planes the predicted plane
    with the lowest completion against it is selected; one predicted plane may
    serve several ground-truth planes. Fidelity averages those completions,
    accuracy the matching accuracies, and chamfer is their mean.

    Args:
        pred: Labeled points sampled from the predicted planes.
        gt: Labeled points sampled from the ground-truth planes.
        cfg: Uses `k_planes`.
        gt_sizes: Size of each ground-truth plane used for ranking (vertex counts);
            defaults to the number of sampled points.

    Returns:
        tuple: (fidelity, accuracy, chamfer) in meters; infinite when there are no
            predicted planes.
    """
    cfg = cfg or MetricConfig()
    gt_planes = gt.by_label()
    pred_planes = pred.by_label()
    if not gt_planes:
        return 0.0, 0.0, 0.0
    if not pred_planes:
        return WORST, WORST, WORST

    sizes = dict(gt_sizes) if gt_sizes is not None else {}
    ranked = sorted(
        gt_planes,
        key=lambda pid: (-sizes.get(pid, len(gt_planes[pid])), pid),
    )[: cfg.k_planes]

    pred_trees = {pid: cKDTree(points) for pid, points in pred_planes.items()}
    completions = []
    accuracies = []
    for gid in ranked:
        gt_points = gt_planes[gid]
        completion = {
            pid: float(tree.query(gt_points)[0].mean()) for pid, tree in pred_trees.items()
        }
        best_pid = min(completion, key=lambda pid: (completion[pid], pid))
        completions.append(completion[best_pid])
        accuracies.append(float(_nn_distances(pred_planes[best_pid], gt_points).mean()))

    fidelity = float(np.mean(completions))
    accuracy = float(np.mean(accuracies))
    return fidelity, accuracy, (fidelity + accuracy) / 2


def _sample(mesh: TriMesh, n: int, exclude_ambiguous: bool, seed: int) -> PointCloud:
    try:
        return sample_mesh_surface(mesh, n, exclude_ambiguous, seed)
    except DegenerateGeometryError as e:
        logger.warning(f"Cannot sample mesh: {e}")
        return PointCloud(np.zeros((0, 3)), np.zeros(0, dtype=np.int64))


def evaluate(
    pred_mesh: TriMesh,
    gt_mesh: TriMesh,
    keyframes: Sequence[Keyframe] | None = None,
    cfg: MetricConfig | None = None,
) -> EvaluationReport:
    """
    Run the complete evaluation protocol on a predicted and a ground-truth mesh.

    Both meshes are sampled with the same seed. When keyframes are given, only
    visible points are scored. Segmentation compares the ground-truth labels with
    predicted labels transferred to the ground-truth vertices. Planar metrics
    sample both meshes without faces that join different planes.

    Args:
        pred_mesh: The predicted (usually planarized) mesh.
        gt_mesh: The ground-truth mesh with plane labels.
        keyframes: Optional keyframes for the visibility mask.
        cfg: Evaluation settings.

    Returns:
        EvaluationReport: The scores, distances in centimeters.

    Raises:
        ValueError: If the ground-truth mesh carries no labels.
    """
    cfg = cfg or MetricConfig()
    if gt_mesh.vertex_labels is None:
        raise ValueError("The ground-truth mesh has no plane labels")

    def visible(cloud: PointCloud) -> PointCloud:
        if keyframes:
            return visibility_mask(cloud, keyframes, cfg.visibility_margin)
        return cloud

    n = cfg.n_sample_points
    geometry = chamfer_f1(
        visible(_sample(pred_mesh, n, False, cfg.seed)),
        visible(_sample(gt_mesh, n, False, cfg.seed)),
        cfg,
    )

    voi, ri, sc = segmentation_metrics(
        transfer_labels(pred_mesh, gt_mesh), gt_mesh.vertex_labels
    )

    gt_labels = gt_mesh.vertex_labels
    gt_sizes = {
        int(pid): int(count)
        for pid, count in zip(*np.unique(gt_labels[gt_labels >= 0], return_counts=True))
    }
    fidelity, planar_acc, planar_chamfer = planar_metrics(
        visible(_sample(pred_mesh, n, True, cfg.seed)),
        visible(_sample(gt_mesh, n, True, cfg.seed)),
        cfg,
        gt_sizes,
    )

    report = EvaluationReport(
        chamfer=100 * geometry.chamfer,
        f1=geometry.f1,
        accuracy=100 * geometry.accuracy,
        completion=100 * geometry.completion,
        voi=voi,
        ri=ri,
        sc=sc,
        planar_fidelity=100 * fidelity,
        planar_accuracy=100 * planar_acc,
        planar_chamfer=100 * planar_chamfer,
    )
    logger.info(
        f"Evaluation: chamfer {report.chamfer:.2f} cm, f1 {report.f1:.3f}, "
        f"voi {report.voi:.3f}, ri {report.ri:.3f}, sc {report.sc:.3f}."
    )
    return report
