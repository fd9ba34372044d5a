"""Brute-force reference implementations, kept independent of occbench's code paths."""

from fractions import Fraction

import numpy as np


def pixel_box_iou(a, b, size):
    """IoU of integer boxes by painting them on a grid."""
    ga = np.zeros((size, size), bool)
    gb = np.zeros((size, size), bool)
    ga[a[1]:a[3], a[0]:a[2]] = True
    gb[b[1]:b[3], b[0]:b[2]] = True
    union = np.count_nonzero(ga | gb)
    return Fraction(int(np.count_nonzero(ga & gb)), int(union)) if union else Fraction(0)


def exact_box_iou(a, b):
    a = [Fraction(x) for x in a]
    b = [Fraction(x) for x in b]
    iw = max(Fraction(0), min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(Fraction(0), min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def exact_st_iou(pred, gt):
    """pred/gt: dict frame -> box tuple. Walks every frame index in range."""
    last = max(max(pred), max(gt))
    both, either, spatial = 0, 0, Fraction(0)
    for t in range(last + 1):
        in_p, in_g = t in pred, t in gt
        if in_p or in_g:
            either += 1
        if in_p and in_g:
            both += 1
            spatial += exact_box_iou(pred[t], gt[t])
    if both == 0:
        return Fraction(0)
    return Fraction(both, either) * (spatial / both)


def greedy_labels(dets, gts, sim, tau):
    """dets: list of (score, scope, obj); gts: dict scope -> list of (gid, obj).

    Returns (score, is_tp) in processing order.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i][0], i))
    used = set()
    out = []
    for i in order:
        score, scope, obj = dets[i]
        cands = [(sim(obj, g), gid) for gid, g in gts.get(scope, []) if (scope, gid) not in used]
        hit = False
        if cands:
            best_val = max(c[0] for c in cands)
            best_gid = min(gid for v, gid in cands if v == best_val)
            if best_val >= tau:
                used.add((scope, best_gid))
                hit = True
        out.append((score, hit))
    return out


def exact_ap(labels, n_gt):
    """Enumerate every PR point and integrate the precision envelope over distinct recalls."""
    points = []
    tp = fp = 0
    for _, hit in labels:
        tp += hit
        fp += not hit
        points.append((Fraction(tp, n_gt), Fraction(tp, tp + fp)))
    recalls = sorted({r for r, _ in points if r > 0})
    ap = Fraction(0)
    prev = Fraction(0)
    for r in recalls:
        env = max(p for rr, p in points if rr >= r)
        ap += (r - prev) * env
        prev = r
    return ap


def exact_map(per_class_labels, n_gt):
    aps = [exact_ap(per_class_labels.get(c, []), n) for c, n in n_gt.items() if n > 0]
    return Fraction(100) * sum(aps) / len(aps)


def _tube_dict(tube):
    return {t: b.as_list() for t, b in tube.boxes()}


def oracle_video_map(preds, gts, tau):
    """preds/gts: dict video -> list of ActionTube; exact v-mAP as a Fraction."""
    tau = Fraction(str(tau))
    classes = {t.class_label for tubes in gts.values() for t in tubes}
    labels, n_gt = {}, {}
    for c in classes:
        g = {(vid,): [(t.tube_id, _tube_dict(t)) for t in tubes if t.class_label == c] for vid, tubes in gts.items()}
        n_gt[c] = sum(len(v) for v in g.values())
        d = [(t.score, (vid,), _tube_dict(t)) for vid, tubes in preds.items() for t in tubes if t.class_label == c]
        labels[c] = greedy_labels(d, g, exact_st_iou, tau)
    return exact_map(labels, n_gt)


def oracle_frame_map(preds, gts, tau):
    """f-mAP of tube predictions flattened to frames, exact."""
    tau = Fraction(str(tau))
    classes = {t.class_label for tubes in gts.values() for t in tubes}
    labels, n_gt = {}, {}
    for c in classes:
        g = {}
        for vid, tubes in gts.items():
            for tube in tubes:
                if tube.class_label == c:
                    for t, b in tube.boxes():
                        g.setdefault((vid, t), []).append((tube.tube_id, b.as_list()))
        n_gt[c] = sum(len(v) for v in g.values())
        d = [(tube.score, (vid, t), b.as_list()) for vid, tubes in preds.items() for tube in tubes
             if tube.class_label == c for t, b in tube.boxes()]
        labels[c] = greedy_labels(d, g, exact_box_iou, tau)
    return exact_map(labels, n_gt)


def random_instance(rng, classes=("a", "b", "c")):
    """A small random evaluation instance: (predictions, ground truth), both video -> tubes.

    Integer boxes on a 12x12 grid and a coarse score grid make IoU and score ties common.
    """
    from occbench.model import ActionTube, BoundingBox

    def tube(tid, cls, score):
        n = int(rng.integers(1, 11))
        start = int(rng.integers(0, 11 - n))
        frames = {}
        for t in range(start, start + n):
            x0, y0 = (int(v) for v in rng.integers(0, 10, 2))
            x1, y1 = x0 + int(rng.integers(1, 12 - x0)), y0 + int(rng.integers(1, 12 - y0))
            frames[t] = BoundingBox(x0, y0, x1, y1)
        return ActionTube(tid, cls, frames, score)

    n_cls = int(rng.integers(1, len(classes) + 1))
    cls = classes[:n_cls]
    gts, preds = {}, {}
    for v in range(int(rng.integers(1, 4))):
        vid = f"v{v}"
        gts[vid] = [tube(f"g{k}", str(rng.choice(cls)), None) for k in range(int(rng.integers(0, 6)))]
        p = []
        for k in range(int(rng.integers(0, 6))):
            if gts[vid] and rng.random() < 0.5:
                # a jittered copy of a ground-truth tube, so true positives occur
                src = gts[vid][int(rng.integers(len(gts[vid])))]
                frames = {t: b for t, b in src.boxes() if rng.random() < 0.8} or dict(src.boxes())
                p.append(ActionTube(f"p{k}", src.class_label, frames, float(rng.integers(0, 5)) / 4))
            else:
                p.append(tube(f"p{k}", str(rng.choice(cls)), float(rng.integers(0, 5)) / 4))
        preds[vid] = p
    if not any(gts.values()):
        gts["v0"].append(tube("g0", cls[0], None))
    return preds, gts
