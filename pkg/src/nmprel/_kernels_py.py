"""Pure numpy/Python implementations of the hot kernels.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and semantics; ``nmprel.kernels`` picks one at import time.
"""
import numpy as np


def _delta(sx, sy, sw, sh, dx, dy, dw, dh):
    return np.stack(
        [
            ((dx + dw / 2.0) - (sx + sw / 2.0)) / sw,
            ((dy + dh / 2.0) - (sy + sh / 2.0)) / sh,
            np.log(dw / sw),
            np.log(dh / sh),
        ],
        axis=1,
    )


def pair_features(boxes, src, dst, image_w, image_h):
    """Spatial descriptors for the ordered pairs ``(src[e], dst[e])``.

    ``boxes`` is ``(n, 4)`` xywh; returns ``(len(src), 14)``.
    """
    boxes = np.ascontiguousarray(boxes, dtype=np.float64)
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    a = boxes[src]
    b = boxes[dst]
    ax, ay, aw, ah = a[:, 0], a[:, 1], a[:, 2], a[:, 3]
    bx, by, bw, bh = b[:, 0], b[:, 1], b[:, 2], b[:, 3]

    ux = np.minimum(ax, bx)
    uy = np.minimum(ay, by)
    uw = np.maximum(ax + aw, bx + bw) - ux
    uh = np.maximum(ay + ah, by + bh) - uy

    iw = np.minimum(ax + aw, bx + bw) - np.maximum(ax, bx)
    ih = np.minimum(ay + ah, by + bh) - np.maximum(ay, by)
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    iou = np.minimum(inter / (aw * ah + bw * bh - inter), 1.0)

    diag = np.hypot(image_w, image_h)
    dis = np.hypot((bx + bw / 2.0) - (ax + aw / 2.0), (by + bh / 2.0) - (ay + ah / 2.0)) / diag

    out = np.empty((len(src), 14), dtype=np.float64)
    out[:, 0:4] = _delta(ax, ay, aw, ah, bx, by, bw, bh)
    out[:, 4:8] = _delta(ax, ay, aw, ah, ux, uy, uw, uh)
    out[:, 8:12] = _delta(bx, by, bw, bh, ux, uy, uw, uh)
    out[:, 12] = iou
    out[:, 13] = dis
    return out


def threshold_edges(boxes, image_w, image_h, t1, t2):
    """Ordered pairs ``(i, j)``, ``i != j``, with distance < t1 or iou > t2.

    Returned as an ``(E, 2)`` int64 array sorted by ``(i, j)``.
    """
    boxes = np.ascontiguousarray(boxes, dtype=np.float64)
    n = len(boxes)
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    feats = pair_features(boxes, ii, jj, image_w, image_h)
    keep = (feats[:, 13] < t1) | (feats[:, 12] > t2)
    return np.stack([ii[keep], jj[keep]], axis=1).astype(np.int64)


def segment_sum(values, index, n):
    """Row-wise scatter-add: ``out[index[e]] += values[e]``."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    out = np.zeros((n, values.shape[1]), dtype=np.float64)
    np.add.at(out, np.asarray(index, dtype=np.int64), values)
    return out


def max_matching(compat):
    """Size of a maximum bipartite matching on a boolean ``(C, G)`` matrix.

    Rows are visited in order; each row first takes the lowest free column it
    is compatible with and otherwise tries an augmenting path.
    """
    compat = np.asarray(compat, dtype=bool)
    n_rows, n_cols = compat.shape
    owner = [-1] * n_cols
    adj = [np.flatnonzero(compat[r]).tolist() for r in range(n_rows)]

    def augment(r, seen):
        for c in adj[r]:
            if seen[c]:
                continue
            seen[c] = True
            if owner[c] < 0 or augment(owner[c], seen):
                owner[c] = r
                return True
        return False

    hits = 0
    for r in range(n_rows):
        if adj[r] and augment(r, [False] * n_cols):
            hits += 1
    return hits
