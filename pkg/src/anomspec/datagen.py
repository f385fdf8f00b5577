"""Seedable generators for the synthetic experiment datasets.

Each generator draws per-point Bernoulli anomaly labels (so counts are
binomial around rate * n) and fills coordinates from the experiment's
normal or anomalous region. Regeneration with the same id, size, rate and
seed is bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .io import DataFormatError

_MASK64 = (1 << 64) - 1


@dataclass
class LabeledDataset:
    points: np.ndarray
    labels: np.ndarray
    generator_id: str
    seed: int

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim == 1:
            self.points = self.points.reshape(-1, 1)
        self.labels = np.asarray(self.labels, dtype=bool).reshape(-1)
        if len(self.points) != len(self.labels):
            raise ValueError("points/labels length mismatch")

    @property
    def dims(self):
        return self.points.shape[1]


def _signs(rng, n):
    return np.where(rng.random(n) < 0.5, -1.0, 1.0)


def _exp1(rng, n, labels):
    # normal: (-1.0,-0.5) or (0.5,1.0); anomalous: inside +-1.5 but outside those
    vals = _signs(rng, n) * rng.uniform(0.5, 1.0, n)
    k = int(labels.sum())
    t = rng.uniform(0.0, 2.0, k)
    anom = np.where(t < 0.5, -1.5 + t, np.where(t < 1.5, -1.0 + t, -0.5 + t))
    vals[labels] = anom
    return vals.reshape(-1, 1)


def _exp2(rng, n, labels):
    vals = _signs(rng, n) * rng.uniform(0.5, 1.0, n)
    k = int(labels.sum())
    vals[labels] = _signs(rng, k) * rng.uniform(2.0, 100.0, k)
    return vals.reshape(-1, 1)


def _reject_outside_box(rng, k, outer, inner):
    """Uniform draws in the +-outer box, rejecting the +-inner box."""
    out = np.empty((k, 2))
    need = np.arange(k)
    while len(need):
        cand = rng.uniform(-outer, outer, (len(need), 2))
        ok = np.max(np.abs(cand), axis=1) > inner
        out[need[ok]] = cand[ok]
        need = need[~ok]
    return out


def _exp3(rng, n, labels):
    pts = rng.uniform(-1.0, 1.0, (n, 2))
    k = int(labels.sum())
    pts[labels] = _reject_outside_box(rng, k, 2.0, 1.0)
    return pts


def _exp4(rng, n, labels):
    return rotate(_exp3(rng, n, labels), np.pi / 4)


def _same_sign(rng, n, labels, low):
    u = rng.uniform(low, 2.0, (n, 2))
    pts = u * _signs(rng, n)[:, None]
    k = int(labels.sum())
    flip = rng.integers(0, 2, k)
    rows = np.flatnonzero(labels)
    pts[rows, flip] = -pts[rows, flip]
    return pts


def _exp6(rng, n, labels):
    return _same_sign(rng, n, labels, 0.0)


def _exp7(rng, n, labels):
    return _same_sign(rng, n, labels, 0.5)


def _exp8(rng, n, labels):
    return 1.0 / _exp7(rng, n, labels)


def _exp9(rng, n, labels):
    # normal: annulus 1 <= r <= 2 (area-uniform); anomalous: elsewhere in the
    # +-2 box, so roughly half the anomalies land inside the unit circle
    r = np.sqrt(rng.uniform(1.0, 4.0, n))
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
    k = int(labels.sum())
    out = np.empty((k, 2))
    need = np.arange(k)
    while len(need):
        cand = rng.uniform(-2.0, 2.0, (len(need), 2))
        rad = np.hypot(cand[:, 0], cand[:, 1])
        ok = (rad < 1.0) | (rad > 2.0)
        out[need[ok]] = cand[ok]
        need = need[~ok]
    pts[labels] = out
    return pts


_GENERATORS = {
    1: _exp1,
    2: _exp2,
    3: _exp3,
    4: _exp4,
    5: _exp4,  # experiment 5 reruns the rotated-box data with fresh seeds
    6: _exp6,
    7: _exp7,
    8: _exp8,
    9: _exp9,
}


def gen_experiment(exp_id: int, n: int, anomaly_rate: float, seed: int) -> LabeledDataset:
    """Generate one experiment's dataset with ground-truth labels."""
    if exp_id not in _GENERATORS:
        raise ValueError(f"unknown experiment id {exp_id}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= anomaly_rate < 1.0:
        raise ValueError("anomaly_rate must be in [0, 1)")
    rng = np.random.default_rng(seed & _MASK64)
    labels = rng.random(n) < anomaly_rate
    pts = _GENERATORS[exp_id](rng, n, labels)
    return LabeledDataset(pts, labels, f"exp{exp_id}", seed)


def anomaly_region_predicate(exp_id: int):
    """Membership test for the generator's anomalous region (ground truth)."""
    if exp_id == 1:
        return lambda p: ~((np.abs(p[:, 0]) > 0.5) & (np.abs(p[:, 0]) < 1.0))
    if exp_id == 2:
        return lambda p: np.abs(p[:, 0]) >= 2.0
    if exp_id == 3:
        return lambda p: np.max(np.abs(p), axis=1) > 1.0
    if exp_id in (4, 5):
        back = lambda p: rotate(p, -np.pi / 4)
        return lambda p: np.max(np.abs(back(p)), axis=1) > 1.0
    if exp_id in (6, 7, 8):
        return lambda p: np.sign(p[:, 0]) != np.sign(p[:, 1])
    if exp_id == 9:
        return lambda p: (np.hypot(p[:, 0], p[:, 1]) < 1.0) | (np.hypot(p[:, 0], p[:, 1]) > 2.0)
    raise ValueError(f"unknown experiment id {exp_id}")


def rotate(data, angles) -> np.ndarray:
    """Rotate points by the given angle in each successive coordinate plane.

    angles[i] rotates the (i, i+1) plane; a scalar rotates the (0, 1) plane.
    The transform is orthonormal, hence distance- and norm-preserving.
    """
    pts = np.array(data, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    if len(angles) > pts.shape[1] - 1:
        raise ValueError("more rotation planes than available dimensions")
    for i, a in enumerate(angles):
        c, s = np.cos(a), np.sin(a)
        x = pts[:, i].copy()
        y = pts[:, i + 1].copy()
        pts[:, i] = c * x - s * y
        pts[:, i + 1] = s * x + c * y
    return pts


# ---------------------------------------------------------------------------
# PPM ingestion
# ---------------------------------------------------------------------------


def ingest_ppm(path) -> LabeledDataset:
    """Read an 8-bit P3/P6 PPM as one {R,G,B} point per pixel, row-major."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] not in (b"P3", b"P6"):
        raise DataFormatError(f"{path}: not a P3/P6 PPM")
    binary = blob[:2] == b"P6"

    # header: magic, width, height, maxval; '#' comments run to end of line
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(blob):
            raise DataFormatError(f"{path}: truncated header")
        c = blob[pos : pos + 1]
        if c == b"#":
            nl = blob.find(b"\n", pos)
            pos = len(blob) if nl < 0 else nl + 1
            continue
        if c.isspace():
            pos += 1
            continue
        end = pos
        while end < len(blob) and not blob[end : end + 1].isspace() and blob[end : end + 1] != b"#":
            end += 1
        fields.append(blob[pos:end])
        pos = end
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise DataFormatError(f"{path}: non-numeric header field") from None
    if width < 1 or height < 1:
        raise DataFormatError(f"{path}: bad image dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise DataFormatError(f"{path}: only 8-bit PPM supported (maxval {maxval})")

    count = width * height * 3
    if binary:
        if not blob[pos : pos + 1].isspace():
            raise DataFormatError(f"{path}: expected whitespace after maxval")
        pos += 1  # exactly one whitespace byte after maxval
        payload = blob[pos : pos + count]
        if len(payload) < count:
            raise DataFormatError(f"{path}: truncated pixel payload")
        vals = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    else:
        toks = blob[pos:].split()
        if len(toks) < count:
            raise DataFormatError(f"{path}: truncated pixel payload")
        try:
            vals = np.array([int(t) for t in toks[:count]], dtype=np.float64)
        except ValueError:
            raise DataFormatError(f"{path}: non-numeric pixel value") from None
    if vals.size and (vals.min() < 0 or vals.max() > maxval):
        raise DataFormatError(f"{path}: pixel value out of range")
    pts = vals.reshape(-1, 3)
    return LabeledDataset(pts, np.zeros(len(pts), dtype=bool), "ppm", 0)
