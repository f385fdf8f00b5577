"""File formats: points CSV, labels CSV, forest model text, PGM images.

All writers are byte-stable: identical inputs produce identical files.
Floats are written with repr's shortest round-trip representation.
"""

from __future__ import annotations

import numpy as np

from .forest import Forest, Internal, Leaf


class DataFormatError(ValueError):
    """Malformed input file."""


def _float_token(x: float) -> str:
    return repr(float(x))


def write_points_csv(path, points, labels=None):
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    with open(path, "w") as fh:
        fh.write(f"dims={points.shape[1]}\n")
        if labels is None:
            for row in points:
                fh.write(",".join(_float_token(v) for v in row) + "\n")
        else:
            labels = np.asarray(labels)
            for row, lab in zip(points, labels):
                fh.write(",".join(_float_token(v) for v in row) + f",{int(lab)}\n")


def read_points_csv(path):
    """Returns (points, labels or None); labels come from a trailing column."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    head = lines[0].strip()
    if not head.startswith("dims="):
        raise DataFormatError(f"{path}: line 1: expected 'dims=<d>' header")
    try:
        dims = int(head[5:])
    except ValueError:
        raise DataFormatError(f"{path}: line 1: bad dims value") from None
    if dims < 1:
        raise DataFormatError(f"{path}: line 1: dims must be >= 1")
    rows = []
    labels = []
    have_labels = None
    for no, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) == dims:
            got_label = False
        elif len(parts) == dims + 1:
            got_label = True
        else:
            raise DataFormatError(f"{path}: line {no}: expected {dims} or {dims + 1} fields")
        if have_labels is None:
            have_labels = got_label
        elif have_labels != got_label:
            raise DataFormatError(f"{path}: line {no}: inconsistent label column")
        try:
            vals = [float(p) for p in parts[:dims]]
        except ValueError:
            raise DataFormatError(f"{path}: line {no}: unparseable coordinate") from None
        rows.append(vals)
        if got_label:
            if parts[dims] not in ("0", "1"):
                raise DataFormatError(f"{path}: line {no}: label must be 0 or 1")
            labels.append(parts[dims] == "1")
    pts = np.asarray(rows, dtype=np.float64).reshape(-1, dims)
    return pts, (np.asarray(labels, dtype=bool) if have_labels else None)


def write_labels_csv(path, labels):
    with open(path, "w") as fh:
        fh.write("label\n")
        for lab in np.asarray(labels):
            fh.write(f"{int(lab)}\n")


def read_labels_csv(path):
    """Reads a bare label file, or the label column of a points CSV."""
    with open(path) as fh:
        first = fh.readline().strip()
    if first.startswith("dims="):
        _, labels = read_points_csv(path)
        if labels is None:
            raise DataFormatError(f"{path}: points file has no label column")
        return labels
    if first != "label":
        raise DataFormatError(f"{path}: line 1: expected 'label' or 'dims=<d>' header")
    with open(path) as fh:
        lines = fh.read().splitlines()[1:]
    out = []
    for no, line in enumerate(lines, start=2):
        line = line.strip()
        if not line:
            continue
        if line not in ("0", "1"):
            raise DataFormatError(f"{path}: line {no}: label must be 0 or 1")
        out.append(line == "1")
    return np.asarray(out, dtype=bool)


def save_forest(path, forest: Forest):
    """Text model: header, then each tree as a preorder node list."""
    with open(path, "w") as fh:
        fh.write(f"trees {forest.tree_count}\n")
        fh.write(f"sample {forest.sample_size}\n")
        fh.write(f"seed {forest.seed}\n")
        fh.write(f"dims {forest.dims}\n")
        fh.write(f"integer_keys {int(forest.integer_keys)}\n")
        if forest._mean_training_depth is not None:
            fh.write(f"mean_depth {_float_token(forest._mean_training_depth)}\n")
        for tree in forest.trees:
            fh.write("tree\n")
            stack = [tree]
            while stack:
                node = stack.pop()
                if isinstance(node, Leaf):
                    fh.write(f"L {node.depth}\n")
                else:
                    fh.write(f"I {node.split_dim} {_float_token(node.split_value)}\n")
                    stack.append(node.right)
                    stack.append(node.left)


def load_forest(path) -> Forest:
    with open(path) as fh:
        lines = fh.read().splitlines()
    header = {}
    i = 0
    while i < len(lines) and lines[i].strip() != "tree":
        parts = lines[i].split()
        if len(parts) != 2:
            raise DataFormatError(f"{path}: line {i + 1}: malformed header")
        header[parts[0]] = parts[1]
        i += 1
    for key in ("trees", "sample", "seed", "dims"):
        if key not in header:
            raise DataFormatError(f"{path}: missing {key} header")

    trees = []
    nodes = []  # flat token list for the current tree
    line_nos = []

    def flush():
        if not nodes:
            return
        # preorder reconstruction with an explicit slot stack
        root = None
        pending = []  # internal nodes whose children are not yet assigned
        for pos, kind in enumerate(nodes):
            node = Leaf(kind[1]) if kind[0] == "L" else Internal(kind[1], kind[2], None, None)
            if root is None:
                root = node
            elif not pending:
                raise DataFormatError(
                    f"{path}: line {line_nos[pos]}: extra nodes after tree"
                )
            else:
                parent = pending[-1]
                if parent.left is None:
                    parent.left = node
                else:
                    parent.right = node
                    pending.pop()
            if isinstance(node, Internal):
                pending.append(node)
        if pending:
            raise DataFormatError(f"{path}: truncated tree")
        trees.append(root)
        nodes.clear()
        line_nos.clear()

    for no in range(i, len(lines)):
        line = lines[no].strip()
        if not line:
            continue
        if line == "tree":
            flush()
            continue
        parts = line.split()
        try:
            if parts[0] == "L" and len(parts) == 2:
                nodes.append(("L", int(parts[1])))
            elif parts[0] == "I" and len(parts) == 3:
                nodes.append(("I", int(parts[1]), float(parts[2])))
            else:
                raise ValueError
        except ValueError:
            raise DataFormatError(f"{path}: line {no + 1}: malformed node") from None
        line_nos.append(no + 1)
    flush()

    if len(trees) != int(header["trees"]):
        raise DataFormatError(
            f"{path}: header says {header['trees']} trees, found {len(trees)}"
        )
    forest = Forest(
        trees=trees,
        tree_count=int(header["trees"]),
        sample_size=int(header["sample"]),
        dims=int(header["dims"]),
        seed=int(header["seed"]),
        integer_keys=bool(int(header.get("integer_keys", "0"))),
    )
    if "mean_depth" in header:
        forest._mean_training_depth = float(header["mean_depth"])
    return forest


def write_pgm(path, values):
    """8-bit binary PGM from a matrix of [0, 1] values (row 0 at top)."""
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim != 2:
        raise ValueError("PGM output needs a 2-D matrix")
    gray = np.clip(np.rint(vals * 255.0), 0, 255).astype(np.uint8)
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())


def write_matrix_csv(path, values):
    vals = np.asarray(values, dtype=np.float64)
    with open(path, "w") as fh:
        for row in np.atleast_2d(vals):
            fh.write(",".join(_float_token(v) for v in row) + "\n")
