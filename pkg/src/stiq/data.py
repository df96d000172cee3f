"""Dataset loading, synthesis and splitting.

CSV contract: a header line ``f0,...,f{d-1},label`` followed by one row per
sample. Lines starting with ``#`` and blank lines are skipped. Labels are
remapped to a contiguous 0..k-1 range in sorted order of the original
values, before or after an optional class-subset filter, so e.g. keeping
classes {6, 7, 8, 9} yields labels {0, 1, 2, 3}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass
class Dataset:
    name: str
    features: np.ndarray  # (n_samples, dim) float64
    labels: np.ndarray  # (n_samples,) int64 in [0, n_classes)
    n_classes: int
    label_names: tuple | None = field(default=None)  # original labels per class
    split: tuple[np.ndarray, np.ndarray] | None = None  # (train_idx, test_idx)

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-D array")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("label count does not match sample count")
        if not np.isfinite(self.features).all():
            raise DataError("features contain non-finite values")
        if self.n_classes < 2:
            raise DataError("need at least 2 classes")
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= self.n_classes
        ):
            raise DataError("labels out of range")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def with_split(self, train_fraction: float = 0.7, seed: int = 0) -> "Dataset":
        """Copy of this dataset carrying a stratified train/test split."""
        split = stratified_split(self, train_fraction, seed)
        return Dataset(
            name=self.name,
            features=self.features,
            labels=self.labels,
            n_classes=self.n_classes,
            label_names=self.label_names,
            split=split,
        )


def _remap_labels(raw_labels: np.ndarray) -> tuple[np.ndarray, tuple]:
    values = np.unique(raw_labels)
    lookup = {v: i for i, v in enumerate(values.tolist())}
    mapped = np.array([lookup[v] for v in raw_labels.tolist()], dtype=np.int64)
    return mapped, tuple(values.tolist())


def load_csv(path, class_subset=None, name: str | None = None) -> Dataset:
    """Read a dataset from the CSV contract above.

    class_subset keeps only rows whose original label is in the given
    collection; remapping to 0..k-1 happens afterwards.
    """
    rows: list[list[float]] = []
    raw_labels: list[int] = []
    dim = None
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        header = None
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if header is None:
                header = [c.strip() for c in text.split(",")]
                if len(header) < 2 or header[-1] != "label":
                    raise DataError(f"{path}:{lineno}: header must end with 'label'")
                dim = len(header) - 1
                expected = [f"f{i}" for i in range(dim)] + ["label"]
                if header != expected:
                    raise DataError(
                        f"{path}:{lineno}: header must be f0,...,f{dim - 1},label"
                    )
                continue
            cells = text.split(",")
            if len(cells) != dim + 1:
                raise DataError(
                    f"{path}:{lineno}: expected {dim + 1} columns, got {len(cells)}"
                )
            try:
                feats = [float(c) for c in cells[:-1]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric feature: {exc}") from exc
            label_text = cells[-1].strip()
            try:
                label = int(label_text)
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: label must be an integer, got {label_text!r}"
                ) from None
            rows.append(feats)
            raw_labels.append(label)
    if header is None or not rows:
        raise DataError(f"{path}: no data rows")
    features = np.asarray(rows, dtype=np.float64)
    labels = np.asarray(raw_labels, dtype=np.int64)
    if class_subset is not None:
        keep = np.isin(labels, np.asarray(sorted(class_subset), dtype=np.int64))
        if not keep.any():
            raise DataError(f"{path}: class subset removed every row")
        features = features[keep]
        labels = labels[keep]
    mapped, originals = _remap_labels(labels)
    return Dataset(
        name=name or str(path),
        features=features,
        labels=mapped,
        n_classes=len(originals),
        label_names=originals,
    )


def save_csv(dataset: Dataset, path) -> None:
    """Write the CSV contract with full float round-trip precision."""
    with open(path, "w", encoding="utf-8") as fh:
        cols = [f"f{i}" for i in range(dataset.dim)] + ["label"]
        fh.write(",".join(cols) + "\n")
        for row, label in zip(dataset.features, dataset.labels):
            cells = [repr(float(v)) for v in row]
            cells.append(str(int(label)))
            fh.write(",".join(cells) + "\n")


def subset_classes(dataset: Dataset, keep) -> Dataset:
    """Rows whose current label is in keep, labels remapped to 0..k-1.
    label_names keeps pointing at the original identities."""
    wanted = np.asarray(sorted(set(int(k) for k in keep)), dtype=np.int64)
    mask = np.isin(dataset.labels, wanted)
    if not mask.any():
        raise DataError("class subset removed every row")
    mapped, kept = _remap_labels(dataset.labels[mask])
    names = tuple(dataset.label_names[int(k)] for k in kept)
    return Dataset(
        name=dataset.name,
        features=dataset.features[mask],
        labels=mapped,
        n_classes=len(kept),
        label_names=names,
    )


def stratified_split(
    dataset: Dataset, train_fraction: float = 0.7, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded per-class proportional split. Returns sorted (train, test)
    index arrays; every class lands on both sides."""
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must be strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train_parts: list[np.ndarray] = []
    test_parts: list[np.ndarray] = []
    for cls in range(dataset.n_classes):
        idx = np.flatnonzero(dataset.labels == cls)
        if idx.size < 2:
            raise DataError(f"class {cls} has {idx.size} samples; need at least 2")
        perm = rng.permutation(idx)
        n_train = int(round(train_fraction * idx.size))
        n_train = min(max(n_train, 1), idx.size - 1)
        train_parts.append(perm[:n_train])
        test_parts.append(perm[n_train:])
    return (
        np.sort(np.concatenate(train_parts)),
        np.sort(np.concatenate(test_parts)),
    )


def synth_blobs(
    n_classes: int = 4,
    dim: int = 8,
    n_samples: int = 1000,
    separation: float = 10.0,
    seed: int = 0,
    name: str = "synth_blobs",
) -> Dataset:
    """Balanced Gaussian clusters: one unit-variance blob per class around a
    center drawn from N(0, separation^2 I). Larger separation, easier task."""
    if n_classes < 2 or dim < 1 or n_samples < 2 * n_classes:
        raise DataError("need n_classes >= 2, dim >= 1, n_samples >= 2 per class")
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, separation, size=(n_classes, dim))
    counts = np.full(n_classes, n_samples // n_classes, dtype=np.int64)
    counts[: n_samples % n_classes] += 1
    features = np.empty((n_samples, dim), dtype=np.float64)
    labels = np.empty(n_samples, dtype=np.int64)
    row = 0
    for cls in range(n_classes):
        k = int(counts[cls])
        features[row : row + k] = centers[cls] + rng.normal(size=(k, dim))
        labels[row : row + k] = cls
        row += k
    order = rng.permutation(n_samples)
    return Dataset(
        name=name,
        features=features[order],
        labels=labels[order],
        n_classes=n_classes,
        label_names=tuple(range(n_classes)),
    )
