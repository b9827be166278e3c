"""Dataset preprocessing: variance prefiltering and SMOTE oversampling."""

import numpy as np

from .dataio import Dataset
from .errors import DimensionError, TooFewMinoritySamples


def variance_filter(dataset, k):
    """Keep the k columns with the largest sample variance (original order,
    ties broken by the smaller column index)."""
    if not 0 < k <= dataset.p:
        raise DimensionError(f"k must lie in [1, {dataset.p}]")
    variances = dataset.X.var(axis=0, ddof=1)
    # stable sort on (-variance, index) keeps ties deterministic
    ranked = sorted(range(dataset.p), key=lambda j: (-variances[j], j))
    keep = np.sort(np.array(ranked[:k], dtype=int))
    names = None
    if dataset.column_names is not None:
        names = tuple(dataset.column_names[j] for j in keep)
    return Dataset(X=dataset.X[:, keep], y=dataset.y, column_names=names)


def smote_oversample(dataset, target_minority_count, k_neighbors=5, rng=None):
    """Append synthetic minority rows by convex interpolation.

    Each synthetic row is x + lam (x_nn - x) with lam ~ Unif(0, 1) and x_nn
    one of the k nearest minority neighbors in standardized Euclidean
    distance.  The minority class is the rarer label of the binary response.
    """
    if dataset.y is None:
        raise DimensionError("SMOTE needs a binary response")
    y = dataset.y
    labels = np.unique(y)
    if labels.size != 2:
        raise DimensionError("SMOTE needs exactly two classes")
    counts = [(np.sum(y == lab), lab) for lab in labels]
    counts.sort(key=lambda t: (t[0], t[1]))
    minority_count, minority_label = counts[0]
    minority_count = int(minority_count)
    if target_minority_count <= minority_count:
        return dataset
    if minority_count < k_neighbors + 1:
        raise TooFewMinoritySamples(
            f"minority class has {minority_count} rows, need at least "
            f"{k_neighbors + 1}")
    rng = np.random.default_rng(rng)
    minority = dataset.X[y == minority_label]
    scale = dataset.X.std(axis=0, ddof=0)
    scale = np.where(scale > 0, scale, 1.0)
    Z = minority / scale
    d2 = np.sum((Z[:, None, :] - Z[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    neighbor_idx = np.argsort(d2, axis=1)[:, :k_neighbors]

    n_new = int(target_minority_count) - minority_count
    base = rng.integers(0, minority_count, size=n_new)
    pick = rng.integers(0, k_neighbors, size=n_new)
    lam = rng.uniform(size=n_new)
    x_base = minority[base]
    x_nn = minority[neighbor_idx[base, pick]]
    synthetic = x_base + lam[:, None] * (x_nn - x_base)

    X_new = np.vstack([dataset.X, synthetic])
    y_new = np.concatenate([y, np.full(n_new, minority_label, dtype=float)])
    return Dataset(X=X_new, y=y_new, column_names=dataset.column_names)
