"""k-nearest-neighbour outlier pre-filter."""

import logging

import numpy as np
from sklearn.neighbors import NearestNeighbors

from ..utils.errors import InsufficientData, InvalidQuantile
from .models import Dataset

logger = logging.getLogger(__name__)


def knn_distances(ds: Dataset, k: int) -> np.ndarray:
    """Euclidean distance in (x, y) from each point to its k-th nearest other point."""
    if not 1 <= k < len(ds):
        raise InsufficientData(f"k must be in [1, {len(ds) - 1}], got {k}")
    points = np.column_stack([ds.x, ds.y])
    # The query point itself comes back as its own first neighbour
    distances, _ = NearestNeighbors(n_neighbors=k + 1).fit(points).kneighbors(points)
    return distances[:, k]


def knn_outlier_filter(
    ds: Dataset,
    k: int = 10,
    quantile: float = 0.995,
) -> tuple[Dataset, np.ndarray]:
    """
    Drop points whose k-th neighbour distance exceeds a quantile of all such distances.

    Args:
        ds: Dataset to filter
        k: Neighbour rank (k < N)
        quantile: Distance quantile in (0, 1]; 1.0 removes nothing

    Returns:
        (filtered dataset, sorted indices of the removed points)
    """
    if not 0 < quantile <= 1:
        raise InvalidQuantile(f"quantile must be in (0, 1], got {quantile}")
    distances = knn_distances(ds, k)
    threshold = float(np.quantile(distances, quantile))
    removed = np.flatnonzero(distances > threshold)
    kept = np.flatnonzero(distances <= threshold)
    logger.info(
        "kNN filter (k=%d, q=%.3f) removed %d of %d points", k, quantile, removed.size, len(ds)
    )
    return ds.subset(kept), removed
