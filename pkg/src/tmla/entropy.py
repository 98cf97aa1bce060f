"""Local Shannon entropy maps, image-complexity scores and score statistics."""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import stats
from skimage.filters.rank import entropy as _rank_entropy
from skimage.morphology import disk

from .image_io import gray_levels

E_MAX = 8.0


@dataclass(frozen=True)
class EntropyMap:
    """Normalized local entropy plane (values in [0, 1]) and its mean."""

    plane: np.ndarray
    radius: int
    mean: float


def disk_offsets(radius):
    """Integer offsets (dy, dx) with dy**2 + dx**2 <= radius**2."""
    r = int(radius)
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    keep = dy**2 + dx**2 <= r * r
    return np.stack([dy[keep], dx[keep]], axis=1)


def histogram_entropy(counts):
    """Shannon entropy in bits of a histogram given by its counts."""
    counts = np.asarray(counts, dtype=np.float64)
    counts = counts[counts > 0]
    if counts.size == 0:
        raise ValueError("empty histogram")
    p = counts / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def _check(levels, radius):
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if levels.size == 0:
        raise ValueError("image must be at least 1x1")


def naive_entropy_bits(levels, radius):
    """Per-pixel entropy (bits) recomputing the clipped-disk histogram at every pixel.

    Slow reference used to check the incremental filter.
    """
    levels = np.asarray(levels)
    _check(levels, radius)
    h, w = levels.shape
    offsets = disk_offsets(radius)
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            yy = y + offsets[:, 0]
            xx = x + offsets[:, 1]
            inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
            out[y, x] = histogram_entropy(np.bincount(levels[yy[inside], xx[inside]], minlength=256))
    return out


def entropy_bits(levels, radius=10):
    """Per-pixel clipped-disk entropy (bits) via skimage's sliding-histogram rank filter."""
    levels = np.asarray(levels, dtype=np.uint8)
    _check(levels, radius)
    return _rank_entropy(levels, disk(radius)).astype(np.float64)


def local_entropy_map(img, radius=10, e_max=E_MAX):
    """Normalized local entropy of an image's 256-level grayscale version."""
    levels = gray_levels(img)
    plane = np.clip(entropy_bits(levels, radius) / e_max, 0.0, 1.0)
    return EntropyMap(plane=plane, radius=int(radius), mean=float(plane.mean()))


def mean_entropy(img, radius=10):
    return local_entropy_map(img, radius).mean


# -- subset selection ------------------------------------------------------------


def _quantile_cost(c, ref_sorted, lo, hi):
    """Integral over u in [lo, hi] of |c - Q(u)| where Q is the empirical quantile function."""
    m = len(ref_sorted)
    total = 0.0
    edges = np.arange(m + 1) / m
    for i in range(m):
        a, b = max(lo, edges[i]), min(hi, edges[i + 1])
        if b > a:
            total += (b - a) * abs(c - ref_sorted[i])
    return total


def wasserstein1(a, b):
    """1-D Wasserstein distance between two empirical distributions."""
    return float(stats.wasserstein_distance(a, b))


def entropy_matched_subset(candidates, reference, k):
    """Indices of ``k`` candidates whose score distribution is closest to ``reference``.

    Closeness is the 1-D Wasserstein distance. With candidates sorted, an
    optimal subset assigns its i-th smallest score to the i-th quantile slot
    [i/k, (i+1)/k) of the reference, so a dynamic program over (candidate,
    slot) pairs finds the exact minimum. Ties resolve toward lower indices.
    """
    cand = np.asarray(candidates, dtype=np.float64)
    ref = np.sort(np.asarray(reference, dtype=np.float64))
    if cand.size == 0 or ref.size == 0:
        raise ValueError("candidates and reference must be non-empty")
    if not 1 <= k <= cand.size:
        raise ValueError(f"k must lie in [1, {cand.size}]")
    order = np.argsort(cand, kind="stable")
    vals = cand[order]
    n = vals.size
    cost = np.array([[_quantile_cost(v, ref, j / k, (j + 1) / k) for j in range(k)] for v in vals])
    inf = np.inf
    # best[i][j]: min cost using the first i sorted candidates to fill j slots
    best = np.full((n + 1, k + 1), inf)
    take = np.zeros((n + 1, k + 1), dtype=bool)
    best[:, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, min(i, k) + 1):
            skip = best[i - 1, j]
            use = best[i - 1, j - 1] + cost[i - 1, j - 1]
            if use <= skip:
                best[i, j], take[i, j] = use, True
            else:
                best[i, j] = skip
    picked = []
    i, j = n, k
    while j > 0:
        if take[i, j]:
            picked.append(int(order[i - 1]))
            j -= 1
        i -= 1
    return sorted(picked)


def brute_force_subset(candidates, reference, k):
    """Exhaustive search over all k-subsets (oracle for small inputs)."""
    cand = np.asarray(candidates, dtype=np.float64)
    best, best_idx = np.inf, None
    for idx in combinations(range(cand.size), k):
        d = wasserstein1(cand[list(idx)], reference)
        if d < best - 1e-15:
            best, best_idx = d, list(idx)
    return best_idx, best


# -- correlation ---------------------------------------------------------------


@dataclass(frozen=True)
class Correlation:
    pearson: float
    spearman: float
    p_value: float
    n: int


def average_ranks(values):
    """Ranks 1..n with ties given their average rank."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def pearson(xs, ys):
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = np.dot(dx, dx), np.dot(dy, dy)
    if sxx == 0 or syy == 0:
        raise ValueError("correlation undefined: zero variance input")
    return float(np.clip(np.dot(dx, dy) / np.sqrt(sxx * syy), -1.0, 1.0))


def pearson_p_value(r, n):
    """Two-sided p-value of Pearson's r from the t distribution with n-2 dof."""
    if abs(r) >= 1.0:
        return 0.0
    t = r * np.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * stats.t.sf(abs(t), n - 2))


def correlation(xs, ys):
    """Pearson r, Spearman rho and the two-sided p-value of r."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be 1-D and of equal length")
    if xs.size < 3:
        raise ValueError("need at least 3 points")
    r = pearson(xs, ys)
    rho = pearson(average_ranks(xs), average_ranks(ys))
    return Correlation(pearson=r, spearman=rho, p_value=pearson_p_value(r, xs.size), n=int(xs.size))
