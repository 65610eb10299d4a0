"""Straight-line reference implementations used only as test oracles.

Deliberately plain Python (loops, math.fsum) so they share no code path
with the numpy implementations under test.
"""

import itertools
import math


def features(x):
    n = len(x)
    mean = math.fsum(x) / n
    var = math.fsum((v - mean) ** 2 for v in x) / n
    std = math.sqrt(var)
    if var > 0:
        skew = (math.fsum((v - mean) ** 3 for v in x) / n) / var ** 1.5
        kurt = (math.fsum((v - mean) ** 4 for v in x) / n) / var ** 2 - 3.0
    else:
        skew = kurt = 0.0
    hi, lo = max(x), min(x)
    out = [mean, std, hi, lo, hi - lo, math.fsum(x), skew, kurt]
    blocks = [x[0:12], x[12:24], x[24:36], x[36:48]]
    out += [math.fsum(b) for b in blocks]
    for b in blocks:
        m = math.fsum(b) / len(b)
        out.append(math.sqrt(math.fsum((v - m) ** 2 for v in b) / len(b)))
    imax = imin = 0
    for i in range(n):
        if x[i] > x[imax]:
            imax = i
        if x[i] < x[imin]:
            imin = i
    out += [imax + 1, imin + 1, sum(1 for v in x if v > mean), sum(1 for v in x if v < mean)]
    return out


def distances(rows):
    n = len(rows)
    d = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            d[i][j] = math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(rows[i], rows[j])))
    return d


def silhouette(d, labels):
    n = len(labels)
    out = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            out.append(0.0)
            continue
        a = sum(d[i][j] for j in own) / len(own)
        b = min(
            sum(d[i][j] for j in range(n) if labels[j] == c) / sum(1 for j in range(n) if labels[j] == c)
            for c in set(labels) if c != labels[i]
        )
        top = max(a, b)
        out.append(0.0 if top == 0 else (b - a) / top)
    return out


def linkage_distance(d, A, B, linkage):
    """Between-cluster distance from the original point distances."""
    pairs = [d[a][b] for a in A for b in B]
    if linkage == "single":
        return min(pairs)
    if linkage == "complete":
        return max(pairs)
    if linkage == "average":
        return sum(pairs) / len(pairs)
    # ward: sqrt(2|A||B|/(|A|+|B|)) * ||centroid(A) - centroid(B)||, from distances only
    def mean_sq(X, Y):
        return sum(d[x][y] ** 2 for x in X for y in Y) / (len(X) * len(Y))
    cdist2 = mean_sq(A, B) - 0.5 * mean_sq(A, A) - 0.5 * mean_sq(B, B)
    return math.sqrt(max(2.0 * len(A) * len(B) / (len(A) + len(B)) * cdist2, 0.0))


def greedy_partition(d, k, linkage):
    """Merge the closest pair by exhaustive search each step, recomputing every linkage."""
    clusters = [frozenset([i]) for i in range(len(d))]
    merges = []
    while len(clusters) > k:
        best = None
        for i, j in itertools.combinations(range(len(clusters)), 2):
            v = linkage_distance(d, clusters[i], clusters[j], linkage)
            if best is None or v < best[0]:
                best = (v, i, j)
        v, i, j = best
        merges.append(v)
        new = clusters[i] | clusters[j]
        clusters = [c for t, c in enumerate(clusters) if t not in (i, j)] + [new]
    return {frozenset(c) for c in clusters}, merges


def set_partitions(items, k):
    """All partitions of ``items`` into exactly k non-empty blocks."""
    items = list(items)
    if k == 1:
        yield [items]
        return
    if len(items) == k:
        yield [[x] for x in items]
        return
    if len(items) < k:
        return
    first, rest = items[0], items[1:]
    for p in set_partitions(rest, k - 1):
        yield [[first]] + p
    for p in set_partitions(rest, k):
        for i in range(len(p)):
            yield p[:i] + [[first] + p[i]] + p[i + 1:]


def best_separated_partition(d, k):
    """Exhaustive maximiser of the smallest single-link gap between blocks."""
    best, best_val = None, -1.0
    for p in set_partitions(range(len(d)), k):
        gap = min(linkage_distance(d, A, B, "single") for A, B in itertools.combinations(p, 2))
        if gap > best_val:
            best, best_val = p, gap
    return {frozenset(b) for b in best}, best_val


def as_partition(labels):
    groups = {}
    for i, l in enumerate(labels):
        groups.setdefault(int(l), set()).add(i)
    return {frozenset(g) for g in groups.values()}


def mean_std_per_period(days):
    """Per-period mean and population std over a list of 48-value days."""
    n = len(days)
    means, stds = [], []
    for t in range(len(days[0])):
        col = [day[t] for day in days]
        m = math.fsum(col) / n
        means.append(m)
        stds.append(math.sqrt(math.fsum((v - m) ** 2 for v in col) / n))
    return means, stds
