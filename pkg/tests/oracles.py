"""Deliberately naive reference implementations used to cross-check metrics.

Everything here favors obviousness over speed: explicit sorts, prefix
recounts, and textbook formulas. Keep these independent of the package
internals.
"""

import math


def sort_desc(rows):
    """rows: list of (sample_id, score, correct) -> descending score, id ties."""
    return sorted(rows, key=lambda r: (-r[1], r[0]))


def accuracy_at_top_bruteforce(rows, fraction):
    ranked = sort_desc(rows)
    take = math.ceil(fraction * len(ranked))
    hits = 0
    for row in ranked[:take]:
        if row[2]:
            hits += 1
    return hits / take


def aurc_bruteforce(rows):
    ranked = sort_desc(rows)
    total = 0.0
    for m in range(1, len(ranked) + 1):
        errors = 0
        for row in ranked[:m]:
            if not row[2]:
                errors += 1
        total += errors / m
    return total / len(ranked)


def ause_bruteforce(rows, steps):
    n = len(rows)
    lowest_first = sorted(rows, key=lambda r: (r[1], r[0]))
    n_incorrect = sum(1 for r in rows if not r[2])

    gaps = []
    fractions = []
    for i in range(steps):
        f = i / steps
        removed = math.floor(f * n)
        kept = lowest_first[removed:]
        method = sum(1 for r in kept if not r[2]) / len(kept)
        left = n_incorrect - removed
        if left < 0:
            left = 0
        oracle = left / (n - removed)
        gaps.append(method - oracle)
        fractions.append(f)

    area = 0.0
    for i in range(len(gaps) - 1):
        area += (gaps[i] + gaps[i + 1]) / 2.0 * (fractions[i + 1] - fractions[i])
    return area / (fractions[-1] - fractions[0])


def spearman_bruteforce(a, b):
    """Pearson on average ranks, accumulated with plain loops."""

    def ranks(values):
        out = []
        for v in values:
            below = sum(1 for u in values if u < v)
            equal = sum(1 for u in values if u == v)
            out.append(below + (equal + 1) / 2.0)
        return out

    ra, rb = ranks(a), ranks(b)
    n = len(ra)
    mean_a = sum(ra) / n
    mean_b = sum(rb) / n
    cov = sum((x - mean_a) * (y - mean_b) for x, y in zip(ra, rb))
    var_a = sum((x - mean_a) ** 2 for x in ra)
    var_b = sum((y - mean_b) ** 2 for y in rb)
    return cov / math.sqrt(var_a * var_b)


def histogram_bruteforce(values, bins, lo, hi):
    width = (hi - lo) / bins
    counts = [0] * bins
    for v in values:
        idx = int(math.floor((v - lo) / width))
        if idx < 0:
            idx = 0
        if idx > bins - 1:
            idx = bins - 1
        counts[idx] += 1
    total = len(values)
    return [(lo + (i + 0.5) * width, counts[i] / total) for i in range(bins)]
