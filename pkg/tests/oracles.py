"""Independent reference implementations used by the regular and
acceptance suites. Deliberately naive: exact rational arithmetic and
direct counting loops, no shared code with the library paths they check.
"""

from fractions import Fraction


def fratio_exact(genuine_rows, replay_rows):
    """Exact per-band discriminability ratio via rational arithmetic.

    Inputs are lists of equal-length rows of floats; every float converts
    exactly to a Fraction, so the result is the mathematically exact value
    of the ratio (or None for a zero denominator).
    """
    n_bands = len(genuine_rows[0])
    out = []
    for i in range(n_bands):
        g = [Fraction(row[i]) for row in genuine_rows]
        r = [Fraction(row[i]) for row in replay_rows]
        mu_g = sum(g) / len(g)
        mu_r = sum(r) / len(r)
        var_g = sum((x - mu_g) ** 2 for x in g) / len(g)
        var_r = sum((x - mu_r) ** 2 for x in r) / len(r)
        denom = var_g + var_r
        if denom == 0:
            out.append(None)
        else:
            out.append((mu_g - mu_r) ** 2 / denom)
    return out


def eer_brute_force(genuine_scores, replay_scores):
    """Equal error rate by direct counting over every candidate threshold.

    Accept means score >= threshold. Thresholds sweep the sorted unique
    scores plus a sentinel past the maximum; the crossing of the two step
    functions is linearly interpolated between adjacent operating points.
    """
    def far(t):
        return sum(1 for s in replay_scores if s >= t) / len(replay_scores)

    def frr(t):
        return sum(1 for s in genuine_scores if s < t) / len(genuine_scores)

    candidates = sorted(set(genuine_scores) | set(replay_scores))
    candidates.append(candidates[-1] + 1.0)
    prev = None
    for t in candidates:
        diff = far(t) - frr(t)
        if diff == 0:
            return far(t)
        if prev is not None and prev[1] > 0 > diff:
            _, d_a, far_a = prev
            alpha = d_a / (d_a - diff)
            return far_a + alpha * (far(t) - far_a)
        prev = (t, diff, far(t))
    raise AssertionError("no crossing found")
