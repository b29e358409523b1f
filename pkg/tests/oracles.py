"""Brute-force reference implementations in exact rational arithmetic.

These share no code with the package: plain loops over the textbook
definitions, evaluated with ``fractions.Fraction``.
"""

from fractions import Fraction
from itertools import combinations
import math


def product_limit(times, deltas, event_code=1):
    """Return ``(F, F_left)``: the product-limit CDF and its left limit as callables."""
    times = [Fraction(t) for t in times]
    rows = list(zip(times, deltas))

    def factors(keep):
        prod = Fraction(1)
        for s in sorted(set(times)):
            if not keep(s):
                continue
            d = sum(1 for t, e in rows if t == s and e == event_code)
            r = sum(1 for t, _ in rows if t >= s)
            if d:
                prod *= 1 - Fraction(d, r)
        return 1 - prod

    return (lambda t: factors(lambda s: s <= Fraction(t)),
            lambda t: factors(lambda s: s < Fraction(t)))


def pipeline(rows, weights=None):
    """KS, CM and every intermediate for rows ``(y, delta, x, w, z)``.

    ``weights`` maps (x, w) to a weight; default all ones. KS is returned
    squared over ``n`` (exact); take ``sqrt(n * ks_sq)`` to compare.
    """
    n = len(rows)
    ranks = []
    for y, d, x, w, z in rows:
        cell = [(yy, dd) for yy, dd, xx, _, zz in rows if (xx, zz) == (x, z)]
        F, _ = product_limit([c[0] for c in cell], [c[1] for c in cell])
        ranks.append(F(y))
    marg, _ = product_limit(ranks, [r[1] for r in rows])

    xw_cells = sorted({(r[2], r[3]) for r in rows})
    cond, cond_left = {}, {}
    for x, w in xw_cells:
        members = [i for i, r in enumerate(rows) if (r[2], r[3]) == (x, w)]
        terms = []
        for z in sorted({rows[i][4] for i in members}):
            idx = [i for i in members if rows[i][4] == z]
            p = Fraction(len(idx), len(members))
            F, Fl = product_limit([ranks[i] for i in idx], [rows[i][1] for i in idx])
            terms.append((p, F, Fl))
        cond[(x, w)] = (lambda v, terms=terms: sum(p * F(v) for p, F, _ in terms))
        cond_left[(x, w)] = (lambda v, terms=terms: sum(p * Fl(v) for p, _, Fl in terms))

    grid = sorted({Fraction(0)} | set(ranks))
    D = {(v, c): cond[c](v) - marg(v) for v in grid for c in xw_cells}
    ks_sq = max(d * d for d in D.values())
    weights = weights or {c: Fraction(1) for c in xw_cells}
    cm = Fraction(0)
    for c in xw_cells:
        for v in grid:
            jump = cond[c](v) - cond_left[c](v)
            cm += weights[c] * D[(v, c)] ** 2 * jump
    return {
        "ranks": ranks, "marginal": marg, "conditional": cond, "grid": grid,
        "D": D, "ks": math.sqrt(n * ks_sq), "cm": n * cm, "cells": xw_cells,
    }


def logrank_two_sample(times, deltas, group, first):
    """(O - E)^2 / V for group ``first`` against the rest, summed over event times."""
    o_minus_e = Fraction(0)
    var = Fraction(0)
    event_times = sorted({Fraction(t) for t, d in zip(times, deltas) if d})
    for s in event_times:
        at_risk = [(g, d, Fraction(t) == s) for t, d, g in zip(times, deltas, group) if Fraction(t) >= s]
        n_all = len(at_risk)
        n_1 = sum(1 for g, _, _ in at_risk if g == first)
        d_all = sum(1 for _, d, now in at_risk if d and now)
        d_1 = sum(1 for g, d, now in at_risk if d and now and g == first)
        o_minus_e += d_1 - Fraction(d_all * n_1, n_all)
        if n_all > 1:
            var += Fraction(d_all * n_1 * (n_all - n_1) * (n_all - d_all), n_all * n_all * (n_all - 1))
    return o_minus_e * o_minus_e / var


def kendall_tau_b_pairs(a, b):
    conc = disc = ties_a = ties_b = 0
    for i, j in combinations(range(len(a)), 2):
        sa = (a[i] > a[j]) - (a[i] < a[j])
        sb = (b[i] > b[j]) - (b[i] < b[j])
        if sa == 0:
            ties_a += 1
        if sb == 0:
            ties_b += 1
        if sa * sb > 0:
            conc += 1
        elif sa * sb < 0:
            disc += 1
    pairs = len(a) * (len(a) - 1) // 2
    denom = math.sqrt((pairs - ties_a) * (pairs - ties_b))
    return (conc - disc) / denom if denom else math.nan
