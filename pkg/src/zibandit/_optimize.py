"""One-dimensional maximisation used by the size-proxy solver."""

import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f, lo, hi, tol=1e-10, max_iter=200):
    """Maximise a unimodal ``f`` on ``[lo, hi]``.

    Returns ``(x, f(x))`` for the best point seen, endpoints included.
    """
    a, b = float(lo), float(hi)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    for _ in range(max_iter):
        if b - a <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
            if fc > best_f:
                best_x, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
            if fd > best_f:
                best_x, best_f = d, fd
    for x in (lo, hi):
        fx = f(x)
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def bracketed_golden_max(f, grid, tol=1e-12, max_iter=200):
    """Scan ``grid`` (sorted) for the best point, then refine between its neighbours."""
    values = [f(x) for x in grid]
    i = max(range(len(grid)), key=values.__getitem__)
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    x, fx = golden_section_max(f, lo, hi, tol=tol, max_iter=max_iter)
    if values[i] > fx:
        return grid[i], values[i]
    return x, fx
