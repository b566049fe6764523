"""Shared oracles and generators for the test suite.

Everything here is deliberately independent of the code paths under test:
brute-force maxima, finite differences, Newton inversion of the parametric
map, and seeded closed-form families.
"""

from __future__ import annotations

import math

import numpy as np

from ma_lin.expressions import Expr, evaluate, parse
from ma_lin.grids import jet_exprs


def brute_conjugate(xs, vs, slopes) -> np.ndarray:
    """O(n*m) reference for the discrete convex conjugate."""
    out = np.empty(len(slopes))
    for k, s in enumerate(slopes):
        out[k] = max(s * x - v for x, v in zip(xs, vs))
    return out


def brute_conjugate_2d(xs, ys, Z, xi, eta) -> np.ndarray:
    """Joint 2-D maximum of xi*x + eta*y - Z over all nodes."""
    out = np.empty((len(eta), len(xi)))
    for l, e in enumerate(eta):
        for k, s in enumerate(xi):
            out[l, k] = np.max(np.subtract.outer(e * np.asarray(ys), -s * np.asarray(xs)) - Z)
    return out


def measured_order(err_coarse: float, err_fine: float) -> float:
    return math.log2(err_coarse / err_fine)


def central_second(fn, x, h):
    return (fn(x + h) - 2.0 * fn(x) + fn(x - h)) / h ** 2


# ---------------------------------------------------------------------------
# seeded closed-form source family for the contact map

_PERTURB = [
    "sin(X-{c})", "cosh(Y-{c})", "arctan(Y-{c})*Y", "X^2*Y", "exp(0.4*X)",
    "sin(X)*cos(Y)",
]


def seeded_closed_forms(seed: int, count: int,
                        rect=(0.8, 1.2, 0.8, 1.2),
                        min_ux=0.1, min_uyy=0.1) -> list[Expr]:
    """Closed-form U(X, Y) with |U_X| and |U_YY| above thresholds on the rectangle.

    A well-conditioned quadratic backbone plus a small transcendental
    perturbation; each accepted form is checked on a 13x13 scan of the
    rectangle.
    """
    rng = np.random.default_rng(seed)
    X0, X1, Y0, Y1 = rect
    xs = np.linspace(X0, X1, 13)
    ys = np.linspace(Y0, Y1, 13)
    out: list[Expr] = []
    attempts = 0
    while len(out) < count and attempts < 4000:
        attempts += 1
        a = rng.uniform(0.5, 1.2)
        b = rng.uniform(0.5, 1.2) * rng.choice((-1.0, 1.0))
        cx = rng.uniform(-0.2, 0.4)
        cy = rng.uniform(-0.3, 0.3)
        g = rng.uniform(-0.3, 0.3)
        p = _PERTURB[int(rng.integers(len(_PERTURB)))].format(c=f"{rng.uniform(-0.5, 0.5):.6f}")
        eps = rng.uniform(0.05, 0.25)
        expr = parse(f"{a:.6f}*(X+{cx:.6f})^2 + {b:.6f}*(Y+{cy:.6f})^2 "
                     f"+ {g:.6f}*X*Y + {eps:.6f}*({p})")
        ok = True
        _, ex, _, _, _, eyy = jet_exprs(expr, ("X", "Y"))
        for x in xs:
            for y in ys:
                ux = evaluate(ex, {"X": x, "Y": y})
                uyy = evaluate(eyy, {"X": x, "Y": y})
                if abs(ux) < min_ux or abs(uyy) < min_uyy:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out.append(expr)
    if len(out) < count:
        raise RuntimeError(f"only found {len(out)} usable closed forms")
    return out


def invert_contact_point(U: Expr, x: float, y: float,
                         X_init: float, Y_init: float,
                         tol: float = 1e-14, max_iter: int = 60):
    """Solve U_Y = x, U - Y*U_Y = y for (X, Y) by Newton with exact derivatives.

    Returns (X, Y) or None.  This inverts the parametric surface directly, so
    u(x, y) = X can be tabulated without any push-forward formulas.
    """
    _, ex, ey, exx, exy, eyy = jet_exprs(U, ("X", "Y"))
    X, Y = X_init, Y_init
    for _ in range(max_iter):
        b = {"X": X, "Y": Y}
        UY = evaluate(ey, b)
        Uv = evaluate(U, b)
        r1 = UY - x
        r2 = Uv - Y * UY - y
        if max(abs(r1), abs(r2)) <= tol * (1.0 + abs(x) + abs(y)):
            return X, Y
        UX = evaluate(ex, b)
        UXY = evaluate(exy, b)
        UYY = evaluate(eyy, b)
        # d(U_Y)/d(X,Y) = (U_XY, U_YY); d(U - Y U_Y)/d(X,Y) = (U_X - Y U_XY, -Y U_YY)
        a11, a12 = UXY, UYY
        a21, a22 = UX - Y * UXY, -Y * UYY
        det = a11 * a22 - a12 * a21
        if det == 0.0 or not math.isfinite(det):
            return None
        dX = (-r1 * a22 + r2 * a12) / det
        dY = (-r2 * a11 + r1 * a21) / det
        X, Y = X + dX, Y + dY
    return None


def surface_value_oracle(U: Expr, x: float, y: float, X_init: float, Y_init: float):
    """u(x, y) on the lifted surface of U, via Newton inversion; u = X."""
    sol = invert_contact_point(U, x, y, X_init, Y_init)
    if sol is None:
        return None
    return sol[0]
