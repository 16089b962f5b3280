"""Pure-Python integration kernels.

Fallback used when the compiled extension ``mobisim._kernels_c`` is
unavailable. Algorithms, constants, and floating-point operation order
are kept literally identical to the extension so the two backends produce
bit-identical results; ``tests/test_backends.py`` enforces this.

Kernel surface (same in both backends):

* ``rk4_step``       -- one classical RK4 step.
* ``rk4_span``       -- fixed-step RK4 across a span, last step shortened
                        to land exactly on the far end.
* ``rk4_grid``       -- fixed-step RK4 sampled on an output grid.
* ``dopri_grid``     -- adaptive Dormand-Prince 5(4) with dense output,
                        sampled on an output grid.
* ``scan_crossings`` -- brute-force fixed-step level-crossing scan with
                        linear interpolation (event oracle).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import MaxStepsError, NumericalError, StiffnessError

BACKEND_NAME = "python"

# --------------------------------------------------------------------------
# Dormand-Prince 5(4) tableau: seven stages, fifth-order propagation with an
# embedded fourth-order error estimate (FSAL), plus the fourth-order dense
# output polynomial. Every constant derives from an exact rational; the
# golden test checks each against fractions.Fraction.
# --------------------------------------------------------------------------
C2 = 1.0 / 5.0
C3 = 3.0 / 10.0
C4 = 4.0 / 5.0
C5 = 8.0 / 9.0

A21 = 1.0 / 5.0
A31 = 3.0 / 40.0
A32 = 9.0 / 40.0
A41 = 44.0 / 45.0
A42 = -56.0 / 15.0
A43 = 32.0 / 9.0
A51 = 19372.0 / 6561.0
A52 = -25360.0 / 2187.0
A53 = 64448.0 / 6561.0
A54 = -212.0 / 729.0
A61 = 9017.0 / 3168.0
A62 = -355.0 / 33.0
A63 = 46732.0 / 5247.0
A64 = 49.0 / 176.0
A65 = -5103.0 / 18656.0

B1 = 35.0 / 384.0
B3 = 500.0 / 1113.0
B4 = 125.0 / 192.0
B5 = -2187.0 / 6784.0
B6 = 11.0 / 84.0

E1 = 71.0 / 57600.0
E3 = -71.0 / 16695.0
E4 = 71.0 / 1920.0
E5 = -17253.0 / 339200.0
E6 = 22.0 / 525.0
E7 = -1.0 / 40.0

D1 = -12715105075.0 / 11282082432.0
D3 = 87487479700.0 / 32700410799.0
D4 = -10690763975.0 / 1880347072.0
D5 = 701980252875.0 / 199316789632.0
D6 = -1453857185.0 / 822651844.0
D7 = 69997945.0 / 29380423.0

# Controller bounds: h_new = h * min(5, max(0.2, 0.9 * (1/err)^(1/5))).
_FAC_MIN = 0.2
_FAC_MAX = 5.0
_SAFETY = 0.9
_H0_FRACTION = 1e-3       # initial adaptive step = 1e-3 * span
_H_UNDERFLOW = 1e-14      # stiffness: h < 1e-14 * span
_CEIL_SLACK = 1.0 - 1e-12  # tolerates one-ulp overshoot in span/h


def tableau() -> dict:
    """The embedded tableau, exposed for golden tests."""
    return {
        "c": (0.0, C2, C3, C4, C5, 1.0, 1.0),
        "a": (
            (A21,),
            (A31, A32),
            (A41, A42, A43),
            (A51, A52, A53, A54),
            (A61, A62, A63, A64, A65),
            (B1, 0.0, B3, B4, B5, B6),
        ),
        "b": (B1, 0.0, B3, B4, B5, B6, 0.0),
        "e": (E1, 0.0, E3, E4, E5, E6, E7),
        "d": (D1, 0.0, D3, D4, D5, D6, D7),
    }


def rk4_step(c, a, h, k1, k2, k3, k4, amax):
    """One classical RK4 step of size ``h``. No finiteness checks."""
    d1c = k2 - k1 * a * c
    d1a = k3 * (amax - a) - k4 * c
    c2s = c + 0.5 * h * d1c
    a2s = a + 0.5 * h * d1a
    d2c = k2 - k1 * a2s * c2s
    d2a = k3 * (amax - a2s) - k4 * c2s
    c3s = c + 0.5 * h * d2c
    a3s = a + 0.5 * h * d2a
    d3c = k2 - k1 * a3s * c3s
    d3a = k3 * (amax - a3s) - k4 * c3s
    c4s = c + h * d3c
    a4s = a + h * d3a
    d4c = k2 - k1 * a4s * c4s
    d4a = k3 * (amax - a4s) - k4 * c4s
    cn = c + (h / 6.0) * (d1c + 2.0 * d2c + 2.0 * d3c + d4c)
    an = a + (h / 6.0) * (d1a + 2.0 * d2a + 2.0 * d3a + d4a)
    return cn, an


def _plan_substeps(span, h, budget, t_at):
    """Number of fixed steps covering ``span`` (last one shortened)."""
    n_plan = math.ceil((span / h) * _CEIL_SLACK)
    if n_plan < 1:
        n_plan = 1
    if n_plan > budget:
        raise MaxStepsError(
            f"fixed-step budget exhausted at t={t_at!r} "
            f"(needs {n_plan} more steps, {budget} left)",
            t=t_at,
            h=h,
        )
    return n_plan


def rk4_span(c, a, t_left, span, h, k1, k2, k3, k4, amax, budget=2**62):
    """Integrate across ``span`` starting at ``t_left``.

    Takes full steps of ``h`` and one final shortened step that lands
    exactly on ``t_left + span``. Returns
    ``(c, a, steps_taken, congestion_negative, adoption_negative)``.
    """
    c = float(c)
    a = float(a)
    t_left = float(t_left)
    span = float(span)
    h = float(h)
    k1 = float(k1)
    k2 = float(k2)
    k3 = float(k3)
    k4 = float(k4)
    amax = float(amax)
    n_sub = _plan_substeps(span, h, budget, t_left)
    cneg = False
    aneg = False
    for j in range(n_sub - 1):
        c, a = rk4_step(c, a, h, k1, k2, k3, k4, amax)
        if not (math.isfinite(c) and math.isfinite(a)):
            raise NumericalError(
                f"state became non-finite at t={t_left + j * h!r} (step {h!r})",
                t=t_left + j * h,
                h=h,
            )
        if c < 0.0:
            cneg = True
        if a < 0.0:
            aneg = True
    h_last = span - (n_sub - 1) * h
    c, a = rk4_step(c, a, h_last, k1, k2, k3, k4, amax)
    if not (math.isfinite(c) and math.isfinite(a)):
        t_err = t_left + (n_sub - 1) * h
        raise NumericalError(
            f"state became non-finite at t={t_err!r} (step {h_last!r})",
            t=t_err,
            h=h_last,
        )
    if c < 0.0:
        cneg = True
    if a < 0.0:
        aneg = True
    return c, a, n_sub, cneg, aneg


def rk4_grid(c0, a0, times, h, k1, k2, k3, k4, amax, max_steps):
    """Fixed-step RK4 over an output grid.

    ``times`` is the strictly increasing output grid; every grid point is
    landed on exactly (shortened final substep per interval). Returns
    ``(congestion, adoption, steps, congestion_negative, adoption_negative)``.
    """
    n = len(times)
    cs = np.empty(n)
    as_ = np.empty(n)
    c = float(c0)
    a = float(a0)
    cs[0] = c
    as_[0] = a
    cneg = c < 0.0
    aneg = a < 0.0
    steps = 0
    for i in range(1, n):
        t_left = times[i - 1]
        span = times[i] - t_left
        c, a, taken, fc, fa = rk4_span(
            c, a, t_left, span, h, k1, k2, k3, k4, amax, max_steps - steps
        )
        steps += taken
        cneg = cneg or fc
        aneg = aneg or fa
        cs[i] = c
        as_[i] = a
    return cs, as_, steps, cneg, aneg


def dopri_grid(c0, a0, times, rtol, atol, max_steps, k1, k2, k3, k4, amax):
    """Adaptive Dormand-Prince 5(4) over ``[times[0], times[-1]]``.

    Grid samples come from the fourth-order dense output (accepted nodes
    are reproduced exactly). Returns ``(congestion, adoption, node_t,
    node_c, node_a, cont, accepted, rejected, congestion_negative,
    adoption_negative)`` where ``cont`` holds one row of ten dense
    coefficients per accepted step (five per component).
    """
    c0 = float(c0)
    a0 = float(a0)
    rtol = float(rtol)
    atol = float(atol)
    k1 = float(k1)
    k2 = float(k2)
    k3 = float(k3)
    k4 = float(k4)
    amax = float(amax)
    n = len(times)
    t0 = float(times[0])
    t_end = float(times[n - 1])
    span = t_end - t0
    cs = np.empty(n)
    as_ = np.empty(n)
    cs[0] = c0
    as_[0] = a0
    node_t = [t0]
    node_c = [c0]
    node_a = [a0]
    cont = []
    cneg = c0 < 0.0
    aneg = a0 < 0.0
    t = t0
    c = c0
    a = a0
    d1c = k2 - k1 * a * c
    d1a = k3 * (amax - a) - k4 * c
    h = _H0_FRACTION * span
    nacc = 0
    nrej = 0
    j = 1
    while t < t_end:
        if nacc + nrej >= max_steps:
            raise MaxStepsError(
                f"adaptive step budget ({max_steps}) exhausted at t={t!r}", t=t, h=h
            )
        if h < _H_UNDERFLOW * span:
            raise StiffnessError(
                f"step size underflow at t={t!r} (h={h!r}); problem looks stiff",
                t=t,
                h=h,
            )
        final = h >= t_end - t
        hs = t_end - t if final else h

        c2s = c + hs * (A21 * d1c)
        a2s = a + hs * (A21 * d1a)
        d2c = k2 - k1 * a2s * c2s
        d2a = k3 * (amax - a2s) - k4 * c2s
        c3s = c + hs * (A31 * d1c + A32 * d2c)
        a3s = a + hs * (A31 * d1a + A32 * d2a)
        d3c = k2 - k1 * a3s * c3s
        d3a = k3 * (amax - a3s) - k4 * c3s
        c4s = c + hs * (A41 * d1c + A42 * d2c + A43 * d3c)
        a4s = a + hs * (A41 * d1a + A42 * d2a + A43 * d3a)
        d4c = k2 - k1 * a4s * c4s
        d4a = k3 * (amax - a4s) - k4 * c4s
        c5s = c + hs * (A51 * d1c + A52 * d2c + A53 * d3c + A54 * d4c)
        a5s = a + hs * (A51 * d1a + A52 * d2a + A53 * d3a + A54 * d4a)
        d5c = k2 - k1 * a5s * c5s
        d5a = k3 * (amax - a5s) - k4 * c5s
        c6s = c + hs * (A61 * d1c + A62 * d2c + A63 * d3c + A64 * d4c + A65 * d5c)
        a6s = a + hs * (A61 * d1a + A62 * d2a + A63 * d3a + A64 * d4a + A65 * d5a)
        d6c = k2 - k1 * a6s * c6s
        d6a = k3 * (amax - a6s) - k4 * c6s
        cn = c + hs * (B1 * d1c + B3 * d3c + B4 * d4c + B5 * d5c + B6 * d6c)
        an = a + hs * (B1 * d1a + B3 * d3a + B4 * d4a + B5 * d5a + B6 * d6a)
        d7c = k2 - k1 * an * cn
        d7a = k3 * (amax - an) - k4 * cn
        errc = hs * (E1 * d1c + E3 * d3c + E4 * d4c + E5 * d5c + E6 * d6c + E7 * d7c)
        erra = hs * (E1 * d1a + E3 * d3a + E4 * d4a + E5 * d5a + E6 * d6a + E7 * d7a)

        bad = not (
            math.isfinite(cn)
            and math.isfinite(an)
            and math.isfinite(errc)
            and math.isfinite(erra)
        )
        if bad:
            err_norm = math.inf
        else:
            ac = abs(c)
            acn = abs(cn)
            sc = atol + rtol * (ac if ac > acn else acn)
            aa = abs(a)
            aan = abs(an)
            sa = atol + rtol * (aa if aa > aan else aan)
            ec = errc / sc
            ea = erra / sa
            err_norm = math.sqrt(0.5 * (ec * ec + ea * ea))

        if err_norm <= 1.0:
            nacc += 1
            ydc = cn - c
            bsc = hs * d1c - ydc
            c4c = ydc - hs * d7c - bsc
            c5c = hs * (D1 * d1c + D3 * d3c + D4 * d4c + D5 * d5c + D6 * d6c + D7 * d7c)
            yda = an - a
            bsa = hs * d1a - yda
            c4a = yda - hs * d7a - bsa
            c5a = hs * (D1 * d1a + D3 * d3a + D4 * d4a + D5 * d5a + D6 * d6a + D7 * d7a)
            cont.append((c, ydc, bsc, c4c, c5c, a, yda, bsa, c4a, c5a))
            t_new = t_end if final else t + hs
            node_t.append(t_new)
            node_c.append(cn)
            node_a.append(an)
            while j < n and times[j] <= t_new:
                tj = times[j]
                if tj == t_new:
                    cs[j] = cn
                    as_[j] = an
                else:
                    th = (tj - t) / hs
                    omth = 1.0 - th
                    cs[j] = c + th * (ydc + omth * (bsc + th * (c4c + omth * c5c)))
                    as_[j] = a + th * (yda + omth * (bsa + th * (c4a + omth * c5a)))
                j += 1
            if cn < 0.0:
                cneg = True
            if an < 0.0:
                aneg = True
            c = cn
            a = an
            t = t_new
            d1c = d7c
            d1a = d7a
        else:
            nrej += 1

        if err_norm == 0.0:
            fac = _FAC_MAX
        else:
            fac = _SAFETY * (1.0 / err_norm) ** 0.2
            if fac > _FAC_MAX:
                fac = _FAC_MAX
            elif fac < _FAC_MIN:
                fac = _FAC_MIN
        h = hs * fac
    if j != n:
        raise NumericalError(f"internal error: {n - j} grid points left unsampled")
    return (
        cs,
        as_,
        np.array(node_t),
        np.array(node_c),
        np.array(node_a),
        np.array(cont).reshape(len(cont), 10),
        nacc,
        nrej,
        cneg,
        aneg,
    )


def scan_crossings(c0, a0, t0, t_end, h, k1, k2, k3, k4, amax, var, level):
    """Brute-force level-crossing scan at fixed step ``h``.

    Steps the system with RK4 and linearly interpolates (variable - level)
    sign changes inside each step. A sample landing exactly on the level is
    counted once, at that sample time, with the direction implied by the
    surrounding signs; tangential touches are not crossings. ``var`` is
    0 for congestion, 1 for adoption. Returns ``(times, directions)`` with
    direction +1 for upward, -1 for downward.
    """
    c0 = float(c0)
    a0 = float(a0)
    t0 = float(t0)
    t_end = float(t_end)
    h = float(h)
    k1 = float(k1)
    k2 = float(k2)
    k3 = float(k3)
    k4 = float(k4)
    amax = float(amax)
    level = float(level)
    span = t_end - t0
    n_total = math.ceil((span / h) * _CEIL_SLACK)
    if n_total < 1:
        n_total = 1
    c = c0
    a = a0
    g_prev = (c if var == 0 else a) - level
    has_zero = g_prev == 0.0
    zero_t = t0
    sign_before = 0
    hits_t = []
    hits_d = []
    for jj in range(n_total):
        last = jj == n_total - 1
        hj = span - (n_total - 1) * h if last else h
        t_left = t0 + jj * h
        c, a = rk4_step(c, a, hj, k1, k2, k3, k4, amax)
        if not (math.isfinite(c) and math.isfinite(a)):
            raise NumericalError(
                f"state became non-finite at t={t_left!r} (step {hj!r})", t=t_left, h=hj
            )
        t_right = t_end if last else t0 + (jj + 1) * h
        g = (c if var == 0 else a) - level
        if g == 0.0:
            if not has_zero:
                has_zero = True
                zero_t = t_right
                sign_before = 1 if g_prev > 0.0 else -1
        else:
            s = 1 if g > 0.0 else -1
            if has_zero:
                if sign_before != s:
                    hits_t.append(zero_t)
                    hits_d.append(s)
                has_zero = False
            elif g_prev != 0.0 and (g_prev < 0.0) != (g < 0.0):
                frac = g_prev / (g_prev - g)
                hits_t.append(t_left + hj * frac)
                hits_d.append(s)
        g_prev = g
    if has_zero and sign_before != 0:
        hits_t.append(zero_t)
        hits_d.append(1 if sign_before < 0 else -1)
    return np.array(hits_t), np.array(hits_d, dtype=np.int64)
