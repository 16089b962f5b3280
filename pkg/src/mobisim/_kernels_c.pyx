# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled integration kernels.

Mirror of ``mobisim._kernels_py``: same algorithms, same constants, same
floating-point operation order, so both backends produce bit-identical
results (the extension is compiled with -ffp-contract=off to keep C
arithmetic identical to CPython float arithmetic). See the pure module
for the kernel surface documentation.
"""

from libc.math cimport ceil, fabs, isfinite, pow, sqrt

import numpy as np

from .errors import MaxStepsError, NumericalError, StiffnessError

BACKEND_NAME = "compiled"

# Dormand-Prince 5(4) tableau; exact rationals, correctly rounded to double.
cdef double C2 = 1.0 / 5.0
cdef double C3 = 3.0 / 10.0
cdef double C4 = 4.0 / 5.0
cdef double C5 = 8.0 / 9.0

cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0
cdef double A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0
cdef double A42 = -56.0 / 15.0
cdef double A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0
cdef double A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0
cdef double A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0
cdef double A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0

cdef double B1 = 35.0 / 384.0
cdef double B3 = 500.0 / 1113.0
cdef double B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0
cdef double B6 = 11.0 / 84.0

cdef double E1 = 71.0 / 57600.0
cdef double E3 = -71.0 / 16695.0
cdef double E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0
cdef double E7 = -1.0 / 40.0

cdef double D1 = -12715105075.0 / 11282082432.0
cdef double D3 = 87487479700.0 / 32700410799.0
cdef double D4 = -10690763975.0 / 1880347072.0
cdef double D5 = 701980252875.0 / 199316789632.0
cdef double D6 = -1453857185.0 / 822651844.0
cdef double D7 = 69997945.0 / 29380423.0

cdef double FAC_MIN = 0.2
cdef double FAC_MAX = 5.0
cdef double SAFETY = 0.9
cdef double H0_FRACTION = 1e-3
cdef double H_UNDERFLOW = 1e-14
cdef double CEIL_SLACK = 1.0 - 1e-12   # tolerates one-ulp overshoot in span/h

cdef double INF = float("inf")


def tableau():
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


cdef inline void _step(double c, double a, double h,
                       double k1, double k2, double k3, double k4, double amax,
                       double* oc, double* oa) noexcept nogil:
    cdef double d1c, d1a, d2c, d2a, d3c, d3a, d4c, d4a
    cdef double c2s, a2s, c3s, a3s, c4s, a4s
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
    oc[0] = c + (h / 6.0) * (d1c + 2.0 * d2c + 2.0 * d3c + d4c)
    oa[0] = a + (h / 6.0) * (d1a + 2.0 * d2a + 2.0 * d3a + d4a)


def rk4_step(double c, double a, double h,
             double k1, double k2, double k3, double k4, double amax):
    """One classical RK4 step of size ``h``. No finiteness checks."""
    cdef double oc, oa
    _step(c, a, h, k1, k2, k3, k4, amax, &oc, &oa)
    return oc, oa


cdef int _span_run(double* c, double* a, long n_sub, double h, double span,
                   double k1, double k2, double k3, double k4, double amax,
                   bint* cneg, bint* aneg, long* bad_j, double* bad_h) noexcept nogil:
    """Fixed steps across one span; status 0 = ok, 2 = non-finite."""
    cdef long j
    cdef double cc = c[0]
    cdef double aa = a[0]
    cdef double h_last
    for j in range(n_sub - 1):
        _step(cc, aa, h, k1, k2, k3, k4, amax, &cc, &aa)
        if not (isfinite(cc) and isfinite(aa)):
            bad_j[0] = j
            bad_h[0] = h
            return 2
        if cc < 0.0:
            cneg[0] = True
        if aa < 0.0:
            aneg[0] = True
    h_last = span - (n_sub - 1) * h
    _step(cc, aa, h_last, k1, k2, k3, k4, amax, &cc, &aa)
    if not (isfinite(cc) and isfinite(aa)):
        bad_j[0] = n_sub - 1
        bad_h[0] = h_last
        return 2
    if cc < 0.0:
        cneg[0] = True
    if aa < 0.0:
        aneg[0] = True
    c[0] = cc
    a[0] = aa
    return 0


def rk4_span(double c, double a, double t_left, double span, double h,
             double k1, double k2, double k3, double k4, double amax,
             long budget=4611686018427387904):
    """Integrate across ``span``; last step shortened to land exactly."""
    cdef double n_plan_d = ceil((span / h) * CEIL_SLACK)
    if n_plan_d < 1.0:
        n_plan_d = 1.0
    if n_plan_d > <double>budget:
        raise MaxStepsError(
            f"fixed-step budget exhausted at t={t_left!r} "
            f"(needs {n_plan_d} more steps, {budget} left)",
            t=t_left,
            h=h,
        )
    cdef long n_sub = <long>n_plan_d
    cdef bint cneg = False
    cdef bint aneg = False
    cdef long bad_j = 0
    cdef double bad_h = 0.0
    cdef int status
    with nogil:
        status = _span_run(&c, &a, n_sub, h, span, k1, k2, k3, k4, amax,
                           &cneg, &aneg, &bad_j, &bad_h)
    if status == 2:
        t_err = t_left + bad_j * h
        raise NumericalError(
            f"state became non-finite at t={t_err!r} (step {bad_h!r})",
            t=t_err,
            h=bad_h,
        )
    return c, a, n_sub, cneg, aneg


def rk4_grid(double c0, double a0, double[::1] times, double h,
             double k1, double k2, double k3, double k4, double amax,
             long max_steps):
    """Fixed-step RK4 over an output grid; lands exactly on every point."""
    cdef Py_ssize_t n = times.shape[0]
    cs_arr = np.empty(n)
    as_arr = np.empty(n)
    cdef double[::1] cs = cs_arr
    cdef double[::1] as_ = as_arr
    cdef double c = c0
    cdef double a = a0
    cdef bint cneg = c0 < 0.0
    cdef bint aneg = a0 < 0.0
    cdef long steps = 0
    cdef long n_sub = 0
    cdef long bad_j = 0
    cdef double bad_h = 0.0
    cdef double t_left = 0.0
    cdef double span, n_plan_d
    cdef int status = 0
    cdef Py_ssize_t i
    cs[0] = c
    as_[0] = a
    with nogil:
        for i in range(1, n):
            t_left = times[i - 1]
            span = times[i] - t_left
            n_plan_d = ceil((span / h) * CEIL_SLACK)
            if n_plan_d < 1.0:
                n_plan_d = 1.0
            if n_plan_d > <double>(max_steps - steps):
                status = 1
                break
            n_sub = <long>n_plan_d
            status = _span_run(&c, &a, n_sub, h, span, k1, k2, k3, k4, amax,
                               &cneg, &aneg, &bad_j, &bad_h)
            if status != 0:
                break
            steps += n_sub
            cs[i] = c
            as_[i] = a
    if status == 1:
        raise MaxStepsError(
            f"fixed-step budget exhausted at t={t_left!r} "
            f"({max_steps - steps} steps left)",
            t=t_left,
            h=h,
        )
    if status == 2:
        t_err = t_left + bad_j * h
        raise NumericalError(
            f"state became non-finite at t={t_err!r} (step {bad_h!r})",
            t=t_err,
            h=bad_h,
        )
    return cs_arr, as_arr, steps, cneg, aneg


def dopri_grid(double c0, double a0, double[::1] times, double rtol, double atol,
               long max_steps,
               double k1, double k2, double k3, double k4, double amax):
    """Adaptive Dormand-Prince 5(4) with dense output over the grid."""
    cdef Py_ssize_t n = times.shape[0]
    cdef double t0 = times[0]
    cdef double t_end = times[n - 1]
    cdef double span = t_end - t0
    cs_arr = np.empty(n)
    as_arr = np.empty(n)
    cdef double[::1] cs = cs_arr
    cdef double[::1] as_ = as_arr
    cs[0] = c0
    as_[0] = a0
    node_t = [t0]
    node_c = [c0]
    node_a = [a0]
    cont = []
    cdef bint cneg = c0 < 0.0
    cdef bint aneg = a0 < 0.0
    cdef double t = t0
    cdef double c = c0
    cdef double a = a0
    cdef double d1c = k2 - k1 * a * c
    cdef double d1a = k3 * (amax - a) - k4 * c
    cdef double h = H0_FRACTION * span
    cdef long nacc = 0
    cdef long nrej = 0
    cdef Py_ssize_t j = 1
    cdef bint final, bad
    cdef double hs, tj, th, omth
    cdef double c2s, a2s, c3s, a3s, c4s, a4s, c5s, a5s, c6s, a6s
    cdef double d2c, d2a, d3c, d3a, d4c, d4a, d5c, d5a, d6c, d6a, d7c, d7a
    cdef double cn, an, errc, erra, ac, acn, aa, aan, sc, sa, ec, ea
    cdef double err_norm, fac, t_new
    cdef double ydc, bsc, c4c, c5c, yda, bsa, c4a, c5a
    while t < t_end:
        if nacc + nrej >= max_steps:
            raise MaxStepsError(
                f"adaptive step budget ({max_steps}) exhausted at t={t!r}", t=t, h=h
            )
        if h < H_UNDERFLOW * span:
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

        bad = not (isfinite(cn) and isfinite(an) and isfinite(errc) and isfinite(erra))
        if bad:
            err_norm = INF
        else:
            ac = fabs(c)
            acn = fabs(cn)
            sc = atol + rtol * (ac if ac > acn else acn)
            aa = fabs(a)
            aan = fabs(an)
            sa = atol + rtol * (aa if aa > aan else aan)
            ec = errc / sc
            ea = erra / sa
            err_norm = sqrt(0.5 * (ec * ec + ea * ea))

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
            fac = FAC_MAX
        else:
            fac = SAFETY * pow(1.0 / err_norm, 0.2)
            if fac > FAC_MAX:
                fac = FAC_MAX
            elif fac < FAC_MIN:
                fac = FAC_MIN
        h = hs * fac
    if j != n:
        raise NumericalError(f"internal error: {n - j} grid points left unsampled")
    return (
        cs_arr,
        as_arr,
        np.array(node_t),
        np.array(node_c),
        np.array(node_a),
        np.array(cont).reshape(len(cont), 10),
        nacc,
        nrej,
        cneg,
        aneg,
    )


def scan_crossings(double c0, double a0, double t0, double t_end, double h,
                   double k1, double k2, double k3, double k4, double amax,
                   int var, double level):
    """Brute-force level-crossing scan; see the pure module for semantics."""
    cdef double span = t_end - t0
    cdef double n_plan_d = ceil((span / h) * CEIL_SLACK)
    if n_plan_d < 1.0:
        n_plan_d = 1.0
    cdef long n_total = <long>n_plan_d
    cdef double c = c0
    cdef double a = a0
    cdef double g_prev = (c if var == 0 else a) - level
    cdef bint has_zero = g_prev == 0.0
    cdef double zero_t = t0
    cdef int sign_before = 0
    hits_t = []
    hits_d = []
    cdef long jj
    cdef bint last
    cdef double hj, t_left, t_right, g, frac
    cdef int s
    for jj in range(n_total):
        last = jj == n_total - 1
        hj = span - (n_total - 1) * h if last else h
        t_left = t0 + jj * h
        _step(c, a, hj, k1, k2, k3, k4, amax, &c, &a)
        if not (isfinite(c) and isfinite(a)):
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
