"""Compiled inner loops for the layout optimizers.

Coordinates are ``(n, 2)`` float64 arrays, normalized in place. Pairs are
16-byte rows ``(key, d)`` of a ``(P, 2)`` float64 array, where the key packs
both vertex indices; rows are shuffled in place each epoch so the update loop
streams memory. Step weights are computed from ``d``: ``wscale / d**2`` for
inverse-square weights, ``wscale`` for binary ones.
Geometry is an int code: 0 spherical, 1 euclidean, 2 hyperbolic.

Per pair the step coefficient is ``min(eta * w, cap)``. Angular steps follow
the surface metric: hyperbolic angle steps are divided by ``sinh(r)**2`` and
longitude steps by ``cos(phi)**2``, so a step moves a point the same distance
wherever it sits relative to the origin or the poles. On a sphere of radius
R the angles step along the gradient of the unit-sphere angle, i.e. the true
gradient times 1/R; for R = 1 this is the plain coordinate gradient.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

SPH, EUC, HYP = 0, 1, 2

KEY_BITS = 26
KEY_MASK = (1 << KEY_BITS) - 1

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi
SING_TOL = 1e-10
SINH2_FLOOR = 1e-12
COS_FLOOR = 1e-6


@njit(cache=True, fastmath=True, inline="always")
def _wrap(a):
    if a < 0.0:
        a += TWO_PI
    elif a >= TWO_PI:
        a -= TWO_PI
    if a < 0.0 or a >= TWO_PI:
        # floor instead of %, which would add a zero-division check to hot loops
        a -= TWO_PI * math.floor(a / TWO_PI)
        if a >= TWO_PI or a < 0.0:
            a = 0.0
    return a


# arccos by the classic rational approximation of asin; inlined it is much
# cheaper than a libm call inside the pair loops
_PS0 = 1.66666666666666657415e-01
_PS1 = -3.25565818622400915405e-01
_PS2 = 2.01212532134862925881e-01
_PS3 = -4.00555345006794114027e-02
_PS4 = 7.91534994289814532176e-04
_PS5 = 3.47933107596021167570e-05
_QS1 = -2.40339491173441421878e+00
_QS2 = 2.02094576023350569471e+00
_QS3 = -6.88283971605453293030e-01
_QS4 = 7.70381505559019352791e-02
_PIO2_HI = 1.57079632679489655800e+00
_PIO2_LO = 6.12323399573676603587e-17


@njit(cache=True, fastmath=True, inline="always")
def _asin_ratio(z):
    p = z * (_PS0 + z * (_PS1 + z * (_PS2 + z * (_PS3 + z * (_PS4 + z * _PS5)))))
    q = 1.0 + z * (_QS1 + z * (_QS2 + z * (_QS3 + z * _QS4)))
    return p / q


@njit(cache=True, fastmath=True, inline="always")
def fast_acos(x):
    """arccos for x in [-1, 1]; written with selects so it does not branch."""
    ax = abs(x)
    small = ax <= 0.5
    z = x * x if small else (1.0 - ax) * 0.5
    r = _asin_ratio(z)
    sq = math.sqrt(z)
    big = sq + r * sq
    out_big = 2.0 * big if x > 0.0 else math.pi - 2.0 * (big - _PIO2_LO)
    out_small = _PIO2_HI - (x - (_PIO2_LO - x * r))
    return out_small if small else out_big


@njit(cache=True, fastmath=True, inline="always")
def _normalize(X, k, kind):
    if kind == SPH:
        phi = X[k, 0]
        lam = X[k, 1]
        if phi > math.pi or phi < -math.pi:
            phi -= TWO_PI * math.floor((phi + math.pi) / TWO_PI)
        if phi > HALF_PI:
            phi = math.pi - phi
            lam += math.pi
        elif phi < -HALF_PI:
            phi = -math.pi - phi
            lam += math.pi
        X[k, 0] = phi
        X[k, 1] = _wrap(lam)
    elif kind == HYP:
        r = X[k, 0]
        th = X[k, 1]
        if r < 0.0:
            r = -r
            th += math.pi
        X[k, 0] = r
        X[k, 1] = _wrap(th) if r > 0.0 else 0.0


@njit(cache=True, fastmath=True, inline="always")
def _pair_terms(X, i, j, kind, R):
    """Return (distance, angle_or_unit_distance, singular, gi0, gi1, gj0, gj1).

    The g* values are partials of the unit-curvature distance (no R factor).
    """
    a0 = X[i, 0]
    a1 = X[i, 1]
    b0 = X[j, 0]
    b1 = X[j, 1]
    if kind == EUC:
        dx = a0 - b0
        dy = a1 - b1
        r = math.sqrt(dx * dx + dy * dy)
        if r < SING_TOL:
            return r, r, True, 0.0, 0.0, 0.0, 0.0
        ux = dx / r
        uy = dy / r
        return r, r, False, ux, uy, -ux, -uy
    if kind == SPH:
        sa = math.sin(a0)
        ca = math.cos(a0)
        sb = math.sin(b0)
        cb = math.cos(b0)
        dl = a1 - b1
        cdl = math.cos(dl)
        sdl = math.sin(dl)
        c = sa * sb + ca * cb * cdl
        if c > 1.0:
            c = 1.0
        elif c < -1.0:
            c = -1.0
        th = math.acos(c)
        s = math.sqrt(1.0 - c * c)
        if s < SING_TOL:
            return R * th, th, True, 0.0, 0.0, 0.0, 0.0
        gi0 = -(ca * sb - sa * cb * cdl) / s
        gi1 = ca * cb * sdl / s
        gj0 = -(cb * sa - sb * ca * cdl) / s
        gj1 = -gi1
        return R * th, th, False, gi0, gi1, gj0, gj1
    # hyperbolic: cosh d = cosh(r1 - r2) + 2 sinh r1 sinh r2 sin^2(dtheta / 2)
    ea = math.exp(a0)
    eb = math.exp(b0)
    sha = 0.5 * (ea - 1.0 / ea)
    cha = 0.5 * (ea + 1.0 / ea)
    shb = 0.5 * (eb - 1.0 / eb)
    chb = 0.5 * (eb + 1.0 / eb)
    q = ea / eb
    sh_ab = 0.5 * (q - 1.0 / q)
    dt = a1 - b1
    hs = math.sin(0.5 * dt)
    hc = math.cos(0.5 * dt)
    hs2 = 2.0 * hs * hs
    # u = cosh(d) - 1, with cosh(r1 - r2) - 1 = (q - 1)^2 / 2q
    u = (q - 1.0) * (q - 1.0) / (2.0 * q) + sha * shb * hs2
    if u < 0.0:
        u = 0.0
    s = math.sqrt(u * (u + 2.0))
    dist = math.log1p(u + s)
    if s < SING_TOL:
        return dist, dist, True, 0.0, 0.0, 0.0, 0.0
    sdt = 2.0 * hs * hc
    gi0 = (sh_ab + cha * shb * hs2) / s
    gj0 = (-sh_ab + chb * sha * hs2) / s
    gi1 = sha * shb * sdt / s
    gj1 = -gi1
    return dist, dist, False, gi0, gi1, gj0, gj1


@njit(cache=True, fastmath=True, inline="always")
def _apply(X, k, g0, g1, coef, kind):
    if kind == HYP:
        sh = math.sinh(X[k, 0])
        X[k, 0] -= coef * g0
        X[k, 1] -= coef * g1 / max(sh * sh, SINH2_FLOOR)
    elif kind == SPH:
        cp = max(math.cos(X[k, 0]), COS_FLOOR)
        X[k, 0] -= coef * g0
        X[k, 1] -= coef * g1 / (cp * cp)
    else:
        X[k, 0] -= coef * g0
        X[k, 1] -= coef * g1
    _normalize(X, k, kind)


def pack_pairs(I, J, D) -> np.ndarray:
    """Rows ``(key, d)`` for index arrays I, J and targets D."""
    I = np.asarray(I, dtype=np.int64)
    J = np.asarray(J, dtype=np.int64)
    if I.size and max(I.max(), J.max()) > KEY_MASK:
        raise ValueError("too many vertices for packed pair keys")
    out = np.empty((I.size, 2))
    out[:, 0] = (I << KEY_BITS) | J
    out[:, 1] = D
    return out


@njit(cache=True, inline="always")
def _unpack(key):
    k = np.int64(key)
    return k >> KEY_BITS, k & KEY_MASK


@njit(cache=True, inline="always")
def _step_weight(d, inv_sq, wscale):
    if inv_sq:
        return wscale / (d * d)
    return wscale


@njit(cache=True)
def shuffle_rows(PR, u):
    """Fisher-Yates shuffle of the rows of ``PR`` driven by uniforms ``u``."""
    for k in range(PR.shape[0] - 1, 0, -1):
        m = int(u[k] * (k + 1))
        if m > k:
            m = k
        if m != k:
            a = PR[k, 0]
            b = PR[k, 1]
            PR[k, 0] = PR[m, 0]
            PR[k, 1] = PR[m, 1]
            PR[m, 0] = a
            PR[m, 1] = b


@njit(cache=True, fastmath=True)
def sgd_epoch(X, PR, eta, cap, inv_sq, wscale, kind, R, opt_radius, radius_rate, radius_floor, noise):
    """One sweep over the pair rows in order; returns (radius, degenerate_count).

    A degenerate pair (coincident, or antipodal on the sphere) nudges vertex j
    by the next row of ``noise`` and skips the step.
    """
    if kind == SPH:
        return _sgd_epoch_sph(X, PR, eta, cap, inv_sq, wscale, R, opt_radius,
                              radius_rate, radius_floor, noise)
    nn = noise.shape[0]
    bad = 0
    for p in range(PR.shape[0]):
        i, j = _unpack(PR[p, 0])
        d = PR[p, 1]
        dist, th, singular, gi0, gi1, gj0, gj1 = _pair_terms(X, i, j, kind, R)
        if singular:
            r = bad & (nn - 1)
            X[j, 0] += noise[r, 0]
            X[j, 1] += noise[r, 1]
            _normalize(X, j, kind)
            bad += 1
            continue
        mu = eta * _step_weight(d, inv_sq, wscale)
        if mu > cap:
            mu = cap
        coef = 2.0 * mu * (dist - d)
        _apply(X, i, gi0, gi1, coef, kind)
        _apply(X, j, gj0, gj1, coef, kind)
    return R, bad


# Spherical sweep on cached sines and cosines. During an epoch vertex k is
# held only as T[k] = (sin phi, cos phi, sin lam, cos lam). A step rotates
# these by the angle increments (short series for small increments), and the
# pole reflection phi -> +-pi - phi, lam -> lam + pi becomes: if cos phi < 0,
# negate cos phi, sin lam and cos lam. Angles are read back once per epoch.

SERIES_MAX = 0.03
TINY_MAX = 1e-4


@njit(cache=True, fastmath=True, inline="always")
def _sincos(d):
    # few tiers on purpose: when step sizes are mixed, every extra
    # size-dependent branch costs more in mispredictions than it saves
    d2 = d * d
    ad = abs(d)
    if ad < TINY_MAX:
        return d - d * d2 * (1.0 / 6.0), 1.0 - 0.5 * d2
    if ad < SERIES_MAX:
        sn = d * (1.0 - d2 * (1.0 / 6.0) * (1.0 - d2 * (1.0 / 20.0) * (1.0 - d2 * (1.0 / 42.0))))
        cs = 1.0 - d2 * 0.5 * (1.0 - d2 * (1.0 / 12.0) * (1.0 - d2 * (1.0 / 30.0) * (1.0 - d2 * (1.0 / 56.0))))
        return sn, cs
    return math.sin(d), math.cos(d)


@njit(cache=True, fastmath=True, inline="always")
def _step_sph(T, k, dphi, dlam):
    sd, cd = _sincos(dphi)
    sp = T[k, 0] * cd - T[k, 1] * sd
    cp = T[k, 1] * cd + T[k, 0] * sd
    sd, cd = _sincos(dlam)
    sl = T[k, 2] * cd - T[k, 3] * sd
    cl = T[k, 3] * cd + T[k, 2] * sd
    if cp < 0.0:
        cp = -cp
        sl = -sl
        cl = -cl
    T[k, 0] = sp
    T[k, 1] = cp
    T[k, 2] = sl
    T[k, 3] = cl


@njit(cache=True, fastmath=True, inline="always")
def _sph_terms(T, i, j, d, eta, cap, inv_sq, wscale, R):
    """(ok, theta, residual, mu, dphi_i, dlam_i, dphi_j, dlam_j) for one pair."""
    sa = T[i, 0]
    ca = T[i, 1]
    sb = T[j, 0]
    cb = T[j, 1]
    # cos and sin of lam_i - lam_j
    cdl = T[i, 3] * T[j, 3] + T[i, 2] * T[j, 2]
    sdl = T[i, 2] * T[j, 3] - T[i, 3] * T[j, 2]
    c = sa * sb + ca * cb * cdl
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    s = math.sqrt(1.0 - c * c)
    if s < SING_TOL:
        return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    th = fast_acos(c)
    mu = eta * _step_weight(d, inv_sq, wscale)
    if mu > cap:
        mu = cap
    res = R * th - d
    # longitude steps carry the metric factor 1 / cos^2 phi; one shared
    # reciprocal covers that and the 1 / sin(theta) of the gradient
    fa = max(ca, COS_FLOOR)
    fb = max(cb, COS_FLOOR)
    q = 2.0 * mu * res / (s * fa * fb)
    coef = q * fa * fb
    e = q * sdl
    return (True, th, res, mu, -coef * (ca * sb - sa * cb * cdl), e * fb * cb,
            -coef * (cb * sa - sb * ca * cdl), -e * fa * ca)


@njit(cache=True, fastmath=True)
def _sgd_epoch_sph(X, PR, eta, cap, inv_sq, wscale, R, opt_radius, radius_rate, radius_floor, noise):
    n = X.shape[0]
    T = np.empty((n, 4))
    for k in range(n):
        T[k, 0] = math.sin(X[k, 0])
        T[k, 1] = math.cos(X[k, 0])
        T[k, 2] = math.sin(X[k, 1])
        T[k, 3] = math.cos(X[k, 1])
    nn = noise.shape[0]
    bad = 0
    for p in range(PR.shape[0]):
        i, j = _unpack(PR[p, 0])
        ok, th, res, mu, a0, a1, b0, b1 = _sph_terms(T, i, j, PR[p, 1], eta, cap, inv_sq, wscale, R)
        if ok:
            _step_sph(T, i, a0, a1)
            _step_sph(T, j, b0, b1)
            if opt_radius:
                R -= radius_rate * mu * 2.0 * res * th
                if R < radius_floor:
                    R = radius_floor
        else:
            r = bad & (nn - 1)
            _step_sph(T, j, -noise[r, 0], -noise[r, 1])
            bad += 1
    for k in range(n):
        X[k, 0] = math.atan2(T[k, 0], T[k, 1])
        X[k, 1] = _wrap(math.atan2(T[k, 2], T[k, 3]))
    return R, bad


@njit(cache=True, fastmath=True)
def full_step(X, PR, step, inv_sq, Winv, kind, R, G):
    """One preconditioned step along the full stress gradient; returns degenerate count.

    Every pair's gradient is accumulated from the same state. Vertex k then
    moves by ``step * Winv[k]`` times its gradient (in unit-curvature terms),
    where ``Winv[k]`` is one over the summed weights of k's pairs: at step 1
    this is the Jacobi (majorization-like) step for the diagonal curvature.
    """
    n = X.shape[0]
    for k in range(n):
        G[k, 0] = 0.0
        G[k, 1] = 0.0
    bad = 0
    for p in range(PR.shape[0]):
        i, j = _unpack(PR[p, 0])
        d = PR[p, 1]
        dist, th, singular, gi0, gi1, gj0, gj1 = _pair_terms(X, i, j, kind, R)
        if singular:
            bad += 1
            continue
        coef = _step_weight(d, inv_sq, 1.0) * (dist - d)
        G[i, 0] += coef * gi0
        G[i, 1] += coef * gi1
        G[j, 0] += coef * gj0
        G[j, 1] += coef * gj1
    scale = step / R if kind == SPH else step
    for k in range(n):
        _apply(X, k, G[k, 0], G[k, 1], scale * Winv[k], kind)
    return bad


@njit(cache=True, fastmath=True)
def stress(X, Dm, Wm, kind, R):
    """Weighted stress over i < j from square target and weight matrices."""
    n = X.shape[0]
    total = 0.0
    if kind == SPH:
        U = np.empty((n, 3))
        for k in range(n):
            cp = math.cos(X[k, 0])
            U[k, 0] = cp * math.cos(X[k, 1])
            U[k, 1] = cp * math.sin(X[k, 1])
            U[k, 2] = math.sin(X[k, 0])
        for i in range(n):
            for j in range(i + 1, n):
                c = U[i, 0] * U[j, 0] + U[i, 1] * U[j, 1] + U[i, 2] * U[j, 2]
                if c > 1.0:
                    c = 1.0
                elif c < -1.0:
                    c = -1.0
                r = R * fast_acos(c) - Dm[i, j]
                total += Wm[i, j] * r * r
    elif kind == EUC:
        for i in range(n):
            for j in range(i + 1, n):
                dx = X[i, 0] - X[j, 0]
                dy = X[i, 1] - X[j, 1]
                r = math.sqrt(dx * dx + dy * dy) - Dm[i, j]
                total += Wm[i, j] * r * r
    else:
        E = np.empty(n)
        SH = np.empty(n)
        C = np.empty(n)
        S = np.empty(n)
        for k in range(n):
            E[k] = math.exp(X[k, 0])
            SH[k] = 0.5 * (E[k] - 1.0 / E[k])
            C[k] = math.cos(X[k, 1])
            S[k] = math.sin(X[k, 1])
        for i in range(n):
            for j in range(i + 1, n):
                q = E[i] / E[j]
                # 2 sin^2(dtheta / 2) is half the squared chord of the unit angle vectors
                dc = C[i] - C[j]
                ds = S[i] - S[j]
                # u = cosh(d) - 1, free of cancellation
                u = (q - 1.0) * (q - 1.0) / (2.0 * q) + SH[i] * SH[j] * 0.5 * (dc * dc + ds * ds)
                if u < 0.0:
                    u = 0.0
                r = math.log1p(u + math.sqrt(u * (u + 2.0))) - Dm[i, j]
                total += Wm[i, j] * r * r
    return total
