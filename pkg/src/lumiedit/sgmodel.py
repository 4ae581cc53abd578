"""Spherical gaussian radiance lobes.

A lobe with amplitude w, sharpness lam and axis d has value
w * exp(lam * (dot(d, l) - 1)) in direction l. All functions here accept
either numpy arrays or torch tensors; with torch inputs every output is
differentiable in w, lam and d (sampling via the reparameterized inverse
CDF), which is what the light-fitting optimizers rely on.

Formulas are evaluated through expm1/log1p so they stay finite for the very
sharp lobes the intensity charts can produce (lam beyond 1e5).
"""

import numpy as np

from ._backend import cross, dot, get_xp, normalize

TWO_PI = 2.0 * np.pi


def sg_eval(w, lam, d, l):
    """Lobe radiance toward unit direction(s) l.

    w: amplitude, shape (c,); lam: scalar sharpness; d: unit axis (3,).
    l: (..., 3). Returns (..., c).
    """
    xp = get_xp(w, lam, d, l)
    mu = dot(xp, d, l)
    return w * xp.exp(lam * (mu - 1.0))[..., None]


def sg_sphere_integral(w, lam):
    """Integral of the lobe over the whole sphere: 2 pi w (1 - exp(-2 lam)) / lam."""
    xp = get_xp(w, lam)
    return TWO_PI * w * (-xp.expm1(-2.0 * lam)) / lam


def sg_pdf(lam, d, l):
    """Solid-angle density of sg_sample: lam exp(lam (mu - 1)) / (2 pi (1 - exp(-2 lam)))."""
    xp = get_xp(lam, d, l)
    mu = dot(xp, d, l)
    return lam * xp.exp(lam * (mu - 1.0)) / (TWO_PI * (-xp.expm1(-2.0 * lam)))


def sg_cdf_theta(lam, theta):
    """CDF of the polar angle theta (measured from the lobe axis) under sg_pdf."""
    xp = get_xp(lam, theta)
    mu = xp.cos(theta)
    return xp.expm1(lam * (mu - 1.0)) / xp.expm1(-2.0 * lam)


def lobe_frame(d):
    """Deterministic right-handed tangent frame (t1, t2) with t1 x t2 = d.

    The reference axis picks the smallest |d| component, so the frame is
    smooth in d away from component-order switches; the pick itself carries
    no gradient.
    """
    xp = get_xp(d)
    ad = xp.abs(d)
    cx = (ad[..., 0] <= ad[..., 1]) & (ad[..., 0] <= ad[..., 2])
    cy = (~cx) & (ad[..., 1] <= ad[..., 2])
    cz = (~cx) & (~cy)
    axis = xp.stack([cx, cy, cz], -1) * 1.0
    t1 = normalize(xp, cross(xp, axis, d))
    t2 = cross(xp, d, t1)
    return t1, t2


def sg_sample(lam, d, u, v):
    """Map uniform (u, v) in [-1, 1]^2 to a direction distributed as sg_pdf.

    Inverse-CDF in the polar angle around d, uniform in azimuth:
    cos(theta) = 1 + log(1 - (v+1)/2 * (1 - exp(-2 lam))) / lam, phi = u pi.
    Differentiable in lam and d for torch inputs. v = -1 returns d exactly,
    v = 1 returns -d.
    """
    xp = get_xp(lam, d, u, v)
    t = (v + 1.0) * 0.5
    # 1 - t (1 - e^{-2 lam}) == 1 + t expm1(-2 lam); log1p keeps sharp lobes finite
    mu = xp.log1p(t * xp.expm1(-2.0 * lam)) / lam + 1.0
    mu = xp.clip(mu, -1.0, 1.0)
    sin_theta = xp.sqrt(xp.clip(1.0 - mu * mu, 0.0, None))
    phi = u * np.pi
    t1, t2 = lobe_frame(d)
    return (
        t1 * (sin_theta * xp.cos(phi))[..., None]
        + t2 * (sin_theta * xp.sin(phi))[..., None]
        + d * mu[..., None]
    )


def sg_sample_theta(lam, v):
    """Polar angle of sg_sample for quantile round-trip checks."""
    xp = get_xp(lam, v)
    t = (v + 1.0) * 0.5
    mu = xp.clip(xp.log1p(t * xp.expm1(-2.0 * lam)) / lam + 1.0, -1.0, 1.0)
    return xp.arccos(mu)
