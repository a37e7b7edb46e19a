"""Pure numpy implementations of the pointwise geometry kernels.

Twin of the compiled ``_geomcore`` extension; same signatures, same
arithmetic, vectorized with einsum instead of typed loops.  Selected by
``willmore.backend`` when the extension is unavailable or disabled.
"""

from __future__ import annotations

import numpy as np


def assemble_geometry(fu, fv, fuu, fuv, fvv):
    """Pointwise first/second fundamental form data from immersion derivatives.

    Arguments are (n_u, n_v, n) arrays of first and second partial
    derivatives of the immersion.  Returns

        g        (n_u, n_v, 2, 2)  pullback metric
        ginv     (n_u, n_v, 2, 2)
        sqrt_det (n_u, n_v)
        gamma    (n_u, n_v, 2, 2, 2)  Gamma^k_ij, symmetric in (i, j)
        A        (n_u, n_v, 2, 2, n)  second fundamental form vectors
        H        (n_u, n_v, n)        mean curvature vector g^{ij} A_ij
        A0       (n_u, n_v, 2, 2, n)  trace-free part A - (1/2) g H
        K        (n_u, n_v)           Gauss curvature R_1212 / det g
        min_det  smallest det g encountered (degeneracy indicator)
        min_g11  smallest g_11 encountered

    The Christoffel symbols are defined through the tangential part of the
    second derivatives, Gamma^k_ij = g^{kl} <d_ij f, d_l f>, which makes A
    exactly normal pointwise.
    """
    df = np.stack([fu, fv], axis=2)  # (nu, nv, 2, n)
    ddf = np.empty(fu.shape[:2] + (2, 2) + fu.shape[2:])
    ddf[:, :, 0, 0] = fuu
    ddf[:, :, 0, 1] = fuv
    ddf[:, :, 1, 0] = fuv
    ddf[:, :, 1, 1] = fvv

    g = np.einsum("xyia,xyja->xyij", df, df)
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    min_det = float(det.min())
    min_g11 = float(g[..., 0, 0].min())
    if min_det <= 0.0 or min_g11 <= 0.0:
        sqrt_det = np.sqrt(np.abs(det))
    else:
        sqrt_det = np.sqrt(det)

    ginv = np.empty_like(g)
    ginv[..., 0, 0] = g[..., 1, 1]
    ginv[..., 0, 1] = -g[..., 0, 1]
    ginv[..., 1, 0] = -g[..., 0, 1]
    ginv[..., 1, 1] = g[..., 0, 0]
    ginv = ginv / np.where(det != 0.0, det, 1.0)[..., None, None]

    # tangential coefficients: <d_ij f, d_l f>, then raise with ginv
    tang = np.einsum("xyija,xyla->xyijl", ddf, df)
    gamma = np.einsum("xykl,xyijl->xykij", ginv, tang)
    A = ddf - np.einsum("xykij,xyka->xyija", gamma, df)
    H = np.einsum("xyij,xyija->xya", ginv, A)
    A0 = A - 0.5 * g[..., None] * H[:, :, None, None, :]
    R1212 = np.einsum("xya,xya->xy", A[:, :, 0, 0], A[:, :, 1, 1]) - np.einsum(
        "xya,xya->xy", A[:, :, 0, 1], A[:, :, 0, 1]
    )
    K = R1212 / np.where(det != 0.0, det, 1.0)
    return g, ginv, sqrt_det, gamma, A, H, A0, K, min_det, min_g11


def q_action(ginv, A0, phi):
    """Q(A0) phi = g^{ik} g^{jl} A0_ij <A0_kl, phi> pointwise."""
    s = np.einsum("xykla,xya->xykl", A0, phi)
    s_up = np.einsum("xyik,xyjl,xykl->xyij", ginv, ginv, s)
    return np.einsum("xyija,xyij->xya", A0, s_up)


def project_tangent(fu, fv, ginv, W):
    """Tangential part g^{ij} <d_i f, W> d_j f of an ambient field W."""
    df = np.stack([fu, fv], axis=2)
    coeff = np.einsum("xyia,xya->xyi", df, W)
    return np.einsum("xyij,xyi,xyja->xya", ginv, coeff, df)
