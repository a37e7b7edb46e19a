# Typed-loop versions of the pointwise geometry kernels.
# Same arithmetic as _geomcore_np; kept in lockstep by tests/test_backend.py.

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.float64_t f64


def assemble_geometry(double[:, :, ::1] fu, double[:, :, ::1] fv,
                      double[:, :, ::1] fuu, double[:, :, ::1] fuv,
                      double[:, :, ::1] fvv):
    cdef Py_ssize_t nu = fu.shape[0]
    cdef Py_ssize_t nv = fu.shape[1]
    cdef Py_ssize_t nd = fu.shape[2]
    cdef Py_ssize_t x, y, a, i, j, k

    g_arr = np.empty((nu, nv, 2, 2))
    ginv_arr = np.empty((nu, nv, 2, 2))
    sq_arr = np.empty((nu, nv))
    gam_arr = np.empty((nu, nv, 2, 2, 2))
    A_arr = np.empty((nu, nv, 2, 2, nd))
    H_arr = np.empty((nu, nv, nd))
    A0_arr = np.empty((nu, nv, 2, 2, nd))
    K_arr = np.empty((nu, nv))

    cdef double[:, :, :, ::1] g = g_arr
    cdef double[:, :, :, ::1] gi = ginv_arr
    cdef double[:, ::1] sq = sq_arr
    cdef double[:, :, :, :, ::1] gam = gam_arr
    cdef double[:, :, :, :, ::1] A = A_arr
    cdef double[:, :, ::1] H = H_arr
    cdef double[:, :, :, :, ::1] A0 = A0_arr
    cdef double[:, ::1] K = K_arr

    cdef double g11, g12, g22, det, dsafe, mind = 1e300, ming11 = 1e300
    cdef double t11_1, t11_2, t12_1, t12_2, t22_1, t22_2
    cdef double dd, h_a, r1212
    cdef double[2][2] gam_loc
    # ddf components per point: indexed [i][j][a] flattened below

    for x in range(nu):
        for y in range(nv):
            g11 = 0.0
            g12 = 0.0
            g22 = 0.0
            for a in range(nd):
                g11 += fu[x, y, a] * fu[x, y, a]
                g12 += fu[x, y, a] * fv[x, y, a]
                g22 += fv[x, y, a] * fv[x, y, a]
            det = g11 * g22 - g12 * g12
            if det < mind:
                mind = det
            if g11 < ming11:
                ming11 = g11
            g[x, y, 0, 0] = g11
            g[x, y, 0, 1] = g12
            g[x, y, 1, 0] = g12
            g[x, y, 1, 1] = g22
            sq[x, y] = (det if det > 0.0 else -det) ** 0.5
            dsafe = det if det != 0.0 else 1.0
            gi[x, y, 0, 0] = g22 / dsafe
            gi[x, y, 0, 1] = -g12 / dsafe
            gi[x, y, 1, 0] = -g12 / dsafe
            gi[x, y, 1, 1] = g11 / dsafe

            # tangential coefficients <d_ij f, d_l f> for (ij) in {11,12,22}
            t11_1 = 0.0; t11_2 = 0.0
            t12_1 = 0.0; t12_2 = 0.0
            t22_1 = 0.0; t22_2 = 0.0
            for a in range(nd):
                t11_1 += fuu[x, y, a] * fu[x, y, a]
                t11_2 += fuu[x, y, a] * fv[x, y, a]
                t12_1 += fuv[x, y, a] * fu[x, y, a]
                t12_2 += fuv[x, y, a] * fv[x, y, a]
                t22_1 += fvv[x, y, a] * fu[x, y, a]
                t22_2 += fvv[x, y, a] * fv[x, y, a]

            # Gamma^k_ij = g^{kl} <d_ij f, d_l f>
            gam[x, y, 0, 0, 0] = gi[x, y, 0, 0] * t11_1 + gi[x, y, 0, 1] * t11_2
            gam[x, y, 1, 0, 0] = gi[x, y, 1, 0] * t11_1 + gi[x, y, 1, 1] * t11_2
            gam[x, y, 0, 0, 1] = gi[x, y, 0, 0] * t12_1 + gi[x, y, 0, 1] * t12_2
            gam[x, y, 1, 0, 1] = gi[x, y, 1, 0] * t12_1 + gi[x, y, 1, 1] * t12_2
            gam[x, y, 0, 1, 0] = gam[x, y, 0, 0, 1]
            gam[x, y, 1, 1, 0] = gam[x, y, 1, 0, 1]
            gam[x, y, 0, 1, 1] = gi[x, y, 0, 0] * t22_1 + gi[x, y, 0, 1] * t22_2
            gam[x, y, 1, 1, 1] = gi[x, y, 1, 0] * t22_1 + gi[x, y, 1, 1] * t22_2

            for a in range(nd):
                A[x, y, 0, 0, a] = (fuu[x, y, a]
                                    - gam[x, y, 0, 0, 0] * fu[x, y, a]
                                    - gam[x, y, 1, 0, 0] * fv[x, y, a])
                A[x, y, 0, 1, a] = (fuv[x, y, a]
                                    - gam[x, y, 0, 0, 1] * fu[x, y, a]
                                    - gam[x, y, 1, 0, 1] * fv[x, y, a])
                A[x, y, 1, 0, a] = A[x, y, 0, 1, a]
                A[x, y, 1, 1, a] = (fvv[x, y, a]
                                    - gam[x, y, 0, 1, 1] * fu[x, y, a]
                                    - gam[x, y, 1, 1, 1] * fv[x, y, a])
                h_a = (gi[x, y, 0, 0] * A[x, y, 0, 0, a]
                       + 2.0 * gi[x, y, 0, 1] * A[x, y, 0, 1, a]
                       + gi[x, y, 1, 1] * A[x, y, 1, 1, a])
                H[x, y, a] = h_a
                for i in range(2):
                    for j in range(2):
                        A0[x, y, i, j, a] = A[x, y, i, j, a] - 0.5 * g[x, y, i, j] * h_a

            r1212 = 0.0
            for a in range(nd):
                r1212 += (A[x, y, 0, 0, a] * A[x, y, 1, 1, a]
                          - A[x, y, 0, 1, a] * A[x, y, 0, 1, a])
            K[x, y] = r1212 / dsafe

    return (g_arr, ginv_arr, sq_arr, gam_arr, A_arr, H_arr, A0_arr, K_arr,
            mind, ming11)


def q_action(double[:, :, :, ::1] ginv, double[:, :, :, :, ::1] A0,
             double[:, :, ::1] phi):
    cdef Py_ssize_t nu = phi.shape[0]
    cdef Py_ssize_t nv = phi.shape[1]
    cdef Py_ssize_t nd = phi.shape[2]
    cdef Py_ssize_t x, y, a, i, j, k, l
    out_arr = np.zeros((nu, nv, nd))
    cdef double[:, :, ::1] out = out_arr
    cdef double[2][2] s
    cdef double sup, acc

    for x in range(nu):
        for y in range(nv):
            for i in range(2):
                for j in range(2):
                    acc = 0.0
                    for a in range(nd):
                        acc += A0[x, y, i, j, a] * phi[x, y, a]
                    s[i][j] = acc
            for i in range(2):
                for j in range(2):
                    sup = 0.0
                    for k in range(2):
                        for l in range(2):
                            sup += ginv[x, y, i, k] * ginv[x, y, j, l] * s[k][l]
                    for a in range(nd):
                        out[x, y, a] += A0[x, y, i, j, a] * sup
    return out_arr


def project_tangent(double[:, :, ::1] fu, double[:, :, ::1] fv,
                    double[:, :, :, ::1] ginv, double[:, :, ::1] W):
    cdef Py_ssize_t nu = W.shape[0]
    cdef Py_ssize_t nv = W.shape[1]
    cdef Py_ssize_t nd = W.shape[2]
    cdef Py_ssize_t x, y, a
    out_arr = np.empty((nu, nv, nd))
    cdef double[:, :, ::1] out = out_arr
    cdef double c1, c2, b1, b2

    for x in range(nu):
        for y in range(nv):
            c1 = 0.0
            c2 = 0.0
            for a in range(nd):
                c1 += fu[x, y, a] * W[x, y, a]
                c2 += fv[x, y, a] * W[x, y, a]
            # b^j = g^{ij} c_i
            b1 = ginv[x, y, 0, 0] * c1 + ginv[x, y, 1, 0] * c2
            b2 = ginv[x, y, 0, 1] * c1 + ginv[x, y, 1, 1] * c2
            for a in range(nd):
                out[x, y, a] = b1 * fu[x, y, a] + b2 * fv[x, y, a]
    return out_arr
