"""Hot numerical kernels: exact SO(3) flows and the cumulative sweeps of the
reduced-energy machinery.

Every kernel exists in two builds: a plain-Python/numpy fallback and a numba
@njit build.  Set THINROD_NO_NUMBA=1 (or install without numba) to force the
fallback; the active build is reported by ``backend()``.  Both builds share a
single source of truth: the factory below is instantiated once per build, so
the semantics are identical and results agree to floating-point roundoff.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

# Gauss-Legendre, 4 points on [0, 1].
_GL4_NODES = 0.5 * (1.0 + np.array(
    [-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526]
))
_GL4_WEIGHTS = 0.5 * np.array(
    [0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538]
)


def _build(jit):
    gl4_nodes = _GL4_NODES
    gl4_weights = _GL4_WEIGHTS

    @jit
    def exp_so3(w):
        """Rotation matrix exp([w]x) for an axial vector w (angle = |w|)."""
        t2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2]
        t = np.sqrt(t2)
        if t < 1e-8:
            a = 1.0 - t2 / 6.0
            b = 0.5 - t2 / 24.0
        else:
            a = np.sin(t) / t
            b = (1.0 - np.cos(t)) / t2
        wx, wy, wz = w[0], w[1], w[2]
        R = np.empty((3, 3))
        R[0, 0] = 1.0 - b * (wy * wy + wz * wz)
        R[0, 1] = -a * wz + b * wx * wy
        R[0, 2] = a * wy + b * wx * wz
        R[1, 0] = a * wz + b * wx * wy
        R[1, 1] = 1.0 - b * (wx * wx + wz * wz)
        R[1, 2] = -a * wx + b * wy * wz
        R[2, 0] = -a * wy + b * wx * wz
        R[2, 1] = a * wx + b * wy * wz
        R[2, 2] = 1.0 - b * (wx * wx + wy * wy)
        return R

    @jit
    def exp_so3_integral(a, u):
        """S(u) = int_0^u exp(tau [a]x) dtau, exact up to trig roundoff."""
        t2 = a[0] * a[0] + a[1] * a[1] + a[2] * a[2]
        t = np.sqrt(t2)
        x = u * t
        if x < 1e-2:
            u2 = u * u
            x2 = x * x
            c1 = u2 * (0.5 - x2 / 24.0 + x2 * x2 / 720.0)
            c2 = u2 * u * (1.0 / 6.0 - x2 / 120.0 + x2 * x2 / 5040.0)
        else:
            c1 = (1.0 - np.cos(x)) / t2
            c2 = (x - np.sin(x)) / (t2 * t)
        ax, ay, az = a[0], a[1], a[2]
        S = np.empty((3, 3))
        S[0, 0] = u - c2 * (ay * ay + az * az)
        S[0, 1] = -c1 * az + c2 * ax * ay
        S[0, 2] = c1 * ay + c2 * ax * az
        S[1, 0] = c1 * az + c2 * ax * ay
        S[1, 1] = u - c2 * (ax * ax + az * az)
        S[1, 2] = -c1 * ax + c2 * ay * az
        S[2, 0] = -c1 * ay + c2 * ax * az
        S[2, 1] = c1 * ax + c2 * ay * az
        S[2, 2] = u - c2 * (ax * ax + ay * ay)
        return S

    @jit
    def hat3(v):
        H = np.empty((3, 3))
        H[0, 0] = 0.0
        H[0, 1] = -v[2]
        H[0, 2] = v[1]
        H[1, 0] = v[2]
        H[1, 1] = 0.0
        H[1, 2] = -v[0]
        H[2, 0] = -v[1]
        H[2, 1] = v[0]
        H[2, 2] = 0.0
        return H

    @jit
    def chain_rotations(gen, h):
        """Propagate R(0)=I through piecewise-constant generators.

        gen: (M, 3) axial vectors, h: (M,) interval widths.
        Returns the (M+1, 3, 3) nodal rotations R_{k+1} = R_k exp(h_k [a_k]x).
        """
        m = gen.shape[0]
        out = np.empty((m + 1, 3, 3))
        out[0] = np.eye(3)
        for k in range(m):
            out[k + 1] = out[k] @ exp_so3(gen[k] * h[k])
        return out

    @jit
    def grad_load_sweep(gen, h, rot_nodes, g_nodes, tau, b):
        """Directional derivative of the trapezoid load pairing.

        Returns d/de [ -sum_i tau_i <G_i, R_{A+eB}(sigma_i) - I> ] at e=0, using
        the exact first-order flow perturbation Q(s) = int_0^s R [b]x R^T.
        """
        m = gen.shape[0]
        Q = np.zeros((3, 3))
        acc = 0.0
        for i in range(m + 1):
            if i > 0:
                k = i - 1
                S = exp_so3_integral(gen[k], h[k])
                Q = Q + rot_nodes[k] @ hat3(S @ b[k]) @ rot_nodes[k].T
            QR = Q @ rot_nodes[i]
            s = 0.0
            for p in range(3):
                for q in range(3):
                    s += g_nodes[i, p, q] * QR[p, q]
            acc += tau[i] * s
        return -acc

    @jit
    def hess_load_sweep(gen, h, rot_nodes, g_nodes, tau, b):
        """Second directional derivative of the trapezoid load pairing.

        Uses the exact second-order flow term int_0^s Q Phi with Q exact and a
        4-point Gauss rule inside each interval (error far below roundoff of
        the surrounding arithmetic for smooth per-interval integrands).
        """
        m = gen.shape[0]
        Q = np.zeros((3, 3))
        D = np.zeros((3, 3))
        acc = 0.0
        for i in range(m + 1):
            DR = D @ rot_nodes[i]
            s = 0.0
            for p in range(3):
                for q in range(3):
                    s += g_nodes[i, p, q] * DR[p, q]
            acc += tau[i] * s
            if i < m:
                k = i
                for g in range(4):
                    u = gl4_nodes[g] * h[k]
                    wgt = gl4_weights[g] * h[k]
                    Su = exp_so3_integral(gen[k], u)
                    Qu = Q + rot_nodes[k] @ hat3(Su @ b[k]) @ rot_nodes[k].T
                    rot_u = exp_so3(gen[k] * u)
                    phi = hat3(rot_nodes[k] @ (rot_u @ b[k]))
                    D = D + wgt * (Qu @ phi)
                S = exp_so3_integral(gen[k], h[k])
                Q = Q + rot_nodes[k] @ hat3(S @ b[k]) @ rot_nodes[k].T
        return -2.0 * acc

    @jit
    def solver_load_vectors(gen, h, rot_nodes, g_nodes, tau):
        """Per-interval load vectors l_k of the stationarity system.

        l_k = 2 S_k^T axial(skew(R_k^T W_k R_k)) with W_k the reverse
        trapezoid-weighted cumulative sum of G_i R_i^T.  The stationarity
        system M_k a_k = l_k(A) is the discrete gradient of the reduced
        energy, so a converged fixed point is stationary to roundoff.
        """
        m = gen.shape[0]
        out = np.empty((m, 3))
        W = np.zeros((3, 3))
        for k in range(m - 1, -1, -1):
            W = W + tau[k + 1] * (g_nodes[k + 1] @ rot_nodes[k + 1].T)
            A = rot_nodes[k].T @ W @ rot_nodes[k]
            w0 = 0.5 * (A[2, 1] - A[1, 2])
            w1 = 0.5 * (A[0, 2] - A[2, 0])
            w2 = 0.5 * (A[1, 0] - A[0, 1])
            S = exp_so3_integral(gen[k], h[k])
            out[k, 0] = 2.0 * (S[0, 0] * w0 + S[1, 0] * w1 + S[2, 0] * w2)
            out[k, 1] = 2.0 * (S[0, 1] * w0 + S[1, 1] * w1 + S[2, 1] * w2)
            out[k, 2] = 2.0 * (S[0, 2] * w0 + S[1, 2] * w1 + S[2, 2] * w2)
        return out

    return SimpleNamespace(
        exp_so3=exp_so3,
        exp_so3_integral=exp_so3_integral,
        hat3=hat3,
        chain_rotations=chain_rotations,
        grad_load_sweep=grad_load_sweep,
        hess_load_sweep=hess_load_sweep,
        solver_load_vectors=solver_load_vectors,
    )


def _numba_requested() -> bool:
    flag = os.environ.get("THINROD_NO_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


numpy_impl = _build(lambda f: f)

if _numba_requested():
    try:
        from numba import njit

        numba_impl = _build(njit)
        _active = numba_impl
        _backend = "numba"
    except ImportError:
        numba_impl = None
        _active = numpy_impl
        _backend = "numpy"
else:
    numba_impl = None
    _active = numpy_impl
    _backend = "numpy"


def backend() -> str:
    return _backend


exp_so3 = _active.exp_so3
exp_so3_integral = _active.exp_so3_integral
hat3 = _active.hat3
chain_rotations = _active.chain_rotations
grad_load_sweep = _active.grad_load_sweep
hess_load_sweep = _active.hess_load_sweep
solver_load_vectors = _active.solver_load_vectors
