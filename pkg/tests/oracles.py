"""Independent reference implementations used only by the tests.

Everything here is written with explicit loops over cells and faces so it
shares no code path with the vectorised library.
"""

import math

import numpy as np
from scipy import linalg


def neumann_matrix(nx, ny, hx, hy):
    """Dense matrix of the 5-point Neumann Laplacian, row-major i + nx*j."""
    n = nx * ny
    A = np.zeros((n, n))
    for j in range(ny):
        for i in range(nx):
            r = i + nx * j
            for di, dj, h in ((1, 0, hx), (-1, 0, hx), (0, 1, hy), (0, -1, hy)):
                ii, jj = i + di, j + dj
                if 0 <= ii < nx and 0 <= jj < ny:
                    c = ii + nx * jj
                    A[r, c] += 1.0 / h**2
                    A[r, r] -= 1.0 / h**2
    return A


def neumann_matrix_1d(n, h):
    return neumann_matrix(n, 1, h, 1.0)


def dense_solve(A, rhs):
    lu, piv = linalg.lu_factor(A)
    return linalg.lu_solve((lu, piv), rhs)


def loop_integral(values, vol):
    total = 0.0
    for x in np.ravel(values):
        total += float(x)
    return total * vol


def loop_grad_energy(field, hx, hy, coeff=None):
    """sum over interior faces of c_face * ((f_r - f_l)/h)^2 * cell volume."""
    f = np.atleast_2d(field)
    ny, nx = f.shape
    c = np.ones_like(f) if coeff is None else np.atleast_2d(coeff)
    vol = hx * (hy if ny > 1 else 1.0)
    total = 0.0
    for j in range(ny):
        for i in range(nx - 1):
            g = (f[j, i + 1] - f[j, i]) / hx
            total += 0.5 * (c[j, i] + c[j, i + 1]) * g * g
    for j in range(ny - 1):
        for i in range(nx):
            g = (f[j + 1, i] - f[j, i]) / hy
            total += 0.5 * (c[j, i] + c[j + 1, i]) * g * g
    return total * vol


def loop_lyapunov(u, v, n, hx, hy, gamma, gamma_prime, Gamma, Gamma1, f_cons, kstar):
    """The functional and its dissipation terms from their defining formulas.

    Uses the original (un-rearranged) expression for L and the mean-zero
    potential obtained from a dense pseudo-inverse of the Neumann matrix.
    """
    u2, v2, n2 = (np.atleast_2d(a) for a in (u, v, n))
    ny, nx = u2.shape
    vol = hx * (hy if ny > 1 else 1.0)
    measure = vol * nx * ny
    m = loop_integral(u2, vol) / measure
    A = neumann_matrix(nx, ny, hx, hy if ny > 1 else 1.0)
    rhs = (u2 - m).ravel()
    U = np.linalg.lstsq(-A, rhs, rcond=None)[0]
    U = U - U.mean()
    U = U.reshape(u2.shape)
    grad_U2 = loop_grad_energy(U, hx, hy if ny > 1 else 1.0)
    g1m = m * gamma(m)
    L = 0.5 * grad_U2
    L += 2.0 * loop_integral(Gamma1(v2), vol)
    L -= m * loop_integral(Gamma(v2), vol)
    L -= g1m * loop_integral(v2, vol)
    L += kstar * loop_integral(np.abs(n2), vol)
    L += measure * (g1m * m + m * Gamma(m) - 2.0 * Gamma1(m))
    coeff = 2.0 * (gamma(v2) + v2 * gamma_prime(v2)) - m * gamma_prime(v2)
    D1 = loop_grad_energy(v2, hx, hy if ny > 1 else 1.0, coeff)
    D2 = loop_integral((v2 - m) * (v2 * gamma(v2) - g1m), vol)
    D3 = loop_integral((v2 - u2) ** 2 * gamma(v2), vol)
    D4 = loop_integral(np.abs(u2 * f_cons(n2)), vol)
    return L, D1, D2, D3, D4


def homogeneous_ode(tau, beta, f, u0, v0, n0, t_eval):
    """High-accuracy solution of the spatially homogeneous system."""
    from scipy.integrate import solve_ivp

    def rhs(t, y):
        u, v, n = y
        r = u * f(n)
        return [r, (u - beta * v) / tau, -r]

    sol = solve_ivp(rhs, (0.0, float(t_eval[-1])), [u0, v0, n0], method="DOP853", t_eval=t_eval, rtol=1e-12, atol=1e-14)
    return sol.y


def eigen_pair_1d(n, L, mode=1):
    h = L / n
    x = (np.arange(n) + 0.5) * h
    k = mode * math.pi / L
    return x, np.cos(k * x), k * k
