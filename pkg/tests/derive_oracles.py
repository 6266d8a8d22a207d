"""Independent sympy derivation of the frozen reference values in ``oracle_values.py``.

Velocities of transformed systems are obtained by transporting a second law
and taking ``d_i F / d_i U``, which avoids the closed-form velocity formulas
used by the library.  Run ``python3 tests/derive_oracles.py`` to print them.
"""

import sympy as sp

R1, R2, R3 = sp.symbols("R1 R2 R3")


def rot(lam, i, j, R):
    return sp.diff(lam[i], R[j]) / (lam[j] - lam[i])


def velocities(U, F, R):
    return [sp.simplify(sp.diff(F, r) / sp.diff(U, r)) for r in R]


def levy_law(h, g, u, f, alpha, R):
    r = R[alpha]
    return u - h / sp.diff(h, r) * sp.diff(u, r), f - g / sp.diff(g, r) * sp.diff(f, r)


def adjoint_law(lam, mu, q, u, f, alpha):
    return u - q / mu[alpha], f - lam[alpha] * q / mu[alpha]


def laplace_law(lam, u, f, alpha, beta, R):
    shift = sp.diff(u, R[alpha]) / rot(lam, beta, alpha, R)
    return u - shift, f - lam[beta] * shift


def derive():
    out = {}
    R = (R1, R2)
    lam_b = [R2, R1]
    # Levy on the exchange system, generated by (R1+R2, R1 R2), second law transported
    U, F = levy_law(R1 + R2, R1 * R2, R1**2 + R1 * R2 + R2**2, R1 * R2 * (R1 + R2), 0, R)
    lam = velocities(U, F, R)
    out["levy_b_12"] = [float(l.subs({R1: 1, R2: 2})) for l in lam]
    out["levy_b_0723"] = [float(l.subs({R1: 0.7, R2: 2.3})) for l in lam]
    out["levy_b_U_12"] = float(U.subs({R1: 1, R2: 2}))

    # adjoint Levy on the decoupled system with mu = (R1^2, 1)
    lam_a = [R1, R2]
    mu = [R1**2, sp.Integer(1)]
    U1, F1 = adjoint_law(lam_a, mu, R1**3 / 3, R1, R1**2 / 2, 0)
    U2, F2 = adjoint_law(lam_a, mu, R2, R2, R2**2 / 2, 0)
    # the first velocity needs a law with d_1 U != 0, the second one with d_2 U != 0
    out["adjoint_a_23"] = [
        float((sp.diff(F1, R1) / sp.diff(U1, R1)).subs({R1: 2, R2: 3})),
        float((sp.diff(F2, R2) / sp.diff(U2, R2)).subs({R1: 2, R2: 3})),
    ]

    # adjoint Levy on the exchange system with the quadratic flow
    mu_b = [R2**2 + 2 * R1 * R2 - R1**2, R1**2 + 2 * R1 * R2 - R2**2]
    q2 = R1**3 * R2 + 2 * R1**2 * R2**2 + R1 * R2**3 - (R1**4 + R2**4) / 2
    U, F = adjoint_law(lam_b, mu_b, q2, R1**2 + R1 * R2 + R2**2, R1 * R2 * (R1 + R2), 0)
    out["adjoint_b_quadratic_12"] = float((sp.diff(F, R2) / sp.diff(U, R2)).subs({R1: 1, R2: 2}))

    # three-component system
    R = (R1, R2, R3)
    lam_c = [R2 + R3, R1 + R3, R1 + R2]
    h1, g1 = R1 + R2 + R3, R1 * R2 + R1 * R3 + R2 * R3
    h2 = R1**2 + R2**2 + R3**2 + R1 * R2 + R1 * R3 + R2 * R3
    g2 = (R1 + R2) * (R1 + R3) * (R2 + R3)
    U, F = levy_law(h1, g1, h2, g2, 0, R)
    out["levy_c_123"] = [float(l.subs({R1: 1, R2: 2, R3: 3})) for l in velocities(U, F, R)]
    U, F = laplace_law(lam_c, h1, g1, 0, 1, R)
    out["laplace_c_h1_U_123"] = float(U.subs({R1: 1, R2: 2, R3: 3}))
    out["laplace_c_h1_F_123"] = float(F.subs({R1: 1, R2: 2, R3: 3}))

    # exchange system geometry at (1, 2): lines y^i = u^i y0 - f^i with (u1, u2)
    u = [R1 + R2, R1**2 + R1 * R2 + R2**2]
    f = [R1 * R2, R1 * R2 * (R1 + R2)]
    at = {R1: 1, R2: 2}
    out["focal_b_12"] = [[float(l.subs(at))] + [float((ui * l - fi).subs(at)) for ui, fi in zip(u, f)] for l in lam_b]
    q = [R1 * R2 * (R1 + R2) - (R1**3 + R2**3) / 3, q2]
    # harmonic point: intersection of the two characteristic lines y^i = (u^i - q^i/mu^k) y0 - (f^i - lam^k q^i/mu^k)
    y = sp.symbols("y0:3")
    eqs = [
        sp.Eq(y[i + 1], (u[i] - q[i] / mu_b[k]) * y[0] - (f[i] - lam_b[k] * q[i] / mu_b[k])).subs(at)
        for k in range(2)
        for i in range(2)
    ]
    sol = sp.solve(eqs[:2] + eqs[2:3], y, dict=True)[0]
    assert sp.simplify(eqs[3].lhs.subs(sol) - eqs[3].rhs.subs(sol)) == 0
    out["harmonic_b_12"] = [float(sol[v]) for v in y]
    out["flux_q1_b_12"] = float(q[0].subs(at))
    out["flux_q2_b_12"] = float(q[1].subs(at))

    # Lame coefficient of the exchange system normalised to 1 at (1, 2)
    h = 1 / (R2 - R1)
    out["lame_b_13"] = float((h / h.subs(at)).subs({R1: 1, R2: 3}))

    # Weingarten maps
    u1, u2 = sp.symbols("u1 u2")
    out["weingarten_cylinder"] = weingarten(sp.Matrix([2 * sp.cos(u2), -2 * sp.sin(u2), u1]), (u1, u2), {u1: 0.3, u2: 0.4})
    out["weingarten_sphere"] = weingarten(
        sp.Matrix([sp.sin(u1) * sp.cos(u2), sp.sin(u1) * sp.sin(u2), sp.cos(u1)]), (u1, u2), {u1: 0.7, u2: 0.4}
    )
    return out


def weingarten(r, params, at):
    ru, rv = r.diff(params[0]), r.diff(params[1])
    n = ru.cross(rv)
    n = n / sp.sqrt(n.dot(n))
    first = sp.Matrix([[ru.dot(ru), ru.dot(rv)], [rv.dot(ru), rv.dot(rv)]])
    # d_j n = w^i_j d_i r
    dn = sp.Matrix([[ru.dot(n.diff(p)), rv.dot(n.diff(p))] for p in params]).T
    w = first.inv() * dn
    return [[float(sp.N(w[i, j].subs(at))) for j in range(2)] for i in range(2)]


if __name__ == "__main__":
    import pprint

    pprint.pprint(derive(), width=100)
