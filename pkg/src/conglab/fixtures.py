"""Canonical example systems with closed-form laws and flows.

* ``sys_a``: ``lam^i = R^i`` (decoupled).
* ``sys_b``: ``lam = (R2, R1)``.
* ``sys_c``: ``lam^i = R1 + R2 + R3 - R^i``.
* ``sys_d``: shallow-water type ``lam = ((3R1+R2)/4, (R1+3R2)/4)``.

Densities are named so that commuting flows can carry their fluxes ``q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .claws import CommutingFlow, ConservationLaw
from .expr import Grid
from .hydro import DiagonalSystem, GeneralSystem


@dataclass(eq=False)
class Fixture:
    system: DiagonalSystem
    grid: Grid
    laws: dict[str, ConservationLaw]
    flows: dict[str, CommutingFlow] = field(default_factory=dict)
    representation: tuple[str, ...] = ()

    @property
    def coords(self):
        return self.system.coords

    def rep_laws(self) -> list[ConservationLaw]:
        return [self.laws[k] for k in self.representation]


C2 = ("R1", "R2")
C3 = ("R1", "R2", "R3")


def _laws(table, coords):
    return {name: ConservationLaw.parse(h, g, coords, name) for name, (h, g) in table.items()}


def sys_a(points: int = 11) -> Fixture:
    sys = DiagonalSystem.parse(["R1", "R2"], C2, lame=["1", "1"])
    laws = _laws({"u1": ("R1", "R1^2/2"), "u2": ("R2", "R2^2/2")}, C2)
    flows = {"square": CommutingFlow.parse(["R1^2", "1"], C2, q={"u1": "R1^3/3", "u2": "R2"}, name="square")}
    return Fixture(sys, Grid((1.5, 3.0), (2.5, 4.0), (points, points)), laws, flows, ("u1", "u2"))


def sys_b(points: int = 21) -> Fixture:
    sys = DiagonalSystem.parse(["R2", "R1"], C2, lame=["1/(R2-R1)", "1/(R2-R1)"])
    laws = _laws(
        {
            "u1": ("R1+R2", "R1*R2"),
            "u2": ("R1^2+R1*R2+R2^2", "R1*R2*(R1+R2)"),
            "u3": ("R1^3+R1^2*R2+R1*R2^2+R2^3", "R1*R2*(R1^2+R1*R2+R2^2)"),
        },
        C2,
    )
    flows = {
        "quadratic": CommutingFlow.parse(
            ["R2^2+2*R1*R2-R1^2", "R1^2+2*R1*R2-R2^2"],
            C2,
            q={
                "u1": "R1*R2*(R1+R2)-(R1^3+R2^3)/3",
                "u2": "R1^3*R2+2*R1^2*R2^2+R1*R2^3-(R1^4+R2^4)/2",
            },
            name="quadratic",
        )
    }
    return Fixture(sys, Grid((0.5, 2.0), (1.5, 3.0), (points, points)), laws, flows, ("u1", "u2"))


def sys_b_general() -> tuple[GeneralSystem, Grid]:
    """Conservative form of ``sys_b`` in the densities ``u1 = R1+R2``, ``u2 = R1^2+R1R2+R2^2``."""
    sys = GeneralSystem.from_flux(["u1^2-u2", "u1^3-u1*u2"], ("u1", "u2"))
    return sys, Grid((4.8, 20.8), (5.2, 21.2), (7, 7))


def sys_c(points: int = 7) -> Fixture:
    lame = ["1/((R1-R2)*(R1-R3))", "1/((R2-R1)*(R2-R3))", "1/((R3-R1)*(R3-R2))"]
    sys = DiagonalSystem.parse(["R2+R3", "R1+R3", "R1+R2"], C3, lame=lame)
    laws = _laws(
        {
            "h1": ("R1+R2+R3", "R1*R2+R1*R3+R2*R3"),
            "h2": ("R1^2+R2^2+R3^2+R1*R2+R1*R3+R2*R3", "(R1+R2)*(R1+R3)*(R2+R3)"),
            "h3": (
                "R1^3+R2^3+R3^3+R1^2*R2+R1^2*R3+R2^2*R1+R2^2*R3+R3^2*R1+R3^2*R2+R1*R2*R3",
                "R1^3*R2+R1^3*R3+R1^2*R2^2+2*R1^2*R2*R3+R1^2*R3^2+R1*R2^3+2*R1*R2^2*R3"
                "+2*R1*R2*R3^2+R1*R3^3+R2^3*R3+R2^2*R3^2+R2*R3^3",
            ),
            "h4": (
                "R1^4+R2^4+R3^4+R1^3*R2+R1^3*R3+R2^3*R1+R2^3*R3+R3^3*R1+R3^3*R2"
                "+R1^2*R2^2+R1^2*R3^2+R2^2*R3^2+R1^2*R2*R3+R1*R2^2*R3+R1*R2*R3^2",
                "(R1+R2)*(R1+R3)*(R2+R3)*(R1^2+R2^2+R3^2)",
            ),
        },
        C3,
    )
    flows = {
        "products": CommutingFlow.parse(["R2*R3", "R1*R3", "R1*R2"], C3, name="products"),
        "cubic": CommutingFlow.parse(
            [
                "R1*(2*R1^2-3*R1*R2-3*R1*R3+6*R2*R3)/3",
                "-R1^2*(R1-3*R3)/3",
                "-R1^2*(R1-3*R2)/3",
            ],
            C3,
            q={
                "h1": "R1^2*(R1^2-2*R1*R2-2*R1*R3+6*R2*R3)/6",
                "h2": "R1^2*(4*R1^3-5*R1^2*R2-5*R1^2*R3-5*R1*R2^2+10*R1*R2*R3-5*R1*R3^2"
                "+15*R2^2*R3+15*R2*R3^2)/15",
                "h3": "R1^2*(R1^4-R1^3*R2-R1^3*R3-R1^2*R2^2+2*R1^2*R2*R3-R1^2*R3^2-R1*R2^3"
                "+2*R1*R2^2*R3+2*R1*R2*R3^2-R1*R3^3+3*R2^3*R3+3*R2^2*R3^2+3*R2*R3^3)/3",
            },
            name="cubic",
        ),
    }
    grid = Grid((0.5, 2.0, 3.5), (1.5, 3.0, 4.5), (points, points, points))
    return Fixture(sys, grid, laws, flows, ("h1", "h2", "h3"))


def sys_d(points: int = 11) -> Fixture:
    sys = DiagonalSystem.parse(["(3*R1+R2)/4", "(R1+3*R2)/4"], C2)
    laws = _laws(
        {
            "u1": ("R1+R2", "(3*R1^2+2*R1*R2+3*R2^2)/8"),
            "u2": ("(R1-R2)^2", "(R1-R2)^2*(R1+R2)/2"),
        },
        C2,
    )
    return Fixture(sys, Grid((0.5, 2.0), (1.5, 3.0), (points, points)), laws, {}, ("u1", "u2"))


def obstruction_system() -> tuple[GeneralSystem, Grid]:
    """A three-component gradient system with nonzero ``c^k_ij`` (no Riemann invariants)."""
    potential_flux = [
        "u1 + 0.3*u2*u3 + 0.2*u1^2",
        "2*u2 + 0.3*u1*u3 + 0.1*u3^2",
        "3*u3 + 0.3*u1*u2 + 0.2*u2*u3",
    ]
    sys = GeneralSystem.from_flux(potential_flux, ("u1", "u2", "u3"))
    return sys, Grid((0.2, 0.3, 0.4), (0.6, 0.7, 0.8), (5, 5, 5))
