import math

import numpy as np
import pytest

from app.models.fields import CoulombResult, RotationField, Route
from app.services.potential_service import CONSTANT_C_NOTE, PotentialService, gamma
from tests.helpers import h2, sample


def coulomb_result(surface) -> CoulombResult:
    """Wrap an already-Coulomb seeded frame as a route result"""
    gauge = surface.descent.gauge
    interior, boundary = gauge.el_residual(surface.torsion)
    return CoulombResult(
        frame=surface.frame,
        rotation=RotationField.identity(surface.ops.grid.n_nodes, surface.spec.n),
        torsion=surface.torsion,
        total_torsion=gauge.total_torsion(surface.torsion),
        el_interior=interior,
        el_boundary=boundary,
        iterations=0,
        route=Route.DESCENT,
    )


def ricci_curvature(surface):
    geometry = surface.descent.geometry
    return geometry.curvature_from_ricci(geometry.second_fundamental(surface.jet, surface.frame), surface.jet)


@pytest.mark.parametrize("n,expected", [
    (1, 0.0),
    (2, 0.25),
    (3, 0.25 * math.sqrt(3.0)),
    (10, math.sqrt(2.0)),
])
def test_gamma(n, expected):
    assert gamma(n) == pytest.approx(expected)


def test_tau_potential_of_holomorphic_graph(graph32):
    potentials = PotentialService(graph32.ops)
    curvature = graph32.descent.geometry.curvature_from_torsion(graph32.torsion, graph32.jet.w)
    tau = potentials.tau_potential(graph32.torsion, curvature)
    g = graph32.ops.grid

    np.testing.assert_allclose(tau.tau[:, 0, 1], 0.5 * np.log((1.0 + g.r ** 2) / 2.0), atol=h2(graph32.ops))
    np.testing.assert_array_equal(tau.tau, -np.swapaxes(tau.tau, -1, -2))
    assert tau.residual_boundary == 0.0
    assert tau.residual_gradient <= h2(graph32.ops)
    assert tau.residual_poisson <= h2(graph32.ops)


def test_tau_potential_vanishes_for_flat_frame(plane32):
    potentials = PotentialService(plane32.ops)
    curvature = plane32.descent.geometry.curvature_from_torsion(plane32.torsion, plane32.jet.w)
    tau = potentials.tau_potential(plane32.torsion, curvature)
    assert np.max(np.abs(tau.tau)) <= 1e-12
    assert tau.residual_poisson <= 1e-10


def test_tau_potential_higher_codimension():
    embedded = sample("holomorphic_graph_embedded")
    potentials = PotentialService(embedded.ops)
    curvature = embedded.descent.geometry.curvature_from_torsion(embedded.torsion, embedded.jet.w)
    tau = potentials.tau_potential(embedded.torsion, curvature)
    assert tau.tau.shape == (embedded.ops.grid.n_nodes, 3, 3)
    assert tau.residual_gradient <= h2(embedded.ops)
    assert tau.residual_poisson <= h2(embedded.ops)
    # the constant third normal carries no torsion
    assert np.max(np.abs(tau.tau[:, :, 2])) <= 1e-10


def test_apriori_codimension_two(graph32):
    report = PotentialService(graph32.ops).apriori_report(2, coulomb_result(graph32), ricci_curvature(graph32))
    assert report.lhs == 0.0
    assert report.condition_met
    assert report.s0 == pytest.approx(2.0 * math.sqrt(2.0))
    assert report.constant_c == CONSTANT_C_NOTE
    assert report.sup_t == pytest.approx(graph32.torsion.sup_norm())


def test_apriori_codimension_three():
    embedded = sample("holomorphic_graph_embedded", 64, 128)
    report = PotentialService(embedded.ops).apriori_report(3, coulomb_result(embedded), ricci_curvature(embedded))
    assert report.gamma == pytest.approx(0.25 * math.sqrt(3.0))
    assert report.lhs == pytest.approx(0.3545, rel=5e-2)
    assert report.condition_met
