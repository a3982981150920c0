import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drivenchain.bessel import z01
from drivenchain.dynamics import Trajectory
from drivenchain.hamiltonian import number_operator
from drivenchain.observables import (
    SweepCurve,
    coherence_C,
    coherence_sum,
    contrast,
    init_single_excitation,
    local_minima,
    population,
    visibility,
)


def test_single_excitation_examples():
    rho = init_single_excitation(2, 1)
    assert np.array_equal(np.diag(rho).real, [0, 1, 0, 0])
    assert population(rho, 1) == 1 and population(rho, 2) == 0
    assert np.trace(rho @ number_operator(2)).real == 1
    with pytest.raises(ValueError):
        init_single_excitation(2, 3)


@given(st.integers(1, 6), st.data())
def test_single_excitation_is_a_valid_pure_state(n, data):
    site = data.draw(st.integers(1, n))
    rho = init_single_excitation(n, site)
    assert np.trace(rho) == 1 and np.trace(rho @ rho) == 1
    assert [population(rho, k) for k in range(1, n + 1)] == [1.0 if k == site else 0.0 for k in range(1, n + 1)]


def test_population_examples():
    ground = np.zeros((4, 4), dtype=complex)
    ground[3, 3] = 1
    assert population(ground, 1) == 0
    mixed = np.eye(4) / 4
    assert population(mixed, 1) == 0.5 and population(mixed, 2) == 0.5
    drift = np.diag([0, 1 + 1e-12, 0, -1e-12]).astype(complex)
    assert population(drift, 1) == 1.0
    with pytest.raises(ValueError):
        population(mixed, 0)


def test_coherence_examples():
    psi = np.array([0, 1, 1, 0]) / np.sqrt(2)
    assert coherence_sum(np.outer(psi, psi)) == pytest.approx(0.5, abs=1e-15)
    diag = Trajectory(np.arange(3.0), np.zeros((3, 2)), np.zeros(3))
    assert coherence_C(diag) == 0
    with pytest.raises(ValueError):
        coherence_C(Trajectory(np.arange(0.0), np.zeros((0, 2)), np.zeros(0)))


def curve(values, grid=None):
    grid = np.linspace(0, 3, len(values)) if grid is None else grid
    return SweepCurve("eac_over_omega", grid, "max_transfer", np.asarray(values, dtype=float))


def test_visibility_and_contrast():
    grid = np.linspace(0, 3, 31)
    values = np.abs(np.cos(grid - z01() + np.pi / 2))
    c = curve(values, grid)
    k = c.nearest_index(z01())
    assert grid[k] == pytest.approx(2.4)
    expected = (values.max() - values[k]) / (values.max() + values[k])
    assert visibility(c) == pytest.approx(expected)
    assert contrast(c) == pytest.approx(values.max() - values[k])
    assert visibility(curve(np.full(31, 0.3), grid)) == 0
    with pytest.raises(ValueError):
        visibility(curve(np.zeros(31), grid))
    with pytest.raises(ValueError):
        visibility(curve(np.ones(5), np.linspace(0, 2, 5)))


@given(st.lists(st.floats(0, 1), min_size=31, max_size=31).filter(lambda v: max(v) > 0))
def test_visibility_is_in_unit_interval(values):
    v = visibility(curve(values))
    assert 0 <= v <= 1


def test_sweep_curve_validation():
    with pytest.raises(ValueError):
        SweepCurve("x", [0, 0], "y", [1, 2])
    with pytest.raises(ValueError):
        SweepCurve("x", [0, 1], "y", [1, np.nan])
    with pytest.raises(ValueError):
        SweepCurve("x", [0, 1], "y", [1, 2], {"extra": np.zeros(3)})


def test_local_minima():
    assert local_minima(np.array([3, 1, 2, 0.5, 0.7, 0.7])).tolist() == [1, 3]
