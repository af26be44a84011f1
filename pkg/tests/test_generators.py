import math

import numpy as np
import pytest
from scipy.linalg import expm

from coherent_kinetics import generators as gen
from coherent_kinetics import maps
from coherent_kinetics.densop import TraceClass, pure_state, site_basis, superposition
from coherent_kinetics.errors import BadRates, DimensionMismatch, KineticsError, StepTooLarge
from conftest import random_density_matrix, random_hermitian, random_state


def mixed_generator(dim=4):
    return (
        gen.amplitude_damping_generator(2, 1, 1.3, dim)
        + gen.amplitude_damping_generator(4, 3, 0.4, dim)
        + gen.dephasing_generator(1, 3, 0.7, dim)
        + gen.unitary_generator(1, 3, 0.5, -0.2, 0.9, dim)
    )


def test_liouvillian_matches_action(rng):
    g = mixed_generator()
    for _ in range(20):
        probe = random_hermitian(rng, 4) + 1j * random_hermitian(rng, 4)
        np.testing.assert_allclose(g.liouvillian.apply(probe), gen.act(g, probe), atol=1e-12)


def test_column_stacking_convention():
    a = np.arange(4).reshape(2, 2)
    np.testing.assert_array_equal(gen.vec(a), [0, 2, 1, 3])
    np.testing.assert_array_equal(gen.unvec(gen.vec(a), 2), a)


def test_sum_is_linear(rng):
    first = gen.amplitude_damping_generator(1, 2, 0.8, 3)
    second = gen.dephasing_generator(3, 2, 2.1, 3)
    total = first + second
    probe = random_hermitian(rng, 3)
    np.testing.assert_allclose(gen.act(total, probe), gen.act(first, probe) + gen.act(second, probe))
    np.testing.assert_allclose(
        total.liouvillian.matrix, first.liouvillian.matrix + second.liouvillian.matrix
    )
    assert total.kind is gen.GeneratorKind.SUM
    assert total.label == "L_12 + S_32"
    assert total.rate_scale == 2.1


def test_empty_composition():
    with pytest.raises(DimensionMismatch):
        gen.generator_of_composition([])
    zero = gen.generator_of_composition([], dim=3)
    np.testing.assert_array_equal(gen.act(zero, np.eye(3)), np.zeros((3, 3)))
    assert gen.is_trace_preserving(zero)


def test_mismatched_dims_cannot_be_summed():
    with pytest.raises(DimensionMismatch):
        gen.amplitude_damping_generator(1, 2, 1.0, 2) + gen.amplitude_damping_generator(1, 2, 1.0, 3)


def test_negative_rate_is_rejected():
    with pytest.raises(BadRates):
        gen.dephasing_generator(1, 2, -1.0, 2)


def test_full_site_generators_preserve_trace():
    assert gen.is_trace_preserving(mixed_generator())
    reduced = gen.restrict(mixed_generator(), [1, 3])
    assert reduced.dim == 2
    assert not gen.is_trace_preserving(reduced)


def test_damping_populations_decay_exponentially():
    k, t = 2.5, 0.6
    g = gen.amplitude_damping_generator(2, 1, k, 2)
    rho = gen.propagate_exact(g, pure_state(1, site_basis(2)), t)
    assert rho.entries[0, 0].real == pytest.approx(math.exp(-k * t), rel=1e-12)
    assert rho.entries[1, 1].real == pytest.approx(1 - math.exp(-k * t), rel=1e-12)
    assert rho.trace_class is TraceClass.NORMALIZED


def test_damping_coherence_decays_at_half_rate():
    k, t = 2.5, 0.6
    g = gen.amplitude_damping_generator(2, 1, k, 2)
    rho = gen.propagate_exact(g, superposition({1: 1, 2: 1}, site_basis(2)), t)
    assert abs(rho.entries[0, 1]) == pytest.approx(0.5 * math.exp(-k * t / 2), rel=1e-12)


def test_dephasing_coherence_decays_at_half_rate():
    q, t = 3.0, 0.4
    g = gen.dephasing_generator(1, 2, q, 2)
    rho = gen.propagate_exact(g, superposition({1: 1, 2: 1}, site_basis(2)), t)
    assert abs(rho.entries[0, 1]) == pytest.approx(0.5 * math.exp(-q * t / 2), rel=1e-12)
    np.testing.assert_allclose(np.diag(rho.entries).real, [0.5, 0.5], atol=1e-14)


def test_unitary_generator_matches_alpha():
    g = gen.unitary_generator(1, 2, 0.3, -0.4, 1.1, 2)
    t = 0.9
    rho = gen.propagate_exact(g, pure_state(2, site_basis(2)), t)
    alpha = maps.transition_probability_alpha(1, 2, 0.3, -0.4, 1.1, t)
    assert rho.entries[0, 0].real == pytest.approx(alpha, abs=1e-12)


def test_zero_rate_leaves_state_unchanged(rng):
    rho0 = random_state(rng, 3)
    g = gen.amplitude_damping_generator(2, 1, 0.0, 3)
    np.testing.assert_allclose(gen.propagate_exact(g, rho0, 5.0).entries, rho0.entries, atol=1e-14)


def test_propagation_keeps_states_physical(rng):
    g = mixed_generator()
    rho0 = random_state(rng, 4)
    series = gen.propagate_exact_series(g, rho0, np.linspace(0, 3, 31))
    frame = series.diagnostics()
    np.testing.assert_allclose(frame["trace"], 1.0, atol=1e-12)
    assert (frame["min_eig"] >= -1e-10).all()
    assert series.final.trace_class is TraceClass.NORMALIZED


@pytest.mark.parametrize(
    "g",
    [
        gen.amplitude_damping_generator(2, 1, 1.3, 4),
        gen.dephasing_generator(1, 3, 0.7, 4),
        gen.unitary_generator(1, 3, 0.5, -0.2, 0.9, 4),
        mixed_generator(),
    ],
    ids=["damping", "dephasing", "unitary", "sum"],
)
def test_first_order_map_is_consistent_with_the_generator(rng, g):
    rho = random_density_matrix(rng, 4)
    steps = np.geomspace(1e-2, 1e-4, 5)
    errors = []
    for dt in steps:
        moved = maps.action(gen.first_order_map(g, dt), rho)
        errors.append(np.abs((moved - rho) / dt - gen.act(g, rho)).max())
    slope, _ = np.polyfit(np.log(steps), np.log(errors), 1)
    assert slope == pytest.approx(1.0, abs=0.1)


def test_first_order_map_of_a_sum_acts_in_declared_order():
    first = gen.amplitude_damping_generator(2, 1, 1.0, 2)
    second = gen.amplitude_damping_generator(1, 2, 1.0, 2)
    step = gen.first_order_map(first + second, 1.0)
    out = maps.action(step, np.diag([1.0, 0.0]))
    np.testing.assert_allclose(np.diag(out).real, [1.0, 0.0])


def test_first_order_map_rejects_large_steps():
    with pytest.raises(StepTooLarge):
        gen.first_order_map(gen.amplitude_damping_generator(2, 1, 5.0, 2), 0.5)


def test_superoperator_has_no_kraus_form():
    reduced = gen.restrict(mixed_generator(), [1, 3])
    with pytest.raises(KineticsError):
        gen.first_order_map(reduced, 0.01)


def test_stepwise_converges_to_exact(rng):
    g = mixed_generator()
    rho0 = random_state(rng, 4)
    exact = gen.propagate_exact(g, rho0, 1.0).entries
    errors = []
    steps = [4e-3, 2e-3, 1e-3]
    for dt in steps:
        series = gen.propagate_stepwise(g, rho0, 1.0, dt, samples=2)
        errors.append(np.abs(series.final.entries - exact).max())
    assert errors[-1] < 5e-3
    slope, _ = np.polyfit(np.log(steps), np.log(errors), 1)
    assert slope == pytest.approx(1.0, abs=0.15)


def test_stepwise_sampling_grid():
    g = gen.amplitude_damping_generator(2, 1, 1.0, 2)
    series = gen.propagate_stepwise(g, pure_state(1, site_basis(2)), 1.0, 0.01, samples=11)
    np.testing.assert_allclose(series.times, np.linspace(0, 1, 11), atol=1e-15)
    assert series.final.entries[0, 0].real == pytest.approx(0.99 ** 100, rel=1e-12)


def test_stepwise_adjusts_dt_to_land_on_t_final():
    g = gen.amplitude_damping_generator(2, 1, 1.0, 2)
    series = gen.propagate_stepwise(g, pure_state(1, site_basis(2)), 1.0, 0.003)
    assert series.times[-1] == pytest.approx(1.0)
    assert len(series) == 334


def test_stepwise_enforces_the_step_guard():
    g = gen.amplitude_damping_generator(2, 1, 100.0, 2)
    with pytest.raises(StepTooLarge):
        gen.propagate_stepwise(g, pure_state(1, site_basis(2)), 1.0, 0.01)
    series = gen.propagate_stepwise(g, pure_state(1, site_basis(2)), 0.01, 0.001, step_guard=0.2)
    assert len(series) == 11


def test_stepwise_accepts_a_map_builder():
    def builder(dt):
        return maps.amplitude_damping(2, 1, 0.5 * dt, 2, dt)

    series = gen.propagate_stepwise(builder, pure_state(1, site_basis(2)), 1.0, 0.1, rate_scale=0.5)
    assert series.final.entries[0, 0].real == pytest.approx(0.95 ** 10, rel=1e-12)


def test_exact_propagation_matches_expm(rng):
    g = mixed_generator()
    rho0 = random_state(rng, 4)
    expected = gen.unvec(expm(g.liouvillian.matrix * 0.7) @ gen.vec(rho0.entries), 4)
    np.testing.assert_allclose(gen.propagate_exact(g, rho0, 0.7).entries, expected, atol=1e-12)
    assert gen.propagate_exact(g, rho0, 0.0) is rho0
