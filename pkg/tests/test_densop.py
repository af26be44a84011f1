import numpy as np
import pytest

from coherent_kinetics.densop import (
    BasisLabel,
    TraceClass,
    hermiticity_defect,
    matrix_element,
    min_eigenvalue,
    minimal_basis,
    mixture,
    new_density,
    pure_state,
    reduced_basis,
    resolve,
    site_basis,
    superposition,
    trace,
)
from coherent_kinetics.errors import (
    BadProbability,
    DimensionMismatch,
    NegativeEigenvalue,
    NonHermitian,
    TraceOutOfRange,
    UnknownLabel,
)


def test_maximally_mixed_two_sites_is_valid():
    rho = new_density(np.eye(2) / 2)
    assert rho.trace_class is TraceClass.NORMALIZED
    assert trace(rho) == pytest.approx(1.0)
    assert min_eigenvalue(rho) == pytest.approx(0.5)


def test_pure_projector_on_four_sites():
    rho = pure_state(1, site_basis(4))
    assert trace(rho) == 1.0
    assert min_eigenvalue(rho) == pytest.approx(0.0, abs=1e-15)
    assert hermiticity_defect(rho) == 0.0


def test_negative_eigenvalue_is_rejected():
    with pytest.raises(NegativeEigenvalue):
        new_density([[0.5, 0.6], [0.6, 0.5]])


def test_non_hermitian_is_rejected():
    with pytest.raises(NonHermitian):
        new_density([[0.5, 0.1], [0.0, 0.5]])


@pytest.mark.parametrize("diag", [[0.7, 0.7], [-0.1, 1.1]])
def test_trace_out_of_range(diag):
    with pytest.raises((TraceOutOfRange, NegativeEigenvalue)):
        new_density(np.diag(diag))


def test_normalized_requires_unit_trace_but_subnormalized_does_not():
    with pytest.raises(TraceOutOfRange):
        new_density(np.diag([0.3, 0.3]))
    rho = new_density(np.diag([0.3, 0.3]), trace_class=TraceClass.SUBNORMALIZED)
    assert trace(rho) == pytest.approx(0.6)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        new_density(np.eye(3) / 3, site_basis(2))
    with pytest.raises(DimensionMismatch):
        new_density(np.ones((2, 3)))


def test_entries_are_read_only_copy():
    source = np.eye(2) / 2
    rho = new_density(source)
    source[0, 0] = 5.0
    assert rho.entries[0, 0] == 0.5
    with pytest.raises(ValueError):
        rho.entries[0, 0] = 1.0


def test_matrix_elements_by_name():
    basis = minimal_basis()
    s = pure_state("S", basis)
    assert matrix_element(s, "S", "S") == 1
    assert matrix_element(s, "S", "T") == 0
    both = superposition({"S": 1, "T": 1}, basis)
    assert matrix_element(both, "S", "T") == pytest.approx(0.5)


def test_unknown_label():
    with pytest.raises(UnknownLabel):
        matrix_element(pure_state("S", minimal_basis()), "S", "P_S")


def test_diagonal_mixture_diagnostics():
    rho = mixture({"S": 0.3, "T": 0.7}, minimal_basis())
    assert trace(rho) == pytest.approx(1.0)
    assert min_eigenvalue(rho) == pytest.approx(0.3)


def test_maximally_mixed_four_sites():
    rho = new_density(np.eye(4) / 4)
    assert min_eigenvalue(rho) == pytest.approx(0.25)
    assert hermiticity_defect(rho) == 0.0


def test_mixture_rejects_negative_weight():
    with pytest.raises(BadProbability):
        mixture({"S": -0.1, "T": 1.1}, minimal_basis())


def test_named_site_named_round_trip():
    basis = site_basis(4)
    for label in basis:
        named = label.as_named()
        site = basis[resolve(named, basis)]
        assert site == label
        assert site.as_named() == named


def test_site_labels_respect_dimension():
    with pytest.raises(UnknownLabel):
        BasisLabel.site(5, n_sites=4)
    with pytest.raises(UnknownLabel):
        BasisLabel.site(0)


def test_site_names_must_be_distinct():
    with pytest.raises(UnknownLabel, match="distinct"):
        site_basis(2, ["S", "S"])
    basis = site_basis(3, ["S", None, None])
    assert resolve("S", basis) == 0


def test_occupation_labels_allow_a_single_walker():
    assert BasisLabel.occupation((0, 1)).value == (0, 1)
    with pytest.raises(UnknownLabel):
        BasisLabel.occupation((1, 1))


def test_reduced_basis_order():
    basis = reduced_basis()
    assert [b.display for b in basis] == ["N", "T", "S"]
    assert [b.value for b in basis] == [(0, 0), (0, 1), (1, 0)]
    assert resolve("S", basis) == 2


def test_numeric_labels_are_one_based():
    basis = site_basis(4)
    assert resolve(1, basis) == 0
    assert resolve("4", basis) == 3
