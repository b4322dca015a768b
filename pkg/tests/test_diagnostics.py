import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import random_rank_one_povm
from ctxbroadcast.catalog import computational_pvm, norm1_example, qutrit_nondisturb, sic_povm
from ctxbroadcast.diagnostics import (
    DeltaViolation,
    NotNorm1,
    PostprocessingInfeasible,
    StateVerdict,
    StochasticPostprocessing,
    classify_states,
    commutation_report,
    is_rank_one_povm,
    measurement_broadcast,
    merge_parallel_effects,
    norm1_decompose,
    postprocessing_lp,
    repeatable_model,
)
from ctxbroadcast.errors import ArgumentError, ShapeError
from ctxbroadcast.feasibility import Status
from ctxbroadcast.linalg import ket, projector, random_density_matrix, random_unitary
from ctxbroadcast.objects import I2, Povm, State, mp_heisenberg

seeds = st.integers(0, 2**32 - 1)
PLUS = (ket(0, 2) + ket(1, 2)) / np.sqrt(2)


def test_commutation_diagonal():
    rep = commutation_report([np.diag([1, 2, 3]), np.diag([0, 1, 0])])
    assert rep.max_norm == 0 and rep.is_commutative


@pytest.mark.parametrize("a", [0.25, 0.5, 0.75])
def test_commutation_norm1_example(a):
    e = norm1_example(a).matrices
    assert commutation_report([e[1], e[2]]).max_norm == pytest.approx(a * (1 - a) / 2, abs=1e-10)


def test_commutation_zero_plus():
    rep = commutation_report([projector(ket(0, 2)), projector(PLUS)])
    overlap = 0.5
    assert rep.max_norm == pytest.approx(np.sqrt(overlap * (1 - overlap)), abs=1e-12)
    assert rep.max_norm == pytest.approx(0.5, abs=1e-12)
    assert rep.worst_pair == (0, 1) and not rep.is_commutative


def test_commutation_dim_mismatch():
    with pytest.raises(ShapeError):
        commutation_report([I2, np.eye(3)])


def test_norm1_pvm():
    dec = norm1_decompose(computational_pvm(3))
    for g, p, f in zip(computational_pvm(3).matrices, dec.projective_parts, dec.residual_parts):
        assert np.allclose(p, g) and np.allclose(f, 0)


@pytest.mark.parametrize("a", [0.25, 0.5, 0.75])
def test_norm1_example_structure(a):
    dec = norm1_decompose(norm1_example(a))
    for p, k in zip(dec.projective_parts, (2, 3, 4)):
        assert np.allclose(p, projector(ket(k, 5)), atol=1e-9)
    plus5 = projector(ket(0, 5) + ket(1, 5))
    minus5 = projector(ket(0, 5) - ket(1, 5))
    want = [
        a * projector(ket(0, 5)) + (1 - a) * plus5,
        a * projector(ket(1, 5)),
        (1 - a) * minus5,
    ]
    for f, w in zip(dec.residual_parts, want):
        assert np.allclose(f, w, atol=1e-9)
    for i, g in enumerate(norm1_example(a).matrices):
        for j, v in enumerate(dec.eigen_vectors):
            assert (v.conj() @ g @ v).real == pytest.approx(float(i == j), abs=1e-9)


def test_norm1_sic_rejected():
    with pytest.raises(NotNorm1) as info:
        norm1_decompose(sic_povm())
    assert info.value.index == 0
    assert info.value.norm == pytest.approx(0.5)


def test_norm1_rejects_effect_without_projective_part():
    povm = Povm.from_matrices([projector(ket(0, 3)), np.diag([0, 0.5, 0.5]), np.diag([0, 0.5, 0.5])], "half")
    with pytest.raises(NotNorm1) as info:
        norm1_decompose(povm)
    assert info.value.index == 1


def test_norm1_delta_violation():
    # two effects sharing an eigenvalue-1 vector: only possible for non-POVM input
    g = projector(ket(0, 2))
    povm = Povm((*(Povm.from_matrices([g, g]).effects),), "dup")
    with pytest.raises(DeltaViolation):
        norm1_decompose(povm)


def test_postprocessing_identity():
    mother = computational_pvm(3)
    (p,) = postprocessing_lp([mother], mother)
    assert np.allclose(p.matrix.sum(axis=1), 1, atol=1e-9)
    for a, b in zip(p.apply(mother), mother.matrices):
        assert np.max(np.abs(a - b)) <= 1e-8


def test_postprocessing_coarse_graining():
    mother = computational_pvm(3)
    p = [projector(ket(i, 3)) for i in range(3)]
    target = Povm.from_matrices([p[0], p[1] + p[2]], "coarse")
    (post,) = postprocessing_lp([target], mother)
    assert np.allclose(post.matrix, [[1, 0], [0, 1], [0, 1]], atol=1e-8)


def test_postprocessing_infeasible_from_sic():
    with pytest.raises(PostprocessingInfeasible) as info:
        postprocessing_lp([computational_pvm(2)], sic_povm())
    assert info.value.report.certificate_gap >= 1e-6


def test_postprocessing_dim_mismatch():
    with pytest.raises(ShapeError):
        postprocessing_lp([computational_pvm(2)], computational_pvm(3))


def test_repeatable_model_pvm():
    model = repeatable_model(computational_pvm(3))
    for k, s in enumerate(model.epistemic_states):
        assert np.allclose(s.op, projector(ket(k, 3)))
    for g in computational_pvm(3).matrices:
        assert np.allclose(mp_heisenberg(model, g), g, atol=1e-10)


def test_repeatable_model_norm1_example():
    model = repeatable_model(norm1_example(0.4))
    for s, k in zip(model.epistemic_states, (2, 3, 4)):
        assert np.allclose(s.op, projector(ket(k, 5)), atol=1e-9)
    for g in norm1_example(0.4).matrices:
        assert np.max(np.abs(mp_heisenberg(model, g) - g)) <= 1e-10


def test_repeatable_model_fixes_postprocessings(rng):
    povm = norm1_example(0.6)
    model = repeatable_model(povm)
    p = rng.dirichlet(np.ones(2), size=3)
    for a in StochasticPostprocessing(p).apply(povm):
        assert np.max(np.abs(mp_heisenberg(model, a) - a)) <= 1e-10


def test_repeatable_model_rejects_sic():
    with pytest.raises(ArgumentError):
        repeatable_model(sic_povm())


def test_classify_single_state(rng):
    rep = classify_states([State(random_density_matrix(3, rng))])
    assert rep.verdict is StateVerdict.NON_CONTEXTUAL


def test_classify_diagonal_states():
    states = [State(np.diag([0.2, 0.8])), State(np.diag([0.6, 0.4])), State(I2 / 2)]
    rep = classify_states(states, cross_validate=True)
    assert rep.verdict is StateVerdict.NON_CONTEXTUAL
    assert rep.agrees is True


def test_classify_zero_plus():
    rep = classify_states([State(projector(ket(0, 2))), State(projector(PLUS))], cross_validate=True)
    assert rep.verdict is StateVerdict.CONTEXTUAL
    assert rep.commutation.max_norm == pytest.approx(0.5)
    assert rep.broadcast.status is Status.INFEASIBLE
    assert rep.agrees is True


def test_classify_needs_states():
    with pytest.raises(ArgumentError):
        classify_states([])


@pytest.mark.parametrize(
    "povm, rank_one",
    [(sic_povm(), True), (norm1_example(0.5), False), (computational_pvm(4), True)],
)
def test_rank_one(povm, rank_one):
    assert is_rank_one_povm(povm) is rank_one


def test_merge_parallel_effects(rng):
    povm = random_rank_one_povm(3, "split", rng)
    merged = merge_parallel_effects(povm)
    assert len(merged) == 3
    norm1_decompose(merged)
    with pytest.raises(ArgumentError):
        merge_parallel_effects(norm1_example(0.5))


def test_measurement_broadcast_qutrit_pair():
    report = measurement_broadcast(list(qutrit_nondisturb().measurements), 2)
    assert report.status is Status.INFEASIBLE


@given(seeds, st.sampled_from(["pvm", "split"]), st.integers(2, 3))
@settings(max_examples=15)
def test_norm1_implies_repeatable(seed, kind, dim):
    povm = merge_parallel_effects(random_rank_one_povm(dim, kind, np.random.default_rng(seed)))
    dec = norm1_decompose(povm)
    assert len(povm) <= dim
    model = repeatable_model(povm)
    for g in povm.matrices:
        assert np.max(np.abs(mp_heisenberg(model, g) - g)) <= 1e-10
    assert all(np.trace(p).real >= 1 - 1e-9 for p in dec.projective_parts)


@given(seeds, st.integers(2, 3), st.booleans())
@settings(max_examples=20)
def test_classification_stable_under_mixtures(seed, dim, commuting):
    rng = np.random.default_rng(seed)
    if commuting:
        u = random_unitary(dim, rng)
        states = [u @ np.diag(rng.dirichlet(np.ones(dim))) @ u.conj().T for _ in range(2)]
    else:
        states = [random_density_matrix(dim, rng) for _ in range(2)]
    before = classify_states([State(s) for s in states]).verdict
    w = rng.dirichlet(np.ones(len(states)), size=3)
    mixtures = [sum(c * s for c, s in zip(row, states)) for row in w]
    after = classify_states([State(s) for s in states + mixtures]).verdict
    assert before is after
