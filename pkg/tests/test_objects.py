import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ctxbroadcast.catalog import MAZUREK_BLOCH, mazurek, norm1_example, norm1_model
from ctxbroadcast.diagnostics import repeatable_model
from ctxbroadcast.errors import ArgumentError, ShapeError, UnsupportedDimension
from ctxbroadcast.linalg import is_psd, ket, projector, random_density_matrix, random_unitary
from ctxbroadcast.objects import (
    I2,
    Effect,
    NoiseSetting,
    Povm,
    Scenario,
    State,
    apply_noise,
    bloch_operator,
    bloch_vector,
    born,
    clamp_probability,
    load_scenario,
    mp_channel,
    mp_heisenberg,
    ontological_probability,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    validate,
)

seeds = st.integers(0, 2**32 - 1)
unit = st.floats(0, 1)


def by_name(items):
    return {x.name: x for x in items}


def test_born_matched_pair_is_one():
    s = mazurek()
    assert born(by_name(s.preparations)["s10"], by_name(s.measurements)["M1"].effects[0]) == pytest.approx(1.0)


@pytest.mark.parametrize("mu, eta", [(0.0, 1.0), (0.3, 0.8), (1.0, 0.25), (0.7, 0.0)])
def test_born_noisy_pair_matches_bloch_oracle(mu, eta):
    s = mazurek(mu, eta)
    p = born(by_name(s.preparations)["s20"], by_name(s.measurements)["M2"].effects[0])
    x, z = MAZUREK_BLOCH[2, 0]
    # dephasing scales x by mu, depolarizing scales the effect's Bloch vector by eta
    oracle = 0.5 * (1 + eta * (mu * x * x + z * z))
    assert p == pytest.approx(oracle, abs=1e-12)
    assert p == pytest.approx(0.5 * (1 + eta * (3 * mu + 1) / 4), abs=1e-12)


def test_born_identity_effect(rng):
    assert born(State(random_density_matrix(3, rng)), Effect(np.eye(3))) == pytest.approx(1.0)


def test_born_dim_mismatch():
    with pytest.raises(ShapeError):
        born(State(I2 / 2), Effect(np.eye(3)))


def test_clamping():
    assert clamp_probability(-5e-10) == 0.0
    assert clamp_probability(1 + 5e-10) == 1.0
    with pytest.raises(ArgumentError):
        clamp_probability(-1e-6)


def test_dephasing_identity_at_mu_one(rng):
    rho = random_density_matrix(2, rng)
    assert np.allclose(apply_noise(State(rho), NoiseSetting(1.0, 0.3)).op, rho)


def test_depolarizing_collapses_at_eta_zero():
    e = Effect(projector(ket(0, 2)))
    assert np.allclose(apply_noise(e, NoiseSetting(0.2, 0.0)).op, I2 / 2)


def test_full_dephasing_zeroes_x_component():
    s20 = by_name(mazurek().preparations)["s20"]
    out = apply_noise(s20, NoiseSetting(0.0, 1.0))
    assert np.allclose(bloch_vector(out.op), [0, 0, -0.5])


def test_noise_rejects_qutrit():
    with pytest.raises(UnsupportedDimension):
        apply_noise(State(np.eye(3) / 3), NoiseSetting(0.5, 0.5))


def test_noise_setting_range():
    with pytest.raises(ArgumentError):
        NoiseSetting(1.2, 0.5)


def test_mazurek_perfect_correlation():
    s = mazurek()
    preps = by_name(s.preparations)
    for m in s.measurements:
        t = m.name[1]
        for b in (0, 1):
            for bp, e in enumerate(m.effects):
                assert born(preps[f"s{t}{b}"], e) == pytest.approx(float(b == bp), abs=1e-12)


def test_mp_heisenberg_unital_on_example():
    assert np.allclose(mp_heisenberg(norm1_model(0.5), np.eye(5)), np.eye(5))


@pytest.mark.parametrize("a", [0.25, 0.5, 0.75])
def test_mp_heisenberg_fixes_example_effects(a):
    model = norm1_model(a)
    for e in norm1_example(a).matrices:
        assert np.max(np.abs(mp_heisenberg(model, e) - e)) <= 1e-12


def test_mp_heisenberg_generic_operator(rng):
    model = norm1_model(0.5)
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    a = a + a.conj().T
    effects = norm1_example(0.5).matrices
    want = sum(a[z + 2, z + 2].real * effects[z] for z in range(3))
    assert np.allclose(mp_heisenberg(model, a), want, atol=1e-12)


def test_mp_heisenberg_shape():
    with pytest.raises(ShapeError):
        mp_heisenberg(norm1_model(0.5), I2)


def test_ontological_probability_delta():
    model = norm1_model(0.5)
    povm = norm1_example(0.5)
    rho = State(projector(ket(2, 5)))
    assert ontological_probability(model, rho, povm, 0) == pytest.approx(1.0, abs=1e-12)
    assert ontological_probability(model, rho, povm, 1) == pytest.approx(0.0, abs=1e-12)


def test_ontological_probability_bad_outcome():
    with pytest.raises(ArgumentError):
        ontological_probability(norm1_model(0.5), np.eye(5) / 5, norm1_example(0.5), 3)


def test_ontological_matches_born_for_diagonal_pvm(rng):
    pvm = Povm.from_matrices([projector(ket(i, 3)) for i in range(3)], "Z")
    model = repeatable_model(pvm)
    rho = np.diag(rng.dirichlet(np.ones(3)))
    for k in range(3):
        assert ontological_probability(model, rho, pvm, k) == pytest.approx(born(rho, pvm.effects[k]), abs=1e-12)


def test_validate_mazurek_clean():
    assert validate(mazurek()) == []


def test_validate_flags_normalization():
    bad = Povm.from_matrices([np.eye(2), np.eye(2)], "double")
    report = validate(Scenario(2, (State(I2 / 2),), (bad,)))
    assert any("normalization" in line and "residual 1" in line for line in report)


def test_validate_flags_negative_state():
    rho = np.diag([1.1, -0.1])
    report = validate(Scenario(2, (State(rho, "neg"),), (Povm.from_matrices([I2]),)))
    assert any("neg" in line and "positivity" in line for line in report)


def test_validate_empty_lists():
    report = validate(Scenario(2, (), ()))
    assert len(report) == 2


def test_json_round_trip_is_lossless(tmp_path, rng):
    u = random_unitary(2, rng)
    scen = Scenario(
        2,
        (State(random_density_matrix(2, rng), "r"),),
        (Povm.from_matrices([u @ projector(ket(k, 2)) @ u.conj().T for k in range(2)], "U"),),
        {"note": "x"},
    )
    path = tmp_path / "s.json"
    save_scenario(scen, path)
    back = load_scenario(path)
    assert np.array_equal(back.preparations[0].op, scen.preparations[0].op)
    for a, b in zip(back.measurements[0].matrices, scen.measurements[0].matrices):
        assert np.array_equal(a, b)
    assert back.metadata == {"note": "x"}


@pytest.mark.parametrize("payload", ["{}", "[]", '{"dim": 2, "preparations": [{"name": "a", "matrix": [1, 2]}]}'])
def test_malformed_json(tmp_path, payload):
    path = tmp_path / "bad.json"
    path.write_text(payload)
    with pytest.raises(ArgumentError):
        load_scenario(path)


def test_dict_round_trip_through_json():
    data = json.loads(json.dumps(scenario_to_dict(mazurek(0.5, 0.5))))
    back = scenario_from_dict(data)
    assert validate(back) == []


@given(seeds)
def test_born_of_povm_sum_is_one(seed):
    rng = np.random.default_rng(seed)
    u = random_unitary(3, rng)
    pvm = [u @ projector(ket(k, 3)) @ u.conj().T for k in range(3)]
    rho = State(random_density_matrix(3, rng))
    assert sum(born(rho, e) for e in pvm) == pytest.approx(1.0, abs=1e-9)


@given(seeds, unit, unit)
def test_dephasing_composes(seed, mu1, mu2):
    rho = State(random_density_matrix(2, np.random.default_rng(seed)))
    twice = apply_noise(apply_noise(rho, NoiseSetting(mu1, 1)), NoiseSetting(mu2, 1))
    once = apply_noise(rho, NoiseSetting(mu1 * mu2, 1))
    assert np.allclose(twice.op, once.op, atol=1e-10)


@given(seeds, unit, unit)
def test_depolarizing_composes(seed, e1, e2):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=3)
    eff = Effect(bloch_operator(*(v / np.linalg.norm(v)), weight=rng.uniform(0, 1)))
    twice = apply_noise(apply_noise(eff, NoiseSetting(1, e1)), NoiseSetting(1, e2))
    assert np.allclose(twice.op, apply_noise(eff, NoiseSetting(1, e1 * e2)).op, atol=1e-10)


@given(seeds)
def test_mp_heisenberg_unital_and_positive(seed):
    rng = np.random.default_rng(seed)
    u = random_unitary(3, rng)
    response = Povm.from_matrices([u @ projector(ket(k, 3)) @ u.conj().T for k in range(3)], "G")
    states = tuple(State(random_density_matrix(3, rng)) for _ in range(3))
    from ctxbroadcast.objects import NoncontextualModel

    model = NoncontextualModel(response, states)
    assert np.allclose(mp_heisenberg(model, np.eye(3)), np.eye(3), atol=1e-10)
    w = rng.uniform(0, 1, size=3)
    v = random_unitary(3, rng)
    eff = v @ np.diag(w) @ v.conj().T
    out = mp_heisenberg(model, eff)
    assert is_psd(out, 1e-9) and is_psd(np.eye(3) - out, 1e-9)
    assert np.trace(mp_channel(model, random_density_matrix(3, rng))).real == pytest.approx(1.0)


@given(seeds)
def test_ontological_equals_born_on_fixed_points(seed):
    rho = random_density_matrix(5, np.random.default_rng(seed))
    model, povm = norm1_model(0.5), norm1_example(0.5)
    for k in range(3):
        got = ontological_probability(model, rho, povm, k)
        assert got == pytest.approx(born(rho, povm.effects[k]), abs=1e-10)
