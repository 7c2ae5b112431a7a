import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import special_ortho_group

from conftest import central_diff, rel_err
from mhe.energy import (
    EnergySpec,
    EnergyValue,
    energy,
    energy_and_gradient,
    energy_gradient,
    geodesic_angles,
    half_space_expand,
    log_surrogate,
    minibatch_energy,
    minibatch_gradient,
    normalize,
    orthonormal_reg,
    output_minibatch_energy,
    output_minibatch_gradient,
    pairwise_angles,
    validate_spec,
)
from mhe.errors import (
    BatchTooSmall,
    GeodesicWithBeta,
    HalfSpaceOnOutput,
    InvalidConfig,
    LabelOutOfRange,
    NonFiniteEnergy,
    ZeroNormNeuron,
)

ANTIPODAL = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
EQUILATERAL = np.array([[np.cos(t), np.sin(t), 0.0] for t in 2 * np.pi * np.arange(3) / 3])


def random_config(n=6, dim=4, seed=0):
    return np.random.default_rng(seed).standard_normal((n, dim))


# -- normalize / half-space expansion ---------------------------------------


def test_normalize_examples():
    np.testing.assert_allclose(normalize([[3.0, 4.0]]), [[0.6, 0.8]], atol=1e-15)
    np.testing.assert_array_equal(normalize([[1.0, 0.0, 0.0]]), [[1.0, 0.0, 0.0]])
    with pytest.raises(ZeroNormNeuron) as info:
        normalize([[0.0, 0.0]])
    assert info.value.index == 0


def test_normalize_reports_first_bad_index():
    with pytest.raises(ZeroNormNeuron) as info:
        normalize([[1.0, 2.0], [1e-13, 0.0], [0.0, 0.0]])
    assert info.value.index == 1
    assert info.value.to_dict()["index"] == 1


def test_normalize_unit_norms(rng):
    u = normalize(rng.standard_normal((50, 7)) * rng.uniform(0.1, 100, (50, 1)))
    np.testing.assert_allclose(np.linalg.norm(u, axis=1), 1.0, atol=1e-12)


def test_half_space_expand_examples():
    np.testing.assert_array_equal(half_space_expand([[1.0, 0.0]]), [[1.0, 0.0], [-1.0, 0.0]])
    np.testing.assert_allclose(
        half_space_expand([[0.6, 0.8], [0.0, 1.0]]),
        [[0.6, 0.8], [0.0, 1.0], [-0.6, -0.8], [0.0, -1.0]],
    )
    x = random_config(5, 3)
    out = half_space_expand(x)
    assert out.shape == (10, 3)
    np.testing.assert_array_equal(out[:5], x)


# -- energy values ----------------------------------------------------------


def test_energy_antipodal_s1():
    v = energy(ANTIPODAL, EnergySpec(s=1))
    assert v.total == pytest.approx(1.0, abs=1e-15)
    assert v.pair_count == 2
    assert v.normalized == pytest.approx(0.5)


def test_energy_antipodal_log_kernel():
    assert energy(ANTIPODAL, EnergySpec(s=0)).total == pytest.approx(-2 * math.log(2), abs=1e-14)


def test_energy_antipodal_geodesic():
    v = energy(ANTIPODAL, EnergySpec(s=1, distance="geodesic"))
    assert v.total == pytest.approx(2 / math.pi, abs=1e-12)


def test_energy_equilateral():
    assert energy(EQUILATERAL, EnergySpec(s=1)).total == pytest.approx(6 / math.sqrt(3), abs=1e-12)


@pytest.mark.parametrize("s", [0.0, 1.0, 2.0, 3.5])
@pytest.mark.parametrize("distance", ["euclidean", "geodesic"])
def test_coincident_pair_is_infinite(s, distance):
    x = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    v = energy(x, EnergySpec(s=s, distance=distance))
    assert v.total == np.inf and not v.is_finite
    with pytest.raises(NonFiniteEnergy):
        energy_gradient(x, EnergySpec(s=s, distance=distance))


def test_half_space_infinite_on_antipodal_pair():
    # A neuron and its negation become coincident after expansion.
    v = energy(ANTIPODAL, EnergySpec(s=1, space="half"))
    assert v.total == np.inf


def test_half_space_pair_count_and_value():
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    v = energy(x, EnergySpec(s=1, space="half"))
    # four points at 90 degree spacing on the circle
    expected = 4 * (2 / math.sqrt(2) + 1 / 2)
    assert v.pair_count == 12
    assert v.total == pytest.approx(expected, rel=1e-14)
    assert v.normalized == pytest.approx(expected / 12)


def test_weighted_energy_matches_direct_sum(rng):
    x = rng.standard_normal((5, 3))
    beta = rng.uniform(0.5, 3.0, 5)
    p = beta[:, None] * normalize(x)
    direct = sum(np.linalg.norm(p[i] - p[j]) ** -2.0 for i in range(5) for j in range(5) if i != j)
    v = energy(x, EnergySpec(s=2, beta=tuple(beta)))
    assert v.total == pytest.approx(direct, rel=1e-13)
    assert v.normalized == pytest.approx(direct / 20)


def test_generic_energy_matches_direct_loops(rng):
    x = rng.standard_normal((6, 4))
    u = normalize(x)
    for s in (0.0, 1.0, 2.5):
        for distance in ("euclidean", "geodesic"):
            def dist(a, b):
                if distance == "euclidean":
                    return np.linalg.norm(a - b)
                return math.acos(np.clip(a @ b, -1, 1))

            f = (lambda z: math.log(1 / z)) if s == 0 else (lambda z: z ** -s)
            want = sum(f(dist(u[i], u[j])) for i in range(6) for j in range(6) if i != j)
            got = energy(x, EnergySpec(s=s, distance=distance)).total
            assert got == pytest.approx(want, rel=1e-12)


def test_energy_value_roundtrip():
    v = EnergyValue.from_total(np.inf, 3)
    assert EnergyValue.from_dict({**v.to_dict(), "total": "Infinity"}).total == np.inf
    w = EnergyValue.from_total(2.5, 4)
    assert EnergyValue.from_dict(w.to_dict()) == w


def test_spec_validation():
    with pytest.raises(InvalidConfig):
        EnergySpec(s=-1)
    with pytest.raises(InvalidConfig):
        EnergySpec(distance="manhattan")
    with pytest.raises(InvalidConfig):
        EnergySpec(beta=(1.0, 0.0))
    with pytest.raises(GeodesicWithBeta):
        EnergySpec(distance="geodesic", beta=(1.0, 2.0))
    with pytest.raises(InvalidConfig):
        energy(random_config(3, 3), EnergySpec(beta=(1.0, 2.0)))


def test_validate_spec_roles():
    with pytest.raises(HalfSpaceOnOutput):
        validate_spec(EnergySpec(space="half"), "output")
    validate_spec(EnergySpec(space="half"), "hidden")
    # Construction already refuses the geodesic + beta combination.
    with pytest.raises(GeodesicWithBeta):
        validate_spec(EnergySpec(distance="geodesic", beta=(1.0, 1.0)), "hidden")


# -- gradients --------------------------------------------------------------

GRID = [
    EnergySpec(s=s, distance=dist, space=space)
    for s, dist, space in itertools.product([0.0, 1.0, 2.0], ["euclidean", "geodesic"], ["full", "half"])
]


@pytest.mark.parametrize("dim", [3, 4, 8])
@pytest.mark.parametrize("spec", GRID, ids=lambda sp: f"s{sp.s:g}-{sp.distance}-{sp.space}")
def test_gradient_matches_finite_differences(spec, dim):
    x = random_config(6, dim, seed=dim)
    g = energy_gradient(x, spec)
    fd = central_diff(lambda w: energy(w, spec).total, x)
    assert rel_err(g, fd) < 1e-5


@pytest.mark.parametrize("s", [0.0, 1.0, 2.0])
@pytest.mark.parametrize("space", ["full", "half"])
def test_weighted_gradient_matches_finite_differences(s, space):
    x = random_config(6, 4, seed=7)
    spec = EnergySpec(s=s, space=space, beta=(10.0, 1.0, 2.0, 0.5, 1.0, 3.0))
    g = energy_gradient(x, spec)
    fd = central_diff(lambda w: energy(w, spec).total, x)
    assert rel_err(g, fd) < 1e-5


def test_gradient_example_s2_d4_n6():
    x = random_config(6, 4, seed=2024)
    spec = EnergySpec(s=2)
    fd = central_diff(lambda w: energy(w, spec).total, x)
    assert rel_err(energy_gradient(x, spec), fd) < 1e-5


@pytest.mark.parametrize("s", [0.0, 1.0, 2.0, 5.0])
def test_antipodal_pair_is_stationary(s):
    g = energy_gradient(ANTIPODAL * [[1.0], [3.0]], EnergySpec(s=s))
    assert np.max(np.linalg.norm(g, axis=1)) < 1e-10


@pytest.mark.parametrize("spec", GRID, ids=lambda sp: f"s{sp.s:g}-{sp.distance}-{sp.space}")
def test_gradient_is_tangent(spec):
    x = random_config(7, 5, seed=3) * np.arange(1, 8)[:, None]
    g = energy_gradient(x, spec)
    dots = np.abs(np.einsum("ij,ij->i", g, x))
    bound = 1e-9 * np.linalg.norm(g, axis=1) * np.linalg.norm(x, axis=1)
    assert np.all(dots <= bound)


def test_energy_and_gradient_agree_with_separate_calls():
    x = random_config(5, 3, seed=11)
    spec = EnergySpec(s=1.5, space="half")
    v, g = energy_and_gradient(x, spec)
    assert v == energy(x, spec)
    np.testing.assert_array_equal(g, energy_gradient(x, spec))


# -- invariances and identities --------------------------------------------


@pytest.mark.parametrize("spec", GRID, ids=lambda sp: f"s{sp.s:g}-{sp.distance}-{sp.space}")
def test_permutation_invariance(spec):
    x = random_config(8, 4, seed=5)
    perm = np.random.default_rng(6).permutation(8)
    a, b = energy(x, spec).total, energy(x[perm], spec).total
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


@pytest.mark.parametrize("spec", GRID, ids=lambda sp: f"s{sp.s:g}-{sp.distance}-{sp.space}")
def test_scale_invariance(spec):
    x = random_config(8, 4, seed=8)
    scales = np.random.default_rng(9).uniform(1e-3, 1e3, (8, 1))
    a, b = energy(x, spec).total, energy(x * scales, spec).total
    assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


@pytest.mark.parametrize("spec", GRID, ids=lambda sp: f"s{sp.s:g}-{sp.distance}-{sp.space}")
def test_rotation_invariance(spec):
    x = random_config(8, 4, seed=10)
    q = special_ortho_group.rvs(4, random_state=11)
    a, b = energy(x, spec).total, energy(x @ q.T, spec).total
    assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


def test_log_energy_product_identity():
    for seed in range(5):
        x = random_config(6, 3, seed=seed)
        u = normalize(x)
        prod = np.prod([np.linalg.norm(u[i] - u[j]) for i in range(6) for j in range(6) if i != j])
        e0 = energy(x, EnergySpec(s=0)).total
        assert math.exp(-e0) == pytest.approx(prod, rel=1e-9)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0, 3.0])
def test_log_surrogate_and_jensen_bound(s):
    for seed in range(5):
        x = random_config(7, 4, seed=seed)
        e0 = energy(x, EnergySpec(s=0)).total
        es = energy(x, EnergySpec(s=s))
        surrogate = log_surrogate(x, s)
        assert surrogate == pytest.approx(s * e0, rel=1e-12, abs=1e-12)
        pairs = es.pair_count
        assert surrogate <= pairs * math.log(es.total / pairs) + 1e-12


def test_log_surrogate_rejects_s0():
    with pytest.raises(InvalidConfig):
        log_surrogate(random_config(3, 3), 0.0)


def test_geodesic_euclidean_consistency(rng):
    u = normalize(rng.standard_normal((12, 5)))
    theta = pairwise_angles(u)
    chord = np.linalg.norm(u[:, None] - u[None, :], axis=2)
    np.testing.assert_allclose(chord, 2 * np.sin(theta / 2), rtol=0, atol=1e-12)
    np.testing.assert_array_equal(np.diag(theta), 0.0)


def test_geodesic_angles_near_coincidence_and_antipodality():
    eps = 1e-9
    u = normalize([[1.0, 0.0], [np.cos(eps), np.sin(eps)], [-1.0, 0.0]])
    theta = geodesic_angles(u)
    assert theta[0, 1] == pytest.approx(eps, rel=1e-6)
    assert theta[0, 2] == pytest.approx(np.pi, abs=1e-15)


# -- mini-batch estimators ---------------------------------------------------


def test_minibatch_full_batch_equals_energy():
    x = random_config(6, 4, seed=1)
    spec = EnergySpec(s=2, space="half")
    assert minibatch_energy(x, spec, list(range(6))) == energy(x, spec)
    np.testing.assert_array_equal(minibatch_gradient(x, spec, list(range(6))), energy_gradient(x, spec))


def test_minibatch_subset_and_beta():
    x = random_config(6, 4, seed=2)
    beta = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    got = minibatch_energy(x, EnergySpec(beta=beta), [1, 4, 5])
    want = energy(x[[1, 4, 5]], EnergySpec(beta=(2.0, 5.0, 6.0)))
    assert got == want


def test_minibatch_errors():
    x = random_config(6, 4)
    with pytest.raises(BatchTooSmall):
        minibatch_energy(x, EnergySpec(), [0])
    with pytest.raises(BatchTooSmall):
        minibatch_energy(x, EnergySpec(), batch_size=1, seed=0)
    with pytest.raises(InvalidConfig):
        minibatch_energy(x, EnergySpec(), [0, 0])
    with pytest.raises(InvalidConfig):
        minibatch_energy(x, EnergySpec(), [0, 6])


def test_minibatch_seeded_draw_is_deterministic():
    x = random_config(10, 3)
    a = minibatch_energy(x, EnergySpec(), batch_size=4, seed=3)
    b = minibatch_energy(x, EnergySpec(), batch_size=4, seed=3)
    assert a == b


def test_minibatch_gradient_is_unbiased_monte_carlo():
    x = random_config(6, 4, seed=21)
    spec = EnergySpec(s=2)
    full = energy_gradient(x, spec)
    rng = np.random.default_rng(22)
    draws = 20_000
    acc = np.zeros_like(x)
    for _ in range(draws):
        idx = np.sort(rng.choice(6, size=3, replace=False))
        acc += minibatch_gradient(x, spec, idx)
    mean = acc / draws
    cos = np.sum(mean * full) / (np.linalg.norm(mean) * np.linalg.norm(full))
    assert cos > 0.999
    # every ordered pair survives with probability b(b-1)/(N(N-1))
    assert rel_err(mean, full * (3 * 2) / (6 * 5)) < 0.02


def test_minibatch_expectation_is_exact_by_enumeration():
    x = random_config(6, 4, seed=23)
    spec = EnergySpec(s=1, space="half")
    subsets = list(itertools.combinations(range(6), 3))
    mean = sum(minibatch_gradient(x, spec, list(c)) for c in subsets) / len(subsets)
    np.testing.assert_allclose(mean, energy_gradient(x, spec) * 6 / 30, rtol=1e-12, atol=1e-14)


# -- output-layer data-dependent energy ---------------------------------------


def test_output_minibatch_examples():
    assert output_minibatch_energy(ANTIPODAL, [0], s=1) == pytest.approx(0.5)
    assert output_minibatch_energy(EQUILATERAL, [0, 1, 2], s=1) == pytest.approx(1 / math.sqrt(3), abs=1e-12)
    with pytest.raises(LabelOutOfRange):
        output_minibatch_energy(EQUILATERAL, [7], s=1)


def test_output_minibatch_matches_direct_sum(rng):
    w = rng.standard_normal((5, 3))
    labels = [0, 0, 3, 4, 4, 4, 1]
    u = normalize(w)
    direct = sum(np.linalg.norm(u[y] - u[j]) ** -2 for y in labels for j in range(5) if j != y)
    assert output_minibatch_energy(w, labels, s=2) == pytest.approx(direct / (7 * 4), rel=1e-13)


def test_output_minibatch_equals_normalized_energy_when_each_class_once(rng):
    w = rng.standard_normal((6, 4))
    assert output_minibatch_energy(w, range(6), s=1.5) == pytest.approx(
        energy(w, EnergySpec(s=1.5)).normalized, rel=1e-13
    )


@pytest.mark.parametrize("s", [0.0, 1.0, 2.0])
def test_output_minibatch_gradient_fd(s):
    w = random_config(5, 4, seed=31)
    labels = [0, 2, 2, 3, 3, 3]
    g = output_minibatch_gradient(w, labels, s)
    fd = central_diff(lambda v: output_minibatch_energy(v, labels, s), w)
    assert rel_err(g, fd) < 1e-5


# -- orthonormal baseline -----------------------------------------------------


def test_orthonormal_examples():
    assert orthonormal_reg(np.eye(3))[0] == 0.0
    assert orthonormal_reg(np.array([[1.0, 1.0], [0.0, 0.0]]))[0] == pytest.approx(2.0)


def test_orthonormal_gradient_fd():
    W = np.random.default_rng(4).standard_normal((4, 6))
    _, g = orthonormal_reg(W)
    fd = central_diff(lambda m: orthonormal_reg(m)[0], W)
    assert rel_err(g, fd) < 1e-5


# -- properties ---------------------------------------------------------------

configs = st.tuples(
    st.integers(2, 7), st.integers(2, 5), st.integers(0, 2**32 - 1)
).map(lambda t: np.random.default_rng(t[2]).standard_normal((t[0], t[1])))
specs = st.builds(
    EnergySpec,
    s=st.sampled_from([0.0, 0.5, 1.0, 2.0, 3.0]),
    distance=st.sampled_from(["euclidean", "geodesic"]),
    space=st.sampled_from(["full", "half"]),
)


@settings(max_examples=60, deadline=None)
@given(x=configs, spec=specs)
def test_property_pair_count_and_normalization(x, spec):
    v = energy(x, spec)
    m = x.shape[0] * (2 if spec.space == "half" else 1)
    assert v.pair_count == m * (m - 1)
    assert v.normalized == pytest.approx(v.total / v.pair_count)


@settings(max_examples=60, deadline=None)
@given(x=configs, spec=specs, c=st.floats(1e-3, 1e3))
def test_property_scale_and_tangency(x, spec, c):
    v, g = energy_and_gradient(x, spec)
    assert energy(x * c, spec).total == pytest.approx(v.total, rel=1e-10, abs=1e-10)
    dots = np.abs(np.einsum("ij,ij->i", g, x))
    assert np.all(dots <= 1e-9 * np.linalg.norm(g, axis=1) * np.linalg.norm(x, axis=1) + 1e-300)


@settings(max_examples=40, deadline=None)
@given(x=configs, s=st.floats(0.1, 4.0))
def test_property_riesz_energy_lower_bound(x, s):
    # Chords never exceed 2, so f_s(z) >= 2^-s pairwise.
    v = energy(x, EnergySpec(s=s))
    assert v.total >= v.pair_count * 2.0**-s * (1 - 1e-12)
