import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dislocdyn.elasticity import derive_constants
from dislocdyn.errors import CollisionError, ValidationError
from dislocdyn.micro2d import (
    ParticleSystem,
    empirical_density,
    pairwise_velocity,
    random_system,
    simulate,
    step_particles,
    write_snapshots_csv,
)

C = derive_constants(1.0, 1.0)
a = C.a


def test_single_particle_has_no_velocity():
    np.testing.assert_array_equal(pairwise_velocity(ParticleSystem([[0.3, 0.4]], [1]), C), [0.0])


@pytest.mark.parametrize("d", [0.1, 0.5, 2.0])
def test_like_signs_repel(d):
    v = pairwise_velocity(ParticleSystem([[0, 0], [d, 0]], [1, 1]), C)
    np.testing.assert_allclose(v, [-a / d, a / d], rtol=1e-14)


@pytest.mark.parametrize("d", [0.1, 0.5, 2.0])
def test_opposite_signs_attract(d):
    v = pairwise_velocity(ParticleSystem([[0, 0], [d, 0]], [1, -1]), C)
    np.testing.assert_allclose(v, [a / d, -a / d], rtol=1e-14)


def test_coincident_particles_rejected():
    with pytest.raises(CollisionError) as info:
        ParticleSystem([[0, 0], [1, 1], [0, 0]], [1, 1, -1])
    assert info.value.pair == (0, 2)


def test_sign_length_mismatch():
    with pytest.raises(ValidationError):
        ParticleSystem([[0, 0], [1, 1]], [1])


def test_euler_step_two_particles():
    s = step_particles(ParticleSystem([[0, 0], [1, 0]], [1, 1]), 0.1, C)
    np.testing.assert_allclose(s.positions, [[-0.1 * a, 0], [1 + 0.1 * a, 0]], rtol=1e-15, atol=1e-16)
    assert s.time == pytest.approx(0.1)


def test_single_particle_step_unchanged():
    s0 = ParticleSystem([[0.2, 0.7]], [-1])
    s1 = step_particles(s0, 0.5, C)
    np.testing.assert_array_equal(s1.positions, s0.positions)


def test_step_guard_detects_collision():
    # an attracting pair closing in one step
    s = ParticleSystem([[0, 0], [0.01, 0]], [1, -1])
    with pytest.raises(CollisionError):
        step_particles(s, 0.01 / (2 * a / 0.01) * 1.0000001, C)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_x2_bit_identical(seed):
    s0 = random_system(np.random.default_rng(seed), 5, 4)
    s1 = step_particles(s0, 1e-5, C)
    np.testing.assert_array_equal(s1.positions[:, 1], s0.positions[:, 1])


@given(st.integers(0, 2**32 - 1), st.floats(-3, 3))
@settings(max_examples=20, deadline=None)
def test_translation_equivariance(seed, shift):
    s0 = random_system(np.random.default_rng(seed), 4, 4)
    moved = ParticleSystem(s0.positions + [shift, 0.0], s0.signs)
    a_traj = simulate(s0, 1e-5, 5, C)
    b_traj = simulate(moved, 1e-5, 5, C)
    np.testing.assert_allclose(b_traj[-1].positions - [shift, 0.0], a_traj[-1].positions, atol=1e-9)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_global_sign_flip(seed):
    s0 = random_system(np.random.default_rng(seed), 3, 5)
    flipped = ParticleSystem(s0.positions, -s0.signs)
    np.testing.assert_array_equal(pairwise_velocity(s0, C), pairwise_velocity(flipped, C))


def test_like_sign_separation_nondecreasing():
    s = ParticleSystem([[0.0, 0.0], [0.3, 0.0]], [1, 1])
    seps = [p.positions[1, 0] - p.positions[0, 0] for p in simulate(s, 1e-3, 500, C)]
    assert np.all(np.diff(seps) >= 0)


class TestEmpiricalDensity:
    def test_empty(self):
        tp, tm = empirical_density(ParticleSystem(np.zeros((0, 2)), []), 16, 0.05)
        assert not tp.values.any() and not tm.values.any()

    def test_single_plus(self):
        tp, tm = empirical_density(ParticleSystem([[0.98, 0.5]], [1]), 32, 0.05)
        assert tp.integral() == pytest.approx(1.0, abs=1e-12)
        assert not tm.values.any()
        assert tp.values.min() >= 0

    def test_total_mass(self):
        s = random_system(np.random.default_rng(1), 7, 3)
        tp, tm = empirical_density(s, (24, 20), 0.03)
        assert tp.integral() + tm.integral() == pytest.approx(10.0, abs=1e-11)
        assert tm.integral() == pytest.approx(3.0, abs=1e-11)

    def test_periodized_bump_matches_analytic_normalization(self):
        # a resolved Gaussian already integrates to ~1 without the discrete rescale
        tp, _ = empirical_density(ParticleSystem([[0.5, 0.5]], [1]), 128, 0.05)
        x = np.arange(128) / 128 - 0.5
        g = np.exp(-0.5 * (x / 0.05) ** 2) / (np.sqrt(2 * np.pi) * 0.05)
        np.testing.assert_allclose(tp.values, np.outer(g, g), rtol=1e-8, atol=1e-8)

    def test_outside_cell_rejected(self):
        with pytest.raises(ValidationError):
            empirical_density(ParticleSystem([[1.2, 0.5]], [1]), 16, 0.05)


def test_csv_export(tmp_path):
    traj = simulate(ParticleSystem([[0.1, 0.2], [0.4, 0.2]], [1, -1]), 1e-4, 2, C)
    p = tmp_path / "p.csv"
    write_snapshots_csv(p, traj)
    lines = p.read_text().splitlines()
    assert lines[0] == "time,index,sign,x1,x2"
    assert len(lines) == 1 + 3 * 2
    assert lines[2].split(",")[1:3] == ["1", "-1"]
