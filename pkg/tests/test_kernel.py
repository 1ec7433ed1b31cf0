import numpy as np
import pytest
from hypothesis import given, strategies as st

from vanse_lbm.errors import ConfigurationError, NumericalBreakdown
from vanse_lbm.fields import Grid, PopulationField
from vanse_lbm.kernel import (
    SchemeConfig,
    Stepper,
    cell_void_integral,
    check_void_fraction,
    collide_and_stream,
    equilibrium,
    equilibrium_all,
    equilibrium_moments,
    equilibrium_third_moment_full,
    guo_forcing_all,
    guo_forcing_term,
    initialize,
    macro_from_populations,
    pressure_correction_force,
    summed_moments,
)
from vanse_lbm.lattice import make_lattice

D2Q9 = make_lattice(2)


def _xi(lat, v):
    return int(np.flatnonzero((lat.velocities == v).all(axis=1))[0])


def test_scheme_config_validation():
    with pytest.raises(ConfigurationError):
        SchemeConfig(0.5)
    with pytest.raises(ConfigurationError):
        SchemeConfig(0.6, variant="other")
    cfg = SchemeConfig(0.53)
    assert cfg.viscosity == pytest.approx(0.01, rel=1e-14)


def test_equilibrium_examples():
    for i in range(9):
        assert equilibrium(i, 0.7, [0.0, 0.0], D2Q9) == pytest.approx(D2Q9.w[i] * 0.7, rel=1e-15)
    assert equilibrium(0, 0.9, [0.0, 0.0], D2Q9) == pytest.approx(0.4, rel=1e-15)
    i = _xi(D2Q9, [1, 0])
    # independent scalar evaluation: w (1 + 3 cu + 4.5 cu^2 - 1.5 u^2)
    expected = (1 / 9) * (1 + 3 * 0.1 + 4.5 * 0.01 - 1.5 * 0.01)
    assert equilibrium(i, 1.0, [0.1, 0.0], D2Q9) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.147777777777, rel=1e-11)


@pytest.mark.parametrize("d", [1, 2, 3])
@given(seed=st.integers(0, 2**32 - 1))
def test_equilibrium_moments_match_direct_summation(d, seed):
    lat = make_lattice(d)
    rng = np.random.default_rng(seed)
    m0 = rng.uniform(0.05, 1.0)
    u = rng.uniform(-0.05, 0.05, d)
    f = np.array([equilibrium(i, m0, u, lat) for i in range(lat.Q)])
    S = summed_moments(f, lat)
    M = equilibrium_moments(m0, u, lat)
    # relative to the size of the summands, which is m0
    for k in range(3):
        assert np.abs(S[k] - M[k]).max() <= 1e-13 * m0
    for a in range(d):
        assert abs(S[3][a, a, a] - M[3][a, a, a]) <= 1e-13 * m0
    assert np.abs(S[3] - equilibrium_third_moment_full(m0, u, lat)).max() <= 1e-13 * m0


def test_equilibrium_moments_example():
    m0, u = 0.525, np.array([0.1, 0.0])
    S = summed_moments(equilibrium_all(m0, u, D2Q9), D2Q9)
    M = equilibrium_moments(m0, u, D2Q9)
    for k in range(3):
        assert np.abs(np.asarray(S[k]) - M[k]).max() <= 1e-14
    assert np.allclose(M[2], m0 / 3 * np.eye(2) + m0 * np.outer(u, u))


@pytest.mark.parametrize("d", [1, 2, 3])
@given(seed=st.integers(0, 2**32 - 1), tau=st.floats(0.501, 2.0))
def test_forcing_moments(d, seed, tau):
    lat = make_lattice(d)
    cfg = SchemeConfig(tau, quadrature_dims=1)
    rng = np.random.default_rng(seed)
    u = rng.uniform(-0.1, 0.1, d)
    F = rng.uniform(-0.01, 0.01, d)
    om = np.array([guo_forcing_term(i, u, F, cfg, lat) for i in range(lat.Q)])
    S0, S1, S2, _ = summed_moments(om, lat)
    k = 1 - 1 / (2 * tau)
    assert abs(S0) <= 1e-13
    assert np.abs(S1 - k * F).max() <= 1e-13
    assert np.abs(S2 - k * (np.outer(F, u) + np.outer(u, F))).max() <= 1e-13


def test_forcing_example():
    cfg = SchemeConfig(0.53)
    i = _xi(D2Q9, [1, 0])
    val = guo_forcing_term(i, [0.0, 0.0], [1.0, 0.0], cfg, D2Q9)
    assert val == pytest.approx((1 - 1 / 1.06) * (1 / 9) * 3, rel=1e-13)
    assert val == pytest.approx(0.018868, rel=1e-4)


def test_pressure_correction_force():
    assert np.all(pressure_correction_force(1.3, [0.0, 0.0]) == 0)
    assert np.allclose(pressure_correction_force(1.0, [0.3, 0.0]), [0.1, 0.0], atol=1e-16)
    assert np.allclose(pressure_correction_force(0.9, [0.1, -0.2]), [0.03, -0.06], atol=1e-16)


def test_macro_examples():
    cfg = SchemeConfig(0.6)
    f = equilibrium_all(0.9, np.array([0.05, 0.0]), D2Q9)
    rho, u = macro_from_populations(f, 0.9, [0.0, 0.0], D2Q9, cfg)
    assert rho == pytest.approx(1.0, rel=1e-14)
    assert np.allclose(u, [0.05, 0.0], atol=1e-15)
    f = np.zeros(9)
    f[0] = 0.9
    _, u = macro_from_populations(f, 1.0, [0.002, 0.0], D2Q9, cfg)
    assert u[0] == pytest.approx(0.001 / 0.9, rel=1e-14) and u[1] == 0
    f = np.zeros(9)
    f[0] = 0.5
    rho, u = macro_from_populations(f, 0.5, [0.0, 0.0], D2Q9, cfg)
    assert rho == 1.0 and np.all(u == 0)


def test_macro_breakdown_reports_cell():
    cfg = SchemeConfig(0.6)
    f = np.full((9, 3, 3), 0.1)
    f[:, 1, 2] = 0.0
    with pytest.raises(NumericalBreakdown) as exc:
        macro_from_populations(f, np.ones((3, 3)), np.zeros((2, 3, 3)), D2Q9, cfg, step=7)
    assert exc.value.cell == (1, 2) and exc.value.step == 7
    assert "step 7" in str(exc.value)


def test_cell_void_integral_variants():
    phi = np.array([0.0, 0.2, 0.5, 0.9, 0.0])
    assert cell_void_integral(phi, (2,), SchemeConfig(0.6, "consistent", 1)) == pytest.approx(0.525, abs=1e-15)
    assert cell_void_integral(phi, (2,), SchemeConfig(0.6, "legacy", 1)) == 0.5
    assert cell_void_integral(np.full((4, 4), 0.5), (1, 1), SchemeConfig(0.6)) == pytest.approx(0.5, abs=1e-15)


def test_void_fraction_checks():
    with pytest.raises(ConfigurationError):
        check_void_fraction(np.array([0.5, 0.0, 0.4]))


def test_low_void_fraction_is_logged(caplog):
    check_void_fraction(np.array([0.5, 0.005]))
    assert "below" in caplog.text


def test_initialize_examples():
    phi = np.full((4, 4), 0.9)
    u = np.zeros((2, 4, 4))
    f = initialize(phi, u, D2Q9)
    assert f[0, 0, 0] == pytest.approx(0.4, rel=1e-15)
    rng = np.random.default_rng(1)
    phi = rng.uniform(0.1, 0.9, (4, 4))
    u = rng.uniform(-0.05, 0.05, (2, 4, 4))
    f = initialize(phi, u, D2Q9)
    m0 = f.sum(axis=0)
    assert np.allclose(m0, phi, rtol=1e-15)
    j = np.einsum("ia,i...->a...", D2Q9.velocities.astype(float), f)
    assert np.allclose(j, phi * u, atol=1e-16)
    with pytest.raises(ConfigurationError):
        initialize(np.zeros((4, 4)), u, D2Q9)


def _random_setup(d, n, seed, variant="consistent", qd=None):
    lat = make_lattice(d)
    grid = Grid(d, n)
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.2, 0.9, grid.shape)
    u = rng.uniform(-0.03, 0.03, (d,) + grid.shape)
    fext = rng.uniform(-1e-3, 1e-3, (d,) + grid.shape)
    cfg = SchemeConfig(0.57, variant, qd or d)
    return lat, grid, phi, initialize(phi, u, lat), fext, cfg


@pytest.mark.parametrize("d,variant,qd", [
    (1, "consistent", 1), (2, "consistent", 2), (2, "consistent", 1), (2, "legacy", 2),
    (3, "consistent", 3), (3, "legacy", 3),
])
def test_compiled_step_matches_reference_bitwise(d, variant, qd):
    lat, grid, phi, f0, fext, cfg = _random_setup(d, 6, 3, variant, qd)
    pop = PopulationField(lat, grid, f0.copy())
    st_ = Stepper(lat, grid, cfg)
    st_.set_populations(f0)
    st_.set_void_fraction(phi)
    st_.set_external_force(fext)
    for _ in range(5):
        collide_and_stream(pop, phi, fext, cfg)
        st_.step()
    assert np.array_equal(st_.populations(), pop.current)
    rho, u = st_.macroscopic()
    assert np.all(np.isfinite(rho)) and u.shape == (d,) + grid.shape


def self_consistent_mass(m, lat):
    """Nearest float to ``m`` whose equilibrium populations sum back to it exactly."""
    cand = m
    for _ in range(1000):
        f = lat.w * cand
        total = f[0]
        for v in f[1:]:
            total = total + v
        if total == cand:
            return cand
        cand = np.nextafter(cand, np.inf)
    raise AssertionError("no self-consistent mass found")


@pytest.mark.parametrize("d", [1, 2, 3])
def test_uniform_equilibrium_is_exact_fixed_point(d):
    lat, grid = make_lattice(d), Grid(d, 5)
    phi = np.full(grid.shape, self_consistent_mass(0.37, lat))
    f0 = initialize(phi, np.zeros((d,) + grid.shape), lat)
    for variant in ("consistent", "legacy"):
        st_ = Stepper(lat, grid, SchemeConfig(0.53, variant, d))
        st_.set_populations(f0)
        st_.set_void_fraction(phi)
        for _ in range(20):
            st_.step()
        assert np.array_equal(st_.populations(), f0)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_mass_conserved_with_forcing(d):
    lat, grid, phi, f0, fext, cfg = _random_setup(d, 8, 11)
    st_ = Stepper(lat, grid, cfg)
    st_.set_populations(f0)
    st_.set_void_fraction(phi)
    st_.set_external_force(fext)
    m_start = st_.total_mass()
    st_.step()
    assert abs(st_.total_mass() - m_start) <= 1e-12 * m_start


def test_stepper_reports_breakdown():
    lat, grid, phi, f0, fext, cfg = _random_setup(2, 6, 5)
    f0[:, 2, 3] = 0.0
    st_ = Stepper(lat, grid, cfg)
    st_.set_populations(f0)
    st_.set_void_fraction(phi)
    with pytest.raises(NumericalBreakdown) as exc:
        st_.step()
    assert exc.value.cell == (2, 3) and exc.value.step == 0


@pytest.mark.parametrize("workers", [2, 3, 4, 7])
def test_worker_count_does_not_change_results(workers):
    lat, grid, phi, f0, fext, cfg = _random_setup(3, 7, 2)
    runs = []
    for w in (1, workers):
        st_ = Stepper(lat, grid, cfg, workers=w)
        st_.set_populations(f0)
        st_.set_void_fraction(phi)
        st_.set_external_force(fext)
        for _ in range(4):
            st_.step()
        runs.append(st_.populations())
        st_.close()
    assert np.array_equal(runs[0], runs[1])


def test_consistent_state_moments():
    lat, grid, phi, _, fext, cfg = _random_setup(2, 6, 9)
    rng = np.random.default_rng(4)
    rho = 1 + rng.uniform(-1e-3, 1e-3, grid.shape)
    u = rng.uniform(-0.02, 0.02, (2,) + grid.shape)
    st_ = Stepper(lat, grid, cfg)
    st_.set_void_fraction(phi)
    st_.set_external_force(fext)
    st_.set_consistent_state(rho, u)
    r, v = st_.macroscopic()
    assert np.allclose(r, rho, rtol=1e-14)
    assert np.allclose(v, u, atol=1e-15)
