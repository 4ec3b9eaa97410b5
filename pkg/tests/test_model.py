import numpy as np
import pytest

from contact_kam import ContactModel, PeriodicGrid, ScalarField, subsolution_check
from contact_kam.model import halfsine_subsolution_ex63


def test_hamiltonian_on_null_shell(ex63):
    # the upper fixed point lies on H = 0
    assert ex63.hamiltonian(np.pi / 2, 0.25, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert ex63.hamiltonian(0.0, 0.0, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert ex63.hamiltonian(0.0, 0.0, 1.0) == pytest.approx(0.75)


def test_gradient_values(ex63):
    assert np.allclose(ex63.gradient(np.pi / 2, 0.25, 0.0), (0.0, 1.0, 0.0), atol=1e-15)
    assert np.allclose(ex63.gradient(0.0, 1.0, 0.0), (1.0, 0.0, 0.0), atol=1e-15)


@pytest.mark.parametrize("maker", [
    lambda: ContactModel.example_63(),
    lambda: ContactModel.general("p^2 + sin(x)*u - 0.25"),
    lambda: ContactModel.general("p^2/2 + cos(x)*p + 0.3*u*sin(x)"),
])
def test_gradient_matches_finite_differences(maker):
    model = maker()
    rng = np.random.default_rng(11)
    for _ in range(100):
        x, u, p = rng.uniform(-2, 2, size=3)
        sym = np.array(model.gradient(x, u, p), dtype=float)
        fd = np.array(model.gradient_fd(x, u, p), dtype=float)
        assert np.max(np.abs(sym - fd)) < 1e-6


def test_lagrangian_closed_form(ex63):
    L, p_star = ex63.lagrangian(np.pi / 2, 0.25, 0.0)
    assert L == pytest.approx(0.0, abs=1e-15)
    assert p_star == 0.0
    free = ContactModel.classical(1.0, "0")
    L, p_star = free.lagrangian(0.3, 0.0, 1.0)
    assert L == pytest.approx(0.25)
    assert p_star == pytest.approx(0.5)


def test_general_legendre_matches_closed_form(ex63):
    general = ContactModel.general("p^2 + sin(x)*u - 0.25")
    rng = np.random.default_rng(7)
    for _ in range(60):
        x = rng.uniform(-np.pi, np.pi)
        u = rng.uniform(-2, 2)
        v = rng.uniform(-6, 6)
        L_ref, p_ref = ex63.lagrangian(x, u, v)
        L_gen, p_gen = general.lagrangian(x, u, v)
        assert L_gen == pytest.approx(L_ref, abs=1e-10)
        assert p_gen == pytest.approx(p_ref, abs=1e-10)


def test_legendre_fenchel_identity(ex63):
    rng = np.random.default_rng(5)
    for _ in range(100):
        x = rng.uniform(-np.pi, np.pi)
        u = rng.uniform(-2, 2)
        v = rng.uniform(-6, 6)
        L, p_star = ex63.lagrangian(x, u, v)
        assert p_star * v - ex63.hamiltonian(x, u, p_star) == pytest.approx(L, abs=1e-9)
        # no sampled momentum beats the maximizer
        ps = rng.uniform(-8, 8, size=200)
        vals = ps * v - np.asarray(ex63.hamiltonian(x, u, ps))
        assert np.max(vals) <= L + 1e-6


def test_u_lipschitz_bound(ex63):
    lam = ex63.u_lipschitz_bound()
    assert lam == pytest.approx(1.0, abs=1e-4)
    rng = np.random.default_rng(2)
    for _ in range(100):
        x = rng.uniform(-np.pi, np.pi)
        u1, u2 = rng.uniform(-2, 2, size=2)
        p = rng.uniform(-3, 3)
        dh = abs(ex63.hamiltonian(x, u1, p) - ex63.hamiltonian(x, u2, p))
        assert dh <= lam * abs(u1 - u2) + 1e-12


def test_convexity_warning():
    with pytest.warns(UserWarning):
        ContactModel.general("u - p^2")


def test_subsolution_halfsine_field(ex63):
    grid = PeriodicGrid(512)
    report = subsolution_check(ex63, halfsine_subsolution_ex63(grid))
    assert report.passed, f"max residual {report.max_residual}"


def test_subsolution_constant_ten_fails(ex63):
    grid = PeriodicGrid(512)
    report = subsolution_check(ex63, ScalarField.constant(grid, 10.0))
    assert not report.passed
    # violation is concentrated where the rate is positive
    assert report.max_residual > 5.0


def test_subsolution_exact_solution():
    model = ContactModel.constant_rate(1.0)
    grid = PeriodicGrid(64)
    report = subsolution_check(model, ScalarField.constant(grid, 0.25))
    assert report.passed
    assert report.max_residual == pytest.approx(0.0, abs=1e-15)


def test_strict_subsolution(ex63):
    grid = PeriodicGrid(256)
    fld = ScalarField.from_function(grid, lambda x: 0.2 * np.sin(x))
    report = subsolution_check(ex63, fld, strict=True)
    assert report.passed
    assert report.max_residual < -0.02
