import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from kinsym.equivtrans import catalog_map, identity
from kinsym.expr import parse
from kinsym.kinsim import (
    CharacteristicError, CharState, GaussianDatum, Solution, StepConfig, Surface, SurfaceError, check_surface,
    compare_with_grid, convergence_study, evaluate_solution, fd_residual, flux_through_surface,
    integrate_characteristic, integrate_quasilinear, map_solution,
)

DATUM = GaussianDatum(x0=0.3, c0=-0.2, sx=0.5, sc=0.4)


# --- characteristics ---------------------------------------------------------------

def test_free_streaming():
    s = integrate_characteristic("0", CharState(0, 1, 2, 5), 3).final
    assert s.as_tuple() == pytest.approx((3, 7, 2, 5), abs=1e-12)


def test_oscillator_quarter_period():
    s = integrate_characteristic(parse("-x"), CharState(0, 1, 0, 1), math.pi / 2).final
    assert abs(s.x) <= 1e-8 and s.w == 1.0
    assert s.c == pytest.approx(-1, abs=1e-9)


def test_linear_friction():
    s = integrate_characteristic(parse("c"), CharState(0, 0, 1, 1), 1).final
    assert (s.x, s.c, s.w) == pytest.approx((math.e - 1, math.e, 1 / math.e), rel=1e-9)


def test_dense_output_and_csv():
    tr = integrate_characteristic(parse("-x"), CharState(0, 1, 0, 1), 2.0, t_eval=np.linspace(0, 2, 5))
    mid = tr(1.0)
    assert (mid.x, mid.c) == pytest.approx(O.oscillator((1, 0), 1.0), abs=1e-9)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,x,c,w" and len(lines) == 6


def test_blow_up_is_reported():
    with pytest.raises(CharacteristicError) as info:
        integrate_characteristic(parse("c^2"), CharState(0, 0, 1, 1), 2.0)
    assert info.value.t_blowup == pytest.approx(1.0, abs=1e-2)


def test_force_validation():
    with pytest.raises(ValueError):
        integrate_characteristic(parse("P/f"), CharState(0, 0, 1, 1), 1, params={"P": 1})
    with pytest.raises(ValueError):
        integrate_characteristic(parse("P*c"), CharState(0, 0, 1, 1), 1)


def test_quasilinear_reduces_to_linear_case():
    a = integrate_quasilinear(parse("-x - c/3"), CharState(0, 1, 0.5, 2), 1.5).final
    b = integrate_characteristic(parse("-x - c/3"), CharState(0, 1, 0.5, 2), 1.5).final
    assert a.as_tuple() == pytest.approx(b.as_tuple(), rel=1e-9)


@settings(max_examples=25)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 5))
def test_weight_stays_positive(x0, c0, w0):
    s = integrate_characteristic(parse("-x - c/2 + c^2/4"), CharState(0, x0, c0, w0), 1.0).final
    assert s.w > 0


def test_convergence_order():
    study = convergence_study()
    assert all(25 <= r <= 40 for r in study["ratios"])
    assert all(abs(p - 5) <= 0.35 for p in study["orders"])


# --- solutions --------------------------------------------------------------------

GRID = np.meshgrid(np.linspace(-1.5, 1.5, 7), np.linspace(-1.2, 1.2, 7), indexing="ij")


@pytest.mark.parametrize("tt", [0.4, 1.3])
def test_free_transport_solution(tt):
    X, C = GRID
    got = evaluate_solution("0", DATUM, tt, X, C)
    assert np.allclose(got, O.free_transport(DATUM, tt, X, C), atol=1e-10)


def test_constant_force_solution():
    X, C = GRID
    got = evaluate_solution(parse("g"), DATUM, 0.9, X, C, params={"g": -0.7})
    assert np.allclose(got, O.constant_force(-0.7, DATUM, 0.9, X, C), atol=1e-10)


def test_linear_friction_solution():
    X, C = GRID
    got = evaluate_solution(parse("c"), DATUM, 0.8, X, C)
    assert np.allclose(got, O.linear_friction(DATUM, 0.8, X, C), atol=1e-9)


def test_scalar_evaluation():
    v = evaluate_solution("0", DATUM, 0.5, 0.2, 0.1)
    assert isinstance(v, float) and v == pytest.approx(float(DATUM(0.2 - 0.05, 0.1)))


def test_weight_identity_forward_backward():
    F = parse("-x - c/3")
    for x0, c0 in [(0.1, 0.2), (-0.4, 0.5), (0.6, -0.3)]:
        w0 = float(DATUM(x0, c0))
        s = integrate_characteristic(F, CharState(0, x0, c0, w0), 1.2).final
        assert evaluate_solution(F, DATUM, s.t, s.x, s.c) == pytest.approx(s.w, rel=1e-8)


@pytest.mark.parametrize("F, t_end", [("c", 0.25), ("-x", 0.5)])
def test_grid_oracle(F, t_end):
    datum = GaussianDatum(sx=1.25, sc=1.25)
    err = compare_with_grid(parse(F), datum, t_end, ((-8, 8), (-8, 8)), n=256)
    assert err <= 1e-2


def test_solution_residual_small():
    sol = Solution(parse("-x"), DATUM)
    pts = np.random.default_rng(2).uniform(-0.5, 0.5, (3, 20))
    r = fd_residual(parse("-x"), sol, 0.6 + 0 * pts[0], pts[1], pts[2])
    assert np.max(np.abs(r)) <= 1e-6


# --- flux ---------------------------------------------------------------------------

BOX = DATUM.box(margin=1.5)


def test_flux_at_initial_plane_is_mass():
    sol = Solution(parse("0"), DATUM)
    flux = flux_through_surface("0", sol, Surface(parse("0"), DATUM.box()))
    assert flux == pytest.approx(O.gaussian_mass(DATUM.sx, DATUM.sc), rel=1e-10)
    assert DATUM.mass == pytest.approx(O.gaussian_mass(DATUM.sx, DATUM.sc), rel=1e-14)


def test_parallel_planes_free():
    sol = Solution(parse("0"), DATUM)
    box = ((-7, 7), (-3.0, 3.0))
    a = flux_through_surface("0", sol, Surface(parse("0"), box), n=128)
    b = flux_through_surface("0", sol, Surface(parse("1.5"), box), n=128)
    assert abs(a - b) <= 1e-8 * abs(a)


@pytest.mark.parametrize("F", ["0", "-x"])
def test_flux_surface_independent(F):
    F = parse(F)
    sol = Solution(F, DATUM)
    box = ((-6, 6), (-6, 6))
    surfaces = [parse("0"), parse("1"), parse("0.1*x + 0.05*c + 0.5")]
    fluxes = [flux_through_surface(F, sol, Surface(th, box), n=96) for th in surfaces]
    ref = fluxes[0]
    assert all(abs(v - ref) <= 1e-6 * abs(ref) for v in fluxes)


def test_surface_validation():
    with pytest.raises(SurfaceError):
        Surface(parse("t + x"), BOX)
    with pytest.raises(SurfaceError):
        check_surface("0", Surface(parse("2*x"), ((-1, 1), (-1, 1))))
    assert check_surface("0", Surface(parse("0.1*x"), BOX)) > 0


# --- mapped solutions ------------------------------------------------------------------

def test_identity_map_leaves_solution_unchanged():
    sol = Solution(parse("0"), DATUM)
    Fb, mapped = map_solution(identity(), "0", sol)
    X, C = GRID
    assert str(Fb) == "0"
    assert np.allclose(mapped(0.7, X, C), sol(0.7, X, C), atol=1e-14)


@pytest.mark.parametrize("name, params, region", [
    ("galilei", {"v": 0.5}, ((0.2, 1.0), (-1, 1), (-1, 1))),
    ("projective", {}, ((-3.0, -1.5), (-1, 1), (-1, 1))),
    ("shear", {"Q": 0.7}, ((0.2, 1.0), (-1, 1), (-1, 1))),
    ("lightcone", {"k": 1}, ((0.2, 1.0), (-0.5, 0.5), (0.3, 0.8))),
])
def test_mapped_solution_solves_transformed_equation(name, params, region):
    sol = Solution(parse("0"), DATUM)
    Fb, mapped = map_solution(catalog_map(name, params), "0", sol)
    rng = np.random.default_rng(8)
    t, x, c = (rng.uniform(lo, hi, 40) for lo, hi in region)
    r = fd_residual(Fb, mapped, t, x, c)
    assert np.max(np.abs(r)) <= 1e-4


def test_galilei_pattern():
    sol = Solution(parse("0"), DATUM)
    _, mapped = map_solution(catalog_map("galilei", {"v": 0.5}), "0", sol)
    X, C = GRID
    assert np.allclose(mapped(0.7, X, C), sol(0.7, X - 0.35, C - 0.5), atol=1e-12)


def test_map_solution_requires_inverse():
    with pytest.raises(ValueError):
        map_solution(catalog_map("general-t", symbolic=True), "0", DATUM)


def test_step_config_fixed_step():
    cfg = StepConfig(method="RK45", fixed_step=0.1)
    tr = integrate_characteristic(parse("-x"), CharState(0, 1, 0, 1), 1.0, cfg=cfg, dense=False)
    assert abs(tr.final.x - math.cos(1.0)) < 1e-6
