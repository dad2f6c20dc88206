import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridfmm import DomainError, Particles, SingularityError, cube, direct_evaluate, rel_error
from hybridfmm.kernels import (
    l2l, l2p, m2l, m2m, m2p, p2l, p2m, p2p, random_expansion,
)
from hybridfmm.kernels.harmonics import irregular, regular
from hybridfmm.model import Expansion, coefficient_index as ci


def direct_at(sources, points):
    """Oracle field of ``sources`` at arbitrary ``points`` (zero-charge probes)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    allp = Particles(np.vstack([pts, sources.positions]),
                     np.concatenate([np.zeros(len(pts)), sources.charges]))
    return direct_evaluate(allp, range(len(pts)))


def cell(n, seed, center=(0, 0, 0), size=0.5):
    rng = np.random.default_rng(seed)
    return Particles(rng.uniform(-size / 2, size / 2, (n, 3)) + center, rng.uniform(0.1, 1, n))


def test_harmonics_against_scipy():
    special = pytest.importorskip("scipy.special")
    x, y, z = 0.3, -0.4, 0.5
    rho = math.sqrt(x * x + y * y + z * z)
    ct, ph = z / rho, math.atan2(y, x)
    p = 7
    r = np.zeros((p + 1) ** 2, complex)
    i = np.zeros((p + 1) ** 2, complex)
    regular(x, y, z, p, r)
    irregular(x, y, z, p, i)
    for n in range(p + 1):
        for m in range(-n, n + 1):
            # scipy's lpmv includes the Condon-Shortley phase
            leg = special.lpmv(abs(m), n, ct) * np.exp(1j * abs(m) * ph)
            rr = rho ** n * leg / math.factorial(n + abs(m))
            ii = math.factorial(n - abs(m)) * leg / rho ** (n + 1)
            if m < 0:
                rr, ii = (-1) ** m * np.conj(rr), (-1) ** m * np.conj(ii)
            assert r[ci(n, m)] == pytest.approx(rr, rel=1e-12, abs=1e-15)
            assert i[ci(n, m)] == pytest.approx(ii, rel=1e-12, abs=1e-15)


def test_p2p_two_charges():
    p = Particles(np.array([[0.0, 0, 0], [2, 0, 0]]), np.ones(2))
    r = p2p(p, p, exclude_self=True)
    assert r.potential.tolist() == [0.5, 0.5]
    np.testing.assert_allclose(r.force, [[-0.25, 0, 0], [0.25, 0, 0]])


def test_p2p_single_self():
    p = Particles(np.array([[0.3, 0, 0]]), np.ones(1))
    r = p2p(p, p, exclude_self=True)
    assert r.potential.tolist() == [0.0] and r.force.tolist() == [[0.0, 0.0, 0.0]]


def test_p2p_three_particles_golden():
    p = Particles(np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]), np.ones(3))
    r = p2p(p, p, exclude_self=True)
    s = 1 + 1 / math.sqrt(2)
    np.testing.assert_allclose(r.potential, [2.0, s, s], rtol=1e-14)


def test_p2p_singular():
    a = Particles(np.zeros((1, 3)), np.ones(1))
    with pytest.raises(SingularityError):
        p2p(a, a)


def test_p2m_point_at_center():
    m = p2m(Particles(np.array([[0.1, 0.2, 0.3]]), np.ones(1)), (0.1, 0.2, 0.3), 6)
    assert m[0, 0] == 1.0
    assert np.all(m.coeffs[1:] == 0)


def test_p2m_neutral_pair():
    m = p2m(Particles(np.array([[0.1, 0, 0], [-0.1, 0, 0]]), np.array([1.0, -1.0])), (0, 0, 0), 4)
    assert m[0, 0] == 0.0


def test_p2m_far_field():
    src = cell(10, 1)
    radius = np.linalg.norm(src.positions, axis=1).max()
    pts = np.array([[5 * radius, 0, 0], [0, -5 * radius, 0], [3 * radius, 3 * radius, 2 * radius]])
    e = rel_error(m2p(p2m(src, (0, 0, 0), 10), pts), direct_at(src, pts))
    assert e.potential_l2 <= 1e-6


@pytest.mark.parametrize("p", [3, 6, 10])
def test_expansion_symmetry(p):
    m = p2m(cell(20, p), (0.05, 0, 0), p)
    for n in range(p + 1):
        for k in range(n + 1):
            assert m[n, -k] == pytest.approx((-1) ** k * np.conj(m[n, k]), abs=1e-14)


def test_m2m_identity_and_monopole():
    child = p2m(cell(30, 2), (0, 0, 0), 8)
    same = m2m(child, (0, 0, 0))
    np.testing.assert_allclose(same.coeffs, child.coeffs, atol=1e-15)
    mono = Expansion.zeros(8, (0.2, -0.1, 0.1))
    mono.coeffs[0] = 2.0
    parent = m2m(mono, (0, 0, 0))
    x = np.array([[4.0, 3.0, -2.0]])
    want = 2.0 / np.linalg.norm(x[0] - mono.center)
    assert m2p(parent, x).potential[0] == pytest.approx(want, rel=1e-9)


def test_m2m_chain_matches_direct_p2m():
    rng = np.random.default_rng(3)
    root = np.zeros(3)
    children = [np.array(c) * 0.25 for c in [(1, 1, 1), (-1, 1, -1), (1, -1, -1)]]
    parts = [Particles(rng.uniform(-.2, .2, (15, 3)) + c, rng.uniform(0, 1, 15)) for c in children]
    total = Expansion.zeros(10, root)
    for c, pc in zip(children, parts):
        total.coeffs += m2m(p2m(pc, c, 10), root).coeffs
    allp = Particles(np.vstack([q.positions for q in parts]), np.concatenate([q.charges for q in parts]))
    direct = p2m(allp, root, 10)
    pts = rng.normal(size=(10, 3)) * 4
    a, b = m2p(total, pts), m2p(direct, pts)
    assert rel_error(a, b).potential_l2 <= 1e-10


def test_m2l_monopole_and_zero():
    mono = Expansion.zeros(6, (0, 0, 0))
    mono.coeffs[0] = 3.0
    loc = m2l(mono, (1.0, 2.0, 2.0))
    assert l2p(loc, [[1.0, 2.0, 2.0]]).potential[0] == pytest.approx(1.0, rel=1e-14)
    assert np.all(m2l(Expansion.zeros(6, (0, 0, 0)), (1, 0, 0)).coeffs == 0)
    with pytest.raises(DomainError):
        m2l(mono, (0, 0, 0))


def test_m2l_well_separated():
    # source and target cells of radius ~0.43 at distance 2.9: MAC value 0.3
    src = cell(40, 5)
    tc = np.array([2.9, 0, 0])
    tgt = cell(30, 6, center=tc)
    loc = m2l(p2m(src, (0, 0, 0), 10), tc)
    e = rel_error(l2p(loc, tgt.positions), direct_at(src, tgt.positions))
    assert e.potential_l2 <= 1e-5


def test_m2p_monopole_exact():
    mono = Expansion.zeros(5, (0.5, 0, 0))
    mono.coeffs[0] = 1.5
    pts = np.array([[2.5, 0, 0], [0.5, 1, 1]])
    r = m2p(mono, pts)
    d = pts - mono.center
    dist = np.linalg.norm(d, axis=1)
    np.testing.assert_allclose(r.potential, 1.5 / dist, rtol=1e-14)
    np.testing.assert_allclose(r.force, 1.5 * d / dist[:, None] ** 3, rtol=1e-13)
    with pytest.raises(DomainError):
        m2p(mono, [[0.5, 0, 0]])
    assert np.all(m2p(Expansion.zeros(5, (0, 0, 0)), pts).potential == 0)


def test_m2p_equals_m2l_l2p():
    src = cell(30, 7)
    tc = np.array([0, 3.0, 0])
    tgt = cell(20, 8, center=tc, size=0.3)
    mult = p2m(src, (0, 0, 0), 12)
    a = m2p(mult, tgt.positions)
    b = l2p(m2l(mult, tc), tgt.positions)
    assert rel_error(b, a).potential_l2 <= 1e-8


def test_l2l_identity_constant_and_chain():
    rng = np.random.default_rng(4)
    loc = random_expansion(6, rng, kind="local")
    np.testing.assert_allclose(l2l(loc, (0, 0, 0)).coeffs, loc.coeffs, atol=1e-15)
    const = Expansion.zeros(6, (0, 0, 0), "local")
    const.coeffs[0] = 0.7
    shifted = l2l(const, (0.3, -0.2, 0.1))
    np.testing.assert_allclose(shifted.coeffs, const.coeffs, atol=1e-16)
    r = l2p(const, rng.normal(size=(4, 3)))
    np.testing.assert_allclose(r.potential, 0.7)
    assert np.all(r.force == 0)
    # parent local -> child local -> particles vs m2p directly
    src = cell(30, 9, center=(3, 0, 0))
    mult = p2m(src, (3, 0, 0), 12)
    parent = m2l(mult, (0, 0, 0))
    child_c = np.array([0.15, 0.15, -0.15])
    pts = cell(10, 10, center=child_c, size=0.2).positions
    a = l2p(l2l(parent, child_c), pts)
    b = m2p(mult, pts)
    assert rel_error(a, b).potential_l2 <= 1e-7


def test_p2l_matches_field():
    src = cell(25, 11, center=(0, 0, 3))
    pts = cell(10, 12, size=0.4).positions
    e = rel_error(l2p(p2l(src, (0, 0, 0), 12), pts), direct_at(src, pts))
    assert e.potential_l2 <= 1e-7


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["multipole", "local"]))
def test_gradient_matches_finite_differences(seed, kind):
    rng = np.random.default_rng(seed)
    e = random_expansion(8, rng, kind=kind)
    pts = rng.normal(size=(5, 3))
    pts *= ((3.0 if kind == "multipole" else 0.3) / np.linalg.norm(pts, axis=1))[:, None]
    f = m2p if kind == "multipole" else l2p
    h = 1e-5
    fd = np.stack([-(f(e, pts + h * np.eye(3)[k]).potential - f(e, pts - h * np.eye(3)[k]).potential)
                   / (2 * h) for k in range(3)], axis=1)
    got = f(e, pts).force
    assert np.linalg.norm(fd - got) <= 1e-5 * np.linalg.norm(got)


def test_fmm_pipeline_512():
    from hybridfmm import Config, evaluate

    p = cube(512, 0)
    r = evaluate(p, Config(p=12, n_crit=16, method="fmm"))
    assert rel_error(r.field, direct_evaluate(p)).potential_l2 <= 1e-5
