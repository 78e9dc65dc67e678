import math

import numpy as np
import pytest

from fgt2d import fixtures as F
from fgt2d.engine import FGT, InvalidRequest, TransformRequest, discrete_transform, run, volume_transform
from fgt2d.hermite import form_hermite_from_points
from fgt2d.oracle import direct_dgt, direct_volume
from fgt2d.quadtree import Domain, build_uniform_tree, refine_adaptive


def _leaf_tree(levels=3, k=8, periodic=False, f=None, domain=None):
    tree = build_uniform_tree(levels, k=k, periodic=periodic, domain=domain or F.BUMP_DOMAIN)
    if f is not None:
        tree.sample(f)
    return tree


# ------------------------------------------------------------- requests ----

@pytest.mark.parametrize("kw", [dict(delta=0.0), dict(delta=-1.0), dict(eps=0.5), dict(eps=1e-15),
                                dict(boundary_condition="dirichlet"), dict(boundary_condition="periodic"),
                                dict(kernel_prefactor=0.0), dict(point_near="magic")])
def test_invalid_requests(kw):
    args = dict(tree=_leaf_tree(1, f=F.constant()), delta=1e-2, eps=1e-6)
    args.update(kw)
    with pytest.raises(InvalidRequest):
        run(TransformRequest(**args))


def test_result_shapes_and_stats(rng):
    tree = _leaf_tree(2, f=F.sinprod(1))
    pts = rng.random((13, 2))
    res = volume_transform(tree, 1e-2, 1e-6, targets=pts)
    assert res.grid_values.shape == (16, 8, 8)
    assert res.point_values.shape == (13,)
    assert np.isfinite(res.grid_values).all() and np.isfinite(res.point_values).all()
    for key in ("upward", "downward", "evaluate", "near"):
        assert key in res.stats["timings"]
    assert "l_cut" in res.stats and "plan" in res.stats


# --------------------------------------------------------------- passes ----

def test_zero_sources_give_zero():
    tree = _leaf_tree(3, f=F.constant(0.0))
    res = volume_transform(tree, 1e-2, 1e-9)
    assert not res.grid_values.any()


def test_all_local_regime_forms_no_expansions():
    tree = _leaf_tree(3, f=F.sinprod(1))
    fgt = FGT(tree, 1e-8, 1e-6)
    assert fgt.l_cut == tree.nlevels + 1
    res = fgt.run()
    assert res.stats["n_expansions"] == 0
    pts = tree.grid_points().reshape(-1, 2)[::37]
    ref = direct_volume(None, pts, 1e-8, tree.domain, tree=tree)
    assert np.abs(res.grid_values.reshape(-1)[::37] - ref).max() <= 1e-6 * 1e-8 * 10


def test_upward_merge_matches_direct_root_formation():
    tree = refine_adaptive(None, 1.0, k=1, max_levels=4, points=np.array([[0.3, 0.7], [0.31, 0.69]]), q=1)
    fgt = FGT(tree, 100.0, 1e-12)
    assert fgt.l_cut == 0
    from fgt2d.engine import _Points

    y = np.array([[0.3, 0.7]])
    A = fgt._upward(None, _Points(tree, y, [1.0]))
    p = fgt.plan.hermite_order[0]
    ref = form_hermite_from_points(y, [1.0], tree.centers[0], fgt.sd, p).coeffs
    assert np.abs(A[0][0] - ref).max() < 1e-12


def test_adjacent_constant_leaves_vs_dense_quadrature():
    tree = _leaf_tree(1, f=F.constant(1.0))
    delta = 0.02
    res = volume_transform(tree, delta, 1e-12)
    pts = tree.grid_points().reshape(-1, 2)
    ref = direct_volume(F.constant(1.0), pts, delta, tree.domain)
    assert np.abs(res.grid_values.reshape(-1) - ref).max() < 1e-10


def test_sinprod_free_space_vs_oracle(rng):
    tree = refine_adaptive(F.sinprod(2), 1e-10, k=8, max_levels=8)
    delta, eps = 1e-3, 1e-6
    pts = rng.random((200, 2))
    got = volume_transform(tree, delta, eps, targets=pts, grid=False).point_values
    ref = direct_volume(F.sinprod(2), pts, delta, tree.domain)
    assert np.abs(got - ref).max() <= 10 * eps


@pytest.mark.parametrize("delta", [1e-5, 1e-3])
def test_bumps_vs_closed_form(delta, rng):
    tree = refine_adaptive(F.bumps(), 1e-10, k=8, max_levels=12)
    eps = 1e-9
    pts = rng.random((100, 2))
    res = volume_transform(tree, delta, eps, targets=pts)
    assert np.abs(res.grid_values.reshape(-1) - F.bumps_transform(tree.grid_points().reshape(-1, 2), delta)
                  ).max() <= 10 * eps
    assert np.abs(res.point_values - F.bumps_transform(pts, delta)).max() <= 10 * eps


def test_point_near_interp_and_direct_agree(rng):
    tree = refine_adaptive(F.bumps(), 1e-10, k=8, max_levels=12)
    pts = rng.random((80, 2))
    fgt = FGT(tree, 1e-3, 1e-9)
    a = fgt.run(targets=pts, grid=False, point_near="direct").point_values
    b = fgt.run(targets=pts, grid=False, point_near="interp").point_values
    exact = F.bumps_transform(pts, 1e-3)
    assert np.abs(a - exact).max() <= 1e-8
    assert np.abs(b - exact).max() <= 1e-6


# -------------------------------------------------------- discrete sums ----

@pytest.mark.parametrize("delta", [1e-6, 1e-4, 1e-2, 1.0])
@pytest.mark.parametrize("eps", [1e-3, 1e-9])
def test_discrete_vs_direct_sum(delta, eps, rng):
    src, tgt = rng.random((600, 2)), rng.random((400, 2))
    q = rng.standard_normal(600)
    got = discrete_transform(src, q, tgt, delta, eps).point_values
    assert np.abs(got - direct_dgt(src, q, tgt, delta)).max() <= eps * np.abs(q).sum()


def test_dipoles_vs_direct_sum(rng):
    src, tgt = rng.random((300, 2)), rng.random((200, 2))
    q, d = rng.standard_normal(300), rng.standard_normal((300, 2)) * 0.01
    delta, eps = 1e-3, 1e-9
    got = discrete_transform(src, q, tgt, delta, eps, dipoles=d).point_values
    mass = np.abs(q).sum() + 2 / math.sqrt(delta) * np.abs(d).sum()
    assert np.abs(got - direct_dgt(src, q, tgt, delta, dipoles=d)).max() <= eps * mass


def test_prefactor_scales_output(rng):
    src, tgt = rng.random((200, 2)), rng.random((50, 2))
    q = rng.uniform(0, 1, 200)
    a = discrete_transform(src, q, tgt, 1e-3, 1e-6, kernel_prefactor=50.0).point_values
    ref = 50.0 * direct_dgt(src, q, tgt, 1e-3)
    assert np.abs(a - ref).max() <= 1e-6 * q.sum()


# ---------------------------------------------------------- properties ----

def test_superposition(rng):
    tree = refine_adaptive(F.bumps(), 1e-8, k=8, max_levels=10)
    fgt = FGT(tree, 1e-3, 1e-9)
    a = rng.standard_normal(tree.values.shape)
    b = rng.standard_normal(tree.values.shape)
    vals = []
    for v in (a, b, a + b):
        tree.set_values(v)
        vals.append(fgt.run().grid_values)
    scale = np.abs(vals[2]).max()
    assert np.abs(vals[0] + vals[1] - vals[2]).max() <= 1e-12 * scale


def test_pruning_changes_results_below_eps(rng):
    src, tgt = rng.random((500, 2)), rng.random((300, 2))
    q = rng.uniform(0, 1, 500)
    tree = refine_adaptive(None, 1.0, k=1, max_levels=12, points=np.r_[src, tgt], q=16, domain=Domain((0.5, 0.5), 1.0))
    for delta in (1e-4, 1e-3):
        res = [FGT(tree, delta, 1e-6, prune=pr).run(src, q, targets=tgt, grid=False).point_values
               for pr in (True, False)]
        assert np.abs(res[0] - res[1]).max() < 1e-6 * q.sum()


def test_planewave_and_hermite_paths_agree(rng):
    tree = refine_adaptive(F.sinprod(2), 1e-10, k=8, max_levels=8)
    eps = 1e-9
    a = FGT(tree, 5e-3, eps, planewave=True).run().grid_values
    b = FGT(tree, 5e-3, eps, planewave=False).run().grid_values
    assert np.abs(a - b).max() <= 10 * eps


def test_numba_and_numpy_kernels_agree(rng):
    src, tgt = rng.random((800, 2)), rng.random((300, 2))
    q = rng.standard_normal(800)
    d = rng.standard_normal((800, 2)) * 1e-3
    a = discrete_transform(src, q, tgt, 1e-3, 1e-9, dipoles=d, use_numba=True).point_values
    b = discrete_transform(src, q, tgt, 1e-3, 1e-9, dipoles=d, use_numba=False).point_values
    assert np.abs(a - b).max() <= 1e-13 * np.abs(q).sum()


def test_sequential_runs_are_bitwise_identical(rng):
    tree = refine_adaptive(F.bumps(), 1e-8, k=8, max_levels=10)
    pts = rng.random((50, 2))
    a = volume_transform(tree, 1e-3, 1e-6, targets=pts)
    b = volume_transform(tree, 1e-3, 1e-6, targets=pts)
    assert np.array_equal(a.grid_values, b.grid_values)
    assert np.array_equal(a.point_values, b.point_values)


@pytest.mark.parametrize("seed", range(5))
def test_pair_coverage_audit(seed):
    rng = np.random.default_rng(seed)
    pts = rng.random((int(rng.integers(20, 120)), 2)) ** 2
    periodic = bool(seed % 2)
    tree = refine_adaptive(None, 1.0, k=1, max_levels=6, points=pts, q=4, periodic=periodic)
    delta = 10 ** rng.uniform(-4, -1)
    report = FGT(tree, delta, 1e-6).audit_coverage()
    assert report["ok"], report


def test_env_flag_selects_numpy_kernels(tmp_path):
    import os
    import subprocess
    import sys

    code = ("import numpy as np\n"
            "from fgt2d import _accel\n"
            "from fgt2d.engine import discrete_transform\n"
            "rng = np.random.default_rng(0)\n"
            "v = discrete_transform(rng.random((300, 2)), rng.standard_normal(300), rng.random((50, 2)), 1e-3, 1e-9)\n"
            "np.save(r'%s', v.point_values)\n"
            "print(_accel.USE_NUMBA)\n")
    outs = {}
    for flag in ("0", "1"):
        path = tmp_path / f"v{flag}.npy"
        env = dict(os.environ, FGT2D_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code % path], env=env, capture_output=True, text=True, check=True)
        outs[flag] = (res.stdout.strip(), np.load(path))
    assert outs["1"][0] == "False" and outs["0"][0] == "True"
    assert np.allclose(outs["0"][1], outs["1"][1], rtol=1e-13, atol=1e-13)
