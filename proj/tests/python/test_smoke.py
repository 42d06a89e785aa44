"""End-to-end smoke tests for the python bindings."""

import math

import numpy as np
import pytest

import crownfill as cf


def test_primitives_and_grid():
    sphere = cf.Primitive.sphere(1.0)
    assert cf.eval_primitive(sphere, 0.0, 0.0, 0.0) == pytest.approx(-1.0)
    assert cf.eval_primitive(sphere, 2.0, 0.0, 0.0) == pytest.approx(1.0)

    grid = cf.sample_to_grid(
        lambda x, y, z: math.sqrt(x * x + y * y + z * z) - 0.7,
        16,
        (-1.0, -1.0, -1.0),
        2.0 / 15,
    )
    values = grid.values
    assert values.shape == (16, 16, 16)
    assert values.min() < 0.0
    assert values.max() == pytest.approx(cf.TRUNCATION)


def test_numpy_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    values = rng.uniform(-0.2, 0.2, size=(8, 8, 8)).astype(np.float32)
    grid = cf.SdfGrid(values, (-1.0, -1.0, -1.0), 0.25)
    np.testing.assert_array_equal(grid.values, values)
    path = str(tmp_path / "grid.sdfg")
    grid.save(path)
    loaded = cf.SdfGrid.load(path)
    np.testing.assert_array_equal(loaded.values, values)


def test_csg_and_noise():
    ball = cf.sample_to_grid(
        lambda x, y, z: math.sqrt(x * x + y * y + z * z) - 0.6,
        12,
        (-1.0, -1.0, -1.0),
        2.0 / 11,
    )
    carved = cf.csg_difference(ball, ball)
    assert (carved.values >= 0.0).all()

    params = cf.SimplexNoiseParams(amplitude=0.06, frequency=2.8, seed=42)
    bumpy = cf.perturb_with_simplex(ball, params)
    assert np.abs(bumpy.values - ball.values).max() <= 0.06 + 1e-7
    assert cf.simplex_noise(0.5, 0.25, -0.75, 7) == cf.simplex_noise(0.5, 0.25, -0.75, 7)


def test_phantom_pipeline():
    arch = cf.generate_phantom_arch(11)
    fdis = arch.tooth_fdis()
    assert len(fdis) == 14

    tc = cf.extract_tooth_context(arch, 36)
    assert tc.context.vertices.shape[0] > tc.tooth.vertices.shape[0]

    config = cf.AugmentConfig()
    config.resolution = 16
    upper = cf.generate_phantom_arch(11, cf.Jaw.upper)
    sample = cf.build_sample(arch, 36, upper, config, 5)
    assert sample.context.values.shape == (16, 16, 16)
    assert sample.antagonist is not None
    # damage only removes material
    assert (sample.context.values >= sample.ground_truth.values - 1e-6).all()


def test_mesh_roundtrip_and_metrics():
    grid = cf.sample_to_grid(
        lambda x, y, z: math.sqrt(x * x + y * y + z * z) - 0.6,
        24,
        (-1.0, -1.0, -1.0),
        2.0 / 23,
    )
    mesh = cf.marching_cubes(grid)
    radii = np.linalg.norm(mesh.vertices, axis=1)
    assert np.abs(radii - 0.6).max() < 2.0 / 23

    back = cf.mesh_to_sdf(mesh, 24, (-1.0, -1.0, -1.0), 2.0 / 23)
    near = np.abs(grid.values) < cf.TRUNCATION - 1e-6
    assert np.abs(back.values - grid.values)[near].max() < 2 * (2.0 / 23)

    assert cf.l1_volume(grid, grid) == 0.0
    assert cf.iou_voxel(grid, grid) == 100.0
    assert cf.chamfer(mesh, mesh, 2000) == 0.0


def test_diffusion_math():
    schedule = cf.linear_schedule(100)
    assert schedule.alpha_bars[0] > 0.99
    assert schedule.alpha_bars[-1] < schedule.alpha_bars[0]

    respaced = cf.respace(schedule, 10)
    assert respaced.kept_indices == [10 * (j + 1) for j in range(10)]
    for j, kept in enumerate(respaced.kept_indices):
        assert respaced.chain.alpha_bars[j] == schedule.alpha_bars[kept - 1]

    x0 = np.array([0.4, -0.2, 0.1])
    eps = np.array([1.0, -0.5, 0.25])
    xt = np.array(cf.q_sample(x0, 50, eps, schedule))
    ab = schedule.alpha_bars[49]
    np.testing.assert_allclose(xt, math.sqrt(ab) * x0 + math.sqrt(1 - ab) * eps, rtol=1e-12)

    mixed = cf.cfg_mix(np.array([0.1]), np.array([0.3]), 2.0)
    assert mixed[0] == pytest.approx(0.5)


def test_train_and_complete_tiny(tmp_path):
    config = cf.UNetConfig()
    config.resolution = 8
    config.base_channels = 4
    config.channel_mults = [1, 2]
    config.norm_groups = 4
    config.antagonist_enabled = False
    net = cf.DenoiserNetwork(config, 1)
    assert net.parameter_count > 0

    arch = cf.generate_phantom_arch(3)
    aug = cf.AugmentConfig()
    aug.resolution = 8
    sample = cf.build_sample(arch, 41, None, aug, 9)

    schedule = cf.linear_schedule(20)
    resampler = cf.SecondMomentResampler(20)
    guidance = cf.GuidanceConfig()
    optimizer = cf.AdamOptimizer(1e-3)
    rng = cf.Rng(4)
    losses = [
        cf.train_step(net, sample, schedule, guidance, resampler, optimizer, rng)
        for _ in range(5)
    ]
    assert all(math.isfinite(l) and l >= 0 for l in losses)

    out = cf.complete(net, schedule, sample.context, None, steps=5, w=1.0, seed=3)
    assert out.values.shape == (8, 8, 8)
    assert np.abs(out.values).max() <= cf.TRUNCATION

    ckpt = str(tmp_path / "net.ckpt")
    cf.save_checkpoint(net, schedule, guidance, ckpt)
    restored, schedule2 = cf.load_network(ckpt)
    out2 = cf.complete(restored, schedule2, sample.context, None, steps=5, w=1.0, seed=3)
    np.testing.assert_array_equal(out.values, out2.values)

    report = cf.evaluate_sample(out, sample, 1000)
    assert set(report) >= {"l1", "masked_l1", "iou_pct", "masked_iou_pct"}
