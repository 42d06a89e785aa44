#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "crownfill/error.hpp"
#include "crownfill/rng.hpp"
#include "crownfill/trainer.hpp"
#include "crownfill/unet.hpp"

using namespace crownfill;

namespace {

Tensor random_tensor(int c, int n, Rng& rng, double scale = 1.0) {
    Tensor t(c, n, n, n);
    for (double& v : t.data) v = rng.normal() * scale;
    return t;
}

UNetConfig tiny_config(bool antagonist = true) {
    UNetConfig cfg;
    cfg.resolution = 8;
    cfg.base_channels = 4;
    cfg.channel_mults = {1, 2};
    cfg.norm_groups = 4;
    cfg.antagonist_enabled = antagonist;
    return cfg;
}

void randomize_params(ParameterStore& store, uint64_t seed, double scale = 0.08) {
    Rng rng(seed);
    for (auto& p : store.all())
        for (double& v : p.value) v = rng.normal() * scale;
    // keep norm gains near 1 so activations stay in a sane range
    for (auto& p : store.all())
        if (p.name.ends_with(".gamma"))
            for (double& v : p.value) v = 1.0 + 0.05 * v;
}

}  // namespace

TEST_CASE("config validation") {
    UNetConfig cfg = tiny_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.base_channels = 2;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = tiny_config();
    cfg.resolution = 9;  // not divisible by 2
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("layer primitives") {
    ParameterStore store;
    Rng rng(1);

    SUBCASE("conv3d with an identity 1x1 kernel is the identity") {
        Conv3d conv(store, "id", 3, 3, 1, 1, rng, /*zero_init=*/true);
        auto& w = store[conv.weight_id()];
        // weight shape (3,3,1,1,1): identity mixing
        w.value[0 * 3 + 0] = 1.0;
        w.value[1 * 3 + 1] = 1.0;
        w.value[2 * 3 + 2] = 1.0;
        Tensor x = random_tensor(3, 4, rng);
        Tensor y = conv.forward(x);
        CHECK(y.data == x.data);
    }
    SUBCASE("group_norm normalizes per group before the affine") {
        GroupNorm gn(store, "gn", 8, 4);
        Tensor x = random_tensor(8, 4, rng, 3.0);
        Tensor y = gn.forward(x);
        // gamma=1, beta=0 at init: per-group mean ~0, variance ~1
        const size_t sp = x.spatial();
        for (int g = 0; g < 4; ++g) {
            double mean = 0.0, var = 0.0;
            for (int c = 2 * g; c < 2 * g + 2; ++c)
                for (size_t i = 0; i < sp; ++i) mean += y.channel(c)[i];
            mean /= (2 * sp);
            for (int c = 2 * g; c < 2 * g + 2; ++c)
                for (size_t i = 0; i < sp; ++i) {
                    double d = y.channel(c)[i] - mean;
                    var += d * d;
                }
            var /= (2 * sp);
            CHECK(std::fabs(mean) < 1e-5);
            CHECK(std::fabs(var - 1.0) < 1e-3);
        }
    }
    SUBCASE("attention over a single voxel reduces to the value path") {
        AttentionBlock attn(store, "attn", 4, rng);
        // rebuild the expected output by hand: out = proj(V(gn(x))) + x, and
        // with a single position softmax(qk) == 1 so o == v
        Tensor x = random_tensor(4, 1, rng);
        Tensor y = attn.forward(x);
        // reference: fresh layers with identical parameters
        ParameterStore ref_store;
        Rng rng2(1);
        GroupNorm gn(ref_store, "n", 4, 4);
        Conv3d qkv(ref_store, "q", 4, 12, 1, 1, rng2);
        Conv3d proj(ref_store, "p", 4, 4, 1, 1, rng2);
        for (size_t i = 0; i < ref_store.count(); ++i) {
            auto& dst = ref_store[static_cast<int>(i)];
            // attn params come first in `store` with the same layout
            dst.value = store[static_cast<int>(i + 0)].value;
        }
        // locate matching params by name suffix instead of index arithmetic
        // (the attn block registered norm, qkv, proj in that order)
        Tensor h = gn.forward(x);
        Tensor qkv_out = qkv.forward(h);
        Tensor v(4, 1, 1, 1);
        for (int c = 0; c < 4; ++c) v.data[c] = qkv_out.data[8 + c];
        Tensor expected = proj.forward(v);
        expected += x;
        REQUIRE(y.size() == expected.size());
        for (size_t i = 0; i < y.size(); ++i)
            CHECK(y.data[i] == doctest::Approx(expected.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("project_inputs") {
    UNetConfig cfg = tiny_config();
    DenoiserNetwork net(cfg, 3);
    Rng rng(4);
    const int n = cfg.resolution;

    SUBCASE("channel arithmetic: concatenation doubles the projection width") {
        Tensor x = random_tensor(1, n, rng), c = random_tensor(1, n, rng),
               a = random_tensor(1, n, rng);
        auto [fc, fa] = net.project_inputs(x, c, &a);
        CHECK(fc.c == 2 * cfg.proj_dim());
        REQUIRE(fa.has_value());
        CHECK(fa->c == 2 * cfg.proj_dim());
        CHECK(fc.d == n);
    }
    SUBCASE("zero inputs with zero biases give zero features") {
        DenoiserNetwork zeroed(cfg, 5);
        for (auto& p : zeroed.params().all())
            if (p.name.starts_with("proj_") && p.name.ends_with(".bias"))
                std::fill(p.value.begin(), p.value.end(), 0.0);
        Tensor zero(1, n, n, n);
        auto [fc, fa] = zeroed.project_inputs(zero, zero, nullptr);
        for (double v : fc.data) CHECK(v == 0.0);
        CHECK(!fa.has_value());
    }
    SUBCASE("batch equivariance: permuting inputs permutes outputs") {
        std::vector<Tensor> xs, cs;
        for (int i = 0; i < 3; ++i) {
            xs.push_back(random_tensor(1, n, rng));
            cs.push_back(random_tensor(1, n, rng));
        }
        std::vector<Tensor> out;
        for (int i = 0; i < 3; ++i) out.push_back(net.project_inputs(xs[i], cs[i], nullptr).first);
        // process in permuted order; results must match elementwise
        for (int i : {2, 0, 1}) {
            Tensor again = net.project_inputs(xs[i], cs[i], nullptr).first;
            CHECK(again.data == out[i].data);
        }
    }
    SUBCASE("spatial mismatch rejected") {
        Tensor x = random_tensor(1, n, rng);
        Tensor bad(1, n / 2, n / 2, n / 2);
        CHECK_THROWS_AS(net.project_inputs(x, bad, nullptr), ValidationError);
    }
}

TEST_CASE("forward contracts") {
    UNetConfig cfg = tiny_config();
    DenoiserNetwork net(cfg, 6);
    randomize_params(net.params(), 61);
    Rng rng(7);
    const int n = cfg.resolution;
    Tensor x = random_tensor(1, n, rng);
    Tensor c = random_tensor(1, n, rng);
    Tensor a = random_tensor(1, n, rng);

    SUBCASE("output shape equals input shape with one channel") {
        Tensor out = net.forward(x, 10, &c, &a);
        CHECK(out.c == 1);
        CHECK(out.d == n);
        CHECK(out.h == n);
        CHECK(out.w == n);
    }
    SUBCASE("deterministic given weights and inputs") {
        Tensor o1 = net.forward(x, 10, &c, &a);
        Tensor o2 = net.forward(x, 10, &c, &a);
        CHECK(o1.data == o2.data);
    }
    SUBCASE("null-condition fill runs the same code path as any tensor") {
        Tensor null_c = null_condition(n);
        Tensor o1 = net.forward(x, 10, &null_c, nullptr);
        Tensor o2 = net.forward(x, 10, &null_c, nullptr);
        CHECK(o1.data == o2.data);
        Tensor o_ctx = net.forward(x, 10, &c, nullptr);
        CHECK(o1.data != o_ctx.data);
    }
    SUBCASE("antagonist without the branch enabled is an error") {
        UNetConfig noant = tiny_config(false);
        DenoiserNetwork net2(noant, 8);
        CHECK_THROWS_AS(net2.forward(x, 10, &c, &a), ValidationError);
    }
    SUBCASE("timestep changes the output") {
        Tensor o1 = net.forward(x, 10, &c, nullptr);
        Tensor o2 = net.forward(x, 500, &c, nullptr);
        CHECK(o1.data != o2.data);
    }
    SUBCASE("fresh network predicts exactly zero (zero-initialized head)") {
        DenoiserNetwork fresh(cfg, 9);
        Tensor out = fresh.forward(x, 10, &c, &a);
        for (double v : out.data) CHECK(v == 0.0);
    }
}

TEST_CASE("antagonist additivity: zeroed antagonist encoder matches the context-only path") {
    UNetConfig cfg = tiny_config();
    DenoiserNetwork net(cfg, 10);
    randomize_params(net.params(), 101);
    // zero every antagonist-encoder parameter
    for (auto& p : net.params().all())
        if (p.name.starts_with("enc_a."))
            std::fill(p.value.begin(), p.value.end(), 0.0);

    Rng rng(11);
    const int n = cfg.resolution;
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = random_tensor(1, n, rng);
        Tensor c = random_tensor(1, n, rng);
        Tensor a = random_tensor(1, n, rng);
        Tensor with_ant = net.forward(x, 1 + trial * 37, &c, &a);
        Tensor without = net.forward(x, 1 + trial * 37, &c, nullptr);
        CHECK(with_ant.data == without.data);  // bitwise
    }
}

TEST_CASE("antagonist encoder mirrors the context encoder parameter count") {
    UNetConfig cfg = tiny_config();
    DenoiserNetwork net(cfg, 12);
    size_t count_c = 0, count_a = 0;
    for (const auto& p : net.params().all()) {
        if (p.name.starts_with("enc_c.")) count_c += p.size();
        if (p.name.starts_with("enc_a.")) count_a += p.size();
    }
    CHECK(count_c > 0);
    CHECK(count_c == count_a);
}

TEST_CASE("gradient check: linear layers are exact, zero-loss point is stationary") {
    SUBCASE("linear-only path (1x1 conv): quadratic loss, exact central differences") {
        ParameterStore store;
        Rng rng(13);
        Conv3d conv(store, "lin", 2, 2, 1, 1, rng);
        Tensor x = random_tensor(2, 4, rng);
        Tensor target = random_tensor(2, 4, rng);
        auto loss_of = [&]() {
            Tensor y = conv.forward(x);
            double acc = 0.0;
            for (size_t i = 0; i < y.size(); ++i) {
                double r = y.data[i] - target.data[i];
                acc += r * r;
            }
            return acc / static_cast<double>(y.size());
        };
        Tensor y = conv.forward(x);
        Tensor grad(y.c, y.d, y.h, y.w);
        for (size_t i = 0; i < y.size(); ++i)
            grad.data[i] = 2.0 * (y.data[i] - target.data[i]) / static_cast<double>(y.size());
        store.zero_grad();
        conv.backward(grad);
        const double h = 1e-4;
        for (auto& p : store.all())
            for (size_t i = 0; i < p.size(); ++i) {
                double saved = p.value[i];
                p.value[i] = saved + h;
                double lp = loss_of();
                p.value[i] = saved - h;
                double lm = loss_of();
                p.value[i] = saved;
                double numeric = (lp - lm) / (2 * h);
                double rel = std::fabs(numeric - p.grad[i]) /
                             std::max({std::fabs(numeric), std::fabs(p.grad[i]), 1e-8});
                CHECK(rel < 1e-8);
            }
    }
    SUBCASE("zero residual gives zero gradients") {
        UNetConfig cfg = tiny_config();
        DenoiserNetwork net(cfg, 14);
        randomize_params(net.params(), 141);
        Rng rng(15);
        Tensor x = random_tensor(1, cfg.resolution, rng);
        Tensor c = random_tensor(1, cfg.resolution, rng);
        Tensor out = net.forward(x, 3, &c, nullptr);
        // analytic gradients of a zero-residual MSE vanish identically
        net.params().zero_grad();
        Tensor again = net.forward(x, 3, &c, nullptr);
        Tensor zero_grad_out(1, cfg.resolution, cfg.resolution, cfg.resolution);
        net.backward(zero_grad_out);
        for (const auto& p : net.params().all())
            for (double g : p.grad) CHECK(std::fabs(g) < 1e-6);
        CHECK(again.data == out.data);
    }
}

TEST_CASE("gradient check on the small three-branch UNet") {
    UNetConfig cfg = tiny_config();
    DenoiserNetwork net(cfg, 16);
    randomize_params(net.params(), 161);
    Rng rng(17);
    const int n = cfg.resolution;
    GradCheckInput item;
    item.x_noisy = random_tensor(1, n, rng);
    item.t = 321;
    item.x_c = random_tensor(1, n, rng);
    item.x_a = random_tensor(1, n, rng);
    item.target_eps = random_tensor(1, n, rng);
    // 200 samples per tensor is the acceptance-level sweep; a lighter pass
    // here keeps the unit suite quick
    GradCheckReport report = gradient_check(net, {item}, 1e-3, 42);
    INFO("worst tensor: ", report.worst_tensor, " rel err ", report.max_rel_error);
    CHECK(report.pass);
}

TEST_CASE("checkpoint round trip is bit exact") {
    UNetConfig cfg = tiny_config();
    DenoiserNetwork net(cfg, 18);
    randomize_params(net.params(), 181);
    NoiseSchedule schedule = linear_schedule(100);
    GuidanceConfig guidance;
    guidance.w = 1.5;
    guidance.dropout_p = 0.12;
    save_checkpoint(net, schedule, guidance, kDataScale, "ckpt_test.bin");
    Checkpoint ckpt = load_checkpoint("ckpt_test.bin");
    CHECK(ckpt.schedule.T == 100);
    CHECK(ckpt.schedule.betas == schedule.betas);
    CHECK(ckpt.guidance.w == 1.5);
    CHECK(ckpt.guidance.dropout_p == 0.12);
    CHECK(ckpt.config.resolution == cfg.resolution);
    CHECK(ckpt.config.antagonist_enabled == cfg.antagonist_enabled);

    auto restored = restore_network(ckpt);
    REQUIRE(restored->params().count() == net.params().count());
    for (size_t i = 0; i < net.params().count(); ++i) {
        CHECK(restored->params()[static_cast<int>(i)].name == net.params()[static_cast<int>(i)].name);
        CHECK(restored->params()[static_cast<int>(i)].value == net.params()[static_cast<int>(i)].value);
    }
    // identical outputs after restore
    Rng rng(19);
    Tensor x = random_tensor(1, cfg.resolution, rng);
    Tensor c = random_tensor(1, cfg.resolution, rng);
    Tensor o1 = net.forward(x, 5, &c, nullptr);
    Tensor o2 = restored->forward(x, 5, &c, nullptr);
    CHECK(o1.data == o2.data);
    std::remove("ckpt_test.bin");
}

TEST_CASE("train_step and complete integration on a toy setup") {
    UNetConfig cfg = tiny_config(false);
    DenoiserNetwork net(cfg, 20);
    NoiseSchedule schedule = linear_schedule(50);
    SecondMomentResampler resampler(50);
    GuidanceConfig guidance;
    AdamOptimizer opt(1e-3);
    Rng rng(21);

    // synthetic sample at the network resolution
    const int n = cfg.resolution;
    CompletionSample sample;
    sample.ground_truth = sample_to_grid(
        [](const Vec3& p) { return length(p) - 0.5; }, n, {-1, -1, -1}, 2.0 / (n - 1));
    sample.context = sample.ground_truth;
    sample.tooth_bbox = occupancy_bbox(sample.ground_truth);

    SUBCASE("loss is finite, nonnegative, and decreases over a short run") {
        double first = train_step(net, sample, schedule, guidance, resampler, opt, rng);
        CHECK(first >= 0.0);
        double running = first;
        for (int i = 0; i < 60; ++i)
            running = 0.9 * running +
                      0.1 * train_step(net, sample, schedule, guidance, resampler, opt, rng);
        CHECK(running < first);  // untrained head predicts 0; any learning reduces MSE
    }
    SUBCASE("dropout probability 1 always nulls the condition") {
        GuidanceConfig always_drop;
        always_drop.dropout_p = 0.999999;  // dropout_p < 1 by contract
        for (int i = 0; i < 20; ++i) {
            bool dropped = false;
            train_step(net, sample, schedule, always_drop, resampler, opt, rng, kDataScale,
                       &dropped);
            CHECK(dropped);
        }
    }
    SUBCASE("complete: determinism and single evaluation per step at w=1") {
        SdfGrid out1 = complete(net, schedule, sample.context, nullptr, 10, 1.0, 77);
        long long evals_before = net.eval_count();
        SdfGrid out2 = complete(net, schedule, sample.context, nullptr, 10, 1.0, 77);
        CHECK(net.eval_count() - evals_before == 10);  // one eval per step at w=1
        CHECK(out1.values() == out2.values());
        // two evals per step when w != 1
        evals_before = net.eval_count();
        complete(net, schedule, sample.context, nullptr, 10, 2.0, 77);
        CHECK(net.eval_count() - evals_before == 20);
        // values stay inside the truncation band
        for (float v : out1.values()) {
            CHECK(v <= kTruncation);
            CHECK(v >= -kTruncation);
        }
    }
    SUBCASE("resolution mismatch rejected") {
        SdfGrid wrong(n * 2, {-1, -1, -1}, 2.0 / (2 * n - 1));
        CHECK_THROWS_AS(complete(net, schedule, wrong, nullptr, 5, 1.0, 1), ValidationError);
    }
}
