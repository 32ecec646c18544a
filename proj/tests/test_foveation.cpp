// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fovseg/foveation.hpp"
#include "oracles.hpp"

using namespace fovseg;

namespace {

PatchSet constant_patches(const std::vector<double>& fills, int s = 4, int c = 1) {
    PatchSet set;
    set.spec.fovs.resize(fills.size());
    for (std::size_t d = 0; d < fills.size(); ++d) {
        set.spec.fovs[d] = s * (1 + static_cast<int>(d));
        set.patches.emplace_back(s, s, c, fills[d]);
    }
    return set;
}

double entropy(std::span<const double> p) {
    double h = 0;
    for (double v : p)
        if (v > 0) h -= v * std::log(v);
    return h;
}

}  // namespace

TEST_CASE("temperature schedule") {
    TemperatureSchedule sched;
    sched.rate = 1.0 / 1000.0;
    CHECK(tau_at(sched, 0) == 1.0);
    CHECK(tau_at(sched, 1000) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(tau_at(sched, 100000) == 0.10);
    // Non-increasing, floor held.
    double prev = 2.0;
    for (long t = 0; t < 5000; t += 50) {
        const double tau = tau_at(sched, t);
        CHECK(tau <= prev + 1e-15);
        CHECK(tau >= 0.10);
        CHECK(tau <= 1.0);
        prev = tau;
    }
}

TEST_CASE("foveation forward with zero weights is uniform 1/D") {
    FoveationNet net(1, 5, 17);
    for (auto& p : net.params().items())
        if (p->name.find(".conv.w") != std::string::npos)
            std::fill(p->value.begin(), p->value.end(), 0.0);
    ImageTensor lowres(6, 7, 1);
    RngStream rng(3);
    for (auto& v : lowres.values) v = rng.uniform();
    const PatchDistribution dist = net.forward_dist(lowres);
    REQUIRE(dist.valid());
    for (double v : dist.probs) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("foveation forward produces a valid distribution for random inputs") {
    FoveationNet net(2, 3, 23);
    for (int it = 0; it < 5; ++it) {
        ImageTensor lowres(5 + it, 9 - it, 2);
        RngStream rng(100 + static_cast<std::uint64_t>(it));
        for (auto& v : lowres.values) v = rng.uniform(-2.0, 2.0);
        CHECK(net.forward_dist(lowres).valid());
    }
}

TEST_CASE("foveation forward agrees with the independent naive forward") {
    FoveationNet net(1, 3, 29);
    ImageTensor lowres(8, 8, 1);
    RngStream rng(30);
    for (auto& v : lowres.values) v = rng.uniform();
    const PatchDistribution dist = net.forward_dist(lowres);
    const auto naive = oracle::naive_foveation_forward(net, lowres);
    REQUIRE(dist.probs.size() == naive.size());
    for (std::size_t i = 0; i < naive.size(); ++i)
        CHECK(std::abs(dist.probs[i] - naive[i]) < 1e-9);
}

TEST_CASE("channel-count mismatch raises a configuration error") {
    FoveationNet net(3, 5, 31);
    Graph g;
    auto in = g.constant({4, 4, 1}, std::vector<double>(16, 0.0));
    CHECK_THROWS_AS(net.forward(g, in, false, nullptr), ConfigError);
}

TEST_CASE("sample_categorical degenerate and frequency cases") {
    RngStream rng(37);
    const std::vector<double> onehot{1.0, 0.0, 0.0, 0.0, 0.0};
    for (int i = 0; i < 100; ++i) CHECK(sample_categorical(onehot, rng) == 0);

    const std::vector<double> uniform(5, 0.2);
    std::vector<int> counts(5, 0);
    const int n = 50000;
    for (int i = 0; i < n; ++i) ++counts[sample_categorical(uniform, rng)];
    for (int d = 0; d < 5; ++d)
        CHECK(std::abs(counts[d] / static_cast<double>(n) - 0.2) < 0.01);

    const std::vector<double> biased{0.7, 0.3};
    std::vector<int> c2(2, 0);
    for (int i = 0; i < n; ++i) ++c2[sample_categorical(biased, rng)];
    CHECK(std::abs(c2[0] / static_cast<double>(n) - 0.7) < 0.01);

    const std::vector<double> negative{1.2, -0.2};
    CHECK_THROWS_AS(sample_categorical(negative, rng), ContractViolation);
    const std::vector<double> not_normalized{0.5, 0.4};
    CHECK_THROWS_AS(sample_categorical(not_normalized, rng), ContractViolation);
}

TEST_CASE("gumbel-max argmax reproduces the categorical distribution") {
    RngStream rng(41);
    const std::vector<double> f{0.5, 0.2, 0.2, 0.05, 0.05};
    std::vector<int> counts(5, 0);
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        std::vector<double> z(5);
        for (int d = 0; d < 5; ++d) z[d] = std::log(f[d]) + rng.gumbel();
        ++counts[argmax_index(z)];
    }
    for (int d = 0; d < 5; ++d)
        CHECK(std::abs(counts[d] / static_cast<double>(n) - f[d]) < 0.02);
}

TEST_CASE("gsm sample: one-hot input stays one-hot, weights sum to one") {
    RngStream rng(43);
    const std::vector<double> onehot{0.0, 1.0, 0.0};
    for (int i = 0; i < 200; ++i) {
        const auto w = gsm_weights(onehot, 0.7, rng);
        CHECK(w[1] > 0.999);
        CHECK(std::abs(w[0] + w[1] + w[2] - 1.0) < 1e-9);
    }
}

TEST_CASE("gsm at tiny temperature is nearly hard") {
    // The winning margin of a Gumbel race is Exp(1), so the weight exceeds
    // 0.99 whenever the margin beats tau*log(99*(D-1)) ~ 0.057: probability
    // exp(-0.057) ~ 0.945. Monte-Carlo oracle over 2e5 draws gives 0.968 for
    // this f; 0.95 is the frozen conservative bound.
    RngStream rng(47);
    const std::vector<double> f{0.4, 0.3, 0.2, 0.1};
    int hard = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto w = gsm_weights(f, 0.01, rng);
        if (*std::max_element(w.begin(), w.end()) > 0.99) ++hard;
    }
    CHECK(hard >= static_cast<int>(0.95 * n));
}

TEST_CASE("gsm argmax frequencies follow the probabilities") {
    RngStream rng(53);
    const std::vector<double> f{0.6, 0.4};
    std::vector<int> counts(2, 0);
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        const auto w = gsm_weights(f, 0.5, rng);
        ++counts[argmax_index(w)];
    }
    for (int d = 0; d < 2; ++d)
        CHECK(std::abs(counts[d] / static_cast<double>(n) - f[d]) < 0.02);
}

TEST_CASE("gsm mean entropy is non-increasing as tau anneals") {
    const std::vector<double> taus{1.0, 0.5, 0.2, 0.1};
    const std::vector<double> f{0.35, 0.3, 0.2, 0.15};
    std::vector<double> means;
    for (double tau : taus) {
        double acc = 0;
        int n = 0;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            RngStream rng = RngStream::derive(61, "entropy", seed);
            for (int i = 0; i < 2000; ++i) {
                acc += entropy(gsm_weights(f, tau, rng));
                ++n;
            }
        }
        means.push_back(acc / n);
    }
    for (std::size_t i = 1; i < means.size(); ++i) CHECK(means[i] <= means[i - 1] + 1e-9);
}

TEST_CASE("gsm gradients flow to the probabilities") {
    const std::vector<double> f{0.5, 0.3, 0.2};
    const std::vector<double> proj{1.0, -2.0, 0.5};
    const auto loss_at = [&](const std::vector<double>& probs) {
        Graph g;
        RngStream rng(71);  // same noise each call
        auto p = g.constant({3}, probs);
        auto w = gsm_sample(g, p, 0.8, rng);
        double acc = 0;
        for (int i = 0; i < 3; ++i) acc += proj[static_cast<std::size_t>(i)] * w->value[i];
        return acc;
    };
    Graph g;
    RngStream rng(71);
    auto p = g.leaf({3}, f, true);
    auto w = gsm_sample(g, p, 0.8, rng);
    auto loss = weighted_sum(g, w, proj);
    g.backward(loss);
    for (int i = 0; i < 3; ++i) {
        auto probe = f;
        const double fd = oracle::central_diff([&]() { return loss_at(probe); }, &probe[i]);
        CHECK(oracle::rel_err(fd, p->grad[static_cast<std::size_t>(i)]) < 1e-3);
    }
}

TEST_CASE("mean_combine trivial and exact blends") {
    // One-hot returns the selected patch bitwise.
    auto set = constant_patches({0.1, 0.9, 0.4});
    RngStream rng(73);
    for (auto& p : set.patches)
        for (auto& v : p.values) v = rng.uniform();
    Graph g;
    auto f = g.constant({3}, {0.0, 1.0, 0.0});
    auto out = mean_combine(g, f, set);
    CHECK(out->value == set.patches[1].values);

    // Uniform weights over identical patches reproduce the patch.
    auto same = constant_patches({0.6, 0.6, 0.6});
    Graph g2;
    auto f2 = g2.constant({3}, std::vector<double>(3, 1.0 / 3));
    auto out2 = mean_combine(g2, f2, same);
    for (double v : out2->value) CHECK(v == doctest::Approx(0.6).epsilon(1e-12));

    // (0.25, 0.75) over constants 0 and 1 -> constant 0.75.
    auto pair = constant_patches({0.0, 1.0});
    Graph g3;
    auto f3 = g3.constant({2}, {0.25, 0.75});
    auto out3 = mean_combine(g3, f3, pair);
    for (double v : out3->value) CHECK(v == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("mean_combine gradient w.r.t. weights is the patch inner product") {
    auto set = constant_patches({0.0, 0.0, 0.0});
    RngStream rng(79);
    for (auto& p : set.patches)
        for (auto& v : p.values) v = rng.uniform(-1.0, 1.0);
    Graph g;
    auto f = g.leaf({3}, std::vector<double>{0.2, 0.5, 0.3}, true);
    auto out = mean_combine(g, f, set);
    std::vector<double> proj(out->size());
    for (auto& v : proj) v = rng.uniform(-1.0, 1.0);
    auto loss = weighted_sum(g, out, proj);
    g.backward(loss);
    for (int d = 0; d < 3; ++d) {
        double expect = 0;
        for (std::size_t i = 0; i < proj.size(); ++i)
            expect += proj[i] * set.patches[static_cast<std::size_t>(d)].values[i];
        CHECK(f->grad[static_cast<std::size_t>(d)] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("mode_select picks the argmax with lowest-index tie-break") {
    auto set = constant_patches({0.1, 0.2, 0.3});
    Graph g;
    auto f = g.constant({3}, {0.2, 0.5, 0.3});
    auto out = mode_select(g, f, set);
    CHECK(out->value == set.patches[1].values);

    Graph g2;
    auto tie = g2.constant({2}, {0.5, 0.5});
    auto set2 = constant_patches({0.7, 0.9});
    auto out2 = mode_select(g2, tie, set2);
    CHECK(out2->value == set2.patches[0].values);  // documented tie-break
}

TEST_CASE("straight-through backward copies the blend Jacobian") {
    auto set = constant_patches({0.0, 0.0});
    set.patches[0].values = {1.0, 2.0, 3.0, 4.0, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
    set.patches[1].values = {2.0, 0.0, 1.0, -1.0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1};
    Graph g;
    auto f = g.leaf({2}, std::vector<double>{0.3, 0.7}, true);
    auto out = mode_select(g, f, set);
    CHECK(out->value == set.patches[1].values);  // forward is hard
    std::vector<double> up(16, 0.0);
    up[0] = 2.0;
    up[3] = -1.0;  // upstream gradient on two slots
    g.backward_seeded(out, up);
    // Hand Jacobian: d out / d f_d treated as patch_d.
    CHECK(f->grad[0] == doctest::Approx(2.0 * 1.0 + (-1.0) * 4.0).epsilon(1e-14));
    CHECK(f->grad[1] == doctest::Approx(2.0 * 2.0 + (-1.0) * (-1.0)).epsilon(1e-14));
}

TEST_CASE("straight-through forward equals the hard one-hot blend bitwise") {
    RngStream rng(83);
    for (int it = 0; it < 20; ++it) {
        auto set = constant_patches({0.0, 0.0, 0.0, 0.0}, 6, 2);
        for (auto& p : set.patches)
            for (auto& v : p.values) v = rng.uniform();
        std::vector<double> f(4);
        double s = 0;
        for (auto& v : f) s += (v = rng.uniform());
        for (auto& v : f) v /= s;
        Graph g;
        auto fn = g.constant({4}, f);
        auto hard = mode_select(g, fn, set);
        std::vector<double> onehot(4, 0.0);
        onehot[argmax_index(f)] = 1.0;
        auto oh = g.constant({4}, onehot);
        auto blend = mean_combine(g, oh, set);
        CHECK(hard->value == blend->value);
    }
}

TEST_CASE("foveation parameters carry the reserved name prefix") {
    FoveationNet net(1, 4, 91);
    for (const auto& p : net.params().items()) CHECK(p->name.rfind("fov.", 0) == 0);
}
