#include <doctest.h>

#include <cmath>

#include <alc/refine.hpp>
#include <alc/rng.hpp>

using namespace alc;

namespace {

// Random point on the C-simplex with entries bounded away from the
// clamp, so the divergence identities hold exactly.
std::vector<double> simplex_point(Rng& rng, int c) {
    std::vector<double> p(static_cast<std::size_t>(c));
    double sum = 0.0;
    for (auto& v : p) {
        v = rng.uniform(0.01, 1.0);
        sum += v;
    }
    for (auto& v : p) v /= sum;
    return p;
}

Tensor one_pixel(std::initializer_list<double> probs) {
    Tensor t = Tensor::zeros({1, 1, static_cast<int>(probs.size())});
    int k = 0;
    for (double v : probs) t.at(0, 0, k++) = v;
    return t;
}

ProbStack manual_stack(int m, int h, int w, int c) {
    ProbStack s;
    s.sample_id = "manual";
    s.m = m;
    s.h = h;
    s.w = w;
    s.c = c;
    s.probs = Tensor::zeros({m, h, w, c});
    return s;
}

}  // namespace

TEST_SUITE("refine") {

TEST_CASE("summed divergence is nonnegative on the simplex and zero at equality") {
    Rng rng(41);
    for (int trial = 0; trial < 2000; ++trial) {
        const int c = 2 + static_cast<int>(rng.uniform_int(0, 3));
        const auto p = simplex_point(rng, c);
        const auto q = simplex_point(rng, c);
        Tensor mean = Tensor::zeros({1, 1, c});
        Tensor member = Tensor::zeros({1, 1, c});
        for (int k = 0; k < c; ++k) {
            mean.at(0, 0, k) = p[static_cast<std::size_t>(k)];
            member.at(0, 0, k) = q[static_cast<std::size_t>(k)];
        }
        CHECK(voxel_kl(mean, member).at(0, 0) >= 0.0);
        CHECK(voxel_kl(mean, mean).at(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("summed divergence hand value") {
    const Tensor mean = one_pixel({0.7, 0.3});
    const Tensor member = one_pixel({0.4, 0.6});
    const double expect = 0.7 * std::log(0.7 / 0.4) + 0.3 * std::log(0.3 / 0.6);
    CHECK(voxel_kl(mean, member).at(0, 0) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(expect > 0.0);
}

TEST_CASE("printed variant keeps only the last channel and can go negative") {
    const Tensor mean = one_pixel({0.7, 0.3});
    const Tensor member = one_pixel({0.4, 0.6});
    const double kl = voxel_kl(mean, member, KlForm::kPrinted).at(0, 0);
    CHECK(kl == doctest::Approx(0.3 * std::log(0.3 / 0.6)).epsilon(1e-12));
    CHECK(kl < 0.0);

    const Tensor mean3 = one_pixel({0.2, 0.3, 0.5});
    const Tensor mem3 = one_pixel({0.3, 0.5, 0.2});
    CHECK(voxel_kl(mean3, mem3, KlForm::kPrinted).at(0, 0) ==
          doctest::Approx(0.5 * std::log(0.5 / 0.2)).epsilon(1e-12));
}

TEST_CASE("divergence rejects mismatched shapes") {
    CHECK_THROWS(voxel_kl(one_pixel({0.5, 0.5}), Tensor::zeros({1, 1, 3})));
    CHECK_THROWS(voxel_kl(Tensor::zeros({2, 2}), Tensor::zeros({2, 2})));
}

TEST_CASE("stack mean and per-pass divergences") {
    ProbStack s = manual_stack(2, 1, 2, 2);
    // pixel 0: passes (0.8,0.2) and (0.4,0.6); pixel 1: both (0.5,0.5)
    s.probs.at(0, 0, 0, 0) = 0.8;
    s.probs.at(0, 0, 0, 1) = 0.2;
    s.probs.at(1, 0, 0, 0) = 0.4;
    s.probs.at(1, 0, 0, 1) = 0.6;
    for (int j = 0; j < 2; ++j)
        for (int c = 0; c < 2; ++c) s.probs.at(j, 0, 1, c) = 0.5;

    const Tensor mean = stack_mean(s);
    CHECK(mean.at(0, 0, 0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(mean.at(0, 0, 1) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(mean.at(0, 1, 0) == doctest::Approx(0.5).epsilon(1e-12));

    const UncertaintyMaps maps = uncertainty_maps(s);
    REQUIRE(maps.kl.shape == std::vector<int>{2, 1, 2});
    for (int j = 0; j < 2; ++j) {
        const Tensor ref = voxel_kl(maps.mean, s.slice(j));
        CHECK(maps.kl.at(j, 0, 0) == ref.at(0, 0));
        CHECK(maps.kl.at(j, 0, 1) == ref.at(0, 1));
        CHECK(maps.kl.at(j, 0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("fusion weights follow a softmax of negative divergence") {
    ProbStack s = manual_stack(2, 1, 1, 2);
    s.probs.at(0, 0, 0, 0) = 0.8;
    s.probs.at(0, 0, 0, 1) = 0.2;
    s.probs.at(1, 0, 0, 0) = 0.3;
    s.probs.at(1, 0, 0, 1) = 0.7;
    Tensor kl = Tensor::zeros({2, 1, 1});
    kl.at(0, 0, 0) = 0.1;
    kl.at(1, 0, 0) = 3.1;

    const double w0 = 1.0 / (1.0 + std::exp(-3.0));
    const double w1 = std::exp(-3.0) / (1.0 + std::exp(-3.0));
    const Tensor fused = fuse_refined(s, kl);
    CHECK(fused.at(0, 0, 0) == doctest::Approx((w0 * 0.8 + w1 * 0.3) / 2.0).epsilon(1e-12));
    CHECK(fused.at(0, 0, 1) == doctest::Approx((w0 * 0.2 + w1 * 0.7) / 2.0).epsilon(1e-12));
    CHECK(w0 == doctest::Approx(0.952574).epsilon(1e-5));

    // channel sum collapses to 1/m regardless of the weights
    CHECK(fused.at(0, 0, 0) + fused.at(0, 0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("equal divergences reduce fusion to the scaled stack mean") {
    Rng rng(42);
    for (int m : {2, 4, 8}) {
        ProbStack s = manual_stack(m, 3, 3, 3);
        for (int j = 0; j < m; ++j)
            for (int y = 0; y < 3; ++y)
                for (int x = 0; x < 3; ++x) {
                    const auto p = simplex_point(rng, 3);
                    for (int c = 0; c < 3; ++c)
                        s.probs.at(j, y, x, c) = p[static_cast<std::size_t>(c)];
                }
        const Tensor flat_kl = Tensor::zeros({m, 3, 3});
        const Tensor fused = fuse_refined(s, flat_kl);
        const Tensor mean = stack_mean(s);
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x)
                for (int c = 0; c < 3; ++c)
                    CHECK(fused.at(y, x, c) ==
                          doctest::Approx(mean.at(y, x, c) / m).epsilon(1e-12));
        CHECK(argmax_label(fused).v == argmax_label(mean).v);
    }
}

TEST_CASE("argmax is invariant to positive rescaling") {
    Rng rng(43);
    Tensor t = Tensor::zeros({4, 4, 3});
    for (auto& v : t.data) v = rng.uniform();
    Tensor scaled = t;
    for (auto& v : scaled.data) v *= 37.5;
    CHECK(argmax_label(t).v == argmax_label(scaled).v);
}

TEST_CASE("argmax ties resolve to the lower class") {
    Tensor t = Tensor::zeros({1, 2, 3});
    t.at(0, 0, 0) = 0.4;
    t.at(0, 0, 1) = 0.4;
    t.at(0, 0, 2) = 0.2;
    t.at(0, 1, 0) = 0.2;
    t.at(0, 1, 1) = 0.4;
    t.at(0, 1, 2) = 0.4;
    const LabelGrid lab = argmax_label(t);
    CHECK(lab.at(0, 0) == 0);
    CHECK(lab.at(0, 1) == 1);
    CHECK_THROWS(argmax_label(Tensor::zeros({2, 2})));
}

TEST_CASE("identical passes refine to their own argmax") {
    Rng rng(44);
    ProbStack s = manual_stack(4, 2, 2, 2);
    Tensor base = Tensor::zeros({2, 2, 2});
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) {
            const auto p = simplex_point(rng, 2);
            base.at(y, x, 0) = p[0];
            base.at(y, x, 1) = p[1];
        }
    for (int j = 0; j < 4; ++j)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x)
                for (int c = 0; c < 2; ++c) s.probs.at(j, y, x, c) = base.at(y, x, c);
    CHECK(refine_label(s).v == argmax_label(base).v);
}

TEST_CASE("perturbed stacks are reproducible and simplex-valued") {
    Rng rng(45);
    const ModelState teacher = init_params(Arch{}, rng);
    Tensor img = Tensor::zeros({16, 16});
    Rng ir(46);
    for (auto& v : img.data) v = ir.uniform();

    ForwardMode mode;
    const ProbStack a = perturbed_stack(teacher, img, 3, mode, 123, "s1");
    const ProbStack b = perturbed_stack(teacher, img, 3, mode, 123, "s1");
    CHECK(a.probs.data == b.probs.data);
    CHECK(a.sample_id == "s1");
    REQUIRE(a.seeds.size() == 3);
    for (int j = 0; j < 3; ++j)
        CHECK(a.seeds[static_cast<std::size_t>(j)] == mix_seed(123, static_cast<std::uint64_t>(j)));

    const ProbStack c = perturbed_stack(teacher, img, 3, mode, 124, "s1");
    CHECK(a.probs.data != c.probs.data);

    for (int j = 0; j < 3; ++j) {
        const Tensor sl = a.slice(j);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                CHECK(sl.at(y, x, 0) + sl.at(y, x, 1) == doctest::Approx(1.0).epsilon(1e-12));
    }
    // passes differ from one another thanks to noise and dropout
    CHECK(a.slice(0).data != a.slice(1).data);

    CHECK_THROWS(perturbed_stack(teacher, img, 1, mode, 0, "s"));
}

}  // TEST_SUITE
