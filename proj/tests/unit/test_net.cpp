#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <alc/net.hpp>
#include <alc/refine.hpp>

using namespace alc;

namespace {

Tensor toy_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Tensor img = Tensor::zeros({h, w});
    for (auto& v : img.data) v = rng.uniform();
    return img;
}

double batch_total(const ModelState& state, const std::vector<LossItem>& items,
                   const LossSpec& spec, const ForwardMode& mode) {
    return loss_and_grad(state, items, spec, mode, nullptr).total;
}

}  // namespace

TEST_SUITE("net") {

TEST_CASE("parameter budget is pinned") {
    Rng rng(1);
    const ModelState m = init_params(Arch{}, rng);
    CHECK(m.param_count() == 29626);
    CHECK(m.params.size() == 22);  // 2 convs x 5 stages + head, weight and bias each
}

TEST_CASE("initialization respects the fan-in bound, biases start at zero") {
    Rng rng(2);
    const ModelState m = init_params(Arch{}, rng);
    for (const auto& p : m.params) {
        if (p.name.ends_with(".b")) {
            for (double v : p.value.data) CHECK(v == 0.0);
        } else {
            const int ci = p.value.dim(1), k = p.value.dim(2);
            const double bound = std::sqrt(6.0 / (ci * k * k));
            for (double v : p.value.data) {
                CHECK(v >= -bound);
                CHECK(v <= bound);
            }
        }
    }
}

TEST_CASE("forward emits per-pixel distributions") {
    Rng rng(3);
    const ModelState m = init_params(Arch{}, rng);
    const Tensor img = toy_image(16, 16, 5);
    const Tensor prob = forward(m, img, ForwardMode{});
    REQUIRE(prob.shape == std::vector<int>{16, 16, 2});
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            double sum = 0.0;
            for (int c = 0; c < 2; ++c) {
                CHECK(prob.at(y, x, c) > 0.0);
                CHECK(prob.at(y, x, c) < 1.0);
                sum += prob.at(y, x, c);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
}

TEST_CASE("deterministic mode ignores the seed, stochastic mode uses it") {
    Rng rng(4);
    const ModelState m = init_params(Arch{}, rng);
    const Tensor img = toy_image(16, 16, 6);

    ForwardMode det1, det2;
    det1.rng_seed = 1;
    det2.rng_seed = 2;
    CHECK(forward(m, img, det1).data == forward(m, img, det2).data);

    ForwardMode st1, st2;
    st1.kind = st2.kind = ForwardKind::kStochastic;
    st1.rng_seed = st2.rng_seed = 9;
    CHECK(forward(m, img, st1).data == forward(m, img, st2).data);
    st2.rng_seed = 10;
    CHECK(forward(m, img, st1).data != forward(m, img, st2).data);
}

TEST_CASE("image sides must match the pooling factor") {
    Rng rng(5);
    const ModelState m = init_params(Arch{}, rng);
    CHECK_THROWS(forward(m, toy_image(18, 16, 7), ForwardMode{}));
    CHECK_THROWS(forward(m, toy_image(16, 13, 7), ForwardMode{}));
    CHECK_NOTHROW(forward(m, toy_image(16, 24, 7), ForwardMode{}));
}

TEST_CASE("arch validation") {
    Arch a;
    a.widths = {8};
    CHECK_THROWS(a.validate());
    a = Arch{};
    a.n_classes = 1;
    CHECK_THROWS(a.validate());
    a = Arch{};
    a.widths = {8, 16, 2};
    CHECK_THROWS(a.validate());
    a = Arch{};
    a.dropout_rate = 1.0;
    CHECK_THROWS(a.validate());
    CHECK_NOTHROW(Arch{}.validate());
}

TEST_CASE("model blobs round-trip through float32") {
    Rng rng(6);
    const ModelState m = init_params(Arch{}, rng);
    const auto path = std::filesystem::temp_directory_path() / "alc_test_model.bin";
    save_model_blob(m, path);

    Rng rng2(7);
    ModelState back = init_params(Arch{}, rng2);
    load_model_blob(back, path);
    for (std::size_t p = 0; p < m.params.size(); ++p)
        for (std::size_t i = 0; i < m.params[p].value.data.size(); ++i)
            CHECK(back.params[p].value.data[i] ==
                  static_cast<double>(static_cast<float>(m.params[p].value.data[i])));

    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
    CHECK_THROWS(load_model_blob(back, path));
    std::filesystem::remove(path);
}

TEST_CASE("sampled parameter gradients match finite differences") {
    Rng rng(8);
    ModelState m = init_params(Arch{}, rng);
    const Tensor img = toy_image(16, 16, 11);
    const Tensor img2 = toy_image(16, 16, 12);
    LabelGrid lab(16, 16);
    for (int y = 4; y < 10; ++y)
        for (int x = 6; x < 13; ++x) lab.at(y, x) = 1;

    // One perturbed stack reused by the ls item and the consistency term.
    ForwardMode pert;
    pert.kind = ForwardKind::kStochastic;
    const ProbStack stack = [&] {
        Rng r2(9);
        ModelState teacher = init_params(Arch{}, r2);
        return perturbed_stack(teacher, img2, 2, pert, 77, "t");
    }();

    std::vector<LossItem> items;
    items.push_back({img, lab, LossTerm::kHs, nullptr, 101});
    items.push_back({img2, lab, LossTerm::kLs, &stack.probs, 102});
    items.push_back({img2, lab, LossTerm::kN, &stack.probs, 103});

    LossSpec spec;
    spec.lambda_now = 0.7;
    ForwardMode mode;
    mode.kind = ForwardKind::kStochastic;

    ModelState grads;
    const LossBreakdown bd = loss_and_grad(m, items, spec, mode, &grads);
    CHECK(std::isfinite(bd.total));
    CHECK(bd.total ==
          doctest::Approx(bd.hs + spec.lambda_now * (3.0 * bd.ls + 2.0 * bd.n + bd.c))
              .epsilon(1e-12));

    Rng pick(99);
    int checked = 0, ok = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const auto pi = static_cast<std::size_t>(
            pick.uniform_int(0, static_cast<std::int64_t>(m.params.size()) - 1));
        const auto ci = static_cast<std::size_t>(pick.uniform_int(
            0, static_cast<std::int64_t>(m.params[pi].value.data.size()) - 1));
        const double keep = m.params[pi].value.data[ci];
        const double h = 1e-4;
        m.params[pi].value.data[ci] = keep + h;
        const double up = batch_total(m, items, spec, mode);
        m.params[pi].value.data[ci] = keep - h;
        const double dn = batch_total(m, items, spec, mode);
        m.params[pi].value.data[ci] = keep;
        const double num = (up - dn) / (2.0 * h);
        const double ana = grads.params[pi].value.data[ci];
        const double scale = std::max({std::abs(num), std::abs(ana), 1e-6});
        ++checked;
        if (std::abs(num - ana) / scale < 1e-3) ++ok;
    }
    CHECK(checked == 60);
    CHECK(ok >= 59);
}

TEST_CASE("mt-style spec zeroes the lq gradient exactly") {
    Rng rng(10);
    ModelState m = init_params(Arch{}, rng);
    const Tensor img = toy_image(16, 16, 13);
    LabelGrid lab(16, 16);
    lab.at(8, 8) = 1;

    ForwardMode pert;
    pert.kind = ForwardKind::kStochastic;
    Rng r2(11);
    const ModelState teacher = init_params(Arch{}, r2);
    const ProbStack stack = perturbed_stack(teacher, img, 2, pert, 5, "t");

    LabelGrid other(16, 16);
    for (int y = 0; y < 16; ++y) other.at(y, 3) = 1;

    std::vector<LossItem> batch_a{{img, lab, LossTerm::kHs, nullptr, 1},
                                  {img, lab, LossTerm::kLs, &stack.probs, 2},
                                  {img, lab, LossTerm::kN, &stack.probs, 3}};
    std::vector<LossItem> batch_b{{img, lab, LossTerm::kHs, nullptr, 1},
                                  {img, other, LossTerm::kLs, &stack.probs, 2},
                                  {img, other, LossTerm::kN, &stack.probs, 3}};

    LossSpec mt;
    mt.alpha = 0.0;
    mt.beta = 0.0;
    mt.lambda_now = 0.8;

    ForwardMode mode;
    mode.kind = ForwardKind::kStochastic;
    ModelState ga, gb;
    const LossBreakdown a = loss_and_grad(m, batch_a, mt, mode, &ga);
    const LossBreakdown b = loss_and_grad(m, batch_b, mt, mode, &gb);
    // ls and n are still reported, just weighted to zero in the total, so
    // swapping the lq labels must not move the total or any gradient.
    CHECK(a.ls > 0.0);
    CHECK(a.ls != b.ls);
    CHECK(a.total == b.total);
    CHECK(a.total == doctest::Approx(a.hs + 0.8 * a.c).epsilon(1e-12));
    for (std::size_t p = 0; p < ga.params.size(); ++p)
        CHECK(ga.params[p].value.data == gb.params[p].value.data);

    LossSpec full;
    full.lambda_now = 0.8;
    ModelState gc;
    const LossBreakdown c = loss_and_grad(m, batch_a, full, mode, &gc);
    CHECK(c.total != a.total);
}

}  // TEST_SUITE
