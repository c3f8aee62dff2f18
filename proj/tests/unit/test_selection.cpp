#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <alc/rng.hpp>
#include <alc/selection.hpp>

using namespace alc;

namespace {

struct BruteSplit {
    std::vector<std::string> selected;
    std::vector<std::string> residual;
};

BruteSplit brute_force(const std::map<std::string, double>& scores, double k_ratio) {
    std::vector<std::pair<double, std::string>> flipped;
    flipped.reserve(scores.size());
    for (const auto& [id, s] : scores) flipped.emplace_back(s, id);
    std::stable_sort(flipped.begin(), flipped.end(),
                     [](const auto& a, const auto& b) {
                         return a.first < b.first || (a.first == b.first && a.second < b.second);
                     });
    const auto k = static_cast<std::size_t>(
        std::lround(k_ratio * static_cast<double>(scores.size())));
    BruteSplit out;
    for (std::size_t i = 0; i < flipped.size(); ++i)
        (i < k ? out.selected : out.residual).push_back(flipped[i].second);
    return out;
}

ProbStack tiny_stack(int m, int h, int w, int c) {
    ProbStack s;
    s.sample_id = "t";
    s.m = m;
    s.h = h;
    s.w = w;
    s.c = c;
    s.probs = Tensor::zeros({m, h, w, c});
    return s;
}

}  // namespace

TEST_SUITE("selection") {

TEST_CASE("splits agree with a brute-force oracle, ties included") {
    Rng rng(51);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_int(0, 24));
        std::map<std::string, double> scores;
        for (int i = 0; i < n; ++i) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "s%03d", i);
            // coarse grid of scores so duplicates are common
            scores[buf] = 0.05 * static_cast<double>(rng.uniform_int(0, 6));
        }
        const double k_ratio = rng.uniform();
        const SelectionResult got = select_top_k(scores, k_ratio);
        const BruteSplit want = brute_force(scores, k_ratio);
        CHECK(got.selected == want.selected);
        CHECK(got.residual == want.residual);
        CHECK(got.k_effective == static_cast<int>(want.selected.size()));
        CHECK(got.scores == scores);
    }
}

TEST_CASE("rounding of the cut point") {
    std::map<std::string, double> scores{
        {"a", 0.3}, {"b", 0.1}, {"c", 0.2}};
    CHECK(select_top_k(scores, 0.5).k_effective == 2);  // lround(1.5)
    CHECK(select_top_k(scores, 0.4).k_effective == 1);
    const auto half = select_top_k(scores, 0.5);
    CHECK(half.selected == std::vector<std::string>{"b", "c"});
    CHECK(half.residual == std::vector<std::string>{"a"});
}

TEST_CASE("extreme ratios keep everything or nothing") {
    std::map<std::string, double> scores{{"a", 0.3}, {"b", 0.1}, {"c", 0.2}, {"d", 0.1}};
    const auto none = select_top_k(scores, 0.0);
    CHECK(none.selected.empty());
    CHECK(none.k_effective == 0);
    CHECK(none.residual == std::vector<std::string>{"b", "d", "c", "a"});

    const auto all = select_top_k(scores, 1.0);
    CHECK(all.residual.empty());
    CHECK(all.selected == std::vector<std::string>{"b", "d", "c", "a"});
}

TEST_CASE("invalid input throws") {
    CHECK_THROWS(select_top_k({}, 0.5));
    std::map<std::string, double> one{{"a", 0.1}};
    CHECK_THROWS(select_top_k(one, -0.01));
    CHECK_THROWS(select_top_k(one, 1.01));
}

TEST_CASE("uncertainty of a maximally split two-pass stack hits the bound") {
    ProbStack s = tiny_stack(2, 1, 1, 2);
    s.probs.at(0, 0, 0, 0) = 1.0;
    s.probs.at(0, 0, 0, 1) = 0.0;
    s.probs.at(1, 0, 0, 0) = 0.0;
    s.probs.at(1, 0, 0, 1) = 1.0;
    CHECK(sample_uncertainty(s) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("identical passes have zero uncertainty") {
    // exactly representable entries keep the mean bit-exact
    ProbStack s = tiny_stack(4, 2, 2, 2);
    for (int j = 0; j < 4; ++j)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x) {
                s.probs.at(j, y, x, 0) = 0.75;
                s.probs.at(j, y, x, 1) = 0.25;
            }
    CHECK(sample_uncertainty(s) == 0.0);
}

TEST_CASE("uncertainty matches the population variance formula") {
    Rng rng(52);
    ProbStack s = tiny_stack(4, 2, 3, 2);
    for (auto& v : s.probs.data) v = rng.uniform();

    const int m = 4, n = 2 * 3 * 2;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double mean = 0.0;
        for (int j = 0; j < m; ++j) mean += s.probs.data[static_cast<std::size_t>(j * n + i)];
        mean /= m;
        for (int j = 0; j < m; ++j) {
            const double d = s.probs.data[static_cast<std::size_t>(j * n + i)] - mean;
            acc += d * d;
        }
    }
    CHECK(sample_uncertainty(s) == doctest::Approx(acc / (m * n)).epsilon(1e-12));
    CHECK(sample_uncertainty(s) <= 0.25);
}

}  // TEST_SUITE
