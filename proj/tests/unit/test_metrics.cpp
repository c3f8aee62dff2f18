#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <alc/metrics.hpp>
#include <alc/rng.hpp>

#include "../common/oracles.hpp"

using namespace alc;

namespace {

LabelGrid from_rows(const std::vector<std::string>& rows) {
    LabelGrid g(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) g.at(y, x) = static_cast<std::uint8_t>(rows[y][x] - '0');
    return g;
}

LabelGrid random_mask(Rng& rng, int h, int w, double p) {
    LabelGrid g(h, w);
    for (auto& v : g.v) v = rng.uniform() < p ? 1 : 0;
    return g;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("dice and jaccard hand cases") {
    // |P| = 4, |G| = 8, overlap 4.
    const LabelGrid p = from_rows({"1111", "0000", "0000"});
    const LabelGrid g = from_rows({"1111", "1111", "0000"});
    CHECK(dice(p, g) == doctest::Approx(2.0 * 4 / 12).epsilon(1e-12));
    // |P∩G| = 4, |P∪G| = 8.
    CHECK(jaccard(p, g) == 0.5);

    const LabelGrid q = from_rows({"0000", "0000", "1100"});
    CHECK(dice(p, p) == 1.0);
    CHECK(jaccard(p, p) == 1.0);
    CHECK(dice(p, q) == 0.0);
    CHECK(jaccard(p, q) == 0.0);
    CHECK(dice(p, g) == dice(g, p));
    CHECK(jaccard(p, g) == jaccard(g, p));

    const LabelGrid e1(4, 4), e2(4, 4);
    CHECK(dice(e1, e2) == 1.0);
    CHECK(jaccard(e1, e2) == 1.0);

    CHECK_THROWS(dice(p, LabelGrid(5, 5)));
}

TEST_CASE("surface points follow the 4-neighbor border rule") {
    LabelGrid single(5, 5);
    single.at(2, 3) = 1;
    const auto sp = surface_points(single);
    REQUIRE(sp.size() == 1);
    CHECK(sp[0] == std::pair<int, int>(2, 3));

    LabelGrid square(5, 5);
    for (int y = 1; y <= 3; ++y)
        for (int x = 1; x <= 3; ++x) square.at(y, x) = 1;
    CHECK(surface_points(square).size() == 8);  // ring of the 3x3 block

    const LabelGrid full(5, 5, 1);
    CHECK(surface_points(full).size() == 16);  // grid border counts as outside

    CHECK(surface_points(LabelGrid(5, 5)).empty());
}

TEST_CASE("translated square distances") {
    LabelGrid a(16, 16), b(16, 16);
    for (int y = 5; y <= 9; ++y)
        for (int x = 5; x <= 9; ++x) {
            a.at(y, x) = 1;
            b.at(y, x + 1) = 1;
        }
    REQUIRE(hd95(a, b).has_value());
    CHECK(*hd95(a, b) == doctest::Approx(1.0).epsilon(1e-12));
    // top and bottom rows overlap, so half the directed distances
    // are zero and the other half exactly one
    CHECK(*asd(a, b) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(*hd95(a, a) == 0.0);
    CHECK(*asd(a, a) == 0.0);
}

TEST_CASE("hd95 trims a single far outlier") {
    LabelGrid g(32, 32), p(32, 32);
    for (int y = 5; y <= 18; ++y)
        for (int x = 5; x <= 18; ++x) {
            g.at(y, x) = 1;
            p.at(y, x) = 1;
        }
    p.at(28, 28) = 1;  // lone outlier pixel about 13px from the square
    REQUIRE(surface_points(p).size() >= 40);
    CHECK(*hd95(p, g) <= 1.0);
    CHECK(*asd(p, g) < 0.5);
}

TEST_CASE("empty masks are not computable") {
    const LabelGrid empty(8, 8);
    LabelGrid some(8, 8);
    some.at(4, 4) = 1;
    CHECK(!hd95(empty, some).has_value());
    CHECK(!hd95(some, empty).has_value());
    CHECK(!asd(empty, empty).has_value());
}

TEST_CASE("squared EDT matches brute force") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const int h = 3 + static_cast<int>(rng.uniform_int(0, 12));
        const int w = 3 + static_cast<int>(rng.uniform_int(0, 12));
        std::vector<std::pair<int, int>> sites;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (rng.uniform() < 0.1) sites.emplace_back(y, x);
        if (sites.empty()) sites.emplace_back(0, 0);
        const std::vector<double> d2 = squared_edt(h, w, sites);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double best = 1e30;
                for (const auto& s : sites) {
                    const double dy = y - s.first, dx = x - s.second;
                    best = std::min(best, dy * dy + dx * dx);
                }
                CHECK(d2[static_cast<std::size_t>(y) * w + x] ==
                      doctest::Approx(best).epsilon(1e-12));
            }
    }
}

TEST_CASE("hd95 and asd match the all-pairs oracle") {
    Rng rng(77);
    int done = 0;
    while (done < 100) {
        const LabelGrid a = random_mask(rng, 16, 16, 0.25);
        const LabelGrid b = random_mask(rng, 16, 16, 0.25);
        if (a.count_nonzero() == 0 || b.count_nonzero() == 0) continue;
        ++done;
        REQUIRE(hd95(a, b).has_value());
        CHECK(std::abs(*hd95(a, b) - oracle::hd95(a, b)) < 1e-9);
        CHECK(std::abs(*asd(a, b) - oracle::asd(a, b)) < 1e-9);
    }
}

TEST_CASE("compare_labels aggregates per class") {
    LabelGrid pred(8, 8), ref(8, 8);
    for (int x = 0; x < 4; ++x) pred.at(2, x) = 1;
    for (int x = 0; x < 4; ++x) ref.at(2, x) = 1;
    pred.at(5, 5) = 2;
    ref.at(5, 6) = 2;
    const MetricsReport rep = compare_labels(pred, ref, 3);
    CHECK(rep.per_class.at(1).dice == 1.0);
    CHECK(rep.per_class.at(2).dice == 0.0);
    CHECK(rep.overall.dice == doctest::Approx(0.5).epsilon(1e-12));
    REQUIRE(rep.per_class.at(2).hd95.has_value());
    CHECK(*rep.per_class.at(2).hd95 == doctest::Approx(1.0).epsilon(1e-12));
    // jaccard <= dice everywhere
    CHECK(rep.overall.jaccard <= rep.overall.dice);
}

TEST_CASE("metrics csv has the documented shape") {
    LabelGrid pred(8, 8), ref(8, 8);
    pred.at(1, 1) = 1;
    ref.at(1, 1) = 1;
    SampleMetricsRow row{"s0000", compare_labels(pred, ref, 2)};
    const auto path = std::filesystem::temp_directory_path() / "alc_test_metrics.csv";
    write_metrics_csv(path, {row});
    std::ifstream f(path);
    std::string l1, l2, l3, l4;
    std::getline(f, l1);
    std::getline(f, l2);
    std::getline(f, l3);
    std::getline(f, l4);
    CHECK(l1 == "# hd95 and asd are in pixel units");
    CHECK(l2 == "id,class,dice,jaccard,hd95,asd");
    CHECK(l3 == "s0000,1,1,1,0,0");
    CHECK(l4.substr(0, 13) == "__mean__,all,");
    std::filesystem::remove(path);
}

}  // TEST_SUITE
