#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "convpoint/kdtree.hpp"
#include "convpoint/pointcloud.hpp"
#include "convpoint/rng.hpp"
#include "convpoint/sampling.hpp"

using namespace convpoint;

namespace {

// brute-force k-NN with the same tie-break (distance, then index) and the
// same cyclic padding rule
std::vector<std::uint32_t> brute_knn(const double* pts, std::size_t n, std::size_t d,
                                     const double* q, std::size_t k) {
    std::vector<std::pair<double, std::uint32_t>> all(n);
    for (std::size_t i = 0; i < n; ++i) {
        double dist = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const double r = pts[i * d + j] - q[j];
            dist += r * r;
        }
        all[i] = {dist, static_cast<std::uint32_t>(i)};
    }
    std::sort(all.begin(), all.end());
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(all[i % n].second);
    return out;
}

// independent re-simulation of the score-based sampler
std::vector<std::uint32_t> simulate_sampler(const double* pts, std::size_t n, std::size_t d,
                                            std::size_t m, std::size_t k, Rng& rng) {
    std::vector<long> score(n, 0);
    std::vector<bool> sel(n, false);
    std::size_t nsel = 0;
    std::vector<std::uint32_t> picks;
    for (std::size_t it = 0; it < m; ++it) {
        std::vector<std::uint32_t> pool;
        const bool all = nsel == n;
        long best = LONG_MAX;
        for (std::size_t i = 0; i < n; ++i) {
            if (!all && sel[i]) continue;
            best = std::min(best, score[i]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!all && sel[i]) continue;
            if (score[i] == best) pool.push_back(static_cast<std::uint32_t>(i));
        }
        const std::uint32_t pick = pool[rng.below(pool.size())];
        if (!sel[pick]) {
            sel[pick] = true;
            ++nsel;
        }
        score[pick] += 100;
        for (std::uint32_t nb : brute_knn(pts, n, d, pts + pick * d, std::min(k, n)))
            score[nb] += 1;
        picks.push_back(pick);
    }
    return picks;
}

} // namespace

TEST_CASE("kd-tree on a single point") {
    const double p[3] = {1, 2, 3};
    const KdTree tree(p, 1, 3);
    CHECK(tree.knn(p, 1) == std::vector<std::uint32_t>{0});
}

TEST_CASE("kd-tree equals brute force on 1000 random points") {
    Rng rng(100);
    const std::size_t n = 1000, d = 3;
    std::vector<double> pts(n * d);
    for (double& x : pts) x = rng.uniform(-1, 1);
    const KdTree tree(pts.data(), n, d);
    for (int q = 0; q < 100; ++q) {
        double query[3] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        CHECK(tree.knn(query, 8) == brute_knn(pts.data(), n, d, query, 8));
    }
}

TEST_CASE("duplicate points are both retrievable") {
    const double pts[6] = {0.5, 0.5, 0.5, 0.5, 2.0, 2.0};
    const KdTree tree(pts, 3, 2);
    const double q[2] = {0.5, 0.5};
    CHECK(tree.knn(q, 2) == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("query on a cloud point returns it first") {
    const double pts[6] = {0, 0, 1, 1, 2, 2};
    const KdTree tree(pts, 3, 2);
    const double q[2] = {1, 1};
    CHECK(tree.knn(q, 1) == std::vector<std::uint32_t>{1});
}

TEST_CASE("collinear points rank by distance") {
    const double pts[3] = {0, 1, 3};
    const KdTree tree(pts, 3, 1);
    const double q[1] = {0.9};
    CHECK(tree.knn(q, 2) == std::vector<std::uint32_t>{1, 0});
}

TEST_CASE("k larger than the cloud repeats cyclically") {
    const double pts[4] = {0, 0, 1, 1};
    const KdTree tree(pts, 2, 2);
    const double q[2] = {0.1, 0.1};
    const auto r = tree.knn(q, 4);
    CHECK(r == std::vector<std::uint32_t>{0, 1, 0, 1});
}

TEST_CASE("kd-tree equals brute force on 200 randomized clouds") {
    Rng rng(200);
    for (int c = 0; c < 200; ++c) {
        const std::size_t n = 1 + rng.below(500);
        const std::size_t d = 2 + rng.below(2);
        std::vector<double> pts(n * d);
        for (double& x : pts) x = rng.uniform(-2, 2);
        // force a few duplicates
        if (n >= 4) {
            for (std::size_t j = 0; j < d; ++j) pts[1 * d + j] = pts[0 * d + j];
            for (std::size_t j = 0; j < d; ++j) pts[3 * d + j] = pts[2 * d + j];
        }
        const KdTree tree(pts.data(), n, d);
        const std::size_t k = 1 + rng.below(n + 3);
        std::vector<double> q(d);
        for (double& x : q) x = rng.uniform(-2, 2);
        REQUIRE(tree.knn(q.data(), k) == brute_knn(pts.data(), n, d, q.data(), k));
    }
}

TEST_CASE("kd-tree indices are translation invariant") {
    Rng rng(5);
    const std::size_t n = 200, d = 3;
    std::vector<double> pts(n * d), shifted(n * d);
    const double t[3] = {13.5, -2.25, 7.0};
    for (std::size_t i = 0; i < n * d; ++i) {
        pts[i] = rng.uniform(-1, 1);
        shifted[i] = pts[i] + t[i % d];
    }
    const KdTree tree(pts.data(), n, d), tree2(shifted.data(), n, d);
    for (int qi = 0; qi < 20; ++qi) {
        double q[3] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        double q2[3] = {q[0] + t[0], q[1] + t[1], q[2] + t[2]};
        CHECK(tree.knn(q, 5) == tree2.knn(q2, 5));
    }
}

TEST_CASE("sampler with m == |P| emits every index once") {
    Rng rng(4);
    const std::size_t n = 5;
    std::vector<double> pts(n * 2);
    for (double& x : pts) x = rng.uniform(0, 1);
    const KdTree tree(pts.data(), n, 2);
    const auto picks = sample_output_points(pts.data(), n, 2, tree, n, 2, rng);
    std::set<std::uint32_t> uniq(picks.begin(), picks.end());
    CHECK(uniq.size() == n);
}

TEST_CASE("sampler with m == 1 picks a valid index") {
    Rng rng(8);
    const double pts[6] = {0, 0, 1, 0, 2, 0};
    const KdTree tree(pts, 3, 2);
    const auto picks = sample_output_points(pts, 3, 2, tree, 1, 1, rng);
    REQUIRE(picks.size() == 1);
    CHECK(picks[0] < 3);
}

TEST_CASE("sampler matches an independent step-by-step simulation") {
    const double pts[4] = {0, 1, 2, 3};  // 4 collinear points, d = 1
    const KdTree tree(pts, 4, 1);
    Rng rng_impl(7), rng_sim(7);
    const auto got = sample_output_points(pts, 4, 1, tree, 3, 2, rng_impl);
    const auto want = simulate_sampler(pts, 4, 1, 3, 2, rng_sim);
    CHECK(got == want);
    std::set<std::uint32_t> uniq(got.begin(), got.end());
    CHECK(uniq.size() == 3);  // m <= |P| gives distinct picks
}

TEST_CASE("sampler simulation agreement on random clouds") {
    Rng seeds(99);
    for (int c = 0; c < 25; ++c) {
        const std::size_t n = 2 + seeds.below(40);
        const std::size_t m = 1 + seeds.below(2 * n);
        const std::size_t k = 1 + seeds.below(6);
        std::vector<double> pts(n * 2);
        for (double& x : pts) x = seeds.uniform(-1, 1);
        const KdTree tree(pts.data(), n, 2);
        const std::uint64_t s = seeds.next_u64();
        Rng a(s), b(s);
        const auto got = sample_output_points(pts.data(), n, 2, tree, m, k, a);
        const auto want = simulate_sampler(pts.data(), n, 2, m, k, b);
        REQUIRE(got == want);
    }
}

TEST_CASE("sampler returns distinct indices for m <= |P| on 100 cases") {
    Rng rng(123);
    for (int c = 0; c < 100; ++c) {
        const std::size_t n = 1 + rng.below(60);
        const std::size_t m = 1 + rng.below(n);
        std::vector<double> pts(n * 3);
        for (double& x : pts) x = rng.uniform(-1, 1);
        const KdTree tree(pts.data(), n, 3);
        const auto picks = sample_output_points(pts.data(), n, 3, tree, m, 4, rng);
        std::set<std::uint32_t> uniq(picks.begin(), picks.end());
        REQUIRE(uniq.size() == m);
    }
}

TEST_CASE("sampler balances repeats when m > |P|") {
    Rng rng(55);
    const std::size_t n = 6;
    std::vector<double> pts(n * 2);
    for (double& x : pts) x = rng.uniform(-1, 1);
    const KdTree tree(pts.data(), n, 2);
    for (const std::size_t m : {7ul, 13ul, 20ul}) {
        const auto picks = sample_output_points(pts.data(), n, 2, tree, m, 3, rng);
        std::vector<std::size_t> cnt(n, 0);
        for (auto p : picks) ++cnt[p];
        const std::size_t lo = m / n;
        const std::size_t hi_seen = *std::max_element(cnt.begin(), cnt.end());
        const std::size_t lo_seen = *std::min_element(cnt.begin(), cnt.end());
        CHECK(lo_seen >= lo);
        CHECK(hi_seen <= lo + 2);
    }
}

TEST_CASE("unit-ball normalization handles the degenerate case") {
    const double pts[4] = {2, 3, 2, 3};
    const double center[2] = {2, 3};
    const auto out = normalize_to_unit_ball(pts, 2, 2, center);
    for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("unit-ball normalization is scale insensitive") {
    Rng rng(6);
    const double center[3] = {0.3, -0.2, 1.1};
    std::vector<double> pts(8 * 3), scaled(8 * 3);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        pts[i] = rng.uniform(-1, 1);
        scaled[i] = center[i % 3] + 10.0 * (pts[i] - center[i % 3]);
    }
    const auto a = normalize_to_unit_ball(pts.data(), 8, 3, center);
    const auto b = normalize_to_unit_ball(scaled.data(), 8, 3, center);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
}

TEST_CASE("unit-ball normalization on a 3-4-5 example") {
    const double pts[4] = {0, 0, 3, 4};
    const double center[2] = {0, 0};
    const auto out = normalize_to_unit_ball(pts, 2, 2, center);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);
    CHECK(out[2] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(out[3] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("unit-ball normalization bounds all norms by 1") {
    Rng rng(61);
    for (int c = 0; c < 20; ++c) {
        const std::size_t n = 2 + rng.below(30);
        std::vector<double> pts(n * 2);
        for (double& x : pts) x = rng.uniform(-5, 5);
        const double center[2] = {rng.uniform(-5, 5), rng.uniform(-5, 5)};
        const auto out = normalize_to_unit_ball(pts.data(), n, 2, center);
        double maxn = 0;
        for (std::size_t i = 0; i < n; ++i)
            maxn = std::max(maxn, std::hypot(out[i * 2], out[i * 2 + 1]));
        CHECK(maxn <= 1.0 + 1e-15);
        CHECK(maxn >= 1.0 - 1e-12);  // equality achieved by some point
    }
}

TEST_CASE("csv cloud roundtrip with labels") {
    Rng rng(9);
    PointCloud cloud(3, 2);
    std::vector<std::uint32_t> labels;
    for (int i = 0; i < 17; ++i) {
        double p[3] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        double f[2] = {rng.uniform(0, 1), rng.uniform(0, 1)};
        cloud.push_back(p, f);
        labels.push_back(static_cast<std::uint32_t>(rng.below(4)));
    }
    const std::string path = "/tmp/convpoint_test_cloud.csv";
    save_cloud_csv(path, cloud, &labels);
    std::vector<std::uint32_t> labels2;
    const PointCloud back = load_cloud_csv(path, &labels2);
    CHECK(back.dim == 3);
    CHECK(back.fdim == 2);
    CHECK(back.positions == cloud.positions);  // %.17g roundtrips doubles
    CHECK(back.features == cloud.features);
    CHECK(labels2 == labels);
}

TEST_CASE("pcld cloud roundtrip") {
    Rng rng(10);
    PointCloud cloud(2, 1);
    for (int i = 0; i < 9; ++i) {
        double p[2] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        double f[1] = {rng.uniform(0, 1)};
        cloud.push_back(p, f);
    }
    const std::string path = "/tmp/convpoint_test_cloud.pcld";
    save_cloud_pcld(path, cloud);
    const PointCloud back = load_cloud_pcld(path);
    REQUIRE(back.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.positions.size(); ++i)
        CHECK(back.positions[i] == doctest::Approx(cloud.positions[i]).epsilon(1e-6));
    // load_cloud dispatches on the extension
    const PointCloud again = load_cloud(path);
    CHECK(again.positions == back.positions);
}

TEST_CASE("cloud loaders reject garbage") {
    const std::string path = "/tmp/convpoint_test_bad.pcld";
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("not a cloud at all", f);
    std::fclose(f);
    CHECK_THROWS_AS(load_cloud_pcld(path), IoError);
    CHECK_THROWS_AS(load_cloud_csv("/tmp/definitely_missing_4242.csv", nullptr), IoError);
}
