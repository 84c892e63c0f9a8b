#include "mpkm/kmeans.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "mpkm/kernels.hpp"
#include "mpkm/metrics.hpp"
#include "oracles/oracles.hpp"

using namespace mpkm;

namespace {

const FloatFormat kFp64 = FloatFormat::fp64();
const FloatFormat kFp16 = FloatFormat::fp16();
const FloatFormat kQ52 = FloatFormat::q52();

Dataset blobs(std::uint64_t seed = 0, double sigma = 0.5, std::size_t n = 600, std::size_t k = 4) {
    BlobsOptions o;
    o.n = n;
    o.k_true = k;
    o.sigma = sigma;
    o.seed = seed;
    return gaussian_blobs(o);
}

KMeansConfig config(std::size_t k, KMeansMode mode, double delta = 2.0, FloatFormat low = kFp16) {
    KMeansConfig c;
    c.k = k;
    c.mode = mode;
    c.ctx = PrecisionContext(kFp64, low, delta);
    return c;
}

TEST(Mode, NamesRoundTrip) {
    for (auto m : {KMeansMode::working, KMeansMode::low, KMeansMode::mixed}) EXPECT_EQ(parse_mode(mode_name(m)), m);
    EXPECT_THROW(parse_mode("half"), std::invalid_argument);
}

TEST(Config, Validation) {
    KMeansConfig c;
    c.k = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.k = 2;
    c.tol = -1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.tol = 0;
    EXPECT_NO_THROW(c.validate());
    c.k = 5;
    EXPECT_THROW(fit(Dataset(1, {1, 2, 3}), c), std::invalid_argument);
}

TEST(Seeding, KEqualsNTakesEveryPoint) {
    const Dataset d(1, {0, 3, 7, 8, 20});
    const DistanceEngine e(d, KMeansMode::working, PrecisionContext(kFp64, kFp16, 2));
    Rng rng(1, RngStream::seeding);
    PrecisionContext counters(kFp64, kFp16, 2);
    const auto s = seed_d2(e, 5, rng, counters);
    const std::set<std::size_t> got(s.indices.begin(), s.indices.end());
    EXPECT_EQ(got.size(), 5u);
    EXPECT_EQ(s.fallbacks, 0u);
}

TEST(Seeding, SingleCenterIsDeterministic) {
    const Dataset d = blobs();
    const DistanceEngine e(d, KMeansMode::working, PrecisionContext(kFp64, kFp16, 2));
    PrecisionContext c(kFp64, kFp16, 2);
    Rng a(42, RngStream::seeding);
    Rng b(42, RngStream::seeding);
    EXPECT_EQ(seed_d2(e, 1, a, c).indices, seed_d2(e, 1, b, c).indices);
}

TEST(Seeding, SecondCenterAlwaysInOtherGroup) {
    const Dataset d(1, {0, 0, 100, 100});
    const DistanceEngine e(d, KMeansMode::working, PrecisionContext(kFp64, kFp16, 2));
    PrecisionContext c(kFp64, kFp16, 2);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed, RngStream::seeding);
        const auto s = seed_d2(e, 2, rng, c);
        EXPECT_NE(d.point(s.indices[0])[0], d.point(s.indices[1])[0]) << seed;
    }
}

TEST(Seeding, FallsBackWhenAllWeightsVanish) {
    const Dataset d(1, {5, 5, 5, 5});
    const DistanceEngine e(d, KMeansMode::working, PrecisionContext(kFp64, kFp16, 2));
    PrecisionContext c(kFp64, kFp16, 2);
    Rng rng(0, RngStream::seeding);
    const auto s = seed_d2(e, 3, rng, c);
    EXPECT_EQ(s.fallbacks, 2u);
    EXPECT_EQ(std::set<std::size_t>(s.indices.begin(), s.indices.end()).size(), 3u);
}

TEST(Assign, Examples) {
    const Dataset d(1, {0, 1, 10, 11, 5.5, 0.5});
    const DistanceEngine e(d, KMeansMode::working, PrecisionContext(kFp64, kFp16, 2));
    PrecisionContext c(kFp64, kFp16, 2);
    const std::vector<double> centers{0.5, 10.5};
    const auto a = assign(e, e.prepare(centers, 2), c);
    // 5.5 is equidistant from both centers and goes to the lower index.
    EXPECT_EQ(a.labels, (std::vector<int>{0, 0, 1, 1, 0, 0}));
    EXPECT_EQ(a.poisoned_count, 0u);
}

TEST(Assign, ThreadCountDoesNotChangeResult) {
    const Dataset d = blobs(1, 1.0, 3000, 6);
    const PrecisionContext ctx(kFp64, kFp16, 2);
    const DistanceEngine e(d, KMeansMode::mixed, ctx);
    std::vector<double> centers(d.values().begin(), d.values().begin() + 12);
    PrecisionContext c1 = ctx;
    PrecisionContext c4 = ctx;
    const auto a = assign(e, e.prepare(centers, 6), c1, nullptr, 1);
    const auto b = assign(e, e.prepare(centers, 6), c4, nullptr, 4);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(c1.total(), c4.total());
    EXPECT_EQ(c1.triggered(), c4.triggered());
}

TEST(Assign, OverflowIsRescuedOrLeftStanding) {
    const Dataset d(2, {1000, 1000, -900, 800, 700, -1000});
    const PrecisionContext ctx(kFp64, kQ52, 2);
    const DistanceEngine low(d, KMeansMode::low, ctx);
    const DistanceEngine work(d, KMeansMode::working, ctx);
    const std::vector<double> centers{-900, 800, 700, -1000};
    PrecisionContext c = ctx;
    const auto rescued = assign(low, low.prepare(centers, 2), c, &work);
    EXPECT_EQ(rescued.poisoned_count, 3u);
    EXPECT_EQ(rescued.rescued, 3u);
    EXPECT_EQ(rescued.labels, (std::vector<int>{0, 0, 1}));
    const auto left = assign(low, low.prepare(centers, 2), c, nullptr);
    EXPECT_EQ(left.labels, (std::vector<int>{0, 0, 0}));
    EXPECT_TRUE(left.flags.has(FpFlags::overflowed));
}

TEST(Engine, MixedMatchesSingleDistanceKernel) {
    const Dataset d = blobs(2, 2.0, 400, 5);
    for (double delta : {1.0, 1.5, 2.0, 10.0}) {
        for (const auto& low : {kFp16, kQ52}) {
            PrecisionContext ctx(kFp64, low, delta);
            const DistanceEngine e(d, KMeansMode::mixed, ctx);
            std::vector<double> centers(d.values().begin() + 20, d.values().begin() + 30);
            const CenterSet cs = e.prepare(centers, 5);
            DistanceEngine::Scratch scratch;
            std::vector<double> out(5);
            PrecisionContext a = ctx;
            PrecisionContext b = ctx;
            for (std::size_t i = 0; i < d.size(); ++i) {
                e.distances(i, cs, out, a, scratch);
                const auto p = d.point(i);
                for (std::size_t j = 0; j < 5; ++j) {
                    const std::span<const double> c(centers.data() + j * 2, 2);
                    const double pp = inner_product(p, p, kFp64).value;
                    const double cc = inner_product(c, c, kFp64).value;
                    ASSERT_EQ(out[j], dist_sq_mixed(p, c, pp, cc, b).d2) << i << ' ' << j;
                }
            }
            EXPECT_EQ(a.triggered(), b.triggered());
            EXPECT_EQ(a.total(), b.total());
        }
    }
}

TEST(Engine, LowMatchesGramKernelInLowFormat) {
    const Dataset d = blobs(3, 1.0, 200, 3);
    const PrecisionContext ctx(kFp64, kFp16, 2);
    const DistanceEngine e(d, KMeansMode::low, ctx);
    std::vector<double> centers(d.values().begin(), d.values().begin() + 6);
    const CenterSet cs = e.prepare(centers, 3);
    DistanceEngine::Scratch scratch;
    std::vector<double> out(3);
    PrecisionContext c = ctx;
    for (std::size_t i = 0; i < d.size(); ++i) {
        e.distances(i, cs, out, c, scratch);
        std::vector<double> p(d.point(i).begin(), d.point(i).end());
        round_vector(p, p, kFp16);
        for (std::size_t j = 0; j < 3; ++j) {
            std::vector<double> cj(centers.begin() + static_cast<long>(j * 2), centers.begin() + static_cast<long>(j * 2 + 2));
            round_vector(cj, cj, kFp16);
            const double pp = inner_product(p, p, kFp16).value;
            const double cc = inner_product(cj, cj, kFp16).value;
            ASSERT_EQ(out[j], dist_sq_gram(pp, cc, p, cj, kFp16).d2);
        }
    }
    EXPECT_EQ(c.eta(), 1.0);
}

TEST(Engine, KernelVariantsGiveIdenticalClusterings) {
    if (kernels::table(kernels::Isa::avx2) == nullptr) GTEST_SKIP() << "no AVX2";
    const Dataset d = blobs(4, 1.5, 800, 5);
    const kernels::Isa before = kernels::active().isa;
    for (auto mode : {KMeansMode::low, KMeansMode::mixed}) {
        kernels::select(kernels::Isa::scalar);
        const Clustering a = fit(d, config(5, mode));
        kernels::select(kernels::Isa::avx2);
        const Clustering b = fit(d, config(5, mode));
        EXPECT_EQ(a.labels, b.labels);
        EXPECT_EQ(a.centers, b.centers);
        EXPECT_EQ(a.eta, b.eta);
    }
    kernels::select(before);
}

TEST(UpdateCenters, Examples) {
    const Dataset d(2, {0, 0, 2, 2, 7, 3});
    const std::vector<int> labels{0, 0, 1};
    const std::vector<double> prev{9, 9, 9, 9, -1, -1};
    const auto u = update_centers(d, labels, prev, 3);
    EXPECT_EQ(u.centers, (std::vector<double>{1, 1, 7, 3, -1, -1}));
    EXPECT_EQ(u.cardinalities, (std::vector<std::size_t>{2, 1, 0}));
    EXPECT_EQ(u.empty_clusters, 1u);
}

TEST(UpdateCenters, ErrorWithinSummationBound) {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd(3.0, 10.0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 50 + static_cast<std::size_t>(trial) * 20;
        std::vector<double> v(m * 3);
        for (double& x : v) x = nd(gen);
        const Dataset d(3, v);
        const std::vector<int> labels(m, 0);
        const std::vector<double> prev(3, 0.0);
        const auto u = update_centers(d, labels, prev, 1);
        const double gm = gamma(m, kFp64);
        for (std::size_t f = 0; f < 3; ++f) {
            std::vector<double> col(m);
            for (std::size_t i = 0; i < m; ++i) col[i] = v[i * 3 + f];
            const double ref = oracle::compensated_mean(col);
            double abs_sum = 0;
            for (double x : col) abs_sum += std::fabs(x);
            EXPECT_LE(std::fabs(u.centers[f] - ref), gm * abs_sum / static_cast<double>(m) + std::fabs(ref) * kFp64.u());
        }
    }
}

TEST(Converged, Examples) {
    const std::vector<double> a{0, 0, 1, 1};
    const std::vector<double> b{1, 0, 1, 1};
    const std::vector<double> c{1e-5, 0, 1, 1};
    EXPECT_TRUE(converged(a, a, 0.0));
    EXPECT_FALSE(converged(a, b, 0.5));
    EXPECT_TRUE(converged(a, c, 1e-4));
}

TEST(CenterUpdateBound, Examples) {
    const std::vector<double> c1{2, 0}, m1{1, 0};
    EXPECT_DOUBLE_EQ(*center_update_precision_bound(c1, m1), 0.5);
    const std::vector<double> c2{0, 2}, m2{0, 1};
    EXPECT_DOUBLE_EQ(*center_update_precision_bound(c2, m2), 0.5);
    EXPECT_FALSE(center_update_precision_bound(m1, m1).has_value());
    const std::vector<double> c3{1.1, 0};
    const std::vector<double> c4{1.01, 0};
    EXPECT_NEAR(*center_update_precision_bound(c3, m1) / *center_update_precision_bound(c4, m1), 10.0, 1e-9);
    const std::vector<double> zero{0, 0};
    EXPECT_TRUE(std::isinf(*center_update_precision_bound(m1, zero)));
}

TEST(EnergyIdentity, Examples) {
    const std::vector<double> s{0, 0, 2, 0};
    const std::vector<double> probe{2, 0};
    const auto [lhs, rhs] = energy_identity_check(s, probe);
    EXPECT_EQ(lhs, 4.0);
    EXPECT_EQ(rhs, 4.0);
    const std::vector<double> mu{1, 0};
    const auto [l2, r2] = energy_identity_check(s, mu);
    EXPECT_EQ(l2, r2);
    EXPECT_EQ(l2, 2.0);
}

TEST(Fit, SingleClusterIsTheMean) {
    const Dataset d = blobs(5, 1.0, 100, 3);
    const Clustering c = fit(d, config(1, KMeansMode::working));
    double mx = 0, my = 0, s = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        mx += d.point(i)[0];
        my += d.point(i)[1];
    }
    mx /= 100;
    my /= 100;
    for (std::size_t i = 0; i < d.size(); ++i) s += std::pow(d.point(i)[0] - mx, 2) + std::pow(d.point(i)[1] - my, 2);
    EXPECT_EQ(c.centers[0], mx);
    EXPECT_EQ(c.centers[1], my);
    EXPECT_NEAR(c.sse, s, 1e-12 * s);
    EXPECT_TRUE(c.converged);
}

TEST(Fit, SeparableBlobsRecoveredOnEverySeed) {
    BlobsOptions o;
    o.n = 400;
    o.k_true = 2;
    o.sigma = 0.5;
    o.center_low = -10;
    o.center_high = 10;
    o.min_separation = 10;
    const Dataset d = gaussian_blobs(o);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto cfg = config(2, KMeansMode::working);
        cfg.seed = seed;
        const Clustering c = fit(d, cfg);
        EXPECT_EQ(adjusted_rand_index(*d.labels(), c.labels), 1.0);
        EXPECT_EQ(c.eta, 0.0);
    }
}

TEST(Fit, ZeroSigmaBlobsGivePerfectClustering) {
    BlobsOptions o;
    o.n = 500;
    o.sigma = 0.0;
    const Dataset d = gaussian_blobs(o);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto cfg = config(10, KMeansMode::working);
        cfg.seed = seed;
        EXPECT_EQ(adjusted_rand_index(*d.labels(), fit(d, cfg).labels), 1.0);
    }
}

TEST(Fit, InvariantsOfTheResult) {
    const Dataset d = blobs(6, 1.0, 600, 4);
    for (auto mode : {KMeansMode::working, KMeansMode::low, KMeansMode::mixed}) {
        const Clustering c = fit(d, config(4, mode));
        std::size_t total = 0;
        for (auto m : c.cardinalities) total += m;
        EXPECT_EQ(total, d.size());
        for (int l : c.labels) {
            EXPECT_GE(l, 0);
            EXPECT_LT(l, 4);
        }
        EXPECT_GE(c.sse, 0.0);
        EXPECT_GE(c.eta, 0.0);
        EXPECT_LE(c.eta, 1.0);
        EXPECT_EQ(c.trace.size(), c.iterations_run);
        EXPECT_EQ(c.sse, sse(d, c.labels, c.centers));
    }
}

TEST(Fit, SseNonIncreasingInWorkingMode) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset d = blobs(seed, 2.0, 1000, 8);
        auto cfg = config(8, KMeansMode::working);
        cfg.seed = seed;
        const Clustering c = fit(d, cfg);
        for (std::size_t i = 1; i < c.trace.size(); ++i) {
            EXPECT_LE(c.trace[i].sse, c.trace[i - 1].sse * (1 + 1e-12));
        }
    }
}

TEST(Fit, DeterministicAndThreadIndependent) {
    const Dataset d = blobs(7, 1.5, 2000, 6);
    auto cfg = config(6, KMeansMode::mixed);
    cfg.seed = 3;
    const Clustering a = fit(d, cfg);
    cfg.threads = 4;
    const Clustering b = fit(d, cfg);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.centers, b.centers);
    EXPECT_EQ(a.sse, b.sse);
    EXPECT_EQ(a.eta, b.eta);
}

TEST(Fit, HugeDeltaMatchesWorkingMode) {
    const Dataset d = blobs(8, 1.0, 600, 5);
    const Clustering w = fit(d, config(5, KMeansMode::working));
    const Clustering m = fit(d, config(5, KMeansMode::mixed, 1e150));
    EXPECT_EQ(m.eta, 0.0);
    EXPECT_EQ(w.labels, m.labels);
    EXPECT_EQ(w.centers, m.centers);
}

TEST(Fit, MixedWithWorkingLowFormatDegeneratesExactly) {
    const Dataset d = blobs(9, 1.0, 600, 5);
    const Clustering w = fit(d, config(5, KMeansMode::working));
    const Clustering m = fit(d, config(5, KMeansMode::mixed, 1.0, kFp64));
    EXPECT_EQ(w.labels, m.labels);
    EXPECT_EQ(w.centers, m.centers);
    EXPECT_EQ(w.sse, m.sse);
}

TEST(Fit, EtaExtremes) {
    const Dataset d = blobs(10, 1.0, 600, 5);
    EXPECT_EQ(fit(d, config(5, KMeansMode::mixed, 1.0)).eta, 1.0);
    EXPECT_EQ(fit(d, config(5, KMeansMode::low)).eta, 1.0);
    EXPECT_EQ(fit(d, config(5, KMeansMode::working)).eta, 0.0);
}

TEST(Fit, EtaNonIncreasingInDelta) {
    const Dataset d = blobs(11, 1.0, 1000, 10);
    double prev = 2.0;
    for (double delta : {1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0}) {
        // Same seed: the trigger depends on norms only, so a larger delta
        // can only remove triggers from the same sequence of evaluations
        // when the clustering path is unchanged; check the observed rates.
        const double e = fit(d, config(10, KMeansMode::mixed, delta)).eta;
        EXPECT_LE(e, prev) << delta;
        prev = e;
    }
}

TEST(Fit, NoRescueLetsOverflowStand) {
    BlobsOptions o;
    o.n = 300;
    o.k_true = 3;
    o.sigma = 20;
    o.center_low = -2000;
    o.center_high = 2000;
    const Dataset d = gaussian_blobs(o);
    auto cfg = config(3, KMeansMode::low, 2.0, kQ52);
    cfg.rescue = false;
    const Clustering failed = fit(d, cfg);
    EXPECT_GT(failed.warnings.poisoned_assignments, 0u);
    EXPECT_EQ(std::set<int>(failed.labels.begin(), failed.labels.end()).size(), 1u);
    cfg.rescue = true;
    const Clustering saved = fit(d, cfg);
    EXPECT_GT(saved.warnings.rescued_assignments, 0u);
    EXPECT_GT(std::set<int>(saved.labels.begin(), saved.labels.end()).size(), 1u);
}

TEST(Fit, EmptyClusterKeepsCenterAndIsReported) {
    // Two identical points cannot fill three clusters after the first update.
    const Dataset d(1, {0, 0, 0, 10});
    auto cfg = config(3, KMeansMode::working);
    const Clustering c = fit(d, cfg);
    EXPECT_EQ(c.k, 3u);
    std::size_t total = 0;
    for (auto m : c.cardinalities) total += m;
    EXPECT_EQ(total, 4u);
    EXPECT_GT(c.warnings.seeding_fallbacks + c.warnings.empty_cluster_events, 0u);
}

TEST(Fit, TraceCarriesCenterUpdateBounds) {
    const Dataset d = blobs(12, 1.0, 400, 4);
    const Clustering c = fit(d, config(4, KMeansMode::working));
    ASSERT_FALSE(c.trace.empty());
    const auto& first = c.trace.front();
    ASSERT_EQ(first.bounds.size(), 4u);
    ASSERT_TRUE(first.min_bound.has_value());
    for (const auto& b : first.bounds) {
        if (b) EXPECT_GE(*b, *first.min_bound);
    }
}

}  // namespace
