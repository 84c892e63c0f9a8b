#include "mpkm/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mpkm/kernels.hpp"
#include "mpkm/metrics.hpp"

namespace mpkm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void to_feature_major(std::span<const double> pc, std::size_t k, std::size_t r, std::vector<double>& out) {
    out.assign(k * r, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t f = 0; f < r; ++f) out[f * k + j] = pc[j * r + f];
    }
}

// Strict < keeps the lowest index on ties; nonfinite distances never win.
int argmin_finite(std::span<const double> d) {
    int best = -1;
    double best_d = kInf;
    for (std::size_t j = 0; j < d.size(); ++j) {
        if (std::isfinite(d[j]) && (best < 0 || d[j] < best_d)) {
            best = static_cast<int>(j);
            best_d = d[j];
        }
    }
    return best;
}

}  // namespace

std::string_view mode_name(KMeansMode mode) {
    switch (mode) {
        case KMeansMode::working: return "working";
        case KMeansMode::low: return "low";
        case KMeansMode::mixed: return "mixed";
    }
    return "?";
}

KMeansMode parse_mode(std::string_view name) {
    if (name == "working") return KMeansMode::working;
    if (name == "low") return KMeansMode::low;
    if (name == "mixed") return KMeansMode::mixed;
    throw std::invalid_argument("unknown mode '" + std::string(name) + "' (expected working, low or mixed)");
}

void KMeansConfig::validate() const {
    if (k == 0) throw std::invalid_argument("k must be at least 1");
    if (max_iter == 0) throw std::invalid_argument("max_iter must be at least 1");
    if (!(tol >= 0.0)) throw std::invalid_argument("tol must be >= 0");
}

DistanceEngine::DistanceEngine(const Dataset& data, KMeansMode mode, const PrecisionContext& ctx)
    : data_(&data), mode_(mode), ctx_(ctx), fmt_(mode == KMeansMode::low ? ctx.low() : ctx.work()) {
    const std::size_t n = data.size();
    const std::size_t r = data.dim();
    points_.assign(data.values().begin(), data.values().end());
    prep_flags_ |= round_vector(points_, points_, fmt_);
    norms_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::span<const double> p(points_.data() + i * r, r);
        const RoundedValue nn = inner_product(p, p, fmt_);
        norms_[i] = nn.value;
        prep_flags_ |= nn.flags;
    }
    if (mode == KMeansMode::mixed) {
        scaled_.resize(n * r);
        scales_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            scales_[i] = scale_to_unit({points_.data() + i * r, r}, {scaled_.data() + i * r, r}, ctx.work(),
                                       ctx.low());
        }
    }
}

CenterSet DistanceEngine::prepare(std::span<const double> centers, std::size_t k) const {
    const std::size_t r = data_->dim();
    if (centers.size() != k * r) throw std::invalid_argument("prepare: centers must hold k x dim values");
    CenterSet cs;
    cs.k = k;
    cs.raw.assign(centers.begin(), centers.end());
    std::vector<double> rounded(centers.begin(), centers.end());
    cs.flags |= round_vector(rounded, rounded, fmt_);
    to_feature_major(rounded, k, r, cs.cols);
    cs.norms.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        const std::span<const double> c(rounded.data() + j * r, r);
        const RoundedValue nn = inner_product(c, c, fmt_);
        cs.norms[j] = nn.value;
        cs.flags |= nn.flags;
    }
    if (mode_ == KMeansMode::mixed) {
        std::vector<double> scaled(k * r);
        cs.scales.resize(k);
        for (std::size_t j = 0; j < k; ++j) {
            cs.scales[j] = scale_to_unit({rounded.data() + j * r, r}, {scaled.data() + j * r, r}, ctx_.work(),
                                         ctx_.low());
        }
        to_feature_major(scaled, k, r, cs.scaled_cols);
    }
    return cs;
}

FpFlags DistanceEngine::distances(std::size_t i, const CenterSet& centers, std::span<double> out,
                                  PrecisionContext& counters, Scratch& scratch) const {
    const std::size_t r = data_->dim();
    const std::size_t k = centers.k;
    const auto& kt = kernels::active();
    scratch.dots.resize(k);
    scratch.flags.resize(k);
    const std::span<const double> p(points_.data() + i * r, r);
    const double pp = norms_[i];
    FpFlags flags = prep_flags_ | centers.flags;

    auto gram = [&](std::size_t j) {
        const RoundedValue dot{scratch.dots[j], fmt_, FpFlags::from_bits(scratch.flags[j])};
        return combine_gram(pp, centers.norms[j], dot, fmt_);
    };

    kt.dot_lanes(p, {centers.cols.data(), r, k, k}, fmt_, scratch.dots, scratch.flags);

    if (mode_ != KMeansMode::mixed || ctx_.low() == ctx_.work()) {
        const bool low = mode_ == KMeansMode::low;
        for (std::size_t j = 0; j < k; ++j) {
            const DistanceOutcome d = gram(j);
            out[j] = d.d2;
            flags |= d.flags;
            counters.record(low);
        }
        return flags;
    }

    bool any_trigger = false;
    for (std::size_t j = 0; j < k && !any_trigger; ++j) {
        any_trigger = low_precision_trigger(pp, centers.norms[j], ctx_);
    }
    if (any_trigger) {
        scratch.scaled_dots.resize(k);
        scratch.scaled_flags.resize(k);
        kt.dot_lanes({scaled_.data() + i * r, r}, {centers.scaled_cols.data(), r, k, k}, ctx_.low(),
                     scratch.scaled_dots, scratch.scaled_flags);
    }
    const double s1 = scales_[i];
    for (std::size_t j = 0; j < k; ++j) {
        DistanceOutcome d;
        if (any_trigger && low_precision_trigger(pp, centers.norms[j], ctx_)) {
            const double s2 = centers.scales[j];
            RoundedValue dot{0.0, ctx_.low(), {}};
            if (s1 != 0.0 && s2 != 0.0) {
                dot = {scratch.scaled_dots[j], ctx_.low(), FpFlags::from_bits(scratch.scaled_flags[j])};
            }
            d = combine_mixed(pp, centers.norms[j], s1, s2, dot, ctx_.work());
            counters.record(true);
        } else {
            d = gram(j);
            counters.record(false);
        }
        out[j] = d.d2;
        flags |= d.flags;
    }
    return flags;
}

SeedResult seed_d2(const DistanceEngine& engine, std::size_t k, Rng& rng, PrecisionContext& counters) {
    const Dataset& data = engine.data();
    const std::size_t n = data.size();
    if (k == 0 || k > n) {
        throw std::invalid_argument("seeding: need 1 <= k <= n, got k = " + std::to_string(k) +
                                    ", n = " + std::to_string(n));
    }
    SeedResult out;
    std::vector<double> weight(n, kInf);
    std::vector<std::uint8_t> chosen(n, 0);
    DistanceEngine::Scratch scratch;
    double d = 0.0;

    auto choose = [&](std::size_t idx) {
        chosen[idx] = 1;
        out.indices.push_back(idx);
        const auto p = data.point(idx);
        out.centers.insert(out.centers.end(), p.begin(), p.end());
        if (out.indices.size() == k) return;
        const CenterSet c = engine.prepare(p, 1);
        for (std::size_t i = 0; i < n; ++i) {
            if (chosen[i]) {
                weight[i] = 0.0;
                continue;
            }
            engine.distances(i, c, {&d, 1}, counters, scratch);
            // NaN cannot occur; an overflowed +inf stays +inf.
            weight[i] = std::min(weight[i], d);
        }
    };

    choose(static_cast<std::size_t>(rng.below(n)));
    while (out.indices.size() < k) {
        double total = 0.0;
        for (double w : weight) total += w;
        if (total > 0.0 && std::isfinite(total)) {
            const double target = rng.uniform01() * total;
            double cum = 0.0;
            std::size_t pick = n;
            std::size_t last_positive = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (weight[i] <= 0.0) continue;
                last_positive = i;
                cum += weight[i];
                if (cum > target) {
                    pick = i;
                    break;
                }
            }
            choose(pick < n ? pick : last_positive);
        } else {
            ++out.fallbacks;
            std::vector<std::size_t> remaining;
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) remaining.push_back(i);
            }
            choose(remaining[rng.below(remaining.size())]);
        }
    }
    return out;
}

AssignResult assign(const DistanceEngine& engine, const CenterSet& centers, PrecisionContext& counters,
                    const DistanceEngine* rescue, std::size_t threads) {
    const std::size_t n = engine.data().size();
    const std::size_t k = centers.k;
    AssignResult out;
    out.labels.assign(n, 0);
    out.poisoned.assign(n, 0);

    std::optional<CenterSet> rescue_centers;
    if (rescue != nullptr) rescue_centers = rescue->prepare(centers.raw, k);

    struct Partial {
        PrecisionContext counters;
        FpFlags flags;
        std::size_t poisoned = 0;
        std::size_t rescued = 0;
    };

    auto work = [&](std::size_t begin, std::size_t end, Partial& part) {
        DistanceEngine::Scratch scratch;
        std::vector<double> d(k);
        PrecisionContext scratch_counters = counters;
        for (std::size_t i = begin; i < end; ++i) {
            part.flags |= engine.distances(i, centers, d, part.counters, scratch);
            int best = argmin_finite(d);
            if (best < 0) {
                out.poisoned[i] = 1;
                ++part.poisoned;
                if (rescue != nullptr) {
                    part.flags |= rescue->distances(i, *rescue_centers, d, scratch_counters, scratch);
                    best = argmin_finite(d);
                    ++part.rescued;
                }
                if (best < 0) best = 0;
            }
            out.labels[i] = best;
        }
    };

    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, n / 256));
    PrecisionContext fresh = counters;
    fresh.reset_counters();
    std::vector<Partial> parts(threads, Partial{fresh, {}, 0, 0});
    if (threads == 1) {
        work(0, n, parts[0]);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t b = std::min(n, t * chunk);
            const std::size_t e = std::min(n, b + chunk);
            pool.emplace_back(work, b, e, std::ref(parts[t]));
        }
        for (auto& th : pool) th.join();
    }
    for (const auto& part : parts) {
        counters.merge(part.counters);
        out.flags |= part.flags;
        out.poisoned_count += part.poisoned;
        out.rescued += part.rescued;
    }
    return out;
}

UpdateResult update_centers(const Dataset& data, std::span<const int> labels, std::span<const double> previous,
                            std::size_t k) {
    const std::size_t n = data.size();
    const std::size_t r = data.dim();
    if (labels.size() != n) throw std::invalid_argument("update_centers: one label per point required");
    if (previous.size() != k * r) throw std::invalid_argument("update_centers: previous centers must be k x dim");
    UpdateResult out;
    out.centers.assign(k * r, 0.0);
    out.cardinalities.assign(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
            throw std::invalid_argument("update_centers: label out of range at point " + std::to_string(i));
        }
        const auto j = static_cast<std::size_t>(labels[i]);
        const auto p = data.point(i);
        for (std::size_t f = 0; f < r; ++f) out.centers[j * r + f] += p[f];
        ++out.cardinalities[j];
    }
    for (std::size_t j = 0; j < k; ++j) {
        if (out.cardinalities[j] == 0) {
            ++out.empty_clusters;
            std::copy_n(previous.begin() + static_cast<std::ptrdiff_t>(j * r), r,
                        out.centers.begin() + static_cast<std::ptrdiff_t>(j * r));
            continue;
        }
        const double m = static_cast<double>(out.cardinalities[j]);
        for (std::size_t f = 0; f < r; ++f) out.centers[j * r + f] /= m;
    }
    return out;
}

double center_shift(std::span<const double> previous, std::span<const double> next) {
    if (previous.size() != next.size()) throw std::invalid_argument("center_shift: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < previous.size(); ++i) {
        const double d = next[i] - previous[i];
        s += d * d;
    }
    return std::sqrt(s);
}

bool converged(std::span<const double> previous, std::span<const double> next, double tol) {
    return center_shift(previous, next) <= tol;
}

std::optional<double> center_update_precision_bound(std::span<const double> previous,
                                                    std::span<const double> next) {
    if (previous.size() != next.size()) throw std::invalid_argument("center_update_precision_bound: size mismatch");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < previous.size(); ++i) {
        const double d = std::fabs(previous[i] - next[i]);
        num += d * d;
        den += d * std::fabs(next[i]);
    }
    if (num == 0.0) return std::nullopt;
    if (den == 0.0) return kInf;
    return num / (2.0 * den);
}

std::pair<double, double> energy_identity_check(std::span<const double> S, std::span<const double> probe) {
    const std::size_t r = probe.size();
    if (r == 0 || S.empty() || S.size() % r != 0) {
        throw std::invalid_argument("energy_identity_check: S must hold whole points of the probe's dimension");
    }
    const std::size_t m = S.size() / r;
    std::vector<double> mu(r, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t f = 0; f < r; ++f) mu[f] += S[i * r + f];
    }
    for (double& v : mu) v /= static_cast<double>(m);
    double lhs = 0.0;
    double phi_mu = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t f = 0; f < r; ++f) {
            const double a = S[i * r + f] - probe[f];
            const double b = S[i * r + f] - mu[f];
            lhs += a * a;
            phi_mu += b * b;
        }
    }
    double shift = 0.0;
    for (std::size_t f = 0; f < r; ++f) shift += (probe[f] - mu[f]) * (probe[f] - mu[f]);
    return {lhs, phi_mu + static_cast<double>(m) * shift};
}

double eta(const PrecisionContext& ctx) { return ctx.eta(); }

std::string RunWarnings::to_string() const {
    std::ostringstream os;
    const char* sep = "";
    auto item = [&](const char* name, std::size_t v) {
        if (v == 0) return;
        os << sep << name << '=' << v;
        sep = ";";
    };
    item("seeding_fallbacks", seeding_fallbacks);
    item("empty_clusters", empty_cluster_events);
    item("poisoned", poisoned_assignments);
    item("rescued", rescued_assignments);
    if (flags.any()) os << sep << "flags=" << flags.to_string();
    return os.str();
}

Clustering fit(const Dataset& data, const KMeansConfig& cfg) {
    cfg.validate();
    if (cfg.k > data.size()) {
        throw std::invalid_argument("k = " + std::to_string(cfg.k) + " exceeds the number of points (" +
                                    std::to_string(data.size()) + ")");
    }
    const std::size_t k = cfg.k;
    PrecisionContext counters = cfg.ctx;
    counters.reset_counters();

    const DistanceEngine engine(data, cfg.mode, cfg.ctx);
    std::optional<DistanceEngine> working_engine;
    if (cfg.mode != KMeansMode::working) working_engine.emplace(data, KMeansMode::working, cfg.ctx);
    const DistanceEngine& work = working_engine ? *working_engine : engine;
    const DistanceEngine* rescue = cfg.rescue && working_engine ? &*working_engine : nullptr;

    Clustering out;
    out.k = k;
    out.dim = data.dim();

    Rng rng(cfg.seed, RngStream::seeding);
    SeedResult seeds = seed_d2(engine, k, rng, counters);
    out.seed_indices = seeds.indices;
    out.warnings.seeding_fallbacks = seeds.fallbacks;
    std::vector<double> centers = std::move(seeds.centers);

    std::vector<std::uint8_t> poisoned(data.size(), 0);
    std::vector<int> labels;
    for (std::size_t it = 0; it < cfg.max_iter; ++it) {
        AssignResult a = assign(engine, engine.prepare(centers, k), counters, rescue, cfg.threads);
        out.warnings.flags |= a.flags;
        out.warnings.poisoned_assignments += a.poisoned_count;
        out.warnings.rescued_assignments += a.rescued;
        poisoned = std::move(a.poisoned);
        labels = std::move(a.labels);

        UpdateResult u = update_centers(data, labels, centers, k);
        out.warnings.empty_cluster_events += u.empty_clusters;

        IterationTrace tr;
        tr.shift = center_shift(centers, u.centers);
        tr.sse = sse(data, labels, u.centers);
        tr.bounds.resize(k);
        const std::size_t r = data.dim();
        for (std::size_t j = 0; j < k; ++j) {
            tr.bounds[j] = center_update_precision_bound({centers.data() + j * r, r}, {u.centers.data() + j * r, r});
            if (tr.bounds[j] && (!tr.min_bound || *tr.bounds[j] < *tr.min_bound)) tr.min_bound = tr.bounds[j];
        }
        out.trace.push_back(std::move(tr));

        centers = std::move(u.centers);
        out.cardinalities = std::move(u.cardinalities);
        out.iterations_run = it + 1;
        if (out.trace.back().shift <= cfg.tol) {
            out.converged = true;
            break;
        }
    }

    out.eta = counters.eta();
    out.evaluations = counters.total();
    out.low_precision_evaluations = counters.triggered();

    // Final assignment in working precision; it does not count toward eta.
    PrecisionContext final_counters = cfg.ctx;
    AssignResult fin = assign(work, work.prepare(centers, k), final_counters, nullptr, cfg.threads);
    out.warnings.flags |= fin.flags;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!cfg.rescue && poisoned[i]) fin.labels[i] = labels[i];
    }
    out.labels = std::move(fin.labels);
    out.cardinalities.assign(k, 0);
    for (int l : out.labels) ++out.cardinalities[static_cast<std::size_t>(l)];
    out.centers = std::move(centers);
    out.sse = sse(data, out.labels, out.centers);
    return out;
}

}  // namespace mpkm
