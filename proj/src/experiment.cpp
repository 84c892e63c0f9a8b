#include "mpkm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace mpkm {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

ordered_json opt_json(const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
}

struct CellKey {
    KMeansMode mode;
    std::optional<double> delta;
    std::uint64_t seed;
};

std::vector<CellKey> cell_keys(const ExperimentSpec& spec) {
    std::vector<CellKey> keys;
    for (KMeansMode m : spec.modes) {
        if (m == KMeansMode::mixed) {
            for (double d : spec.deltas) {
                for (auto s : spec.seeds) keys.push_back({m, d, s});
            }
        } else {
            for (auto s : spec.seeds) keys.push_back({m, std::nullopt, s});
        }
    }
    return keys;
}

Summary summarize(const std::vector<std::optional<double>>& values) {
    Summary s;
    double total = 0.0;
    for (const auto& v : values) {
        if (!v) continue;
        ++s.defined;
        total += *v;
        s.min = s.min ? std::min(*s.min, *v) : *v;
        s.max = s.max ? std::max(*s.max, *v) : *v;
    }
    if (s.defined > 0) s.mean = total / static_cast<double>(s.defined);
    return s;
}

const char* const kMetricNames[] = {"SSE", "ARI", "AMI", "Homogeneity", "Completeness", "V-measure", "eta"};

std::vector<std::optional<double>> metric_values(const MetricsReport& m) {
    return {m.sse, m.ari, m.ami, m.homogeneity, m.completeness, m.v_measure, m.eta};
}

ordered_json spec_json(const ExperimentSpec& s) {
    ordered_json j;
    j["dataset"] = s.dataset;
    j["normalize"] = s.normalize;
    j["k"] = s.k;
    ordered_json modes = ordered_json::array();
    for (auto m : s.modes) modes.push_back(std::string(mode_name(m)));
    j["modes"] = modes;
    j["low_format"] = std::string(s.low_format.name());
    j["work_format"] = std::string(s.work_format.name());
    j["deltas"] = s.deltas;
    j["seeds"] = s.seeds;
    j["max_iter"] = s.max_iter;
    j["tol"] = s.tol;
    j["rescue"] = s.rescue;
    return j;
}

ordered_json summary_json(const Summary& s) {
    ordered_json j;
    j["mean"] = opt_json(s.mean);
    j["min"] = opt_json(s.min);
    j["max"] = opt_json(s.max);
    j["defined"] = s.defined;
    return j;
}

}  // namespace

OutputFormat parse_output_format(std::string_view name) {
    if (name == "csv") return OutputFormat::csv;
    if (name == "json") return OutputFormat::json;
    throw std::invalid_argument("unknown output format '" + std::string(name) + "' (expected csv or json)");
}

void ExperimentSpec::validate() const {
    if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
    if (modes.empty()) throw std::invalid_argument("at least one mode is required");
    if (deltas.empty()) throw std::invalid_argument("at least one delta is required");
    std::set<double> seen;
    for (double d : deltas) {
        if (!(d >= 1.0) || std::isinf(d)) throw std::invalid_argument("delta must be finite and >= 1, got " + num(d));
        if (!seen.insert(d).second) throw std::invalid_argument("duplicate delta " + num(d));
    }
    std::set<KMeansMode> seen_modes;
    for (auto m : modes) {
        if (!seen_modes.insert(m).second) throw std::invalid_argument("duplicate mode " + std::string(mode_name(m)));
    }
    if (low_format.u() < work_format.u()) {
        throw std::invalid_argument("low format " + std::string(low_format.name()) + " is more precise than " +
                                    std::string(work_format.name()));
    }
    KMeansConfig cfg;
    cfg.k = k;
    cfg.max_iter = max_iter;
    cfg.tol = tol;
    cfg.validate();
}

std::vector<double> default_sweep_deltas() { return {1, 2, 5, 10, 20, 40, 80}; }

std::string group_label(KMeansMode mode, const std::optional<double>& delta) {
    std::string s(mode_name(mode));
    if (delta) s += "[delta=" + num(*delta) + "]";
    return s;
}

std::vector<Aggregate> aggregate(const std::vector<CellResult>& cells) {
    std::vector<Aggregate> out;
    std::size_t i = 0;
    while (i < cells.size()) {
        std::size_t j = i;
        while (j < cells.size() && cells[j].mode == cells[i].mode && cells[j].delta == cells[i].delta) ++j;
        Aggregate a;
        a.mode = cells[i].mode;
        a.delta = cells[i].delta;
        a.runs = j - i;
        std::vector<std::vector<std::optional<double>>> cols(7);
        for (std::size_t c = i; c < j; ++c) {
            if (cells[c].error) {
                ++a.failures;
                continue;
            }
            const auto v = metric_values(cells[c].metrics);
            for (std::size_t m = 0; m < 7; ++m) cols[m].push_back(v[m]);
        }
        a.sse = summarize(cols[0]);
        a.ari = summarize(cols[1]);
        a.ami = summarize(cols[2]);
        a.homogeneity = summarize(cols[3]);
        a.completeness = summarize(cols[4]);
        a.v_measure = summarize(cols[5]);
        a.eta = summarize(cols[6]);
        out.push_back(std::move(a));
        i = j;
    }
    return out;
}

RunRecord run_experiment(const ExperimentSpec& spec, const Dataset& raw) {
    spec.validate();
    if (raw.empty()) throw std::invalid_argument("dataset has no points");
    const Dataset data = spec.normalize ? zscore_normalize(raw) : raw;
    std::optional<std::span<const int>> truth;
    if (data.has_labels()) truth = std::span<const int>(*data.labels());

    const auto keys = cell_keys(spec);
    RunRecord record;
    record.spec = spec;
    record.cells.resize(keys.size());

    auto run_cell = [&](std::size_t idx) {
        const CellKey& key = keys[idx];
        CellResult& cell = record.cells[idx];
        cell.mode = key.mode;
        cell.delta = key.delta;
        cell.seed = key.seed;
        try {
            KMeansConfig cfg;
            cfg.k = spec.k;
            cfg.max_iter = spec.max_iter;
            cfg.tol = spec.tol;
            cfg.mode = key.mode;
            cfg.ctx = PrecisionContext(spec.work_format, spec.low_format, key.delta.value_or(spec.deltas.front()));
            cfg.seed = key.seed;
            cfg.rescue = spec.rescue;
            const Clustering c = fit(data, cfg);
            cell.metrics = evaluate(data, c.labels, c.centers, c.eta, truth);
            cell.iterations = c.iterations_run;
            cell.converged = c.converged;
            cell.warnings = c.warnings;
            cell.labels = c.labels;
            cell.centers = c.centers;
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    };

    std::size_t threads = spec.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : spec.threads;
    threads = std::min(threads, keys.size());
    if (threads <= 1) {
        for (std::size_t i = 0; i < keys.size(); ++i) run_cell(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < keys.size(); i = next++) run_cell(i);
            });
        }
        for (auto& th : pool) th.join();
    }
    record.aggregates = aggregate(record.cells);
    return record;
}

void emit_table(const RunRecord& record, OutputFormat format, std::ostream& out) {
    const char* normalized = record.spec.normalize ? "yes" : "no";
    if (format == OutputFormat::csv) {
        out << "mode,normalized,SSE,ARI,AMI,Homogeneity,Completeness,V-measure,eta\n";
        for (const auto& a : record.aggregates) {
            out << group_label(a.mode, a.delta) << ',' << normalized << ',' << opt_num(a.sse.mean) << ','
                << opt_num(a.ari.mean) << ',' << opt_num(a.ami.mean) << ',' << opt_num(a.homogeneity.mean) << ','
                << opt_num(a.completeness.mean) << ',' << opt_num(a.v_measure.mean) << ','
                << opt_num(a.eta.mean) << '\n';
        }
        return;
    }

    ordered_json j;
    j["spec"] = spec_json(record.spec);
    ordered_json rows = ordered_json::array();
    ordered_json aggs = ordered_json::array();
    for (const auto& a : record.aggregates) {
        ordered_json row;
        row["mode"] = group_label(a.mode, a.delta);
        row["normalized"] = record.spec.normalize;
        row["SSE"] = opt_json(a.sse.mean);
        row["ARI"] = opt_json(a.ari.mean);
        row["AMI"] = opt_json(a.ami.mean);
        row["Homogeneity"] = opt_json(a.homogeneity.mean);
        row["Completeness"] = opt_json(a.completeness.mean);
        row["V-measure"] = opt_json(a.v_measure.mean);
        row["eta"] = opt_json(a.eta.mean);
        rows.push_back(row);

        ordered_json g;
        g["mode"] = std::string(mode_name(a.mode));
        g["delta"] = opt_json(a.delta);
        g["runs"] = a.runs;
        g["failures"] = a.failures;
        g["SSE"] = summary_json(a.sse);
        g["ARI"] = summary_json(a.ari);
        g["AMI"] = summary_json(a.ami);
        g["Homogeneity"] = summary_json(a.homogeneity);
        g["Completeness"] = summary_json(a.completeness);
        g["V-measure"] = summary_json(a.v_measure);
        g["eta"] = summary_json(a.eta);
        aggs.push_back(g);
    }
    ordered_json runs = ordered_json::array();
    for (const auto& c : record.cells) {
        ordered_json r;
        r["mode"] = std::string(mode_name(c.mode));
        r["delta"] = opt_json(c.delta);
        r["seed"] = c.seed;
        if (c.error) {
            r["error"] = *c.error;
        } else {
            const auto v = metric_values(c.metrics);
            for (std::size_t m = 0; m < 7; ++m) r[kMetricNames[m]] = opt_json(v[m]);
            r["iterations"] = c.iterations;
            r["converged"] = c.converged;
            r["warnings"] = c.warnings.to_string();
        }
        runs.push_back(r);
    }
    j["rows"] = rows;
    j["aggregates"] = aggs;
    j["runs"] = runs;
    out << j.dump(2) << '\n';
}

void emit_curves(const RunRecord& record, OutputFormat format, std::ostream& out) {
    std::set<double> seen;
    for (const auto& a : record.aggregates) {
        if (a.mode != KMeansMode::mixed || !a.delta) continue;
        if (!seen.insert(*a.delta).second) throw std::invalid_argument("duplicate delta " + num(*a.delta));
    }
    ordered_json rows = ordered_json::array();
    if (format == OutputFormat::csv) out << "delta,seed,metric,value\n";
    for (const auto& c : record.cells) {
        if (c.mode != KMeansMode::mixed || !c.delta) continue;
        std::vector<std::optional<double>> v(7);
        if (!c.error) v = metric_values(c.metrics);
        for (std::size_t m = 0; m < 7; ++m) {
            if (format == OutputFormat::csv) {
                out << num(*c.delta) << ',' << c.seed << ',' << kMetricNames[m] << ',' << opt_num(v[m]) << '\n';
            } else {
                ordered_json r;
                r["delta"] = *c.delta;
                r["seed"] = c.seed;
                r["metric"] = kMetricNames[m];
                r["value"] = opt_json(v[m]);
                rows.push_back(r);
            }
        }
    }
    if (format == OutputFormat::json) out << rows.dump(2) << '\n';
}

DiagnoseReport diagnose(const ExperimentSpec& spec, const Dataset& raw, std::size_t kernel_sample) {
    spec.validate();
    if (raw.empty()) throw std::invalid_argument("dataset has no points");
    const Dataset data = spec.normalize ? zscore_normalize(raw) : raw;
    DiagnoseReport rep;
    rep.seed = spec.seeds.front();
    rep.low_u = spec.low_format.u();

    KMeansConfig cfg;
    cfg.k = spec.k;
    cfg.max_iter = spec.max_iter;
    cfg.tol = spec.tol;
    cfg.mode = KMeansMode::working;
    cfg.ctx = PrecisionContext(spec.work_format, spec.low_format, spec.deltas.front());
    cfg.seed = rep.seed;
    const Clustering c = fit(data, cfg);
    rep.iterations = c.iterations_run;
    rep.converged = c.converged;
    for (const auto& t : c.trace) {
        rep.min_bounds.push_back(t.min_bound);
        if (t.min_bound && *t.min_bound < rep.low_u) ++rep.iterations_below_low_u;
    }

    rep.kernel_points = std::min(kernel_sample, data.size());
    if (rep.kernel_points > 0) {
        const std::size_t r = data.dim();
        std::vector<double> head(data.values().begin(),
                                 data.values().begin() + static_cast<std::ptrdiff_t>(rep.kernel_points * r));
        const Dataset sample(r, std::move(head));
        rep.kernel_work = kernel_matrix_diff(sample, spec.work_format);
        rep.kernel_low = kernel_matrix_diff(sample, spec.low_format);
    }
    return rep;
}

void emit_diagnose(const DiagnoseReport& rep, OutputFormat format, std::ostream& out) {
    if (format == OutputFormat::csv) {
        out << "iteration,min_bound,below_low_u\n";
        for (std::size_t i = 0; i < rep.min_bounds.size(); ++i) {
            const auto& b = rep.min_bounds[i];
            out << i + 1 << ',' << opt_num(b) << ',' << (b && *b < rep.low_u ? "yes" : "no") << '\n';
        }
        out << "# low_u," << num(rep.low_u) << '\n';
        out << "# iterations_below_low_u," << rep.iterations_below_low_u << '\n';
        out << "# kernel_points," << rep.kernel_points << '\n';
        out << "# kernel_relative_diff_work," << num(rep.kernel_work.relative()) << ','
            << rep.kernel_work.diff_flags.to_string() << ',' << rep.kernel_work.gram_flags.to_string() << '\n';
        out << "# kernel_relative_diff_low," << num(rep.kernel_low.relative()) << ','
            << rep.kernel_low.diff_flags.to_string() << ',' << rep.kernel_low.gram_flags.to_string() << '\n';
        return;
    }
    ordered_json j;
    j["seed"] = rep.seed;
    j["iterations"] = rep.iterations;
    j["converged"] = rep.converged;
    ordered_json bounds = ordered_json::array();
    for (const auto& b : rep.min_bounds) bounds.push_back(opt_json(b));
    j["min_bounds"] = bounds;
    j["low_u"] = rep.low_u;
    j["iterations_below_low_u"] = rep.iterations_below_low_u;
    j["kernel_points"] = rep.kernel_points;
    auto kernel = [](const KernelMatrixDiff& k) {
        ordered_json o;
        o["frobenius_diff"] = opt_json(k.frobenius_diff);
        o["frobenius_reference"] = opt_json(k.frobenius_reference);
        o["relative"] = opt_json(k.relative());
        o["diff_flags"] = k.diff_flags.to_string();
        o["gram_flags"] = k.gram_flags.to_string();
        return o;
    };
    j["kernel_work"] = kernel(rep.kernel_work);
    j["kernel_low"] = kernel(rep.kernel_low);
    out << j.dump(2) << '\n';
}

}  // namespace mpkm
