// mpkm: run, sweep and diagnose mixed-precision k-means experiments, or
// generate Gaussian blob datasets.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mpkm/dataset.hpp"
#include "mpkm/experiment.hpp"

namespace {

using namespace mpkm;

struct Options {
    std::string data;
    bool labels = false;
    bool normalize = false;
    bool image = false;
    double image_scale = 255.0;
    bool columns_are_points = false;
    std::string delimiter = ",";
    std::size_t k = 8;
    std::vector<std::string> modes;
    std::string low_format = "fp16";
    std::vector<double> deltas;
    std::string seeds = "0-4";
    std::size_t max_iter = 300;
    double tol = 1e-4;
    bool no_rescue = false;
    std::string out;
    std::string format = "csv";
    std::size_t threads = 0;
    std::string table;
    std::string reconstruct;
    std::size_t kernel_sample = 2000;
};

std::uint64_t parse_u64(const std::string& s) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw std::invalid_argument("invalid seed '" + s + "'");
    }
    return v;
}

// "0,1,2" or ranges such as "0-4" (inclusive), mixed freely.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto dash = item.find('-');
        if (dash == std::string::npos) {
            out.push_back(parse_u64(item));
            continue;
        }
        const auto lo = parse_u64(item.substr(0, dash));
        const auto hi = parse_u64(item.substr(dash + 1));
        if (hi < lo) throw std::invalid_argument("empty seed range '" + item + "'");
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
    }
    if (out.empty()) throw std::invalid_argument("no seeds given");
    return out;
}

void add_data_options(CLI::App* app, Options& o) {
    app->add_option("--data", o.data, "Input CSV (one point per row)")->required();
    app->add_flag("--labels", o.labels, "Last column holds integer ground-truth labels");
    app->add_flag("--normalize", o.normalize, "z-score normalize every feature");
    app->add_flag("--image", o.image, "Input is an R,G,B pixel table; channels are divided by --image-scale");
    app->add_option("--image-scale", o.image_scale, "Pixel channel divisor")->capture_default_str();
    app->add_flag("--columns-are-points", o.columns_are_points, "Each CSV column is a point");
    app->add_option("--delimiter", o.delimiter, "CSV field delimiter")->capture_default_str();
}

void add_run_options(CLI::App* app, Options& o) {
    app->add_option("--k", o.k, "Number of clusters")->required();
    app->add_option("--mode", o.modes, "working, low or mixed (repeatable)");
    app->add_option("--low-format", o.low_format, "Low precision format")
        ->check(CLI::IsMember({"q52", "fp16", "fp32"}))
        ->capture_default_str();
    app->add_option("--delta", o.deltas, "Trigger threshold for mixed mode (repeatable)");
    app->add_option("--seeds", o.seeds, "Seed list, e.g. 0,1,2 or 0-4")->capture_default_str();
    app->add_option("--max-iter", o.max_iter, "Iteration cap")->capture_default_str();
    app->add_option("--tol", o.tol, "Center movement tolerance")->capture_default_str();
    app->add_flag("--no-rescue", o.no_rescue, "Keep points whose low precision distances all overflowed in cluster 0");
    app->add_option("--out", o.out, "Output file (default: stdout)");
    app->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    app->add_option("--threads", o.threads, "Concurrent cells (0: all cores)")->capture_default_str();
}

Dataset load(const Options& o) {
    if (o.delimiter.size() != 1) throw std::invalid_argument("--delimiter must be a single character");
    if (o.image) return flatten_image_table(o.data, o.image_scale).pixels;
    CsvOptions csv;
    csv.delimiter = o.delimiter[0];
    csv.has_labels = o.labels;
    csv.rows_are_points = !o.columns_are_points;
    return load_csv(o.data, csv);
}

ExperimentSpec make_spec(const Options& o, std::vector<double> default_deltas) {
    ExperimentSpec spec;
    spec.dataset = o.data;
    spec.normalize = o.normalize;
    spec.k = o.k;
    if (!o.modes.empty()) {
        spec.modes.clear();
        for (const auto& m : o.modes) spec.modes.push_back(parse_mode(m));
    }
    spec.low_format = FloatFormat::from_name(o.low_format);
    spec.deltas = o.deltas.empty() ? std::move(default_deltas) : o.deltas;
    spec.seeds = parse_seeds(o.seeds);
    spec.max_iter = o.max_iter;
    spec.tol = o.tol;
    spec.rescue = !o.no_rescue;
    spec.threads = o.threads;
    spec.validate();
    return spec;
}

template <class Fn>
void with_output(const std::string& path, Fn&& fn) {
    if (path.empty()) {
        fn(std::cout);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    fn(f);
    if (!f) throw std::runtime_error("error writing '" + path + "'");
}

void report_warnings(const RunRecord& rec) {
    for (const auto& c : rec.cells) {
        const std::string label = group_label(c.mode, c.delta) + " seed " + std::to_string(c.seed);
        if (c.error) {
            std::cerr << "warning: " << label << " failed: " << *c.error << '\n';
        } else if (c.warnings.any()) {
            std::cerr << "warning: " << label << ": " << c.warnings.to_string() << '\n';
        }
    }
}

void write_reconstruction(const Options& o, const RunRecord& rec) {
    if (o.reconstruct.empty()) return;
    if (!o.image) throw std::invalid_argument("--reconstruct needs --image");
    const auto& cell = rec.cells.front();
    if (cell.error) throw std::runtime_error("first run failed; nothing to reconstruct");
    ImageTable img = flatten_image_table(o.data, o.image_scale);
    // Normalized runs produce centers in z-score units; map them back first.
    std::vector<double> centers = cell.centers;
    if (o.normalize) {
        const Dataset z = zscore_normalize(img.pixels);
        const auto& np = *z.norm_params();
        for (std::size_t j = 0; j < centers.size(); ++j) {
            const std::size_t f = j % 3;
            centers[j] = centers[j] * np.stddev[f] + np.mean[f];
        }
    }
    const auto pixels = reconstruct_pixels(img, centers, cell.labels);
    with_output(o.reconstruct, [&](std::ostream& os) {
        for (const auto& px : pixels) os << px[0] << ',' << px[1] << ',' << px[2] << '\n';
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixed-precision k-means experiments"};
    app.require_subcommand(1);
    Options o;

    auto* run = app.add_subcommand("run", "Fit every (mode, delta, seed) cell and write the result table");
    add_data_options(run, o);
    add_run_options(run, o);
    run->add_option("--reconstruct", o.reconstruct, "With --image: write the segmented pixel table of the first run");

    auto* sweep = app.add_subcommand("sweep", "Mixed-mode delta sweep; writes long-format curves");
    add_data_options(sweep, o);
    add_run_options(sweep, o);
    sweep->add_option("--table", o.table, "Also write the aggregate table here");

    auto* diag = app.add_subcommand("diagnose", "Center-update precision bounds and kernel formula comparison");
    add_data_options(diag, o);
    add_run_options(diag, o);
    diag->add_option("--kernel-sample", o.kernel_sample, "Points used for the kernel matrix comparison")
        ->capture_default_str();

    BlobsOptions blobs;
    std::string blobs_out;
    auto* gen = app.add_subcommand("blobs", "Write a Gaussian blob dataset (labels in the last column)");
    gen->add_option("--n", blobs.n, "Number of points")->capture_default_str();
    gen->add_option("--k-true", blobs.k_true, "Number of blobs")->capture_default_str();
    gen->add_option("--dim", blobs.dim, "Dimension")->capture_default_str();
    gen->add_option("--sigma", blobs.sigma, "Noise standard deviation")->capture_default_str();
    gen->add_option("--seed", blobs.seed, "Generator seed")->capture_default_str();
    gen->add_option("--center-low", blobs.center_low, "Lower bound of the center box")->capture_default_str();
    gen->add_option("--center-high", blobs.center_high, "Upper bound of the center box")->capture_default_str();
    gen->add_option("--min-separation", blobs.min_separation, "Minimum center distance (negative: automatic)")
        ->capture_default_str();
    gen->add_option("--out", blobs_out, "Output file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const Dataset d = gaussian_blobs(blobs);
            with_output(blobs_out, [&](std::ostream& os) { write_csv(os, d); });
            return 0;
        }
        const Dataset data = load(o);
        const OutputFormat fmt = parse_output_format(o.format);
        if (*run) {
            const ExperimentSpec spec = make_spec(o, {2.0});
            const RunRecord rec = run_experiment(spec, data);
            report_warnings(rec);
            with_output(o.out, [&](std::ostream& os) { emit_table(rec, fmt, os); });
            write_reconstruction(o, rec);
        } else if (*sweep) {
            Options so = o;
            if (so.modes.empty()) so.modes = {"mixed"};
            const ExperimentSpec spec = make_spec(so, default_sweep_deltas());
            const RunRecord rec = run_experiment(spec, data);
            report_warnings(rec);
            with_output(o.out, [&](std::ostream& os) { emit_curves(rec, fmt, os); });
            if (!o.table.empty()) with_output(o.table, [&](std::ostream& os) { emit_table(rec, fmt, os); });
        } else if (*diag) {
            const ExperimentSpec spec = make_spec(o, {2.0});
            const DiagnoseReport rep = diagnose(spec, data, o.kernel_sample);
            with_output(o.out, [&](std::ostream& os) { emit_diagnose(rep, fmt, os); });
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
