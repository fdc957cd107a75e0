// kqe: command-line frontend for discrepancies, two-sample tests and
// rejection-rate benchmarks.

#include "kqe/kqe.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace kqe;
using json = nlohmann::ordered_json;

struct Options {
    std::string stat = "ekqd";
    std::string kernel = "rbf";
    std::string bandwidth = "median";
    int degree = 3;
    double offset = 1.0;
    int p = 2;
    long l = 0;
    long m = 0;
    long r = 0;
    std::string nu = "uniform";
    std::size_t perms = 300;
    double level = 0.05;
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    std::string out;
    std::string format;
    bool median_include_diagonal = false;
    bool fresh_landmarks = false;
    unsigned threads = 0;
    bool header = false;
    bool timing = false;

    // file inputs
    std::string x_path, y_path;

    // benchmark / type1
    std::string experiment = "power-decay";
    std::vector<std::string> methods;
    std::vector<double> sweep;
    long n = 0;
    long d = 0;
    std::string timing_out;
    bool no_timing = false;

    CLI::Option* kernel_opt = nullptr;
    CLI::Option* stat_opt = nullptr;
};

void add_statistic_flags(CLI::App* app, Options& o) {
    o.stat_opt = app->add_option("--stat", o.stat, "Statistic")
                     ->check(CLI::IsMember({"ekqd", "ekqd-centered", "supkqd", "mmd-u", "mmd-v", "mmd-lin", "mmd-multi",
                                            "sw", "max-sw"}))
                     ->capture_default_str();
    o.kernel_opt = app->add_option("--kernel", o.kernel, "Kernel family")
                       ->check(CLI::IsMember({"rbf", "laplacian", "linear", "poly"}))
                       ->capture_default_str();
    app->add_option("--bandwidth", o.bandwidth,
                    "Kernel bandwidth for rbf/laplacian: 'median' (median heuristic on the pooled sample) or a positive number")
        ->capture_default_str();
    app->add_option("--degree", o.degree, "Polynomial kernel degree")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--offset", o.offset, "Polynomial kernel offset c in (<x,y> + c)^degree")->capture_default_str();
    app->add_option("--p", o.p, "Power p of quantile and sliced distances")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--l", o.l, "Number of projection directions (0: ceil(ln n))")->check(CLI::NonNegativeNumber)->capture_default_str();
    app->add_option("--m", o.m, "Number of landmarks per direction (0: ceil(ln n))")->check(CLI::NonNegativeNumber)->capture_default_str();
    app->add_option("--r", o.r, "Sub-diagonals for mmd-multi (0: ceil((ln n)^2))")->check(CLI::NonNegativeNumber)->capture_default_str();
    app->add_option("--nu", o.nu, "Quantile weighting measure")
        ->check(CLI::IsMember({"uniform", "triangle", "reverse-triangle"}))
        ->capture_default_str();
    app->add_flag("--median-include-diagonal", o.median_include_diagonal,
                  "Include the zero self-distances in the median heuristic");
    app->add_flag("--fresh-landmarks", o.fresh_landmarks, "Redraw landmarks for every direction instead of sharing them");
    app->add_option("--seed", o.seed, "Random seed")->capture_default_str();
}

void add_test_flags(CLI::App* app, Options& o) {
    app->add_option("--perms", o.perms, "Number of permutations")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--level", o.level, "Test level alpha")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    app->add_option("--threads", o.threads, "Worker threads (0: all cores)")->capture_default_str();
}

void add_output_flags(CLI::App* app, Options& o, const std::string& default_format) {
    o.format = default_format;
    app->add_option("--out", o.out, "Write the result to this file instead of standard output");
    app->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
}

void add_input_files(CLI::App* app, Options& o) {
    app->add_option("x", o.x_path, "CSV file with the first sample (one row per point)")->required();
    app->add_option("y", o.y_path, "CSV file with the second sample")->required();
    app->add_flag("--header", o.header, "Input CSV files start with a header row");
}

std::optional<double> parse_bandwidth(const std::string& s) {
    if (s == "median") return std::nullopt;
    double v = 0.0;
    std::size_t used = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || !(v > 0.0) || !std::isfinite(v))
        throw ArgumentError("--bandwidth must be 'median' or a positive number, got '" + s + "'");
    return v;
}

StatisticConfig make_config(const Options& o, const std::string& stat) {
    StatisticConfig c;
    c.kind = parse_statistic(stat);
    c.kernel = parse_kernel_family(o.kernel);
    c.bandwidth = parse_bandwidth(o.bandwidth);
    c.median_include_diagonal = o.median_include_diagonal;
    c.degree = o.degree;
    c.offset = o.offset;
    c.p = o.p;
    c.l = o.l;
    c.m = o.m;
    c.r = static_cast<std::size_t>(o.r);
    c.weighting = parse_weighting(o.nu);
    c.fresh_landmarks = o.fresh_landmarks;
    c.validate();
    return c;
}

json kernel_json(const StatisticConfig& c, const KernelSpec& k) {
    json j;
    if (!needs_kernel(c.kind)) return nullptr;
    j["family"] = std::string(to_string(k.family));
    if (k.uses_bandwidth()) {
        j["bandwidth"] = k.bandwidth;
        j["bandwidth_source"] = c.bandwidth ? "fixed" : "median";
    }
    if (k.family == KernelFamily::polynomial) {
        j["degree"] = k.degree;
        j["offset"] = k.offset;
    }
    return j;
}

void emit(const Options& o, const std::string& text) {
    if (o.out.empty()) std::cout << text;
    else detail::write_file(o.out, text);
}

std::string flat_csv(const json& j) {
    std::string head, row;
    for (const auto& [k, v] : j.items()) {
        if (v.is_structured()) continue;
        if (!head.empty()) {
            head += ',';
            row += ',';
        }
        head += k;
        row += v.is_string() ? v.get<std::string>() : v.dump();
    }
    return head + "\n" + row + "\n";
}

std::pair<Dataset, Dataset> load_pair(const Options& o) {
    return {load_csv(o.x_path, o.header), load_csv(o.y_path, o.header)};
}

// ---------------------------------------------------------------------------

int cmd_discrepancy(const Options& o) {
    const auto [x, y] = load_pair(o);
    const StatisticConfig cfg = make_config(o, o.stat);
    Rng rng(o.seed);
    const auto start = std::chrono::steady_clock::now();
    StatisticValue v;
    if (x.points.rows() != y.points.rows() &&
        (cfg.kind == StatisticKind::mmd_u || cfg.kind == StatisticKind::mmd_v)) {
        // the U and V estimators are defined for unequal sizes; the pooled path is not
        v.kernel = resolve_kernel(cfg, x.points, y.points);
        v.raw = cfg.kind == StatisticKind::mmd_u ? mmd2_u(x.points, y.points, v.kernel)
                                                 : mmd2_v(x.points, y.points, v.kernel);
        v.distance = mmd_distance(v.raw);
    } else {
        v = compute_statistic(x.points, y.points, cfg, rng);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json j;
    j["statistic"] = o.stat;
    j["value"] = v.distance;
    j["raw"] = v.raw;
    j["n"] = x.points.rows();
    if (y.points.rows() != x.points.rows()) j["n_y"] = y.points.rows();
    j["d"] = x.points.cols();
    j["p"] = cfg.p;
    j["kernel"] = kernel_json(cfg, v.kernel);
    if (is_kqd(cfg.kind) || is_sliced(cfg.kind)) j["l"] = v.l;
    if (is_kqd(cfg.kind)) {
        j["m"] = v.m;
        j["nu"] = o.nu;
        j["fresh_landmarks"] = o.fresh_landmarks;
    }
    if (cfg.kind == StatisticKind::mmd_multi) j["r"] = v.r;
    j["seed"] = o.seed;
    if (o.timing) j["seconds"] = secs;

    std::cerr << o.stat << " = " << format_double(v.distance) << "  (" << std::setprecision(3) << secs << " s)\n";
    emit(o, o.format == "json" ? j.dump(2) + "\n" : flat_csv(j));
    return 0;
}

int cmd_test(const Options& o) {
    const auto [x, y] = load_pair(o);
    const StatisticConfig cfg = make_config(o, o.stat);
    PermutationOptions popts;
    popts.n_permutations = o.perms;
    popts.level = o.level;
    popts.threads = o.threads;
    Rng rng(o.seed);
    const TestResult r = permutation_test(x.points, y.points, cfg, popts, rng);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";

    json j;
    j["statistic_name"] = o.stat;
    j["statistic"] = r.statistic;
    j["threshold"] = r.threshold;
    j["p_value"] = r.p_value;
    j["reject"] = r.reject;
    j["n_permutations"] = r.n_permutations;
    j["level"] = o.level;
    j["n"] = x.points.rows();
    j["d"] = x.points.cols();
    j["kernel"] = needs_kernel(cfg.kind) ? kernel_json(cfg, resolve_kernel(cfg, x.points, y.points)) : json(nullptr);
    j["seed"] = o.seed;
    j["warnings"] = r.warnings;
    if (o.timing) j["wall_time"] = r.wall_time;

    std::cerr << o.stat << ": statistic " << format_double(r.statistic) << ", threshold " << format_double(r.threshold)
              << ", p = " << format_double(r.p_value) << (r.reject ? ", reject" : ", do not reject") << "\n";
    emit(o, o.format == "json" ? j.dump(2) + "\n" : flat_csv(j));
    return 0;
}

// ---------------------------------------------------------------------------

/// One benchmark cell: a generator for a sweep value, run for every method.
struct Sweep {
    std::string param_name;
    std::vector<double> values;
    std::function<PairGenerator(double)> generator;  // sweep value -> generator
    std::function<Eigen::Index(double)> sample_size;
};

std::vector<std::string> resolve_methods(const Options& o) {
    if (!o.methods.empty()) {
        for (const auto& m : o.methods) parse_statistic(m);
        return o.methods;
    }
    if (o.stat_opt->count() > 0) return {o.stat};
    std::vector<std::string> all;
    for (auto k : all_statistics) all.emplace_back(to_string(k));
    return all;
}

// n rows sampled without replacement from each table.
PairGenerator subsample_generator(SampleSet X, SampleSet Y) {
    return [X = std::move(X), Y = std::move(Y)](Eigen::Index n, Rng& rng) {
        if (n > X.rows() || n > Y.rows())
            throw ArgumentError("subsample size " + std::to_string(n) + " exceeds the rows available");
        auto pick = [&](const SampleSet& S) {
            std::vector<std::size_t> idx(static_cast<std::size_t>(S.rows()));
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            shuffle_indices(idx, rng);
            SampleSet out(n, S.cols());
            for (Eigen::Index i = 0; i < n; ++i) out.row(i) = S.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]));
            return out;
        };
        SampleSet a = pick(X);
        SampleSet b = pick(Y);
        return std::pair{std::move(a), std::move(b)};
    };
}

double median_of_3_seconds(const SampleSet& X, const SampleSet& Y, const StatisticConfig& cfg, std::uint64_t seed) {
    std::vector<double> t;
    for (int rep = 0; rep < 3; ++rep) {
        Rng rng(seed);
        const auto start = std::chrono::steady_clock::now();
        volatile double sink = compute_statistic(X, Y, cfg, rng).raw;
        (void)sink;
        t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    std::sort(t.begin(), t.end());
    return t[1];
}

std::string format_value(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

int run_sweep(const Options& o, const Sweep& sweep, const std::vector<std::pair<std::string, std::string>>& echo) {
    const auto methods = resolve_methods(o);
    PermutationOptions popts;
    popts.n_permutations = o.perms;
    popts.level = o.level;
    if (o.perms < min_reliable_permutations)
        std::cerr << "warning: only " << o.perms << " permutations; the rejection threshold is unreliable\n";

    std::vector<ExperimentReport> reports;
    std::vector<std::vector<double>> seconds(methods.size(), std::vector<double>(sweep.values.size(), NAN));
    bool failed = false;
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        ExperimentReport rep;
        rep.method = methods[mi];
        rep.param_name = sweep.param_name;
        rep.trials = o.trials;
        rep.seed = o.seed;
        rep.config = echo;
        for (std::size_t si = 0; si < sweep.values.size(); ++si) {
            const double value = sweep.values[si];
            ExperimentReport::Point pt{value, NAN, o.trials};
            try {
                const StatisticConfig cfg = make_config(o, methods[mi]);
                const PairGenerator gen = sweep.generator(value);
                const Eigen::Index n = sweep.sample_size(value);
                // Same data stream for every method at a sweep point.
                const std::uint64_t cell_seed = derive_seed(o.seed, {si});
                pt.rejection_rate = rejection_rate(gen, n, o.trials, cfg, popts, cell_seed, o.threads).rejection_rate;
                if (!o.no_timing) {
                    Rng data_rng = substream(cell_seed, {~std::uint64_t{0}});
                    const auto [X, Y] = gen(n, data_rng);
                    seconds[mi][si] = median_of_3_seconds(X, Y, cfg, cell_seed);
                }
            } catch (const std::exception& e) {
                failed = true;
                std::cerr << "error: " << methods[mi] << " at " << sweep.param_name << " = " << format_value(value)
                          << ": " << e.what() << "\n";
            }
            rep.points.push_back(pt);
        }
        reports.push_back(std::move(rep));
    }

    // summary table
    std::ostream& table = o.out.empty() ? std::cerr : std::cout;
    table << std::left << std::setw(15) << "method" << std::setw(12) << sweep.param_name << std::setw(16)
          << "rejection_rate" << (o.no_timing ? "" : "eval_seconds") << "\n";
    for (std::size_t mi = 0; mi < methods.size(); ++mi)
        for (std::size_t si = 0; si < sweep.values.size(); ++si) {
            table << std::left << std::setw(15) << methods[mi] << std::setw(12) << format_value(sweep.values[si])
                  << std::setw(16) << format_value(reports[mi].points[si].rejection_rate);
            if (!o.no_timing) table << std::setprecision(4) << seconds[mi][si] << std::setprecision(6);
            table << "\n";
        }

    const ReportFormat fmt = parse_report_format(o.format);
    if (o.out.empty()) std::cout << (fmt == ReportFormat::csv ? reports_to_csv(reports) : reports_to_json(reports));
    else write_reports(reports, fmt, o.out);

    if (!o.timing_out.empty() && !o.no_timing) {
        std::string t = "method,param_name,param_value,eval_seconds\n";
        for (std::size_t mi = 0; mi < methods.size(); ++mi)
            for (std::size_t si = 0; si < sweep.values.size(); ++si)
                t += methods[mi] + ',' + sweep.param_name + ',' + format_double(sweep.values[si]) + ',' +
                     format_double(seconds[mi][si]) + '\n';
        detail::write_file(o.timing_out, t);
    }
    return failed ? 1 : 0;
}

std::vector<std::pair<std::string, std::string>> echo_config(const Options& o) {
    return {{"kernel", o.kernel},
            {"bandwidth", o.bandwidth},
            {"degree", std::to_string(o.degree)},
            {"offset", format_double(o.offset)},
            {"p", std::to_string(o.p)},
            {"l", std::to_string(o.l)},
            {"m", std::to_string(o.m)},
            {"r", std::to_string(o.r)},
            {"nu", o.nu},
            {"perms", std::to_string(o.perms)},
            {"level", format_double(o.level)},
            {"median_include_diagonal", o.median_include_diagonal ? "true" : "false"},
            {"fresh_landmarks", o.fresh_landmarks ? "true" : "false"}};
}

Eigen::Index as_count(double v, const char* what) {
    if (!(v >= 1.0) || v != std::floor(v)) throw ArgumentError(std::string(what) + " sweep values must be positive integers");
    return static_cast<Eigen::Index>(v);
}

int cmd_benchmark(Options o) {
    Sweep sweep;
    auto echo = echo_config(o);
    echo.insert(echo.begin(), {"experiment", o.experiment});
    if (o.experiment == "power-decay") {
        const Eigen::Index n = o.n > 0 ? o.n : 200;
        sweep.param_name = "d";
        sweep.values = o.sweep.empty() ? std::vector<double>{32, 64, 128, 256, 512} : o.sweep;
        for (double v : sweep.values)
            if (as_count(v, "d") < 3) throw ArgumentError("power-decay needs d >= 3");
        sweep.generator = [](double d) {
            return PairGenerator([d = static_cast<Eigen::Index>(d)](Eigen::Index n, Rng& rng) {
                return gen_power_decay(d, n, rng);
            });
        };
        sweep.sample_size = [n](double) { return n; };
        echo.emplace_back("n", std::to_string(n));
    } else if (o.experiment == "laplace-gaussian") {
        // the polynomial kernel is the setting where MMD cannot see the difference
        if (o.kernel_opt->count() == 0) o.kernel = "poly";
        echo[1].second = o.kernel;
        sweep.param_name = "n";
        sweep.values = o.sweep.empty() ? std::vector<double>{100, 500, 2000, 5000, 10000} : o.sweep;
        for (double v : sweep.values) as_count(v, "n");
        sweep.generator = [](double) { return PairGenerator(gen_laplace_vs_gaussian); };
        sweep.sample_size = [](double n) { return static_cast<Eigen::Index>(n); };
    } else if (o.experiment == "custom-csv") {
        if (o.x_path.empty() || o.y_path.empty()) throw ArgumentError("custom-csv needs --x and --y");
        auto [x, y] = load_pair(o);
        if (x.points.cols() != y.points.cols()) throw ArgumentError("custom-csv: column dimension mismatch");
        const double rows = static_cast<double>(std::min(x.points.rows(), y.points.rows()));
        sweep.param_name = "n";
        sweep.values = o.sweep.empty() ? std::vector<double>{rows} : o.sweep;
        for (double v : sweep.values)
            if (as_count(v, "n") > static_cast<Eigen::Index>(rows))
                throw ArgumentError("custom-csv: sweep value exceeds the rows available");
        auto gen = subsample_generator(std::move(x.points), std::move(y.points));
        sweep.generator = [gen](double) { return gen; };
        sweep.sample_size = [](double n) { return static_cast<Eigen::Index>(n); };
        echo.emplace_back("x", o.x_path);
        echo.emplace_back("y", o.y_path);
    } else {
        throw ArgumentError("unknown experiment '" + o.experiment + "'");
    }
    return run_sweep(o, sweep, echo);
}

int cmd_type1(const Options& o) {
    const Eigen::Index d = o.d > 0 ? o.d : 5;
    Sweep sweep;
    sweep.param_name = "n";
    sweep.values = o.sweep.empty() ? std::vector<double>{static_cast<double>(o.n > 0 ? o.n : 100)} : o.sweep;
    for (double v : sweep.values) as_count(v, "n");
    const auto gen = make_pair_generator(GeneratorSpec::gaussian(d), GeneratorSpec::gaussian(d));
    sweep.generator = [gen](double) { return gen; };
    sweep.sample_size = [](double n) { return static_cast<Eigen::Index>(n); };
    auto echo = echo_config(o);
    echo.insert(echo.begin(), {"experiment", "type1"});
    echo.emplace_back("d", std::to_string(d));
    return run_sweep(o, sweep, echo);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel quantile discrepancies, MMD and sliced Wasserstein two-sample tests"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every command");

    Options disc_o, test_o, bench_o, type1_o;

    auto* disc = app.add_subcommand("discrepancy", "Evaluate one statistic on two CSV samples");
    add_input_files(disc, disc_o);
    add_statistic_flags(disc, disc_o);
    add_output_flags(disc, disc_o, "json");
    disc->add_flag("--timing", disc_o.timing, "Include the evaluation time in the JSON output");

    auto* test = app.add_subcommand("test", "Permutation two-sample test on two CSV samples");
    add_input_files(test, test_o);
    add_statistic_flags(test, test_o);
    add_test_flags(test, test_o);
    add_output_flags(test, test_o, "json");
    test->add_flag("--timing", test_o.timing, "Include the wall time in the JSON output");

    auto* bench = app.add_subcommand("benchmark", "Rejection rates over a parameter sweep");
    add_statistic_flags(bench, bench_o);
    add_test_flags(bench, bench_o);
    add_output_flags(bench, bench_o, "csv");
    bench->add_option("--experiment", bench_o.experiment, "Data setting")
        ->check(CLI::IsMember({"power-decay", "laplace-gaussian", "custom-csv"}))
        ->capture_default_str();
    bench->add_option("--methods", bench_o.methods, "Comma-separated statistics (default: --stat if given, else all)")
        ->delimiter(',');
    bench->add_option("--sweep", bench_o.sweep,
                      "Comma-separated sweep values: d for power-decay (default 32,64,128,256,512), "
                      "n for laplace-gaussian (default 100,500,2000,5000,10000) and custom-csv")
        ->delimiter(',');
    bench->add_option("--trials", bench_o.trials, "Independent trials per cell")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--n", bench_o.n, "Sample size for power-decay (default 200)")->check(CLI::PositiveNumber);
    bench->add_option("--x", bench_o.x_path, "First sample for custom-csv");
    bench->add_option("--y", bench_o.y_path, "Second sample for custom-csv");
    bench->add_flag("--header", bench_o.header, "custom-csv inputs start with a header row");
    bench->add_option("--timing-out", bench_o.timing_out, "Write median-of-3 evaluation times to this CSV file");
    bench->add_flag("--no-timing", bench_o.no_timing, "Skip the runtime measurement");

    auto* type1 = app.add_subcommand("type1", "Type I error under P = Q = N(0, I_d)");
    add_statistic_flags(type1, type1_o);
    add_test_flags(type1, type1_o);
    add_output_flags(type1, type1_o, "csv");
    type1_o.trials = 200;
    type1->add_option("--methods", type1_o.methods, "Comma-separated statistics (default: --stat if given, else all)")
        ->delimiter(',');
    type1->add_option("--trials", type1_o.trials, "Independent trials")->check(CLI::PositiveNumber)->capture_default_str();
    type1->add_option("--n", type1_o.n, "Sample size (default 100)")->check(CLI::PositiveNumber);
    type1->add_option("--sweep", type1_o.sweep, "Comma-separated sample sizes (overrides --n)")->delimiter(',');
    type1->add_option("--d", type1_o.d, "Dimension (default 5)")->check(CLI::PositiveNumber);
    type1->add_option("--timing-out", type1_o.timing_out, "Write median-of-3 evaluation times to this CSV file");
    type1->add_flag("--no-timing", type1_o.no_timing, "Skip the runtime measurement");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*disc) return cmd_discrepancy(disc_o);
        if (*test) return cmd_test(test_o);
        if (*bench) return cmd_benchmark(bench_o);
        if (*type1) return cmd_type1(type1_o);
    } catch (const kqe::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
