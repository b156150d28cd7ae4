// Command-line front end: fit, predict, summarize, diagnose, simulate.

#include <cmath>
#include <fstream>
#include <optional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bgnlm/archive.h"
#include "bgnlm/config.h"
#include "bgnlm/dataset.h"
#include "bgnlm/errors.h"
#include "bgnlm/results.h"
#include "bgnlm/run.h"

using namespace bgnlm;

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> parse_levels(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("invalid quantile level '" + item + "'");
        }
    }
    return out;
}

std::string render(const std::function<void(std::ostream&)>& fn) {
    std::ostringstream out;
    fn(out);
    return out.str();
}

void write_summary_to(const std::string& path, const Summary& summary, ReportFormat format, const std::string& heading) {
    write_file(path, render([&](std::ostream& out) { write_summary(out, summary, format, heading); }));
}

struct FitOptions {
    std::string data;
    std::string response;
    bool scale_y = false;
    bool scale_x = false;
    std::string config;
    std::string method;
    int P = 0;
    long N = 0;
    long N_final = 0;
    std::string transforms;
    int runs = 0;
    int cores = 0;
    std::string family;
    std::string custom;
    std::string beta_prior;
    double g = 0.0;
    std::string model_prior;
    bool intercept = true;
    int fixed = 0;
    bool sub = false;
    bool verbose = false;
    std::uint64_t seed = 0;
    std::string pop;
    std::string archive = "bgnlm-archive.json";
    std::string summary = "-";
    std::string format = "text";
    double tol = 1e-4;
    std::string test_data;
    std::string test_rows;
    std::string predictions;
    std::string diagnostics;
};

// Flags given on the command line override values from --config.
RunConfig build_config(const FitOptions& o, CLI::App& app) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
    GmjSettings& s = c.settings;
    auto given = [&](const char* flag) { return app.count(flag) > 0; };
    if (given("--method")) c.method = method_from_string(o.method);
    if (given("--P")) s.P = o.P;
    if (given("--N")) {
        s.N = o.N;
        c.n_given = true;
    }
    if (given("--N-final")) s.N_final = o.N_final;
    if (given("--transforms")) s.probs.gen.transforms = split_list(o.transforms);
    if (given("--runs")) c.plan.runs = o.runs;
    if (given("--cores")) c.plan.cores = o.cores;
    if (given("--family")) s.eval.family = family_from_string(o.family);
    if (given("--custom")) {
        s.eval.family = Family::Custom;
        s.eval.custom = o.custom;
    }
    if (given("--beta-prior")) s.eval.beta_prior.type = o.beta_prior;
    if (given("--g")) s.eval.beta_prior.g = o.g;
    if (given("--model-prior")) s.eval.model_prior.type = o.model_prior;
    if (given("--intercept") || given("--no-intercept")) s.intercept = o.intercept;
    if (given("--fixed")) s.fixed = o.fixed;
    if (given("--sub")) s.eval.sub = o.sub;
    if (given("--verbose")) c.plan.verbose = o.verbose;
    if (given("--seed")) c.plan.seed = o.seed;
    if (given("--pop")) c.pop = pop_selector_from_string(o.pop);
    return c;
}

// "a:b" selects rows a..b, 1-based and inclusive.
std::pair<Eigen::Index, Eigen::Index> parse_row_range(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw ConfigError("--test-rows expects FIRST:LAST");
    try {
        const long first = std::stol(s.substr(0, colon));
        const long last = std::stol(s.substr(colon + 1));
        if (first < 1 || last < first) throw ConfigError("invalid row range '" + s + "'");
        return {first - 1, last};
    } catch (const std::logic_error&) {
        throw ConfigError("invalid row range '" + s + "'");
    }
}

Family link_family(const RunConfig& c) {
    return c.settings.eval.family == Family::Custom ? Family::Gaussian : c.settings.eval.family;
}

int run_fit_command(const FitOptions& o, CLI::App& app) {
    const RunConfig config = build_config(o, app);
    LoadOptions load;
    load.response = o.response;
    load.fixed = config.settings.fixed;
    load.scale_y = o.scale_y;
    load.scale_x = o.scale_x;
    Dataset data = load_dataset(o.data, load);

    std::optional<Dataset> test;
    if (!o.test_rows.empty()) {
        const auto [first, last] = parse_row_range(o.test_rows);
        if (last > data.n()) throw ConfigError("test rows exceed the data");
        test = subset_rows(data, first, last);
        Dataset train = data;
        const Eigen::Index keep = data.n() - (last - first);
        train.x.resize(keep, data.p());
        train.y.resize(keep);
        Eigen::Index r = 0;
        for (Eigen::Index i = 0; i < data.n(); ++i) {
            if (i >= first && i < last) continue;
            train.x.row(r) = data.x.row(i);
            train.y(r++) = data.y(i);
        }
        data = std::move(train);
    } else if (!o.test_data.empty()) {
        LoadOptions tl = load;
        tl.response = data.response;
        tl.response_optional = true;
        test = align_covariates(load_dataset(o.test_data, tl), data.labels);
    }

    const TransformRegistry transforms = TransformRegistry::builtin();
    const Archive archive = run_fit(config, data, transforms);
    if (!archive.failures.empty()) {
        std::cerr << "warning: " << archive.failures.size() << " run(s) failed\n";
        for (const auto& f : archive.failures) std::cerr << "  " << f << '\n';
    }
    save_archive(archive, o.archive);

    const MergedResult merged = archive.merged();
    const Summary summary = summarize(merged, o.tol, archive.labels);
    std::ostringstream heading;
    heading << "Best log marginal posterior: " << summary.best_crit << "  runs: " << archive.runs.size();
    write_summary_to(o.summary, summary, report_format_from_string(o.format), heading.str());

    if (test) {
        const PredictionSet pred = predict_bma(merged, test->x, transforms, link_family(config));
        const std::string path = o.predictions.empty() ? "-" : o.predictions;
        write_file(path, render([&](std::ostream& out) { write_predictions(out, pred); }));
        if (test->y.size() == test->n()) {
            const double rmse = std::sqrt((pred.mean - test->y).squaredNorm() / static_cast<double>(test->n()));
            std::cerr << "test RMSE: " << rmse << '\n';
        }
    }
    if (!o.diagnostics.empty()) {
        const auto points = diagnostics_series(merged.best_crit_series, DiagStatistic::Median);
        write_file(o.diagnostics,
                   render([&](std::ostream& out) { write_diagnostics(out, points, DiagStatistic::Median); }));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian generalized nonlinear model search"};
    app.require_subcommand(1);

    FitOptions fo;
    CLI::App* fit = app.add_subcommand("fit", "Fit a model to a delimited data file");
    fit->add_option("--data", fo.data, "Training data (delimited text with header)")->required();
    fit->add_option("--response", fo.response, "Response column (default: first column)");
    fit->add_flag("--scale-y", fo.scale_y, "Center and scale the response");
    fit->add_flag("--scale-x", fo.scale_x, "Standardize covariates and divide by sqrt(n)");
    fit->add_option("--config", fo.config, "Configuration file; flags override it");
    fit->add_option("--method", fo.method, "mjmcmc, gmjmcmc, mjmcmc.parallel or gmjmcmc.parallel");
    fit->add_option("--P", fo.P, "Number of populations");
    fit->add_option("--N", fo.N, "MJMCMC iterations per population");
    fit->add_option("--N-final", fo.N_final, "Iterations in the last population");
    fit->add_option("--transforms", fo.transforms, "Comma-separated transform names");
    fit->add_option("--runs", fo.runs, "Independent chains");
    fit->add_option("--cores", fo.cores, "Worker threads");
    fit->add_option("--family", fo.family, "gaussian, binomial, poisson or gamma");
    fit->add_option("--custom", fo.custom, "Compiled-in evaluator name");
    fit->add_option("--beta-prior", fo.beta_prior, "Coefficient prior");
    fit->add_option("--g", fo.g, "g for the g-prior");
    fit->add_option("--model-prior", fo.model_prior, "default or logic");
    fit->add_flag("--intercept,!--no-intercept", fo.intercept, "Include an intercept");
    fit->add_option("--fixed", fo.fixed, "Leading covariates kept in every model");
    fit->add_flag("--sub", fo.sub, "Subsampled estimation for logistic models");
    fit->add_flag("--verbose", fo.verbose, "Progress on standard error");
    fit->add_option("--seed", fo.seed, "Master seed");
    fit->add_option("--pop", fo.pop, "Population used for summaries: best, last or all");
    fit->add_option("--archive", fo.archive, "Archive output path")->capture_default_str();
    fit->add_option("--summary", fo.summary, "Summary output path ('-' for stdout)")->capture_default_str();
    fit->add_option("--format", fo.format, "text, table or structured")->capture_default_str();
    fit->add_option("--tol", fo.tol, "Smallest inclusion probability reported")->capture_default_str();
    auto* test_data = fit->add_option("--test-data", fo.test_data, "Data to predict after fitting");
    fit->add_option("--test-rows", fo.test_rows, "Hold out rows FIRST:LAST (1-based) for prediction")
        ->excludes(test_data);
    fit->add_option("--predictions", fo.predictions, "Prediction output path");
    fit->add_option("--diagnostics", fo.diagnostics, "Diagnostics output path");

    std::string archive_path, data_path, out_path = "-", levels_text = "0.025,0.975", link, model = "bma",
                                          pop, format = "text", effects, statistic = "median";
    double tol = 1e-4;
    int window = 5;

    CLI::App* predict = app.add_subcommand("predict", "Model-averaged predictions from an archive");
    predict->add_option("--archive", archive_path, "Archive from fit")->required();
    predict->add_option("--data", data_path, "New data")->required();
    predict->add_option("--levels", levels_text, "Quantile levels")->capture_default_str();
    predict->add_option("--link", link, "Inverse link family (default: the fitted family)");
    predict->add_option("--model", model, "bma or best")->capture_default_str();
    predict->add_option("--pop", pop, "best, last or all");
    predict->add_option("--out", out_path, "Output path")->capture_default_str();

    CLI::App* summ = app.add_subcommand("summarize", "Feature inclusion report from an archive");
    summ->add_option("--archive", archive_path, "Archive from fit")->required();
    summ->add_option("--tol", tol, "Smallest inclusion probability reported")->capture_default_str();
    summ->add_option("--effects", effects, "Comma-separated effect quantile levels");
    summ->add_option("--pop", pop, "best, last or all");
    summ->add_option("--format", format, "text, table or structured")->capture_default_str();
    summ->add_option("--out", out_path, "Output path")->capture_default_str();

    CLI::App* diag = app.add_subcommand("diagnose", "Best-crit series across generations");
    diag->add_option("--archive", archive_path, "Archive from fit")->required();
    diag->add_option("--statistic", statistic, "median, mean, min, max or var")->capture_default_str();
    diag->add_option("--window", window, "Rolling window")->capture_default_str();
    diag->add_option("--out", out_path, "Output path")->capture_default_str();

    std::string scenario = "linear";
    long n = 100;
    std::uint64_t seed = 0;
    CLI::App* sim = app.add_subcommand("simulate", "Write a simulated dataset");
    sim->add_option("--scenario", scenario, "linear, interaction, logic or kepler-like")->capture_default_str();
    sim->add_option("--n", n, "Rows")->capture_default_str();
    sim->add_option("--seed", seed, "Seed")->capture_default_str();
    sim->add_option("--out", out_path, "Output path")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fit) return run_fit_command(fo, *fit);

        if (*sim) {
            const Dataset data = simulate_dataset(scenario, n, seed);
            write_file(out_path, render([&](std::ostream& out) { write_dataset(out, data); }));
            return 0;
        }

        const Archive archive = load_archive(archive_path);
        const PopSelector selector = pop.empty() ? archive.config.pop : pop_selector_from_string(pop);
        const MergedResult merged = archive.merged(selector);

        if (*predict) {
            LoadOptions load;
            load.response = archive.response;
            load.response_optional = true;
            const Dataset data = align_covariates(load_dataset(data_path, load), archive.labels);
            const Family family = link.empty() ? link_family(archive.config) : family_from_string(link);
            const TransformRegistry transforms = TransformRegistry::builtin();
            const auto levels = parse_levels(levels_text);
            PredictionSet pred;
            if (model == "bma") {
                pred = predict_bma(merged, data.x, transforms, family, levels);
            } else if (model == "best") {
                MergedResult single = merged;
                MergedModel best = best_model(merged);
                best.prob = 1.0;
                single.models = {best};
                pred = predict_bma(single, data.x, transforms, family, levels);
            } else {
                throw ConfigError("unknown model '" + model + "'");
            }
            write_file(out_path, render([&](std::ostream& out) { write_predictions(out, pred); }));
            return 0;
        }

        if (*summ) {
            const Summary summary = summarize(merged, tol, archive.labels, parse_levels(effects));
            std::ostringstream heading;
            heading << "Best log marginal posterior: " << summary.best_crit << "  runs: " << archive.runs.size();
            write_summary_to(out_path, summary, report_format_from_string(format), heading.str());
            return 0;
        }

        if (*diag) {
            const DiagStatistic stat = diag_statistic_from_string(statistic);
            const auto points = diagnostics_series(merged.best_crit_series, stat, window);
            write_file(out_path, render([&](std::ostream& out) { write_diagnostics(out, points, stat); }));
            return 0;
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
