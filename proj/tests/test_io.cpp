#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "bgnlm/archive.h"
#include "bgnlm/config.h"
#include "bgnlm/dataset.h"
#include "bgnlm/errors.h"
#include "bgnlm/run.h"

using namespace bgnlm;
namespace fs = std::filesystem;

namespace {

Dataset parse(const std::string& text, const LoadOptions& opts = {}) {
    std::istringstream in(text);
    return parse_dataset(in, opts);
}

std::string read_all(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("bgnlm_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                                             ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

int run_cli(const std::string& args, const fs::path& stdout_file) {
    const std::string cmd = std::string(BGNLM_CLI_PATH) + " " + args + " > " + stdout_file.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RunConfig quick_config(Method method) {
    RunConfig c;
    c.method = method;
    c.plan.method = method;
    c.plan.runs = 2;
    c.plan.seed = 11;
    c.settings.P = 3;
    c.settings.N = 80;
    c.n_given = true;
    c.settings.probs.gen.transforms = {"sigmoid", "p0", "troot"};
    return c;
}

}  // namespace

TEST(LoadDataset, BasicParsing) {
    const auto d = parse("y,a,b\n1,2,3\n4,5,6\n");
    EXPECT_EQ(d.response, "y");
    EXPECT_EQ(d.labels, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(d.n(), 2);
    EXPECT_EQ(d.y(1), 4.0);
    EXPECT_EQ(d.x(1, 1), 6.0);
}

TEST(LoadDataset, NamedResponseAndQuotedFields) {
    LoadOptions opts;
    opts.response = "target";
    const auto d = parse("\"a\",target,\"b,c\"\n1,2,3\n4,5,6\n", opts);
    EXPECT_EQ(d.labels, (std::vector<std::string>{"a", "b,c"}));
    EXPECT_EQ(d.y(0), 2.0);
}

TEST(LoadDataset, FactorsBecomeDummies) {
    const auto d = parse("y,color,z\n1,red,0\n2,blue,1\n3,green,2\n4,red,3\n");
    EXPECT_EQ(d.labels, (std::vector<std::string>{"colorgreen", "colorred", "z"}));
    EXPECT_EQ(d.x(0, 0), 0.0);
    EXPECT_EQ(d.x(0, 1), 1.0);
    EXPECT_EQ(d.x(1, 0), 0.0);
    EXPECT_EQ(d.x(1, 1), 0.0);
    EXPECT_EQ(d.x(2, 0), 1.0);
}

TEST(LoadDataset, MissingCellsAreCounted) {
    try {
        parse("y,a,b\n1,2,3\n4,,6\n");
        FAIL() << "expected MissingValues";
    } catch (const MissingValues& e) {
        EXPECT_EQ(e.count(), 1u);
    }
    try {
        parse("y,a,b\nNA,2,3\n4,NaN,6\n");
        FAIL() << "expected MissingValues";
    } catch (const MissingValues& e) {
        EXPECT_EQ(e.count(), 2u);
    }
}

TEST(LoadDataset, RaggedRowIsParseError) {
    try {
        parse("y,a,b\n1,2,3\n4,5\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.row(), 3u);
    }
    EXPECT_THROW(load_dataset("/nonexistent/file.csv"), IoError);
}

TEST(LoadDataset, ScalingIsExactlyAsSpecified) {
    const std::string text = "y,a,b\n1,2,10\n2,4,20\n6,9,60\n";
    const auto raw = parse(text);
    EXPECT_EQ(raw.x(2, 0), 9.0);
    LoadOptions opts;
    opts.scale_x = true;
    opts.scale_y = true;
    const auto s = parse(text, opts);
    EXPECT_NEAR(s.y.mean(), 0.0, 1e-12);
    EXPECT_NEAR(std::sqrt((s.y.array() - s.y.mean()).square().sum() / 2.0), 1.0, 1e-12);
    for (int j = 0; j < 2; ++j) {
        const Eigen::VectorXd c = s.x.col(j);
        EXPECT_NEAR(c.mean(), 0.0, 1e-12);
        // Unit sample sd divided by sqrt(n).
        EXPECT_NEAR(std::sqrt((c.array() - c.mean()).square().sum() / 2.0), 1.0 / std::sqrt(3.0), 1e-12);
    }
}

TEST(LoadDataset, AlignCovariates) {
    const auto d = parse("y,a,b,c\n1,2,3,4\n");
    const auto aligned = align_covariates(d, {"c", "a"});
    EXPECT_EQ(aligned.x(0, 0), 4.0);
    EXPECT_EQ(aligned.x(0, 1), 2.0);
    EXPECT_THROW(align_covariates(d, {"a", "zz"}), MissingCovariate);
}

TEST(Simulate, Shapes) {
    const auto lin = simulate_dataset("linear", 100, 1);
    EXPECT_EQ(lin.x.rows(), 100);
    EXPECT_EQ(lin.x.cols(), 20);
    for (int i = 0; i < 100; ++i) {
        double m = 0.0;
        for (int j = 1; j <= 5; ++j) m += (j / 5.0) * lin.x(i, j - 1);
        EXPECT_NEAR(lin.mean(i), m, 1e-12);
    }
    const auto logic = simulate_dataset("logic", 2000, 2);
    EXPECT_EQ(logic.x.cols(), 50);
    EXPECT_TRUE((logic.x.array() == 0.0 || logic.x.array() == 1.0).all());
    const auto again = simulate_dataset("logic", 2000, 2);
    EXPECT_EQ(logic.y, again.y);
    EXPECT_EQ(logic.x, again.x);
    const auto kep = simulate_dataset("kepler-like", 939, 3);
    EXPECT_EQ(kep.x.cols(), 9);
    EXPECT_TRUE((kep.x.leftCols(8).array() > 0.0).all());
    EXPECT_THROW(simulate_dataset("nope", 10, 1), ConfigError);
}

TEST(Simulate, InteractionResidualIsTheNoise) {
    const auto d = simulate_dataset("interaction", 1000, 4);
    Rng noise = Rng(4, 0).split(1);
    for (int i = 0; i < 1000; ++i) {
        const auto x = [&](int j) { return d.x(i, j - 1); };
        const double truth = 1.2 * x(1) + 1.5 * x(2) * x(3) - x(4) + x(5) - 1.3 * x(4) * x(5);
        EXPECT_NEAR(d.mean(i), truth, 1e-12);
        EXPECT_NEAR(d.y(i) - truth, noise.normal(), 1e-12);
    }
}

TEST(Simulate, WriteAndReload) {
    const auto d = simulate_dataset("linear", 30, 5);
    std::stringstream ss;
    write_dataset(ss, d);
    const auto back = parse_dataset(ss);
    EXPECT_EQ(back.labels, d.labels);
    EXPECT_EQ(back.y, d.y);
    EXPECT_EQ(back.x, d.x);
}

TEST(Config, RoundTrip) {
    auto c = quick_config(Method::GmjmcmcParallel);
    c.settings.eval.beta_prior.type = "robust";
    c.settings.feat.prel_select = {0, 3};
    c.settings.eval.extra["subs"] = 0.1;
    c.settings.mj.sa.t_init = 7.5;
    const auto doc = config_to_json(c);
    const auto back = config_from_json(doc);
    EXPECT_EQ(config_to_json(back), doc);
    EXPECT_EQ(back.resolved_N(), 80);
}

TEST(Config, DefaultsAndErrors) {
    const auto d = config_from_json(nlohmann::json::object());
    EXPECT_EQ(d.method, Method::Mjmcmc);
    EXPECT_EQ(d.resolved_N(), 1000);
    const auto g = config_from_json(nlohmann::json{{"method", "gmjmcmc"}});
    EXPECT_EQ(g.resolved_N(), 100);
    EXPECT_THROW(config_from_json(nlohmann::json{{"bogus", 1}}), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json{{"params", {{"feat", {{"D", "deep"}}}}}}), ConfigError);
    const auto reg = TransformRegistry::builtin();
    auto bad = config_from_json(nlohmann::json{{"method", "gmjmcmc"}});
    EXPECT_THROW(validate_config(bad, reg), ConfigError);
    bad.settings.probs.gen.transforms = {"not-a-transform"};
    EXPECT_THROW(validate_config(bad, reg), ConfigError);
    auto lin = config_from_json(nlohmann::json{{"method", "gmjmcmc"}, {"probs", {{"gen", {1, 0, 0, 1}}}}});
    EXPECT_NO_THROW(validate_config(lin, reg));
}

TEST(RunFit, FixedCovariatesInEveryModel) {
    auto data = simulate_dataset("linear", 100, 6);
    data.fixed = 2;
    auto c = quick_config(Method::Mjmcmc);
    c.settings.fixed = 2;
    const auto reg = TransformRegistry::builtin();
    const auto archive = run_fit(c, data, reg);
    ASSERT_FALSE(archive.merged().models.empty());
    for (const auto& m : archive.merged().models) {
        for (const auto& f : m.features) EXPECT_GE(f.covariate(), 2u);
        EXPECT_EQ(m.coefs.size(), static_cast<Eigen::Index>(3 + m.features.size()));
    }
}

TEST(Archive, RoundTripIsByteIdentical) {
    const auto data = simulate_dataset("interaction", 150, 7);
    const auto reg = TransformRegistry::builtin();
    const auto archive = run_fit(quick_config(Method::GmjmcmcParallel), data, reg);
    const std::string text = dump_archive(archive);
    const auto back = archive_from_json(nlohmann::json::parse(text));
    EXPECT_EQ(dump_archive(back), text);
    // Re-summarizing the reloaded archive gives the same report.
    auto report = [&](const Archive& a) {
        std::ostringstream out;
        write_summary(out, summarize(a.merged(), 1e-4, a.labels), ReportFormat::Text);
        return out.str();
    };
    EXPECT_EQ(report(back), report(archive));
    EXPECT_THROW(archive_from_json(nlohmann::json{{"format", "other"}}), Error);
}

TEST(Reports, Formats) {
    Summary s;
    s.rows = {{"x1", "x1", 1.0, {0.5, 0.1}}, {"(x2*x3)", "(x2*x3)", 0.25, {0.0, 0.0}}};
    s.levels = {0.5, 0.025};
    s.best_crit = -12.5;
    std::ostringstream text, table, structured;
    write_summary(text, s, ReportFormat::Text, "Best population");
    write_summary(table, s, ReportFormat::Table);
    write_summary(structured, s, ReportFormat::Structured);
    EXPECT_NE(text.str().find("feats.strings"), std::string::npos);
    EXPECT_NE(text.str().find("marg.probs"), std::string::npos);
    EXPECT_NE(text.str().find("quant_0.5"), std::string::npos);
    EXPECT_LT(text.str().find("x1"), text.str().find("(x2*x3)"));
    EXPECT_EQ(table.str().substr(0, table.str().find('\n')), "feature,marg.prob,quant_0.5,quant_0.025");
    const auto doc = nlohmann::json::parse(structured.str());
    EXPECT_EQ(doc["features"].size(), 2u);
    EXPECT_EQ(report_format_from_string("json"), ReportFormat::Structured);
    EXPECT_THROW(report_format_from_string("xml"), Error);
}

TEST(Reports, PredictionHeader) {
    PredictionSet p;
    p.mean = Eigen::VectorXd::Constant(2, 1.5);
    p.levels = {0.025, 0.975};
    p.quantiles = Eigen::MatrixXd::Ones(2, 2);
    std::ostringstream out;
    write_predictions(out, p);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "id,mean,q0.025,q0.975");
    std::ostringstream diag;
    write_diagnostics(diag, {{1, 2.0, 1.0, 3.0}}, DiagStatistic::Median);
    EXPECT_EQ(diag.str().substr(0, diag.str().find('\n')), "generation,statistic,value,lower,upper");
    EXPECT_THROW(write_file("/nonexistent/dir/file.txt", "x"), IoError);
}

TEST(Cli, EndToEnd) {
    TempDir dir;
    const auto train = dir / "train.csv";
    const auto arch = dir / "archive.json";
    ASSERT_EQ(run_cli("simulate --scenario linear --n 120 --seed 3 --out " + train.string(), dir / "sim.log"), 0);
    EXPECT_EQ(read_all(train).substr(0, 6), "y,x1,x");

    ASSERT_EQ(run_cli("fit --data " + train.string() + " --method mjmcmc --N 500 --seed 5 --test-rows 101:120 --archive " +
                          arch.string() + " --summary " + (dir / "summary.txt").string() + " --predictions " +
                          (dir / "pred.csv").string() + " --diagnostics " + (dir / "diag.csv").string(),
                      dir / "fit.log"),
              0)
        << read_all(dir / "fit.log");
    const auto summary = read_all(dir / "summary.txt");
    EXPECT_NE(summary.find("feats.strings"), std::string::npos);
    EXPECT_NE(summary.find("x5"), std::string::npos);
    const auto pred = read_all(dir / "pred.csv");
    EXPECT_EQ(pred.substr(0, pred.find('\n')), "id,mean,q0.025,q0.975");
    EXPECT_EQ(std::count(pred.begin(), pred.end(), '\n'), 21);

    ASSERT_EQ(run_cli("summarize --archive " + arch.string() + " --out " + (dir / "again.txt").string(), dir / "s.log"), 0);
    EXPECT_EQ(read_all(dir / "again.txt"), summary);
    ASSERT_EQ(run_cli("predict --archive " + arch.string() + " --data " + train.string() + " --out " + (dir / "p2.csv").string(),
                      dir / "p.log"),
              0);
    const auto all_pred = read_all(dir / "p2.csv");
    EXPECT_EQ(std::count(all_pred.begin(), all_pred.end(), '\n'), 121);
    ASSERT_EQ(run_cli("diagnose --archive " + arch.string() + " --statistic max --out " + (dir / "d.csv").string(), dir / "d.log"), 0);
    EXPECT_EQ(read_all(dir / "d.csv").substr(0, 10), "generation");

    // Structured summary parses.
    ASSERT_EQ(run_cli("summarize --archive " + arch.string() + " --format structured --out " + (dir / "s.json").string(), dir / "j.log"),
              0);
    EXPECT_NO_THROW(static_cast<void>(nlohmann::json::parse(read_all(dir / "s.json"))));
}

TEST(Cli, ErrorsGiveNonZeroExit) {
    TempDir dir;
    EXPECT_NE(run_cli("fit --data /nonexistent.csv", dir / "a.log"), 0);
    std::ofstream(dir / "bad.csv") << "y,a\n1,2\n3\n";
    EXPECT_EQ(run_cli("fit --data " + (dir / "bad.csv").string(), dir / "b.log"), 2);
    std::ofstream(dir / "ok.csv") << "y,a\n1,2\n3,1\n2,2\n5,0\n";
    EXPECT_NE(run_cli("fit --data " + (dir / "ok.csv").string() + " --method gmjmcmc --archive " + (dir / "x.json").string(),
                      dir / "c.log"),
              0);
    EXPECT_NE(read_all(dir / "c.log").find("transform"), std::string::npos);
}
