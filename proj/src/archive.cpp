#include "bgnlm/archive.h"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "bgnlm/errors.h"

namespace bgnlm {

using nlohmann::json;

namespace {

json vector_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::VectorXd vector_from(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

json features_json(const std::vector<Feature>& features) {
    json out = json::array();
    for (const auto& f : features) out.push_back(f.key());
    return out;
}

std::vector<Feature> features_from(const json& j, std::span<const std::string> labels) {
    std::vector<Feature> out;
    for (const auto& s : j) out.push_back(Feature::parse(s.get<std::string>(), labels));
    return out;
}

json stats_json(const ChainStats& s) {
    return {{"iterations", s.iterations},
            {"mh_proposed", s.mh_proposed},
            {"mh_accepted", s.mh_accepted},
            {"large_proposed", s.large_proposed},
            {"large_accepted", s.large_accepted}};
}

ChainStats stats_from(const json& j) {
    ChainStats s;
    s.iterations = j.at("iterations").get<long>();
    s.mh_proposed = j.at("mh_proposed").get<long>();
    s.mh_accepted = j.at("mh_accepted").get<long>();
    s.large_proposed = j.at("large_proposed").get<long>();
    s.large_accepted = j.at("large_accepted").get<long>();
    return s;
}

json run_json(const GmjResult& run) {
    json gens = json::array();
    for (const auto& g : run.generations) {
        json prov = json::array();
        for (auto p : g.population.provenance) prov.push_back(to_string(p));
        json models = json::array();
        for (const auto& [key, rec] : g.chain.models) {
            models.push_back({{"key", key.to_string()},
                              {"crit", rec.crit},
                              {"coefs", vector_json(rec.coefs)},
                              {"visits", rec.visits},
                              {"mc_count", rec.mc_count}});
        }
        gens.push_back({{"generation", g.population.generation},
                        {"features", features_json(g.population.features)},
                        {"provenance", prov},
                        {"discarded", features_json(g.population.discarded)},
                        {"inclusion", g.inclusion},
                        {"best_crit", g.best_crit},
                        {"chain",
                         {{"q", g.chain.q},
                          {"best_key", g.chain.best_key.to_string()},
                          {"best_crit", g.chain.best_crit},
                          {"stats", stats_json(g.chain.stats)},
                          {"models", models}}}});
    }
    return {{"best_generation", run.best_generation},
            {"last_generation", run.last_generation},
            {"exhausted", run.exhausted},
            {"generations", gens}};
}

GmjResult run_from(const json& j, std::span<const std::string> labels) {
    GmjResult run;
    run.best_generation = j.at("best_generation").get<int>();
    run.last_generation = j.at("last_generation").get<int>();
    run.exhausted = j.at("exhausted").get<int>();
    for (const auto& g : j.at("generations")) {
        GenerationRecord rec;
        rec.population.generation = g.at("generation").get<int>();
        rec.population.features = features_from(g.at("features"), labels);
        for (const auto& p : g.at("provenance")) rec.population.provenance.push_back(provenance_from_string(p.get<std::string>()));
        rec.population.discarded = features_from(g.at("discarded"), labels);
        rec.inclusion = g.at("inclusion").get<std::vector<double>>();
        rec.best_crit = g.at("best_crit").get<double>();
        const json& c = g.at("chain");
        rec.chain.q = c.at("q").get<std::size_t>();
        rec.chain.best_key = ModelKey::from_string(c.at("best_key").get<std::string>());
        rec.chain.best_crit = c.at("best_crit").get<double>();
        rec.chain.stats = stats_from(c.at("stats"));
        for (const auto& m : c.at("models")) {
            ModelRecord mr;
            mr.crit = m.at("crit").get<double>();
            mr.coefs = vector_from(m.at("coefs"));
            mr.visits = m.at("visits").get<int>();
            mr.mc_count = m.at("mc_count").get<long>();
            rec.chain.models.emplace_back(ModelKey::from_string(m.at("key").get<std::string>()), std::move(mr));
        }
        run.generations.push_back(std::move(rec));
    }
    return run;
}

}  // namespace

MergedResult Archive::merged(PopSelector selector) const {
    return merge_runs(runs, selector, config.settings.intercept, config.settings.fixed);
}

json archive_to_json(const Archive& a) {
    json runs = json::array();
    for (const auto& r : a.runs) runs.push_back(run_json(r));
    // The worker count never changes results, so it is left out to keep archives identical
    // across machines.
    json config = config_to_json(a.config);
    config.erase("cores");
    return {{"format", "bgnlm-archive"},
            {"version", 1},
            {"config", config},
            {"response", a.response},
            {"labels", a.labels},
            {"run_ids", a.run_ids},
            {"failures", a.failures},
            {"runs", runs}};
}

Archive archive_from_json(const json& doc) {
    try {
        if (doc.at("format").get<std::string>() != "bgnlm-archive") throw ConfigError("not an archive document");
        Archive a;
        a.config = config_from_json(doc.at("config"));
        a.response = doc.at("response").get<std::string>();
        a.labels = doc.at("labels").get<std::vector<std::string>>();
        a.run_ids = doc.at("run_ids").get<std::vector<int>>();
        a.failures = doc.at("failures").get<std::vector<std::string>>();
        const auto keys = default_labels(a.labels.size());
        for (const auto& r : doc.at("runs")) a.runs.push_back(run_from(r, keys));
        return a;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed archive: ") + e.what());
    }
}

std::string dump_archive(const Archive& archive) { return archive_to_json(archive).dump(1) + "\n"; }

void write_file(const std::string& path, const std::string& contents) {
    if (path == "-") {
        std::cout << contents;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << contents;
    if (!out) throw IoError("write to '" + path + "' failed");
}

void save_archive(const Archive& archive, const std::string& path) { write_file(path, dump_archive(archive)); }

Archive load_archive(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed archive: ") + e.what());
    }
    return archive_from_json(doc);
}

ReportFormat report_format_from_string(const std::string& s) {
    if (s == "text") return ReportFormat::Text;
    if (s == "table") return ReportFormat::Table;
    if (s == "structured" || s == "json") return ReportFormat::Structured;
    throw ConfigError("unknown report format '" + s + "'");
}

namespace {

std::string level_name(double level) {
    std::ostringstream s;
    s << level;
    return s.str();
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

void write_summary(std::ostream& out, const Summary& summary, ReportFormat format, const std::string& heading) {
    switch (format) {
        case ReportFormat::Text: {
            if (!heading.empty()) out << heading << "\n\n";
            std::size_t width = std::string("feats.strings").size();
            for (const auto& r : summary.rows) width = std::max(width, r.feature.size());
            const std::size_t id_width = std::to_string(summary.rows.size()).size();
            out << std::string(id_width, ' ') << ' ' << std::setw(static_cast<int>(width)) << "feats.strings"
                << " marg.probs";
            for (double l : summary.levels) out << std::setw(14) << ("quant_" + level_name(l));
            out << '\n';
            for (std::size_t i = 0; i < summary.rows.size(); ++i) {
                const auto& r = summary.rows[i];
                out << std::setw(static_cast<int>(id_width)) << i + 1 << ' ' << std::setw(static_cast<int>(width))
                    << r.feature << ' ' << std::fixed << std::setprecision(7) << std::setw(10) << r.prob;
                for (double e : r.effects) out << std::setw(14) << std::setprecision(6) << e;
                out.unsetf(std::ios::floatfield);
                out << '\n';
            }
            break;
        }
        case ReportFormat::Table: {
            out << "feature,marg.prob";
            for (double l : summary.levels) out << ",quant_" << level_name(l);
            out << '\n';
            for (const auto& r : summary.rows) {
                out << csv_quote(r.feature) << ',' << format_number(r.prob);
                for (double e : r.effects) out << ',' << format_number(e);
                out << '\n';
            }
            break;
        }
        case ReportFormat::Structured: {
            json rows = json::array();
            for (const auto& r : summary.rows) {
                json row = {{"feature", r.feature}, {"key", r.key}, {"marg.prob", r.prob}};
                if (!summary.levels.empty()) row["effects"] = r.effects;
                rows.push_back(row);
            }
            json doc = {{"best_crit", summary.best_crit}, {"features", rows}};
            if (!summary.levels.empty()) {
                doc["levels"] = summary.levels;
                doc["intercept_effects"] = summary.intercept_effects;
            }
            out << doc.dump(1) << '\n';
            break;
        }
    }
}

void write_predictions(std::ostream& out, const PredictionSet& p) {
    out << "id,mean";
    for (double l : p.levels) out << ",q" << level_name(l);
    out << '\n';
    for (Eigen::Index i = 0; i < p.mean.size(); ++i) {
        out << i + 1 << ',' << format_number(p.mean(i));
        for (Eigen::Index l = 0; l < p.quantiles.cols(); ++l) out << ',' << format_number(p.quantiles(i, l));
        out << '\n';
    }
}

void write_diagnostics(std::ostream& out, const std::vector<DiagnosticPoint>& points, DiagStatistic stat) {
    out << "generation,statistic,value,lower,upper\n";
    for (const auto& pt : points) {
        out << pt.generation << ',' << to_string(stat) << ',' << format_number(pt.value) << ','
            << format_number(pt.lower) << ',' << format_number(pt.upper) << '\n';
    }
}

}  // namespace bgnlm
