#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "bgnlm/config.h"
#include "bgnlm/gmjmcmc.h"
#include "bgnlm/results.h"

namespace bgnlm {

/// Everything a fit produced, self-describing: the configuration, covariate labels and
/// every run's generations with their cached models.
struct Archive {
    RunConfig config;
    std::string response;
    std::vector<std::string> labels;
    std::vector<GmjResult> runs;
    std::vector<int> run_ids;
    std::vector<std::string> failures;

    int p() const { return static_cast<int>(labels.size()); }
    MergedResult merged() const { return merged(config.pop); }
    MergedResult merged(PopSelector selector) const;
};

nlohmann::json archive_to_json(const Archive& archive);
Archive archive_from_json(const nlohmann::json& doc);

/// Deterministic text form; equal archives give identical bytes.
std::string dump_archive(const Archive& archive);

void save_archive(const Archive& archive, const std::string& path);
Archive load_archive(const std::string& path);

enum class ReportFormat { Text, Table, Structured };

ReportFormat report_format_from_string(const std::string& s);

/// Summary report. Text mirrors the usual "feats.strings marg.probs" layout; table is
/// comma-separated; structured is a JSON document.
void write_summary(std::ostream& out, const Summary& summary, ReportFormat format, const std::string& heading = {});

/// "id,mean,q0.025,q0.975" style table, one row per observation.
void write_predictions(std::ostream& out, const PredictionSet& predictions);

/// Long-format table "generation,statistic,value,lower,upper".
void write_diagnostics(std::ostream& out, const std::vector<DiagnosticPoint>& points, DiagStatistic stat);

/// Writes to a file, or to standard output when path is "-". Throws IoError.
void write_file(const std::string& path, const std::string& contents);

}  // namespace bgnlm
