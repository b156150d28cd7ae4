#include "bgnlm/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bgnlm/errors.h"
#include "bgnlm/feature.h"
#include "bgnlm/rng.h"

namespace bgnlm {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// Splits one record; double quotes protect delimiters and "" is an escaped quote.
std::vector<std::string> split_record(const std::string& line, char delim, std::size_t row) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delim) {
            out.push_back(trim(cell));
            cell.clear();
        } else {
            cell += c;
        }
    }
    if (quoted) throw ParseError("unterminated quote", row, out.size() + 1);
    out.push_back(trim(cell));
    return out;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan"; }

bool parse_double(const std::string& cell, double& value) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc() && ptr == last && std::isfinite(value);
}

}  // namespace

Dataset parse_dataset(std::istream& in, const LoadOptions& options) {
    std::string line;
    std::size_t row = 1;
    while (std::getline(in, line) && trim(line).empty()) ++row;
    if (trim(line).empty()) throw ParseError("missing header", row, 1);
    const std::vector<std::string> header = split_record(line, options.delimiter, row);
    const std::size_t cols = header.size();

    std::vector<std::vector<std::string>> cells;
    std::size_t missing = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto rec = split_record(line, options.delimiter, row);
        if (rec.size() != cols) {
            throw ParseError("expected " + std::to_string(cols) + " fields, found " + std::to_string(rec.size()), row,
                             std::min(rec.size(), cols) + 1);
        }
        for (const auto& c : rec) missing += is_missing(c) ? 1 : 0;
        cells.push_back(std::move(rec));
    }
    if (missing > 0) throw MissingValues(missing);
    if (cells.empty()) throw ParseError("no data rows", row, 1);

    std::size_t response = 0;
    if (!options.response.empty()) {
        const auto it = std::find(header.begin(), header.end(), options.response);
        if (it == header.end() && !options.response_optional) {
            throw ConfigError("response column '" + options.response + "' not found");
        }
        response = it == header.end() ? cols : static_cast<std::size_t>(it - header.begin());
    }

    const auto n = static_cast<Eigen::Index>(cells.size());
    Dataset data;
    data.response = response < cols ? header[response] : options.response;
    data.y.resize(response < cols ? n : 0);
    std::vector<Eigen::VectorXd> columns;

    for (std::size_t c = 0; c < cols; ++c) {
        std::vector<double> values(cells.size());
        bool numeric = true;
        for (std::size_t r = 0; r < cells.size() && numeric; ++r) numeric = parse_double(cells[r][c], values[r]);
        if (c == response) {
            if (!numeric) {
                for (std::size_t r = 0; r < cells.size(); ++r) {
                    if (!parse_double(cells[r][c], values[r])) throw ParseError("non-numeric response", r + 2, c + 1);
                }
            }
            data.y = Eigen::Map<Eigen::VectorXd>(values.data(), n);
            continue;
        }
        if (numeric) {
            data.labels.push_back(header[c]);
            columns.emplace_back(Eigen::Map<Eigen::VectorXd>(values.data(), n));
            continue;
        }
        std::set<std::string> levels;
        for (const auto& rec : cells) levels.insert(rec[c]);
        for (auto it = std::next(levels.begin()); it != levels.end(); ++it) {
            Eigen::VectorXd d(n);
            for (Eigen::Index r = 0; r < n; ++r) d(r) = cells[static_cast<std::size_t>(r)][c] == *it ? 1.0 : 0.0;
            data.labels.push_back(header[c] + *it);
            columns.push_back(std::move(d));
        }
    }

    data.x.resize(n, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) data.x.col(static_cast<Eigen::Index>(j)) = columns[j];
    if (options.fixed < 0 || options.fixed > data.x.cols()) throw ConfigError("fixed count exceeds covariate count");
    data.fixed = options.fixed;
    scale_dataset(data, options.scale_y, options.scale_x);
    return data;
}

Dataset load_dataset(const std::string& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return parse_dataset(in, options);
}

void write_dataset(std::ostream& out, const Dataset& data, char delimiter) {
    out << data.response;
    for (const auto& l : data.labels) out << delimiter << l;
    out << '\n';
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        out << format_number(data.y(i));
        for (Eigen::Index j = 0; j < data.p(); ++j) out << delimiter << format_number(data.x(i, j));
        out << '\n';
    }
}

void scale_dataset(Dataset& data, bool scale_y, bool scale_x) {
    const auto n = static_cast<double>(data.n());
    auto standardize = [n](Eigen::Ref<Eigen::VectorXd> v) {
        const double mean = v.mean();
        v.array() -= mean;
        const double sd = std::sqrt(v.squaredNorm() / (n - 1.0));
        if (sd > 0.0) v /= sd;
        return std::pair{mean, sd};
    };
    if (scale_y && data.y.size() > 0) {
        const auto [mean, sd] = standardize(data.y);
        if (data.mean.size() == data.y.size()) {
            data.mean.array() -= mean;
            if (sd > 0.0) data.mean /= sd;
        }
    }
    if (scale_x) {
        for (Eigen::Index j = 0; j < data.p(); ++j) {
            standardize(data.x.col(j));
            data.x.col(j) /= std::sqrt(n);
        }
    }
}

Dataset align_covariates(const Dataset& data, const std::vector<std::string>& labels) {
    Dataset out = data;
    out.labels = labels;
    out.x.resize(data.n(), static_cast<Eigen::Index>(labels.size()));
    for (std::size_t j = 0; j < labels.size(); ++j) {
        const auto it = std::find(data.labels.begin(), data.labels.end(), labels[j]);
        if (it == data.labels.end()) throw MissingCovariate("new data lacks covariate '" + labels[j] + "'");
        out.x.col(static_cast<Eigen::Index>(j)) = data.x.col(it - data.labels.begin());
    }
    return out;
}

Dataset subset_rows(const Dataset& data, Eigen::Index begin, Eigen::Index end) {
    if (begin < 0 || end > data.n() || begin >= end) throw ConfigError("invalid row range");
    Dataset out = data;
    if (data.y.size() == data.n()) out.y = data.y.segment(begin, end - begin);
    out.x = data.x.middleRows(begin, end - begin);
    if (data.mean.size() == data.n()) out.mean = data.mean.segment(begin, end - begin);
    return out;
}

double scenario_noise_sd(const std::string& scenario) {
    if (scenario == "kepler-like") return 0.02;
    if (scenario == "linear" || scenario == "interaction" || scenario == "logic") return 1.0;
    throw ConfigError("unknown scenario '" + scenario + "'");
}

Dataset simulate_dataset(const std::string& scenario, Eigen::Index n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("n must be positive");
    const double sd = scenario_noise_sd(scenario);
    Rng rng(seed, 0);
    Rng noise = rng.split(1);
    Dataset data;
    data.response = "y";

    if (scenario == "linear" || scenario == "interaction") {
        const Eigen::Index p = 20;
        data.x.resize(n, p);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < p; ++j) data.x(i, j) = rng.normal();
        const auto x = [&](Eigen::Index i, int j) { return data.x(i, j - 1); };
        data.mean.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (scenario == "linear") {
                double m = 0.0;
                for (int j = 1; j <= 5; ++j) m += (j / 5.0) * x(i, j);
                data.mean(i) = m;
            } else {
                data.mean(i) = 1.2 * x(i, 1) + 1.5 * x(i, 2) * x(i, 3) - x(i, 4) + x(i, 5) - 1.3 * x(i, 4) * x(i, 5);
            }
        }
    } else if (scenario == "logic") {
        const Eigen::Index p = 50;
        data.x.resize(n, p);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < p; ++j) data.x(i, j) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        const auto x = [&](Eigen::Index i, int j) { return data.x(i, j - 1); };
        data.mean.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            data.mean(i) = 1.0 + 1.5 * x(i, 37) + 3.5 * x(i, 2) * x(i, 9) + 9.0 * x(i, 7) * x(i, 12) * x(i, 20) +
                           7.0 * x(i, 4) * x(i, 10) * x(i, 17) * x(i, 30);
        }
    } else {
        // Nine positive covariates on log-normal scales; x9 is a binary flag.
        const Eigen::Index p = 9;
        const double log_sd[9] = {1.0, 0.5, 1.0, 0.8, 0.3, 0.3, 0.2, 0.1, 0.0};
        data.x.resize(n, p);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < 8; ++j) data.x(i, j) = std::exp(log_sd[j] * rng.normal());
            data.x(i, 8) = rng.bernoulli(0.2) ? 1.0 : 0.0;
        }
        data.mean.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            data.mean(i) = std::cbrt(data.x(i, 2) * data.x(i, 2) * data.x(i, 4));
        }
    }

    data.labels = default_labels(static_cast<std::size_t>(data.x.cols()));
    data.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) data.y(i) = data.mean(i) + sd * noise.normal();
    return data;
}

}  // namespace bgnlm
