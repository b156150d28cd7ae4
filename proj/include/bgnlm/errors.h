#pragma once

#include <stdexcept>
#include <string>

namespace bgnlm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define BGNLM_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                    \
    public:                                                        \
        explicit Name(const std::string& what) : Error(what) {}    \
    }

BGNLM_DEFINE_ERROR(DuplicateName);
BGNLM_DEFINE_ERROR(NonFiniteTransform);
BGNLM_DEFINE_ERROR(UnknownTransform);
BGNLM_DEFINE_ERROR(NoEligibleParent);
BGNLM_DEFINE_ERROR(GenerationExhausted);
BGNLM_DEFINE_ERROR(FeatureParseError);
BGNLM_DEFINE_ERROR(ZeroVarianceResponse);
BGNLM_DEFINE_ERROR(InvalidResponse);
BGNLM_DEFINE_ERROR(QuadratureNotConverged);
BGNLM_DEFINE_ERROR(UnsupportedPrior);
BGNLM_DEFINE_ERROR(EmptyInitialPopulation);
BGNLM_DEFINE_ERROR(AllRunsFailed);
BGNLM_DEFINE_ERROR(MissingCovariate);
BGNLM_DEFINE_ERROR(ConfigError);
BGNLM_DEFINE_ERROR(IoError);

#undef BGNLM_DEFINE_ERROR

/// Malformed delimited input; carries the 1-based row and column of the bad cell.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column)
        : Error(what + " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")"),
          row_(row), column_(column) {}
    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

class MissingValues : public Error {
public:
    explicit MissingValues(std::size_t count)
        : Error("input contains " + std::to_string(count) + " missing cell(s)"), count_(count) {}
    std::size_t count() const noexcept { return count_; }

private:
    std::size_t count_;
};

}  // namespace bgnlm
