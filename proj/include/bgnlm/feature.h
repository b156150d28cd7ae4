#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bgnlm/transforms.h"

namespace bgnlm {

struct Complexity {
    int oc = 0;     // operation count
    int width = 1;  // number of covariate leaves
    int depth = 0;

    bool operator==(const Complexity&) const = default;
};

/// A feature F(x): an immutable functional tree over the original covariates.
///
/// Nodes are shared, so copying a Feature is cheap. Two features are equal when their
/// canonical strings coincide; interaction operands are ordered lexicographically when
/// rendered, which makes (a*b) and (b*a) the same feature.
class Feature {
public:
    enum class Kind { Leaf, Interaction, Modification, Projection };

    static Feature leaf(std::size_t covariate);
    static Feature interaction(Feature left, Feature right);
    static Feature modification(std::string transform, Feature child);
    static Feature projection(std::string transform, double alpha0, std::vector<double> weights,
                              std::vector<Feature> children);

    Kind kind() const;
    std::size_t covariate() const;  // Leaf only
    const std::string& transform() const;
    double alpha0() const;
    const std::vector<double>& weights() const;
    const std::vector<Feature>& children() const;

    const Complexity& complexity() const;

    /// Canonical rendering with labels x1..xp; the identity used for deduplication.
    const std::string& key() const;

    /// Largest covariate index referenced by any leaf.
    std::size_t max_covariate() const;

    std::string render(std::span<const std::string> labels) const;

    /// Column of feature values, one per row of `data` (rows = observations, columns = covariates).
    /// Throws UnknownTransform.
    Eigen::VectorXd evaluate(const Eigen::MatrixXd& data, const TransformRegistry& transforms) const;

    /// Inverse of render(). Throws FeatureParseError.
    static Feature parse(std::string_view text, std::span<const std::string> labels);

    bool operator==(const Feature& other) const { return key() == other.key(); }

private:
    struct Node;
    explicit Feature(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

/// Labels "x1".."xp".
std::vector<std::string> default_labels(std::size_t p);

/// Shortest decimal string that parses back to exactly `value`.
std::string format_number(double value);

}  // namespace bgnlm
