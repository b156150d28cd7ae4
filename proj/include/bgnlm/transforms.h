#pragma once

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace bgnlm {

/// Lower bound applied to |x| before logs and negative powers in the fractional-polynomial
/// family, keeping every built-in finite on finite input.
inline constexpr double kAbsFloor = 1e-12;

struct TransformDescriptor {
    std::string name;
    std::function<double(double)> fn;
    bool is_builtin = false;
};

/// Named univariate nonlinearities available to the modification and projection operators.
/// Immutable once handed to a sampler; copies are cheap enough for setup code.
class TransformRegistry {
public:
    TransformRegistry() = default;

    /// All built-in transforms (activation functions, general functions, fractional polynomials).
    static TransformRegistry builtin();

    /// Adds a custom transform after probing it on a fixed grid of finite inputs.
    /// Throws DuplicateName or NonFiniteTransform.
    void register_transform(TransformDescriptor descriptor);

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    const TransformDescriptor& get(const std::string& name) const;
    const std::vector<TransformDescriptor>& all() const { return entries_; }
    std::vector<std::string> names() const;
    std::size_t size() const { return entries_.size(); }

    double apply(const std::string& name, double x) const { return get(name).fn(x); }
    std::vector<double> apply_columnwise(const std::string& name, std::span<const double> column) const;

    /// The inputs every custom transform is checked on at registration.
    static std::vector<double> probe_grid();

private:
    void insert(TransformDescriptor descriptor);

    std::vector<TransformDescriptor> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace bgnlm
