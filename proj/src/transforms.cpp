#include "bgnlm/transforms.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bgnlm/errors.h"

namespace bgnlm {

namespace {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double clamp_abs(double x) { return std::max(std::abs(x), kAbsFloor); }

double signed_clamp(double x) { return x < 0.0 ? -clamp_abs(x) : clamp_abs(x); }

double finite_or_bound(double v) {
    if (std::isnan(v)) return 0.0;
    const double big = std::numeric_limits<double>::max();
    return std::clamp(v, -big, big);
}

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

TransformRegistry TransformRegistry::builtin() {
    TransformRegistry reg;
    auto add = [&reg](std::string name, std::function<double(double)> fn) {
        reg.insert({std::move(name), std::move(fn), true});
    };
    // Results are clamped to the finite range; overflow on huge inputs (x^3 at 1e200)
    // would otherwise leak infinities.
    auto bounded = [](auto f) { return [f](double x) { return finite_or_bound(f(x)); }; };

    add("sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    add("relu", [](double x) { return std::max(x, 0.0); });
    add("nrelu", [](double x) { return std::max(-x, 0.0); });
    add("hs", [](double x) { return x > 0.0 ? 1.0 : 0.0; });
    add("nhs", [](double x) { return x < 0.0 ? 1.0 : 0.0; });
    add("gelu", [](double x) { return x * std_normal_cdf(x); });
    add("ngelu", [](double x) { return -x * std_normal_cdf(-x); });
    add("not", [](double x) { return 1.0 - x; });
    add("sqroot", [](double x) { return std::sqrt(std::abs(x)); });
    add("troot", [](double x) { return std::cbrt(std::abs(x)); });
    add("sin_deg", [](double x) { return std::sin(std::fmod(x, 360.0) * kDeg); });
    add("cos_deg", [](double x) { return std::cos(std::fmod(x, 360.0) * kDeg); });
    add("exp_dbl", [](double x) { return std::exp(-std::abs(x)); });
    add("gauss", [](double x) { return std::exp(-x * x); });
    add("erf", [](double x) { return std::erf(x); });
    add("arcsinh", [](double x) { return std::asinh(x); });

    add("pm2", bounded([](double x) { const double a = clamp_abs(x); return 1.0 / (a * a); }));
    add("pm1", [](double x) { return 1.0 / signed_clamp(x); });
    add("pm05", [](double x) { return 1.0 / std::sqrt(clamp_abs(x)); });
    add("p0", [](double x) { return std::log(clamp_abs(x)); });
    add("p05", [](double x) { return std::sqrt(std::abs(x)); });
    add("p2", bounded([](double x) { return x * x; }));
    add("p3", bounded([](double x) { return x * x * x; }));
    add("p0pm2", bounded([](double x) { const double a = clamp_abs(x); return std::log(a) / (a * a); }));
    add("p0pm05", [](double x) { const double a = clamp_abs(x); return std::log(a) / std::sqrt(a); });
    add("p0p0", [](double x) { const double l = std::log(clamp_abs(x)); return l * l; });
    add("p0p05", [](double x) { const double a = clamp_abs(x); return std::log(a) * std::sqrt(a); });
    add("p0p1", bounded([](double x) { return std::log(clamp_abs(x)) * x; }));
    add("p0p2", bounded([](double x) { return std::log(clamp_abs(x)) * x * x; }));
    add("p0p3", bounded([](double x) { return std::log(clamp_abs(x)) * x * x * x; }));
    return reg;
}

std::vector<double> TransformRegistry::probe_grid() {
    std::vector<double> grid;
    grid.reserve(1000);
    grid.insert(grid.end(), {0.0, 1e-12, -1e-12, 1.0, -1.0, 1e12, -1e12});
    // Log-spaced magnitudes on both sides of zero fill the remaining points.
    const std::size_t remaining = 1000 - grid.size();
    const std::size_t half = remaining / 2;
    for (std::size_t i = 0; i < half; ++i) {
        const double e = -12.0 + 24.0 * static_cast<double>(i) / static_cast<double>(half - 1);
        grid.push_back(std::pow(10.0, e));
        grid.push_back(-std::pow(10.0, e));
    }
    while (grid.size() < 1000) grid.push_back(0.5);
    return grid;
}

void TransformRegistry::register_transform(TransformDescriptor descriptor) {
    if (contains(descriptor.name)) throw DuplicateName("transform '" + descriptor.name + "' already registered");
    if (!descriptor.fn) throw NonFiniteTransform("transform '" + descriptor.name + "' has no function");
    for (double x : probe_grid()) {
        const double v = descriptor.fn(x);
        if (!std::isfinite(v)) {
            throw NonFiniteTransform("transform '" + descriptor.name + "' is not finite at x=" + std::to_string(x));
        }
    }
    descriptor.is_builtin = false;
    insert(std::move(descriptor));
}

void TransformRegistry::insert(TransformDescriptor descriptor) {
    index_.emplace(descriptor.name, entries_.size());
    entries_.push_back(std::move(descriptor));
}

const TransformDescriptor& TransformRegistry::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UnknownTransform("unknown transform '" + name + "'");
    return entries_[it->second];
}

std::vector<std::string> TransformRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
}

std::vector<double> TransformRegistry::apply_columnwise(const std::string& name, std::span<const double> column) const {
    const auto& fn = get(name).fn;
    std::vector<double> out(column.size());
    std::transform(column.begin(), column.end(), out.begin(), [&fn](double x) { return fn(x); });
    return out;
}

}  // namespace bgnlm
