#include "bgnlm/feature.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "bgnlm/errors.h"

namespace bgnlm {

struct Feature::Node {
    Kind kind = Kind::Leaf;
    std::size_t covariate = 0;
    std::string transform;
    double alpha0 = 0.0;
    std::vector<double> weights;
    std::vector<Feature> children;
    Complexity complexity;
    std::size_t max_covariate = 0;
    std::string key;
};

namespace {

double bound(double v) {
    if (std::isnan(v)) return 0.0;
    constexpr double big = std::numeric_limits<double>::max();
    return std::clamp(v, -big, big);
}

std::string render_node(const Feature& f, std::span<const std::string> labels) {
    switch (f.kind()) {
        case Feature::Kind::Leaf:
            return labels[f.covariate()];
        case Feature::Kind::Interaction: {
            std::string a = render_node(f.children()[0], labels);
            std::string b = render_node(f.children()[1], labels);
            if (b < a) std::swap(a, b);
            return "(" + a + "*" + b + ")";
        }
        case Feature::Kind::Modification:
            return f.transform() + "(" + render_node(f.children()[0], labels) + ")";
        case Feature::Kind::Projection: {
            std::string out = f.transform() + "(" + format_number(f.alpha0());
            for (std::size_t i = 0; i < f.children().size(); ++i) {
                out += "+" + format_number(f.weights()[i]) + "*" + render_node(f.children()[i], labels);
            }
            return out + ")";
        }
    }
    return {};
}

}  // namespace

std::string format_number(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::vector<std::string> default_labels(std::size_t p) {
    std::vector<std::string> labels;
    labels.reserve(p);
    for (std::size_t i = 0; i < p; ++i) labels.push_back("x" + std::to_string(i + 1));
    return labels;
}

namespace {

std::string default_label_render(const Feature& f) {
    const auto labels = default_labels(f.max_covariate() + 1);
    return f.render(labels);
}

}  // namespace

Feature Feature::leaf(std::size_t covariate) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Leaf;
    n->covariate = covariate;
    n->complexity = {0, 1, 0};
    n->max_covariate = covariate;
    n->key = "x" + std::to_string(covariate + 1);
    return Feature(std::move(n));
}

Feature Feature::interaction(Feature left, Feature right) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Interaction;
    const auto& cl = left.complexity();
    const auto& cr = right.complexity();
    n->complexity = {cl.oc + cr.oc + 1, cl.width + cr.width, 1 + std::max(cl.depth, cr.depth)};
    n->max_covariate = std::max(left.max_covariate(), right.max_covariate());
    n->children = {std::move(left), std::move(right)};
    Feature f(n);
    n->key = default_label_render(f);
    return f;
}

Feature Feature::modification(std::string transform, Feature child) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Modification;
    n->transform = std::move(transform);
    const auto& c = child.complexity();
    n->complexity = {c.oc + 1, c.width, c.depth + 1};
    n->max_covariate = child.max_covariate();
    n->children = {std::move(child)};
    Feature f(n);
    n->key = default_label_render(f);
    return f;
}

Feature Feature::projection(std::string transform, double alpha0, std::vector<double> weights,
                            std::vector<Feature> children) {
    if (children.empty()) throw std::invalid_argument("projection needs at least one child");
    if (weights.size() != children.size()) throw std::invalid_argument("projection weights/children size mismatch");
    auto n = std::make_shared<Node>();
    n->kind = Kind::Projection;
    n->transform = std::move(transform);
    n->alpha0 = alpha0;
    n->weights = std::move(weights);
    Complexity c{0, 0, 0};
    for (const auto& ch : children) {
        c.oc += ch.complexity().oc;
        c.width += ch.complexity().width;
        c.depth = std::max(c.depth, ch.complexity().depth);
        n->max_covariate = std::max(n->max_covariate, ch.max_covariate());
    }
    c.oc += static_cast<int>(children.size()) + 1;
    c.depth += 1;
    n->complexity = c;
    n->children = std::move(children);
    Feature f(n);
    n->key = default_label_render(f);
    return f;
}

Feature::Kind Feature::kind() const { return node_->kind; }
std::size_t Feature::covariate() const { return node_->covariate; }
const std::string& Feature::transform() const { return node_->transform; }
double Feature::alpha0() const { return node_->alpha0; }
const std::vector<double>& Feature::weights() const { return node_->weights; }
const std::vector<Feature>& Feature::children() const { return node_->children; }
const Complexity& Feature::complexity() const { return node_->complexity; }
const std::string& Feature::key() const { return node_->key; }
std::size_t Feature::max_covariate() const { return node_->max_covariate; }

std::string Feature::render(std::span<const std::string> labels) const {
    if (max_covariate() >= labels.size()) throw std::out_of_range("not enough labels to render feature");
    return render_node(*this, labels);
}

Eigen::VectorXd Feature::evaluate(const Eigen::MatrixXd& data, const TransformRegistry& transforms) const {
    if (max_covariate() >= static_cast<std::size_t>(data.cols())) {
        throw std::out_of_range("feature references covariate beyond data columns");
    }
    switch (kind()) {
        case Kind::Leaf:
            return data.col(static_cast<Eigen::Index>(covariate()));
        case Kind::Interaction: {
            Eigen::VectorXd out = children()[0].evaluate(data, transforms).cwiseProduct(children()[1].evaluate(data, transforms));
            return out.unaryExpr([](double v) { return bound(v); });
        }
        case Kind::Modification: {
            const auto& fn = transforms.get(transform()).fn;
            Eigen::VectorXd inner = children()[0].evaluate(data, transforms);
            return inner.unaryExpr([&fn](double v) { return bound(fn(v)); });
        }
        case Kind::Projection: {
            const auto& fn = transforms.get(transform()).fn;
            Eigen::VectorXd lin = Eigen::VectorXd::Constant(data.rows(), alpha0());
            for (std::size_t i = 0; i < children().size(); ++i) {
                lin += weights()[i] * children()[i].evaluate(data, transforms);
            }
            return lin.unaryExpr([&fn](double v) { return bound(fn(bound(v))); });
        }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Parser for the canonical grammar:
//   feature := label | "(" feature "*" feature ")" | name "(" feature ")"
//            | name "(" num ("+" num "*" feature)+ ")"

namespace {

class Parser {
public:
    Parser(std::string_view text, std::span<const std::string> labels) : text_(text) {
        for (std::size_t i = 0; i < labels.size(); ++i) label_index_.emplace(labels[i], i);
    }

    Feature parse_all() {
        Feature f = parse_feature();
        if (pos_ != text_.size()) fail("trailing characters");
        return f;
    }

private:
    [[noreturn]] void fail(const std::string& why) const {
        throw FeatureParseError("cannot parse feature '" + std::string(text_) + "' at offset " +
                                std::to_string(pos_) + ": " + why);
    }

    bool at(char c) const { return pos_ < text_.size() && text_[pos_] == c; }

    void expect(char c) {
        if (!at(c)) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    std::string_view identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == '(' || c == ')' || c == '*' || c == '+') break;
            ++pos_;
        }
        return text_.substr(start, pos_ - start);
    }

    bool try_number(double& out) {
        const char* first = text_.data() + pos_;
        const char* last = text_.data() + text_.size();
        auto res = std::from_chars(first, last, out);
        if (res.ec != std::errc()) return false;
        pos_ += static_cast<std::size_t>(res.ptr - first);
        return true;
    }

    Feature parse_feature() {
        if (at('(')) {
            ++pos_;
            Feature a = parse_feature();
            expect('*');
            Feature b = parse_feature();
            expect(')');
            return Feature::interaction(std::move(a), std::move(b));
        }
        const std::size_t start = pos_;
        const std::string_view name = identifier();
        if (name.empty()) fail("expected a label or transform name");
        if (!at('(')) {
            auto it = label_index_.find(std::string(name));
            if (it == label_index_.end()) {
                pos_ = start;
                fail("unknown label '" + std::string(name) + "'");
            }
            return Feature::leaf(it->second);
        }
        ++pos_;
        // Projection when the argument starts with "num+"; otherwise a modification.
        const std::size_t arg_start = pos_;
        double alpha0 = 0.0;
        if (try_number(alpha0) && at('+')) {
            std::vector<double> weights;
            std::vector<Feature> children;
            while (at('+')) {
                ++pos_;
                double w = 0.0;
                if (!try_number(w)) fail("expected projection weight");
                expect('*');
                weights.push_back(w);
                children.push_back(parse_feature());
            }
            expect(')');
            return Feature::projection(std::string(name), alpha0, std::move(weights), std::move(children));
        }
        pos_ = arg_start;
        Feature child = parse_feature();
        expect(')');
        return Feature::modification(std::string(name), std::move(child));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::unordered_map<std::string, std::size_t> label_index_;
};

}  // namespace

Feature Feature::parse(std::string_view text, std::span<const std::string> labels) {
    return Parser(text, labels).parse_all();
}

}  // namespace bgnlm
