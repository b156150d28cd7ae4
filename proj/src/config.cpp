#include "bgnlm/config.h"

#include <fstream>
#include <set>

#include "bgnlm/errors.h"

namespace bgnlm {

using nlohmann::json;

namespace {

// Reads members of one JSON object, rejecting keys that are never consumed.
class Block {
public:
    Block(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError("'" + name_ + "' must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("'" + name_ + "." + key + "': " + e.what());
        }
    }

    template <typename T, std::size_t N>
    void get_array(const char* key, std::array<T, N>& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        if (!v.is_array() || v.size() != N) {
            throw ConfigError("'" + name_ + "." + key + "' must be an array of " + std::to_string(N) + " numbers");
        }
        for (std::size_t i = 0; i < N; ++i) {
            if (!v[i].is_number()) throw ConfigError("'" + name_ + "." + key + "' must contain numbers");
            out[i] = v[i].get<T>();
        }
    }

    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    Block child(const char* key) {
        seen_.insert(key);
        return Block(j_.contains(key) ? j_.at(key) : empty(), name_ + "." + key);
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) throw ConfigError("unknown key '" + name_ + "." + k + "'");
        }
    }

private:
    static const json& empty() {
        static const json e = json::object();
        return e;
    }
    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

void read_neigh(Block& b, Neighborhood& n) {
    b.get("neigh.size", n.size);
    b.get("neigh.min", n.min);
    b.get("neigh.max", n.max);
}

json neigh_json(const Neighborhood& n) {
    return {{"neigh.size", n.size}, {"neigh.min", n.min}, {"neigh.max", n.max}};
}

}  // namespace

long RunConfig::resolved_N() const {
    if (n_given) return settings.N;
    return is_genetic(method) ? 100 : 1000;
}

RunConfig config_from_json(const json& doc) {
    RunConfig c;
    GmjSettings& s = c.settings;
    Block top(doc, "config");

    std::string text;
    if (top.has("method")) {
        top.get("method", text);
        c.method = method_from_string(text);
    }
    top.get("P", s.P);
    if (top.has("N")) {
        top.get("N", s.N);
        c.n_given = true;
    }
    top.get("N_final", s.N_final);
    top.get("transforms", s.probs.gen.transforms);
    if (top.has("family")) {
        top.get("family", text);
        s.eval.family = family_from_string(text);
    }
    top.get("custom", s.eval.custom);
    top.get("intercept", s.intercept);
    top.get("fixed", s.fixed);
    top.get("sub", s.eval.sub);
    top.get("runs", c.plan.runs);
    top.get("cores", c.plan.cores);
    top.get("seed", c.plan.seed);
    top.get("verbose", c.plan.verbose);
    if (top.has("pop")) {
        top.get("pop", text);
        c.pop = pop_selector_from_string(text);
    }

    {
        Block probs = top.child("probs");
        ProbsMJ& mj = s.probs.mj;
        probs.get("large", mj.large);
        probs.get_array("large.kern", mj.large_kern);
        probs.get_array("localopt.kern", mj.localopt_kern);
        probs.get_array("random.kern", mj.random_kern);
        probs.get_array("mh", mj.mh);
        probs.get("filter", s.probs.filter);
        probs.get_array("gen", s.probs.gen.gen);
        probs.get("trans.priors", s.probs.gen.trans_weights);
        probs.finish();
    }
    {
        Block params = top.child("params");
        ParamsMJ& mj = s.mj;
        params.get("burn_in", mj.burn_in);
        params.get("max.model.size", mj.max_model_size);
        {
            Block mh = params.child("mh");
            read_neigh(mh, mj.mh);
            mh.finish();
        }
        if (params.has("large")) {
            Block large = params.child("large");
            read_neigh(large, mj.large);
            large.finish();
            s.derive_large_neigh = false;
        }
        {
            Block random = params.child("random");
            random.get("prob", mj.random_prob);
            random.finish();
        }
        {
            Block sa = params.child("sa");
            sa.get("t.init", mj.sa.t_init);
            sa.get("t.min", mj.sa.t_min);
            sa.get("dt", mj.sa.dt);
            sa.get("M", mj.sa.M);
            sa.get_array("kern", mj.sa.kern);
            read_neigh(sa, mj.sa.neigh);
            sa.finish();
        }
        {
            Block greedy = params.child("greedy");
            greedy.get("steps", mj.greedy.steps);
            greedy.get("tries", mj.greedy.tries);
            greedy.get_array("kern", mj.greedy.kern);
            read_neigh(greedy, mj.greedy.neigh);
            greedy.finish();
        }
        {
            Block feat = params.child("feat");
            ParamsFeat& f = s.feat;
            feat.get("D", f.D);
            feat.get("L", f.L);
            if (feat.has("alpha")) {
                feat.get("alpha", text);
                f.alpha = alpha_strategy_from_string(text);
            }
            feat.get("pop.max", f.pop_max);
            feat.get("keep.org", f.keep_org);
            feat.get("prel.filter", f.prel_filter);
            feat.get("prel.select", f.prel_select);
            feat.get("keep.min", f.keep_min);
            feat.get("eps", f.eps);
            feat.get("check.col", f.check_col);
            feat.get("col.check.mock.data", f.col_check_mock_data);
            feat.get("max.proj.size", f.max_proj_size);
            feat.get("max.retries", f.max_retries);
            feat.finish();
        }
        params.finish();
    }
    {
        Block beta = top.child("beta_prior");
        BetaPrior& b = s.eval.beta_prior;
        beta.get("type", b.type);
        beta.get("g", b.g);
        beta.get("a", b.a);
        beta.get("b", b.b);
        beta.get("rho", b.rho);
        beta.get("s", b.s);
        beta.get("v", b.v);
        beta.get("k", b.k);
        beta.finish();
    }
    {
        Block model = top.child("model_prior");
        ModelPrior& m = s.eval.model_prior;
        model.get("type", m.type);
        model.get("r", m.r);
        if (model.has("measure")) {
            model.get("measure", text);
            m.measure = complexity_measure_from_string(text);
        }
        model.get("p", m.p);
        model.finish();
    }
    if (top.has("extra_params")) {
        const json& extra = doc.at("extra_params");
        if (!extra.is_object()) throw ConfigError("'extra_params' must be an object");
        for (const auto& [k, v] : extra.items()) {
            if (!v.is_number()) throw ConfigError("'extra_params." + k + "' must be a number");
            s.eval.extra[k] = v.get<double>();
        }
    }
    top.finish();
    return c;
}

json config_to_json(const RunConfig& c) {
    const GmjSettings& s = c.settings;
    const ProbsMJ& pm = s.probs.mj;
    const ParamsMJ& mj = s.mj;
    const ParamsFeat& f = s.feat;
    const BetaPrior& b = s.eval.beta_prior;
    const ModelPrior& m = s.eval.model_prior;

    json doc;
    doc["method"] = to_string(c.method);
    doc["P"] = s.P;
    if (c.n_given) doc["N"] = s.N;
    doc["N_final"] = s.N_final;
    doc["transforms"] = s.probs.gen.transforms;
    doc["family"] = to_string(s.eval.family);
    doc["custom"] = s.eval.custom;
    doc["intercept"] = s.intercept;
    doc["fixed"] = s.fixed;
    doc["sub"] = s.eval.sub;
    doc["runs"] = c.plan.runs;
    doc["cores"] = c.plan.cores;
    doc["seed"] = c.plan.seed;
    doc["verbose"] = c.plan.verbose;
    doc["pop"] = to_string(c.pop);
    doc["probs"] = {{"large", pm.large},
                    {"large.kern", pm.large_kern},
                    {"localopt.kern", pm.localopt_kern},
                    {"random.kern", pm.random_kern},
                    {"mh", pm.mh},
                    {"filter", s.probs.filter},
                    {"gen", s.probs.gen.gen},
                    {"trans.priors", s.probs.gen.trans_weights}};
    json params;
    params["burn_in"] = mj.burn_in;
    params["max.model.size"] = mj.max_model_size;
    params["mh"] = neigh_json(mj.mh);
    if (!s.derive_large_neigh) params["large"] = neigh_json(mj.large);
    params["random"] = {{"prob", mj.random_prob}};
    json sa = neigh_json(mj.sa.neigh);
    sa.update(json{{"t.init", mj.sa.t_init}, {"t.min", mj.sa.t_min}, {"dt", mj.sa.dt}, {"M", mj.sa.M}, {"kern", mj.sa.kern}});
    params["sa"] = sa;
    json greedy = neigh_json(mj.greedy.neigh);
    greedy.update(json{{"steps", mj.greedy.steps}, {"tries", mj.greedy.tries}, {"kern", mj.greedy.kern}});
    params["greedy"] = greedy;
    params["feat"] = {{"D", f.D},
                      {"L", f.L},
                      {"alpha", to_string(f.alpha)},
                      {"pop.max", f.pop_max},
                      {"keep.org", f.keep_org},
                      {"prel.filter", f.prel_filter},
                      {"prel.select", f.prel_select},
                      {"keep.min", f.keep_min},
                      {"eps", f.eps},
                      {"check.col", f.check_col},
                      {"col.check.mock.data", f.col_check_mock_data},
                      {"max.proj.size", f.max_proj_size},
                      {"max.retries", f.max_retries}};
    doc["params"] = params;
    doc["beta_prior"] = {{"type", b.type}, {"g", b.g}, {"a", b.a}, {"b", b.b},
                         {"rho", b.rho},   {"s", b.s}, {"v", b.v}, {"k", b.k}};
    doc["model_prior"] = {{"type", m.type}, {"r", m.r}, {"measure", to_string(m.measure)}, {"p", m.p}};
    doc["extra_params"] = json::object();
    for (const auto& [k, v] : s.eval.extra) doc["extra_params"][k] = v;
    return doc;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return config_from_json(doc);
}

void validate_config(const RunConfig& c, const TransformRegistry& transforms) {
    const GmjSettings& s = c.settings;
    if (c.plan.runs < 1) throw ConfigError("runs must be at least 1");
    if (c.plan.cores < 1) throw ConfigError("cores must be at least 1");
    if (s.P < 1) throw ConfigError("P must be at least 1");
    if (c.resolved_N() < 1) throw ConfigError("N must be at least 1");
    if (s.N_final < 0) throw ConfigError("N_final must be non-negative");
    if (s.fixed < 0) throw ConfigError("fixed must be non-negative");
    for (const auto& name : s.probs.gen.transforms) {
        if (!transforms.contains(name)) throw ConfigError("transform '" + name + "' is not registered");
    }
    if (!s.probs.gen.trans_weights.empty() && s.probs.gen.trans_weights.size() != s.probs.gen.transforms.size()) {
        throw ConfigError("trans.priors must have one entry per transform");
    }
    if (is_genetic(c.method) && s.probs.gen.transforms.empty() &&
        (s.probs.gen.gen[1] > 0.0 || s.probs.gen.gen[2] > 0.0)) {
        throw ConfigError("transforms are required when modification or projection is enabled");
    }
    if (s.eval.family == Family::Custom && !has_evaluator(s.eval.custom)) {
        throw ConfigError("custom evaluator '" + s.eval.custom + "' is not registered");
    }
    if (s.eval.model_prior.type != "default" && s.eval.model_prior.type != "logic") {
        throw ConfigError("unknown model prior '" + s.eval.model_prior.type + "'");
    }
    try {
        (void)s.probs.mj.normalized();
        (void)s.probs.gen.normalized();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

GmjSettings resolved_settings(const RunConfig& c) {
    GmjSettings s = c.settings;
    s.N = c.resolved_N();
    return s;
}

}  // namespace bgnlm
