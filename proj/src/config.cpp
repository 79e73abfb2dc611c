#include "koopcert/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "koopcert/errors.hpp"
#include "koopcert/io.hpp"
#include "koopcert/random.hpp"

namespace koopcert {

namespace {

using nlohmann::json;

// Object reader that remembers which keys were consumed so leftovers can be
// reported as unknown.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw UsageError(where() + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const std::string& key) {
        used_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    double number(const std::string& key, double def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_number()) throw UsageError(field(key) + ": expected a number");
        const double x = v->get<double>();
        if (!std::isfinite(x)) throw UsageError(field(key) + ": must be finite");
        return x;
    }

    int integer(const std::string& key, int def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_number_integer()) throw UsageError(field(key) + ": expected an integer");
        return v->get<int>();
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_number_unsigned()) throw UsageError(field(key) + ": expected a non-negative integer");
        return v->get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_boolean()) throw UsageError(field(key) + ": expected true or false");
        return v->get<bool>();
    }

    std::string string(const std::string& key, const std::string& def,
                       std::initializer_list<const char*> allowed = {}) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_string()) throw UsageError(field(key) + ": expected a string");
        auto s = v->get<std::string>();
        if (allowed.size() == 0) return s;
        std::string options;
        for (const char* a : allowed) {
            if (s == a) return s;
            options += options.empty() ? a : std::string(", ") + a;
        }
        throw UsageError(field(key) + ": unknown value '" + s + "' (expected one of " + options + ")");
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_array()) throw UsageError(field(key) + ": expected an array of numbers");
        std::vector<double> out;
        for (const auto& x : *v) {
            if (!x.is_number()) throw UsageError(field(key) + ": expected an array of numbers");
            out.push_back(x.get<double>());
            if (!std::isfinite(out.back())) throw UsageError(field(key) + ": entries must be finite");
        }
        return out;
    }

    std::vector<int> integers(const std::string& key, std::vector<int> def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_array()) throw UsageError(field(key) + ": expected an array of integers");
        std::vector<int> out;
        for (const auto& x : *v) {
            if (!x.is_number_integer()) throw UsageError(field(key) + ": expected an array of integers");
            out.push_back(x.get<int>());
        }
        return out;
    }

    std::optional<Node> child(const std::string& key) {
        const json* v = find(key);
        if (!v) return std::nullopt;
        return Node(*v, field(key));
    }

    const json* array(const std::string& key) {
        const json* v = find(key);
        if (v && !v->is_array()) throw UsageError(field(key) + ": expected an array");
        return v;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!used_.count(key)) throw UsageError(field(key) + ": unknown key");
    }

    std::string where() const { return path_.empty() ? "config" : path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

void require(bool ok, const std::string& field, const std::string& message) {
    if (!ok) throw UsageError(field + ": " + message);
}

ObservableSpec parse_observable(Node n) {
    ObservableSpec o;
    const auto kind = n.string("kind", "coordinate", {"coordinate", "affine", "ball", "sine"});
    o.label = n.string("label", "");
    if (kind == "coordinate") {
        o.kind = ObservableSpec::Kind::coordinate;
        o.index = n.integer("index", 0);
        require(o.index >= 0, n.field("index"), "must be >= 0");
    } else if (kind == "affine") {
        o.kind = ObservableSpec::Kind::affine;
        o.a = n.numbers("a", {});
        o.b = n.number("b", 0.0);
        require(!o.a.empty(), n.field("a"), "required");
    } else if (kind == "ball") {
        o.kind = ObservableSpec::Kind::ball;
        o.center = n.numbers("center", {});
        o.radius = n.number("radius", 1.0);
        require(!o.center.empty(), n.field("center"), "required");
        require(o.radius > 0.0, n.field("radius"), "must be > 0");
    } else {
        o.kind = ObservableSpec::Kind::sine;
        o.a = n.numbers("a", {});
        o.b = n.number("b", 0.0);
        o.amplitude = n.number("amplitude", 1.0);
        o.frequency = n.number("frequency", 1.0);
        o.quadratic = n.number("quadratic", 0.0);
        require(!o.a.empty(), n.field("a"), "required");
    }
    n.finish();
    return o;
}

void check_dim(const std::vector<double>& v, int dim, const std::string& field) {
    if (static_cast<int>(v.size()) != dim)
        throw UsageError(field + ": expected " + std::to_string(dim) + " entries, got " + std::to_string(v.size()));
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

ScalarObservable ObservableSpec::build(int dim) const {
    ScalarObservable o;
    switch (kind) {
        case Kind::coordinate: {
            if (index >= dim) throw UsageError("observable index " + std::to_string(index) + " out of range");
            const int i = index;
            o.label = label.empty() ? "x" + std::to_string(i + 1) : label;
            o.value = [i](const Vec& x) { return x[i]; };
            o.gradient = [i, dim](const Vec&) { return Vec(Vec::Unit(dim, i)); };
            break;
        }
        case Kind::affine: {
            check_dim(a, dim, "observable a");
            const Vec av = to_vec(a);
            const double bv = b;
            o.label = label.empty() ? "affine" : label;
            o.value = [av, bv](const Vec& x) { return av.dot(x) + bv; };
            o.gradient = [av](const Vec&) { return av; };
            break;
        }
        case Kind::ball: {
            check_dim(center, dim, "observable center");
            const Vec c = to_vec(center);
            const double r2 = radius * radius;
            o.label = label.empty() ? "ball" : label;
            o.value = [c, r2](const Vec& x) { return (x - c).squaredNorm() - r2; };
            o.gradient = [c](const Vec& x) { return Vec(2.0 * (x - c)); };
            break;
        }
        case Kind::sine: {
            check_dim(a, dim, "observable a");
            const Vec av = to_vec(a);
            const double amp = amplitude, freq = frequency, quad = quadratic, off = b;
            o.label = label.empty() ? "sine" : label;
            o.value = [=](const Vec& x) { return amp * std::sin(freq * av.dot(x)) + quad * x.squaredNorm() + off; };
            o.gradient = [=](const Vec& x) {
                return Vec(amp * freq * std::cos(freq * av.dot(x)) * av + 2.0 * quad * x);
            };
            break;
        }
    }
    return o;
}

ControlAffineSystem SystemSpec::build() const {
    if (name == "duffing") return duffing(alpha, beta, delta);
    return linear_scalar(a, b);
}

Box ControlSpec::bounds() const { return Box(to_vec(lower), to_vec(upper)); }

ControlSignal ControlSpec::build(double horizon, std::uint64_t master_seed) const {
    if (kind == "constant") return ControlSignal::constant(to_vec(value), bounds());
    if (kind == "zoh") {
        std::vector<Vec> vs;
        for (const auto& v : values) vs.push_back(to_vec(v));
        return ControlSignal::zoh(std::move(vs), segment_duration, bounds());
    }
    return random_zoh(bounds(), segment_duration, horizon, seed.value_or(derive_seed(master_seed, 1000)));
}

ControlAffineSystem RunConfig::system() const { return scenario.system.build(); }

Box RunConfig::box() const { return Box(to_vec(scenario.domain_lower), to_vec(scenario.domain_upper)); }

StateDomain RunConfig::domain() const { return StateDomain{box(), {}}; }

std::vector<ScalarObservable> RunConfig::constraints() const {
    std::vector<ScalarObservable> out;
    for (const auto& c : scenario.constraints) out.push_back(c.build(static_cast<int>(scenario.x0.size())));
    return out;
}

ScalarObservable RunConfig::observable() const {
    return scenario.observable.build(static_cast<int>(scenario.x0.size()));
}

Vec RunConfig::x0() const { return to_vec(scenario.x0); }

ControlSignal RunConfig::control() const { return scenario.control.build(scenario.horizon, data.seed); }

Dictionary RunConfig::dictionary_for() const {
    const int d = static_cast<int>(scenario.x0.size());
    auto base = [&](const std::string& kind) {
        if (kind == "fem") return fem_dictionary(FemMesh(box(), dictionary.mesh_size));
        return monomial_dictionary(d, dictionary.degree, dictionary.cap);
    };
    if (dictionary.kind == "composite") return composite_dictionary(constraints(), base(dictionary.base));
    return base(dictionary.kind);
}

std::string RunConfig::hash() const { return io::hex64(io::fnv1a64(source.dump())); }

RunConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        // e.byte is 1-based; report line/column for humans.
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw UsageError("malformed JSON at line " + std::to_string(line) + ", column " + std::to_string(col) +
                         ": " + e.what());
    }

    RunConfig cfg;
    cfg.source = doc;
    Node root(doc, "");

    if (auto sc = root.child("scenario")) {
        auto& s = cfg.scenario;
        if (auto sys = sc->child("system")) {
            s.system.name = sys->string("name", "duffing", {"duffing", "linear"});
            if (s.system.name == "duffing") {
                s.system.alpha = sys->number("alpha", -1.0);
                s.system.beta = sys->number("beta", 1.0);
                s.system.delta = sys->number("delta", 0.0);
                s.x0 = {1.0, 1.0};
            } else {
                s.system.a = sys->number("a", -1.0);
                if (sys->has("b")) s.system.b = sys->number("b", 0.0);
                s.domain_lower = {-1.0};
                s.domain_upper = {1.0};
                s.x0 = {0.5};
            }
            sys->finish();
        }
        if (auto dom = sc->child("domain")) {
            s.domain_lower = dom->numbers("lower", s.domain_lower);
            s.domain_upper = dom->numbers("upper", s.domain_upper);
            dom->finish();
        }
        s.x0 = sc->numbers("x0", s.x0);
        s.horizon = sc->number("T", s.horizon);
        s.dt = sc->number("dt", s.dt);
        if (const json* cs = sc->array("constraints")) {
            for (std::size_t i = 0; i < cs->size(); ++i)
                s.constraints.push_back(parse_observable(Node((*cs)[i], sc->field("constraints") + "[" + std::to_string(i) + "]")));
        }
        if (auto ob = sc->child("observable")) s.observable = parse_observable(*ob);
        if (auto ctl = sc->child("control")) {
            auto& c = s.control;
            c.kind = ctl->string("kind", c.kind, {"random_zoh", "constant", "zoh"});
            c.segment_duration = ctl->number("segment_duration", c.segment_duration);
            c.lower = ctl->numbers("lower", c.lower);
            c.upper = ctl->numbers("upper", c.upper);
            c.value = ctl->numbers("value", c.value);
            if (const json* vs = ctl->array("values")) {
                for (const auto& v : *vs) {
                    if (!v.is_array()) throw UsageError(ctl->field("values") + ": expected an array of arrays");
                    c.values.push_back(v.get<std::vector<double>>());
                }
            }
            if (ctl->has("seed")) c.seed = ctl->unsigned_integer("seed", 0);
            ctl->finish();
        }
        sc->finish();
    }
    if (auto dn = root.child("dictionary")) {
        auto& d = cfg.dictionary;
        d.kind = dn->string("kind", d.kind, {"monomial", "fem", "composite"});
        d.degree = dn->integer("degree", d.degree);
        d.mesh_size = dn->number("mesh_size", d.mesh_size);
        d.base = dn->string("base", d.base, {"monomial", "fem"});
        d.cap = dn->integer("cap", d.cap);
        dn->finish();
    }
    if (auto dn = root.child("data")) {
        auto& d = cfg.data;
        d.m = dn->integer("m", d.m);
        d.seed = dn->unsigned_integer("seed", d.seed);
        d.trials = dn->integer("trials", d.trials);
        d.shared_samples = dn->boolean("shared_samples", d.shared_samples);
        d.m_values = dn->integers("m_values", d.m_values);
        d.quadrature_order = dn->integer("quadrature_order", d.quadrature_order);
        dn->finish();
    }
    if (auto cn = root.child("certification")) {
        auto& c = cfg.certification;
        c.epsilon = cn->number("epsilon", c.epsilon);
        c.delta = cn->number("delta", c.delta);
        c.dt_check = cn->number("dt_check", c.dt_check);
        cn->finish();
    }
    if (auto en = root.child("edmdc")) {
        cfg.with_edmdc = en->boolean("enabled", cfg.with_edmdc);
        cfg.edmdc_m = en->integer("m", cfg.edmdc_m);
        cfg.edmdc.sample_interval = en->number("sample_interval", cfg.edmdc.sample_interval);
        cfg.edmdc.integration_substeps = en->integer("substeps", cfg.edmdc.integration_substeps);
        en->finish();
    }
    if (auto sn = root.child("sweep")) {
        auto& s = cfg.sweep;
        s.kind = sn->string("kind", s.kind, {"generator", "trajectory", "fem", "duffing-benchmark", "soundness"});
        s.epsilons = sn->numbers("epsilons", s.epsilons);
        s.mesh_sizes = sn->numbers("mesh_sizes", s.mesh_sizes);
        s.seeds = sn->integer("seeds", s.seeds);
        s.sampled_trials = sn->integer("sampled_trials", s.sampled_trials);
        if (auto mr = sn->child("m_rule")) {
            const auto kind = mr->string("kind", "fixed", {"fixed", "per_observable"});
            s.m_rule.kind = kind == "fixed" ? MRule::Kind::fixed : MRule::Kind::per_observable;
            s.m_rule.value = mr->number("value", s.m_rule.value);
            mr->finish();
        }
        sn->finish();
    }
    if (auto on = root.child("output")) {
        cfg.output.directory = on->string("directory", cfg.output.directory);
        cfg.output.svg = on->boolean("svg", cfg.output.svg);
        on->finish();
    }
    root.finish();

    // Cross-field checks, named after the offending field.
    const auto& s = cfg.scenario;
    const ControlAffineSystem sys = s.system.build();
    const int d = sys.state_dim();
    check_dim(s.x0, d, "scenario.x0");
    check_dim(s.domain_lower, d, "scenario.domain.lower");
    check_dim(s.domain_upper, d, "scenario.domain.upper");
    for (int i = 0; i < d; ++i)
        require(s.domain_lower[static_cast<std::size_t>(i)] < s.domain_upper[static_cast<std::size_t>(i)],
                "scenario.domain", "lower must be < upper in every coordinate");
    require(s.horizon > 0.0, "scenario.T", "must be > 0");
    require(s.dt > 0.0, "scenario.dt", "must be > 0");
    require(s.dt <= s.horizon, "scenario.dt", "must not exceed T");
    const int nc = sys.control_dim();
    if (nc > 0) {
        check_dim(s.control.lower, nc, "scenario.control.lower");
        check_dim(s.control.upper, nc, "scenario.control.upper");
        for (int i = 0; i < nc; ++i)
            require(s.control.lower[static_cast<std::size_t>(i)] < s.control.upper[static_cast<std::size_t>(i)],
                    "scenario.control", "lower must be < upper");
        require(s.control.segment_duration > 0.0, "scenario.control.segment_duration", "must be > 0");
        if (s.control.kind == "constant") check_dim(s.control.value, nc, "scenario.control.value");
        if (s.control.kind == "zoh") {
            require(!s.control.values.empty(), "scenario.control.values", "required for kind zoh");
            for (const auto& v : s.control.values) check_dim(v, nc, "scenario.control.values");
        }
    }
    for (const auto& c : s.constraints) c.build(d);
    s.observable.build(d);

    const auto& dict = cfg.dictionary;
    require(dict.degree >= 0, "dictionary.degree", "must be >= 0");
    require(dict.mesh_size > 0.0, "dictionary.mesh_size", "must be > 0");
    require(dict.cap >= 1, "dictionary.cap", "must be >= 1");
    if (dict.kind == "composite") require(!s.constraints.empty(), "dictionary.kind", "composite needs scenario.constraints");

    const auto& data = cfg.data;
    require(data.m >= 1, "data.m", "m must be >= 1");
    require(data.trials >= 1, "data.trials", "must be >= 1");
    require(data.quadrature_order >= 1, "data.quadrature_order", "must be >= 1");
    require(!data.m_values.empty(), "data.m_values", "must not be empty");
    for (std::size_t i = 0; i < data.m_values.size(); ++i) {
        require(data.m_values[i] >= 1, "data.m_values", "entries must be >= 1");
        if (i) require(data.m_values[i] > data.m_values[i - 1], "data.m_values", "must be strictly increasing");
    }

    auto& cc = cfg.certification;
    cc.horizon = s.horizon;
    require(cc.epsilon > 0.0, "certification.epsilon", "must be > 0");
    require(cc.delta > 0.0 && cc.delta < 1.0, "certification.delta", "must lie in (0, 1)");
    require(cc.dt_check > 0.0, "certification.dt_check", "must be > 0");
    require(cc.dt_check <= s.horizon, "certification.dt_check", "must not exceed scenario.T");

    require(cfg.edmdc_m >= 1, "edmdc.m", "must be >= 1");
    require(cfg.edmdc.sample_interval > 0.0, "edmdc.sample_interval", "must be > 0");
    require(cfg.edmdc.integration_substeps >= 1, "edmdc.substeps", "must be >= 1");

    const auto& sw = cfg.sweep;
    for (double e : sw.epsilons) require(e > 0.0, "sweep.epsilons", "entries must be > 0");
    require(!sw.mesh_sizes.empty(), "sweep.mesh_sizes", "must not be empty");
    for (double h : sw.mesh_sizes) require(h > 0.0, "sweep.mesh_sizes", "entries must be > 0");
    require(sw.m_rule.value > 0.0, "sweep.m_rule.value", "must be > 0");
    require(sw.seeds >= 1, "sweep.seeds", "must be >= 1");
    require(sw.sampled_trials >= 0, "sweep.sampled_trials", "must be >= 0");
    require(!cfg.output.directory.empty(), "output.directory", "must not be empty");
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void override_seed(RunConfig& cfg, std::uint64_t seed) {
    cfg.data.seed = seed;
    cfg.source["data"]["seed"] = seed;
}

}  // namespace koopcert
