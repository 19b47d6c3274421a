#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "funnelctl/funnel/funnel_function.hpp"
#include "funnelctl/lti/system.hpp"
#include "funnelctl/pipeline/expr.hpp"
#include "funnelctl/refgen/reference.hpp"

namespace funnelctl::pipeline {

using Json = nlohmann::json;

namespace detail {

inline Matrix parse_matrix(const Json& j, const std::string& where) {
    if (!j.is_array() || j.empty() || !j.front().is_array())
        throw ConfigError(where + ": expected a matrix (array of rows)");
    const Index rows = static_cast<Index>(j.size());
    const Index cols = static_cast<Index>(j.front().size());
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const auto& row = j.at(static_cast<size_t>(r));
        if (static_cast<Index>(row.size()) != cols)
            throw ConfigError(where + ": ragged rows");
        for (Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<size_t>(c)).get<double>();
    }
    return m;
}

inline Vector parse_vector(const Json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected an array");
    Vector v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<size_t>(i)).get<double>();
    return v;
}

inline Json matrix_json(const Matrix& m) {
    Json rows = Json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

inline Json vector_json(const Vector& v) {
    Json a = Json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

}  // namespace detail

struct ReferenceConfig {
    std::string kind = "analytic";  // analytic | exosystem | sampled
    std::vector<std::string> expressions;
    std::optional<double> support_end;
    std::vector<double> breakpoints;
    Matrix a_e, c_e;
    Vector w0;
    std::vector<double> sample_times;
    std::vector<Vector> sample_values;
};

struct FunnelLevelConfig {
    double a = 0.0, b = 0.0, c = 1.0;
};

struct SimulationConfig {
    double horizon = 10.0;
    Index report_points = 2001;
    double rtol = 1e-8;
    double atol = 1e-7;
    double guard_margin = 1e-10;
    double restart_period = 0.0;  // 0: no restarts
};

struct BoundsConfig {
    bool enabled = true;
    std::optional<FunnelLevelConfig> target_funnel;
};

struct RunConfig {
    Matrix a, b, c;
    Vector x0;
    std::vector<std::string> disturbance_exprs;  // empty: no disturbance
    std::optional<double> disturbance_bound;
    ReferenceConfig reference;
    std::vector<FunnelLevelConfig> funnels;
    SimulationConfig simulation;
    BoundsConfig bounds;
    std::string out_dir = "out";

    static RunConfig from_json(const Json& j);
    Json to_json() const;
    static RunConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        Json j;
        try {
            j = Json::parse(in);
        } catch (const Json::parse_error& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
        return from_json(j);
    }

    lti::LtiSystem make_system() const {
        lti::DisturbanceModel d = lti::DisturbanceModel::zero(a.rows());
        if (!disturbance_exprs.empty()) {
            if (static_cast<Index>(disturbance_exprs.size()) != a.rows())
                throw ConfigError("system.disturbance: need one expression per state");
            auto sigs = std::make_shared<std::vector<Signal>>();
            for (const auto& e : disturbance_exprs) sigs->emplace_back(e);
            const Index n = a.rows();
            d.evaluator = [sigs, n](double t) {
                Vector v(n);
                for (Index i = 0; i < n; ++i) v(i) = (*sigs)[static_cast<size_t>(i)].eval(t);
                return v;
            };
            if (disturbance_bound) {
                d.sup_bound = *disturbance_bound;
            } else {
                double worst = 0.0;
                for (int i = 0; i <= 2000; ++i)
                    worst = std::max(worst, d.evaluator(simulation.horizon * i / 2000.0).norm());
                d.sup_bound = 1.1 * worst;
            }
        }
        return lti::LtiSystem(a, b, c, d, x0);
    }

    refgen::ReferenceSignal make_reference(Index max_order) const {
        const Index m = c.rows();
        if (reference.kind == "exosystem") {
            refgen::Exosystem exo{reference.a_e, reference.c_e, reference.w0};
            return refgen::ReferenceSignal::from_exosystem(std::move(exo), max_order);
        }
        if (reference.kind == "sampled") {
            return refgen::ReferenceSignal::from_samples(reference.sample_times,
                                                         reference.sample_values, max_order);
        }
        if (static_cast<Index>(reference.expressions.size()) != m)
            throw ConfigError("reference.expressions: need one expression per output");
        auto sigs = std::make_shared<std::vector<Signal>>();
        std::vector<double> bps = reference.breakpoints;
        for (const auto& e : reference.expressions) {
            sigs->emplace_back(e);
            for (double b0 : sigs->back().piece_boundaries()) bps.push_back(b0);
        }
        auto eval = [sigs, m](double t, Index order) {
            Vector v(m);
            for (Index i = 0; i < m; ++i) v(i) = (*sigs)[static_cast<size_t>(i)].eval(t, order);
            return v;
        };
        return refgen::ReferenceSignal::from_function(eval, m, max_order, reference.support_end,
                                                      bps);
    }

    funnel::FunnelSpec make_funnels() const {
        funnel::FunnelSpec spec;
        for (const auto& f : funnels)
            spec.levels.push_back(funnel::FunnelFunction::exponential(f.a, f.b, f.c));
        return spec;
    }
};

inline RunConfig RunConfig::from_json(const Json& j) {
    RunConfig cfg;
    try {
        const auto& sys = j.at("system");
        cfg.a = detail::parse_matrix(sys.at("A"), "system.A");
        cfg.b = detail::parse_matrix(sys.at("B"), "system.B");
        cfg.c = detail::parse_matrix(sys.at("C"), "system.C");
        cfg.x0 = sys.contains("x0") ? detail::parse_vector(sys.at("x0"), "system.x0")
                                    : Vector(Vector::Zero(cfg.a.rows()));
        if (sys.contains("disturbance"))
            for (const auto& e : sys.at("disturbance"))
                cfg.disturbance_exprs.push_back(e.get<std::string>());
        if (sys.contains("disturbance_bound"))
            cfg.disturbance_bound = sys.at("disturbance_bound").get<double>();

        const auto& ref = j.at("reference");
        cfg.reference.kind = ref.value("kind", "analytic");
        if (cfg.reference.kind == "analytic") {
            for (const auto& e : ref.at("expressions"))
                cfg.reference.expressions.push_back(e.get<std::string>());
            if (ref.contains("support_end"))
                cfg.reference.support_end = ref.at("support_end").get<double>();
            if (ref.contains("breakpoints"))
                for (const auto& b0 : ref.at("breakpoints"))
                    cfg.reference.breakpoints.push_back(b0.get<double>());
        } else if (cfg.reference.kind == "exosystem") {
            cfg.reference.a_e = detail::parse_matrix(ref.at("A_e"), "reference.A_e");
            cfg.reference.c_e = detail::parse_matrix(ref.at("C_e"), "reference.C_e");
            cfg.reference.w0 = detail::parse_vector(ref.at("w0"), "reference.w0");
        } else if (cfg.reference.kind == "sampled") {
            for (const auto& t : ref.at("times")) cfg.reference.sample_times.push_back(t.get<double>());
            for (const auto& v : ref.at("values"))
                cfg.reference.sample_values.push_back(detail::parse_vector(v, "reference.values"));
        } else {
            throw ConfigError("reference.kind must be analytic | exosystem | sampled");
        }

        for (const auto& f : j.at("funnels")) {
            FunnelLevelConfig lvl;
            if (f.contains("constant")) {
                lvl.c = f.at("constant").get<double>();
            } else {
                lvl.a = f.value("a", 0.0);
                lvl.b = f.value("b", 0.0);
                lvl.c = f.at("c").get<double>();
            }
            cfg.funnels.push_back(lvl);
        }

        if (j.contains("simulation")) {
            const auto& s = j.at("simulation");
            cfg.simulation.horizon = s.value("horizon", 10.0);
            cfg.simulation.report_points = s.value("report_points", Index{2001});
            cfg.simulation.rtol = s.value("rtol", 1e-8);
            cfg.simulation.atol = s.value("atol", 1e-7);
            cfg.simulation.guard_margin = s.value("guard_margin", 1e-10);
            cfg.simulation.restart_period = s.value("restart_period", 0.0);
        }
        if (j.contains("bounds")) {
            const auto& b0 = j.at("bounds");
            cfg.bounds.enabled = b0.value("enabled", true);
            if (b0.contains("target_funnel")) {
                FunnelLevelConfig lvl;
                const auto& tf = b0.at("target_funnel");
                lvl.a = tf.value("a", 0.0);
                lvl.b = tf.value("b", 0.0);
                lvl.c = tf.at("c").get<double>();
                cfg.bounds.target_funnel = lvl;
            }
        }
        if (j.contains("output")) cfg.out_dir = j.at("output").value("dir", "out");
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config schema error: ") + e.what());
    }
    if (cfg.simulation.report_points < 2) throw ConfigError("simulation.report_points must be >= 2");
    if (cfg.simulation.horizon <= 0.0) throw ConfigError("simulation.horizon must be positive");
    if (cfg.funnels.empty()) throw ConfigError("funnels: at least one level required");
    return cfg;
}

inline Json RunConfig::to_json() const {
    Json j;
    j["system"]["A"] = detail::matrix_json(a);
    j["system"]["B"] = detail::matrix_json(b);
    j["system"]["C"] = detail::matrix_json(c);
    j["system"]["x0"] = detail::vector_json(x0);
    if (!disturbance_exprs.empty()) j["system"]["disturbance"] = disturbance_exprs;
    if (disturbance_bound) j["system"]["disturbance_bound"] = *disturbance_bound;

    j["reference"]["kind"] = reference.kind;
    if (reference.kind == "analytic") {
        j["reference"]["expressions"] = reference.expressions;
        if (reference.support_end) j["reference"]["support_end"] = *reference.support_end;
        if (!reference.breakpoints.empty()) j["reference"]["breakpoints"] = reference.breakpoints;
    } else if (reference.kind == "exosystem") {
        j["reference"]["A_e"] = detail::matrix_json(reference.a_e);
        j["reference"]["C_e"] = detail::matrix_json(reference.c_e);
        j["reference"]["w0"] = detail::vector_json(reference.w0);
    } else {
        j["reference"]["times"] = reference.sample_times;
        Json vals = Json::array();
        for (const auto& v : reference.sample_values) vals.push_back(detail::vector_json(v));
        j["reference"]["values"] = vals;
    }

    Json fl = Json::array();
    for (const auto& f : funnels) fl.push_back(Json{{"a", f.a}, {"b", f.b}, {"c", f.c}});
    j["funnels"] = fl;

    j["simulation"] = Json{{"horizon", simulation.horizon},
                           {"report_points", simulation.report_points},
                           {"rtol", simulation.rtol},
                           {"atol", simulation.atol},
                           {"guard_margin", simulation.guard_margin},
                           {"restart_period", simulation.restart_period}};
    j["bounds"]["enabled"] = bounds.enabled;
    if (bounds.target_funnel)
        j["bounds"]["target_funnel"] = Json{{"a", bounds.target_funnel->a},
                                            {"b", bounds.target_funnel->b},
                                            {"c", bounds.target_funnel->c}};
    j["output"]["dir"] = out_dir;
    return j;
}

}  // namespace funnelctl::pipeline
