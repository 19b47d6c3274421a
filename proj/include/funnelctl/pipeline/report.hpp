#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "funnelctl/core.hpp"
#include "funnelctl/pipeline/config.hpp"

namespace funnelctl::pipeline {

/// Machine-readable outcome of a pipeline run: certificates, synthesized
/// quantities, audits, suprema, timing.
struct RunReport {
    std::vector<Certificate> certificates;
    Index r = 0, ell = 0;
    Matrix gamma;
    Matrix k_row;
    std::vector<double> alphas;
    Vector governor_init;
    double governor_init_sylvester_gap = -1.0;  // cross-path agreement, when available
    double krylov_cond = 0.0;
    std::map<std::string, double> suprema;
    std::map<std::string, double> timing_ms;
    std::string error;            // set when the run aborted
    std::string failed_assumption;

    void add(Certificate c) { certificates.push_back(std::move(c)); }

    bool all_pass() const {
        for (const auto& c : certificates)
            if (!c.pass) return false;
        return error.empty();
    }

    Json to_json() const {
        Json j;
        Json certs = Json::array();
        for (const auto& c : certificates) {
            Json cj;
            cj["name"] = c.name;
            cj["pass"] = c.pass;
            cj["metrics"] = c.metrics;
            if (!c.detail.empty()) cj["detail"] = c.detail;
            certs.push_back(cj);
        }
        j["certificates"] = certs;
        j["synthesis"]["r"] = r;
        j["synthesis"]["ell"] = ell;
        if (gamma.size() > 0) j["synthesis"]["input_gain"] = detail::matrix_json(gamma);
        if (k_row.size() > 0) j["synthesis"]["K"] = detail::matrix_json(k_row);
        if (!alphas.empty()) j["synthesis"]["alpha"] = alphas;
        if (governor_init.size() > 0)
            j["synthesis"]["governor_init"] = detail::vector_json(governor_init);
        if (governor_init_sylvester_gap >= 0.0)
            j["synthesis"]["governor_init_cross_check_gap"] = governor_init_sylvester_gap;
        j["synthesis"]["krylov_cond"] = krylov_cond;
        j["suprema"] = suprema;
        j["timing_ms"] = timing_ms;
        if (!error.empty()) j["error"] = error;
        if (!failed_assumption.empty()) j["failed_assumption"] = failed_assumption;
        j["pass"] = all_pass();
        return j;
    }
};

}  // namespace funnelctl::pipeline
