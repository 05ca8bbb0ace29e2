#include "derl/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "derl/common.hpp"

namespace derl {
namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd from_vector(const json& j) {
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (long i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw config_error("matrix field must be a non-empty array");
    long rows = static_cast<long>(j.size());
    long cols = static_cast<long>(j.at(0).size());
    Eigen::MatrixXd m(rows, cols);
    for (long i = 0; i < rows; ++i) {
        const json& row = j.at(i);
        if (static_cast<long>(row.size()) != cols) throw config_error("ragged matrix rows");
        for (long c = 0; c < cols; ++c) m(i, c) = row.at(c).get<double>();
    }
    return m;
}

const json& require(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw config_error(std::string("missing field: ") + key);
    return *it;
}

}  // namespace

std::string format_double(double x) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

json instance_to_json(const LinearMdpInstance& m) {
    json j;
    j["d"] = m.d;
    j["H"] = m.H;
    j["num_actions"] = m.num_actions;
    j["states_per_layer"] = m.states_per_layer;
    json phi = json::array();
    for (int h = 0; h < m.H; ++h) {
        json layer = json::array();
        for (int s = 0; s < m.states_per_layer[h]; ++s) {
            json per_state = json::array();
            for (const auto& feat : m.phi[h][s]) per_state.push_back(to_vector(feat));
            layer.push_back(std::move(per_state));
        }
        phi.push_back(std::move(layer));
    }
    j["phi"] = std::move(phi);
    json mu = json::array();
    for (const auto& layer : m.mu) mu.push_back(matrix_to_json(layer));
    j["mu"] = std::move(mu);
    json theta = json::array();
    for (const auto& th : m.theta) theta.push_back(to_vector(th));
    j["theta"] = std::move(theta);
    j["init"] = m.init;
    return j;
}

LinearMdpInstance instance_from_json(const json& j) {
    LinearMdpInstance m;
    m.d = require(j, "d").get<int>();
    m.H = require(j, "H").get<int>();
    m.num_actions = require(j, "num_actions").get<int>();
    m.states_per_layer = require(j, "states_per_layer").get<std::vector<int>>();
    const json& phi = require(j, "phi");
    if (static_cast<int>(phi.size()) != m.H) throw config_error("phi must have one entry per layer");
    m.phi.resize(m.H);
    for (int h = 0; h < m.H; ++h) {
        const json& layer = phi.at(h);
        m.phi[h].resize(layer.size());
        for (std::size_t s = 0; s < layer.size(); ++s) {
            const json& per_state = layer.at(s);
            for (const json& feat : per_state) m.phi[h][s].push_back(from_vector(feat));
        }
    }
    for (const json& layer : require(j, "mu")) m.mu.push_back(matrix_from_json(layer));
    for (const json& th : require(j, "theta")) m.theta.push_back(from_vector(th));
    m.init = require(j, "init").get<std::vector<double>>();
    m.finalize();
    return m;
}

json hard_spec_to_json(const HardInstanceSpec& spec) {
    return json{{"d", spec.d},           {"H", spec.H},       {"h_sharp", spec.h_sharp},
                {"i_sharp", spec.i_sharp}, {"core", spec.core}, {"epsilon", spec.epsilon}};
}

HardInstanceSpec hard_spec_from_json(const json& j) {
    HardInstanceSpec spec;
    spec.d = require(j, "d").get<int>();
    spec.H = require(j, "H").get<int>();
    spec.h_sharp = require(j, "h_sharp").get<int>();
    spec.i_sharp = require(j, "i_sharp").get<int>();
    spec.core = require(j, "core").get<std::vector<int>>();
    spec.epsilon = require(j, "epsilon").get<double>();
    spec.validate();
    return spec;
}

json family_to_json(const std::vector<HardInstanceSpec>& family) {
    json j = json::array();
    for (const auto& spec : family) j.push_back(hard_spec_to_json(spec));
    return j;
}

std::vector<HardInstanceSpec> family_from_json(const json& j) {
    if (!j.is_array()) throw config_error("family manifest must be an array");
    std::vector<HardInstanceSpec> out;
    for (const json& e : j) out.push_back(hard_spec_from_json(e));
    return out;
}

std::string deployment_log_csv(const DeploymentLog& log) {
    std::ostringstream out;
    out << "k,h_k,delta_k,frontier_advanced,J_pi_exact,J_opt_exact,suboptimality\n";
    for (const auto& r : log.records) {
        double subopt = r.j_opt_trunc - r.j_pi_trunc;
        out << r.k << ',' << r.h_k << ',' << format_double(r.delta_k) << ','
            << (r.frontier_advanced ? 1 : 0) << ',' << format_double(r.j_pi_trunc) << ','
            << format_double(r.j_opt_trunc) << ',' << format_double(subopt) << '\n';
    }
    return out.str();
}

json fuzz_report_to_json(const FuzzReport& rep) {
    return json{{"trials", rep.trials},
                {"failures", rep.violations},
                {"max_slack_ratio", rep.max_ratio}};
}

json cover_snapshot_to_json(const ArbDeployResult& result) {
    json layers = json::array();
    for (std::size_t h = 0; h < result.covers.size(); ++h) {
        const PolicyCover& cover = result.covers[h];
        json entry;
        entry["layer"] = h;
        entry["cover_size"] = cover.members.size();
        entry["iterations"] = cover.iterations;
        entry["broke"] = cover.broke;
        entry["singleton_fallback"] = cover.singleton_fallback;
        entry["opt_values"] = cover.opt_values;
        entry["sigma_tilde"] = matrix_to_json(cover.sigma_tilde);
        layers.push_back(std::move(entry));
    }
    return json{{"deployments", result.deployments}, {"layers", std::move(layers)}};
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw config_error("parse failure in " + path + ": " + e.what());
    }
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot write " + path);
    out << text;
    if (!out) throw config_error("write failed for " + path);
}

void write_json_file(const std::string& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace derl
