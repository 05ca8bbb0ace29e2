#pragma once

#include <string>

#include "json.hpp"

#include "derl/arb_deploy.hpp"
#include "derl/det_deploy.hpp"
#include "derl/hard_instance.hpp"
#include "derl/lemma_lab.hpp"
#include "derl/mdp.hpp"

namespace derl {

using json = nlohmann::json;

/// Shortest round-trippable decimal rendering (printf %.17g), shared by all
/// text artifacts so identical runs produce identical bytes.
std::string format_double(double x);

json instance_to_json(const LinearMdpInstance& m);
LinearMdpInstance instance_from_json(const json& j);

json hard_spec_to_json(const HardInstanceSpec& spec);
HardInstanceSpec hard_spec_from_json(const json& j);
json family_to_json(const std::vector<HardInstanceSpec>& family);
std::vector<HardInstanceSpec> family_from_json(const json& j);

/// Columns: k, h_k, delta_k, frontier_advanced, J_pi_exact, J_opt_exact,
/// suboptimality. Order is part of the format contract.
std::string deployment_log_csv(const DeploymentLog& log);

json fuzz_report_to_json(const FuzzReport& rep);

/// Per-layer cover sizes, iteration counts, coverage values and Sigma-tilde
/// matrices from an arbitrary-policy run, for post-hoc inspection.
json cover_snapshot_to_json(const ArbDeployResult& result);

json load_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
void write_json_file(const std::string& path, const json& j);

}  // namespace derl
