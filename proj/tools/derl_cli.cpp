#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "derl/arb_deploy.hpp"
#include "derl/common.hpp"
#include "derl/experiment.hpp"
#include "derl/hard_instance.hpp"
#include "derl/io.hpp"
#include "derl/lemma_lab.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitBudget = 3;
constexpr int kExitInvariant = 4;

int cmd_run(const std::string& config_path) {
    auto config = derl::config_from_json(derl::load_json_file(config_path));
    auto report = derl::run_experiment(config);
    std::printf("rows: %zu  success_rate: %.3f  mean_K: %.3f\n", report.rows.size(),
                report.success_rate, report.mean_k);
    if (!report.aggregate.is_null())
        std::printf("aggregate: %s\n", report.aggregate.dump().c_str());
    if (!config.out_dir.empty())
        std::printf("artifacts: %s\n", config.out_dir.c_str());
    if (report.invariant_violation) std::fprintf(stderr, "invariant violation detected\n");
    if (report.budget_exhausted_any) std::fprintf(stderr, "deployment budget exhausted\n");
    return report.exit_code();
}

int cmd_fuzz(long trials, long structured, std::uint64_t seed, const std::string& out) {
    struct Named {
        const char* name;
        derl::FuzzReport rep;
    };
    derl::BatchedPotentialParams bp;
    Named reports[] = {
        {"trace_det_bridge", derl::fuzz_trace_det_bridge(trials, seed)},
        {"matrix_perturbation", derl::fuzz_matrix_perturbation(trials, seed)},
        {"elliptical_potential", derl::fuzz_elliptical_potential(trials, seed)},
        {"batched_potential", derl::fuzz_batched_potential(structured, seed, bp)},
    };
    derl::json j;
    bool clean = true;
    for (const auto& [name, rep] : reports) {
        std::printf("%-22s trials=%-8ld failures=%-4ld max_slack_ratio=%.6f\n", name, rep.trials,
                    rep.violations, rep.max_ratio);
        j[name] = derl::fuzz_report_to_json(rep);
        clean = clean && rep.clean();
    }
    if (!out.empty()) derl::write_json_file(out, j);
    return clean ? kExitOk : kExitInvariant;
}

int cmd_gen_hard(int d, int H, double epsilon, const std::string& out) {
    auto family = derl::enumerate_family(d, H, epsilon);
    derl::HardInstanceSpec canonical = family.size() > 1 ? family[1] : family[0];
    derl::json j;
    j["schema_version"] = 1;
    j["family"] = derl::family_to_json(family);
    j["instance"] = derl::instance_to_json(derl::build_hard_mdp(canonical));
    derl::write_json_file(out, j);
    std::printf("wrote %zu family members and one instance to %s\n", family.size(), out.c_str());
    return kExitOk;
}

int cmd_reachability(const std::string& instance_path, const std::string& method,
                     const std::string& out) {
    auto j = derl::load_json_file(instance_path);
    // Accept either a bare instance or a gen-hard bundle.
    auto m = derl::instance_from_json(j.contains("instance") ? j.at("instance") : j);
    auto how = method == "svd" ? derl::ReachMethod::SvdLowerBound : derl::ReachMethod::BruteForce;
    auto rep = derl::reachability_coefficient(m, how);
    derl::json rj;
    rj["method"] = rep.method == derl::ReachMethod::BruteForce ? "brute_force" : "svd_lower_bound";
    rj["nu"] = rep.nu;
    rj["nu_min"] = rep.nu_min;
    std::printf("%s\n", rj.dump(2).c_str());
    if (!out.empty()) derl::write_json_file(out, rj);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deployment-efficient RL simulation lab"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
    run->add_option("config", config_path, "Path to config JSON")->required();

    long trials = 100000, structured = 1000;
    std::uint64_t fuzz_seed = 20240915;
    std::string fuzz_out;
    auto* fuzz = app.add_subcommand("fuzz-lemmas", "Randomized checks of the matrix lemmas");
    fuzz->add_option("--trials", trials, "Trials per randomized fuzzer");
    fuzz->add_option("--structured", structured, "Trials for the batched-potential fuzzer");
    fuzz->add_option("--seed", fuzz_seed, "Base seed");
    fuzz->add_option("--out", fuzz_out, "Optional JSON report path");

    int gd = 4, gh = 4;
    double geps = 0.1;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-hard", "Generate a hard-instance family");
    gen->add_option("--d", gd, "Arms per layer")->required();
    gen->add_option("--H", gh, "Horizon template parameter")->required();
    gen->add_option("--epsilon", geps, "Reward bump size")->required();
    gen->add_option("--out", gen_out, "Output JSON path")->required();

    std::string reach_path, reach_method = "bf", reach_out;
    auto* reach = app.add_subcommand("reachability", "Layer-wise reachability coefficients");
    reach->add_option("instance", reach_path, "Instance JSON path")->required();
    reach->add_option("--method", reach_method, "bf | svd")->check(CLI::IsMember({"bf", "svd"}));
    reach->add_option("--out", reach_out, "Optional JSON report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(config_path);
        if (fuzz->parsed()) return cmd_fuzz(trials, structured, fuzz_seed, fuzz_out);
        if (gen->parsed()) return cmd_gen_hard(gd, gh, geps, gen_out);
        if (reach->parsed()) return cmd_reachability(reach_path, reach_method, reach_out);
    } catch (const derl::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const derl::numeric_error& e) {
        std::fprintf(stderr, "invariant violation: %s\n", e.what());
        return kExitInvariant;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInvariant;
    }
    return kExitConfig;
}
