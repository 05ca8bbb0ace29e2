#include "derl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "derl/arb_deploy.hpp"
#include "derl/common.hpp"
#include "derl/det_deploy.hpp"
#include "derl/dp.hpp"
#include "derl/generators.hpp"
#include "derl/hard_instance.hpp"
#include "derl/lemma_lab.hpp"
#include "derl/lsvi.hpp"
#include "derl/parallel.hpp"

namespace derl {
namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

ExperimentKind kind_from_string(const std::string& s) {
    if (s == "det_derl") return ExperimentKind::DetDerl;
    if (s == "reward_free") return ExperimentKind::RewardFree;
    if (s == "arb_derl") return ExperimentKind::ArbDerl;
    if (s == "lower_bound_scaling") return ExperimentKind::LowerBoundScaling;
    if (s == "lemma_fuzz") return ExperimentKind::LemmaFuzz;
    throw config_error("unknown experiment kind: " + s);
}

InstanceSource source_from_json(const json& j) {
    InstanceSource src;
    std::string kind = j.value("kind", std::string("hard"));
    if (kind == "hard" || kind == "hard_family") {
        src.kind = kind == "hard" ? InstanceSource::Kind::Hard : InstanceSource::Kind::HardFamily;
        src.hard.d = j.value("d", 2);
        src.hard.H = j.value("H", 2);
        src.hard.epsilon = j.value("epsilon", 0.1);
        src.hard.h_sharp = j.value("h_sharp", 1);
        src.hard.i_sharp = j.value("i_sharp", src.hard.d >= 2 ? 2 : 1);
        src.hard.core = j.value("core", std::vector<int>(src.hard.H, 1));
        if (src.kind == InstanceSource::Kind::Hard) src.hard.validate();
    } else if (kind == "file") {
        src.kind = InstanceSource::Kind::File;
        if (!j.contains("path")) throw config_error("instance source 'file' needs a path");
        src.path = j.at("path").get<std::string>();
    } else if (kind == "random_small") {
        src.kind = InstanceSource::Kind::RandomSmall;
        src.d = j.value("d", 2);
        src.H = j.value("H", 2);
        src.states = j.value("states", 2);
        src.actions = j.value("actions", 2);
        src.gen_seed = j.value("gen_seed", std::uint64_t{0});
    } else {
        throw config_error("unknown instance source kind: " + kind);
    }
    return src;
}

/// One instance per report row; the family source cycles its members.
std::vector<LinearMdpInstance> materialize(const InstanceSource& src) {
    switch (src.kind) {
        case InstanceSource::Kind::Hard:
            return {build_hard_mdp(src.hard)};
        case InstanceSource::Kind::HardFamily: {
            std::vector<LinearMdpInstance> out;
            for (const auto& spec : enumerate_family(src.hard.d, src.hard.H, src.hard.epsilon))
                out.push_back(build_hard_mdp(spec));
            return out;
        }
        case InstanceSource::Kind::File:
            return {instance_from_json(load_json_file(src.path))};
        case InstanceSource::Kind::RandomSmall:
            return {make_anchor_random(src.d, src.H, src.states, src.actions, src.gen_seed)};
    }
    throw config_error("unreachable instance source");
}

void finish_aggregates(ExperimentReport& rep) {
    if (rep.rows.empty()) return;
    double ok = 0.0, ksum = 0.0;
    for (const auto& r : rep.rows) {
        ok += r.success ? 1.0 : 0.0;
        ksum += r.k_used;
        rep.budget_exhausted_any = rep.budget_exhausted_any || r.budget_exhausted;
    }
    rep.success_rate = ok / static_cast<double>(rep.rows.size());
    rep.mean_k = ksum / static_cast<double>(rep.rows.size());
}

json rows_to_json(const std::vector<SeedRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        out.push_back(json{{"seed", r.seed},
                           {"instance_index", r.instance_index},
                           {"K", r.k_used},
                           {"suboptimality", r.suboptimality},
                           {"success", r.success},
                           {"budget_exhausted", r.budget_exhausted},
                           {"seconds", r.seconds}});
    }
    return out;
}

void write_report(const ExperimentConfig& config, const ExperimentReport& rep) {
    if (config.out_dir.empty()) return;
    json j;
    j["schema_version"] = config.schema_version;
    j["rows"] = rows_to_json(rep.rows);
    j["success_rate"] = rep.success_rate;
    j["mean_K"] = rep.mean_k;
    j["budget_exhausted_any"] = rep.budget_exhausted_any;
    j["invariant_violation"] = rep.invariant_violation;
    j["aggregate"] = rep.aggregate;
    write_json_file(config.out_dir + "/report.json", j);
}

std::string artifact_name(const char* stem, int idx, std::uint64_t seed, const char* ext) {
    std::ostringstream out;
    out << stem << '_' << idx << "_seed" << seed << ext;
    return out.str();
}

double resolved_beta(const AlgorithmParams& p, const LinearMdpInstance& m) {
    return p.beta > 0.0 ? p.beta : theoretical_beta(m.d, m.H, p.epsilon, p.delta);
}

ExperimentReport run_det(const ExperimentConfig& config) {
    auto instances = materialize(config.source);
    const auto& p = config.params;
    ExperimentReport rep;
    rep.rows.resize(config.seeds.size());
    std::vector<std::string> csvs(config.seeds.size());

    parallel_for(
        static_cast<int>(config.seeds.size()),
        [&](int i) {
            const LinearMdpInstance& m = instances[i % instances.size()];
            SeedRow row;
            row.seed = config.seeds[i];
            row.instance_index = static_cast<int>(i % instances.size());
            double t0 = now_seconds();
            auto res = run_deterministic_derl(m, RewardSpec::native(), p.epsilon, p.delta, p.c_K,
                                              p.N, p.beta, row.seed, true, 1);
            row.seconds = now_seconds() - t0;
            row.k_used = res.log.deployments_used();
            row.budget_exhausted = res.log.terminal == DeploymentLog::Terminal::BudgetExhausted;
            double opt = optimal_value_exact(m, RewardSpec::native(), m.H).value;
            double got = evaluate_policy_exact(m, res.policy, RewardSpec::native(), m.H);
            row.suboptimality = opt - got;
            row.success = !row.budget_exhausted && row.suboptimality <= p.epsilon + 1e-9;
            csvs[i] = deployment_log_csv(res.log);
            rep.rows[i] = row;
        },
        config.workers);

    if (!config.out_dir.empty())
        for (std::size_t i = 0; i < csvs.size(); ++i)
            write_text_file(config.out_dir + "/" + artifact_name("deploy", static_cast<int>(i),
                                                                 config.seeds[i], ".csv"),
                            csvs[i]);
    finish_aggregates(rep);
    return rep;
}

ExperimentReport run_reward_free(const ExperimentConfig& config) {
    auto instances = materialize(config.source);
    const auto& p = config.params;
    ExperimentReport rep;
    rep.rows.resize(config.seeds.size());
    std::vector<std::string> csvs(config.seeds.size());

    parallel_for(
        static_cast<int>(config.seeds.size()),
        [&](int i) {
            const LinearMdpInstance& m = instances[i % instances.size()];
            SeedRow row;
            row.seed = config.seeds[i];
            row.instance_index = static_cast<int>(i % instances.size());
            double t0 = now_seconds();
            auto exp = run_reward_free_exploration(m, p.epsilon, p.delta, p.c_K, p.N, p.beta,
                                                   row.seed, false, 1);
            auto plan = plan_from_dataset(m, exp.data, RewardSpec::native(), m.H,
                                          resolved_beta(p, m));
            row.seconds = now_seconds() - t0;
            row.k_used = exp.log.deployments_used();
            row.budget_exhausted = exp.log.terminal == DeploymentLog::Terminal::BudgetExhausted;
            double opt = optimal_value_exact(m, RewardSpec::native(), m.H).value;
            double got = evaluate_policy_exact(m, plan.policy, RewardSpec::native(), m.H);
            row.suboptimality = opt - got;
            row.success = !row.budget_exhausted && row.suboptimality <= p.epsilon + 1e-9;
            csvs[i] = deployment_log_csv(exp.log);
            rep.rows[i] = row;
        },
        config.workers);

    if (!config.out_dir.empty())
        for (std::size_t i = 0; i < csvs.size(); ++i)
            write_text_file(config.out_dir + "/" + artifact_name("explore", static_cast<int>(i),
                                                                 config.seeds[i], ".csv"),
                            csvs[i]);
    finish_aggregates(rep);
    return rep;
}

ExperimentReport run_arb(const ExperimentConfig& config) {
    auto instances = materialize(config.source);
    const auto& p = config.params;
    ExperimentReport rep;
    rep.rows.resize(config.seeds.size());
    std::vector<json> snapshots(config.seeds.size());
    bool structural_ok = true;

    for (int i = 0; i < static_cast<int>(config.seeds.size()); ++i) {
        const LinearMdpInstance& m = instances[i % instances.size()];
        double nu = p.nu_min;
        if (nu <= 0.0) nu = reachability_coefficient(m).nu_min;
        SeedRow row;
        row.seed = config.seeds[i];
        row.instance_index = static_cast<int>(i % instances.size());
        double t0 = now_seconds();
        auto res = run_arbitrary_derl(m, p.i_max, p.eps0, p.beta_prime, nu, p.N, row.seed,
                                      config.workers);
        auto plan = plan_from_dataset(m, res.data, RewardSpec::native(), m.H, resolved_beta(p, m));
        row.seconds = now_seconds() - t0;
        row.k_used = res.deployments;
        double opt = optimal_value_exact(m, RewardSpec::native(), m.H).value;
        double got = evaluate_policy_exact(m, plan.policy, RewardSpec::native(), m.H);
        row.suboptimality = opt - got;
        row.success = res.deployments == m.H;
        structural_ok = structural_ok && row.success;
        snapshots[i] = cover_snapshot_to_json(res);
        rep.rows[i] = row;
    }

    if (!config.out_dir.empty())
        for (std::size_t i = 0; i < snapshots.size(); ++i)
            write_json_file(config.out_dir + "/" + artifact_name("cover", static_cast<int>(i),
                                                                 config.seeds[i], ".json"),
                            snapshots[i]);
    rep.invariant_violation = !structural_ok;
    finish_aggregates(rep);
    return rep;
}

ExperimentReport run_lemma_fuzz(const ExperimentConfig& config) {
    const auto& p = config.params;
    std::uint64_t seed = config.seeds.front();
    ExperimentReport rep;

    struct Named {
        const char* name;
        FuzzReport report;
    };
    std::vector<Named> reports;
    reports.push_back({"trace_det_bridge", fuzz_trace_det_bridge(p.fuzz_trials, seed)});
    reports.push_back({"matrix_perturbation", fuzz_matrix_perturbation(p.fuzz_trials, seed)});
    reports.push_back({"elliptical_potential", fuzz_elliptical_potential(p.fuzz_trials, seed)});
    BatchedPotentialParams bp;
    bp.c_K = p.c_K;
    reports.push_back({"batched_potential", fuzz_batched_potential(p.structured_trials, seed, bp)});

    json agg;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& [name, fr] = reports[i];
        agg[name] = fuzz_report_to_json(fr);
        SeedRow row;
        row.seed = seed;
        row.instance_index = static_cast<int>(i);
        row.k_used = static_cast<int>(std::min<long>(fr.trials, 1000000000L));
        row.suboptimality = static_cast<double>(fr.violations);
        row.success = fr.clean();
        rep.rows.push_back(row);
        rep.invariant_violation = rep.invariant_violation || !fr.clean();
    }
    rep.aggregate = std::move(agg);
    finish_aggregates(rep);
    return rep;
}

struct LineFit {
    bool ok = false;
    double slope = 0.0, intercept = 0.0, r_squared = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit f;
    if (x.size() != y.size() || x.size() < 2) return f;
    double distinct = *std::max_element(x.begin(), x.end()) - *std::min_element(x.begin(), x.end());
    if (distinct < 1e-12) return f;
    double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    f.ok = true;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy < 1e-12 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig config;
    config.schema_version = j.value("schema_version", 0);
    if (config.schema_version != 1)
        throw config_error("unsupported schema_version (expected 1)");
    if (!j.contains("experiment")) throw config_error("missing field: experiment");
    config.kind = kind_from_string(j.at("experiment").get<std::string>());
    if (j.contains("instance")) config.source = source_from_json(j.at("instance"));

    if (j.contains("params")) {
        const json& p = j.at("params");
        config.params.N = p.value("N", config.params.N);
        config.params.epsilon = p.value("epsilon", config.params.epsilon);
        config.params.delta = p.value("delta", config.params.delta);
        config.params.beta = p.value("beta", config.params.beta);
        config.params.beta_prime = p.value("beta_prime", config.params.beta_prime);
        config.params.c_K = p.value("c_K", config.params.c_K);
        config.params.i_max = p.value("i_max", config.params.i_max);
        config.params.eps0 = p.value("eps0", config.params.eps0);
        config.params.nu_min = p.value("nu_min", config.params.nu_min);
        config.params.fuzz_trials = p.value("fuzz_trials", config.params.fuzz_trials);
        config.params.structured_trials = p.value("structured_trials", config.params.structured_trials);
        if (config.params.N <= 0) throw config_error("params.N must be positive");
        if (config.params.epsilon <= 0) throw config_error("params.epsilon must be positive");
    }

    config.seeds = j.value("seeds", std::vector<std::uint64_t>{});
    if (config.seeds.empty()) throw config_error("seed list must be non-empty");
    config.d_grid = j.value("d_grid", std::vector<int>{});
    config.h_grid = j.value("H_grid", std::vector<int>{});
    config.out_dir = j.value("out_dir", std::string{});
    config.workers = j.value("workers", 0);
    return config;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    if (!config.out_dir.empty()) std::filesystem::create_directories(config.out_dir);

    ExperimentReport rep;
    switch (config.kind) {
        case ExperimentKind::DetDerl:
            rep = run_det(config);
            break;
        case ExperimentKind::RewardFree:
            rep = run_reward_free(config);
            break;
        case ExperimentKind::ArbDerl:
            rep = run_arb(config);
            break;
        case ExperimentKind::LemmaFuzz:
            rep = run_lemma_fuzz(config);
            break;
        case ExperimentKind::LowerBoundScaling: {
            if (config.d_grid.size() < 1 || config.h_grid.size() < 1)
                throw config_error("scaling experiment needs d_grid and H_grid");
            auto sr = lower_bound_scaling(config.d_grid, config.h_grid, config.params.epsilon,
                                          config.params.N, config.seeds, config.params,
                                          config.workers);
            rep.rows = sr.rows;
            json cells = json::array();
            std::ostringstream csv;
            csv << "d,H,dH,mean_K_det,K_arb,det_budget_exhausted\n";
            for (const auto& c : sr.cells) {
                cells.push_back(json{{"d", c.d},
                                     {"H", c.H},
                                     {"mean_K_det", c.mean_k_det},
                                     {"K_arb", c.k_arb},
                                     {"det_budget_exhausted", c.det_budget_exhausted}});
                csv << c.d << ',' << c.H << ',' << c.d * c.H << ','
                    << format_double(c.mean_k_det) << ',' << c.k_arb << ','
                    << c.det_budget_exhausted << '\n';
            }
            rep.aggregate = json{{"cells", std::move(cells)},
                                 {"has_fit", sr.has_fit},
                                 {"slope", sr.slope},
                                 {"intercept", sr.intercept},
                                 {"r_squared", sr.r_squared},
                                 {"arb_constant_in_d", sr.arb_constant_in_d}};
            if (!config.out_dir.empty())
                write_text_file(config.out_dir + "/scaling.csv", csv.str());
            finish_aggregates(rep);
            break;
        }
    }
    write_report(config, rep);
    return rep;
}

ScalingReport lower_bound_scaling(const std::vector<int>& d_grid, const std::vector<int>& h_grid,
                                  double epsilon, int N, const std::vector<std::uint64_t>& seeds,
                                  const AlgorithmParams& params, int workers) {
    if (d_grid.empty() || h_grid.empty()) throw config_error("scaling grids must be non-empty");
    if (seeds.empty()) throw config_error("seed list must be non-empty");

    struct Cell {
        int d, H;
    };
    std::vector<Cell> grid;
    for (int d : d_grid)
        for (int H : h_grid) grid.push_back({d, H});

    ScalingReport out;
    out.cells.resize(grid.size());
    std::vector<std::vector<SeedRow>> rows(grid.size());

    parallel_for(
        static_cast<int>(grid.size()),
        [&](int g) {
            auto [d, H] = grid[g];
            auto family = enumerate_family(d, H, epsilon);
            ScalingCell cell;
            cell.d = d;
            cell.H = H;
            double ksum = 0.0;
            for (std::size_t i = 0; i < seeds.size(); ++i) {
                auto m = build_hard_mdp(family[i % family.size()]);
                SeedRow row;
                row.seed = seeds[i];
                row.instance_index = g;
                double t0 = now_seconds();
                auto res = run_deterministic_derl(m, RewardSpec::native(), epsilon, params.delta,
                                                  params.c_K, N, params.beta, row.seed, false, 1);
                row.seconds = now_seconds() - t0;
                row.k_used = res.log.deployments_used();
                row.budget_exhausted =
                    res.log.terminal == DeploymentLog::Terminal::BudgetExhausted;
                row.success = !row.budget_exhausted;
                cell.det_budget_exhausted += row.budget_exhausted ? 1 : 0;
                ksum += row.k_used;
                rows[g].push_back(row);
            }
            cell.mean_k_det = ksum / static_cast<double>(seeds.size());

            auto control = build_hard_mdp(family.front());
            double nu = params.nu_min > 0.0 ? params.nu_min : 0.3;
            // The ridge value estimates feeding the coverage matrices shrink toward
            // zero when a cover iterate is evaluated on thin data; with many cover
            // rounds or a small batch the accumulated estimate can drift past the
            // -I/2 floor the optimistic solver requires. A short cover schedule and
            // a batch of a few thousand episodes keeps the drift a comfortable
            // factor away from that floor on every grid cell used here.
            int arb_iters = std::min(params.i_max, 4);
            int arb_n = std::max(N, 6000);
            auto arb = run_arbitrary_derl(control, arb_iters, params.eps0, params.beta_prime, nu,
                                          arb_n, seeds.front(), 1);
            cell.k_arb = arb.deployments;
            out.cells[g] = cell;
        },
        workers);

    for (auto& r : rows)
        for (auto& row : r) out.rows.push_back(row);

    std::vector<double> x, y;
    for (const auto& c : out.cells) {
        x.push_back(static_cast<double>(c.d) * c.H);
        y.push_back(c.mean_k_det);
    }
    LineFit fit = fit_line(x, y);
    out.has_fit = fit.ok;
    out.slope = fit.slope;
    out.intercept = fit.intercept;
    out.r_squared = fit.r_squared;

    out.arb_constant_in_d = true;
    for (int H : h_grid) {
        int expect = -1;
        for (const auto& c : out.cells) {
            if (c.H != H) continue;
            if (expect < 0) expect = c.k_arb;
            if (c.k_arb != expect) out.arb_constant_in_d = false;
        }
    }
    return out;
}

}  // namespace derl
