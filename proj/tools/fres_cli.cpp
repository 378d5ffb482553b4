// Command-line front end. Subcommands: train, compare, oracle-check,
// placement, qpb-demo. A JSON config file supplies the experiment definition;
// individual flags override file values; the effective configuration is
// echoed into the output directory next to the artifacts it produced.
//
// Exit codes: 0 success / checks passed, 1 a check failed, 2 configuration or
// usage error, 3 an enumeration budget was exceeded.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fres/cli.hpp"
#include "fres/config.hpp"
#include "fres/errors.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    int ues = 0;
    int uavs = 0;
    int slots = 0;
    std::string uav_schedule;
    std::string refine_mode;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file (flags override it)");
    cmd->add_option("--seed", f.seed, "base seed for scenario, agent and run draws");
    cmd->add_option("--ues", f.ues, "number of ground users");
    cmd->add_option("--uavs", f.uavs, "initially deployed UAV count");
    cmd->add_option("--slots", f.slots, "episode length in timeslots");
    cmd->add_option("--uav-schedule", f.uav_schedule,
                    "fleet-size changes, e.g. 0:3,1000:4,1500:3");
    cmd->add_option("--refine-mode", f.refine_mode,
                    "refinement cadence: on-violation, always or every-k");
    cmd->add_option("--out", f.out_dir, "output directory (else $FRES_OUT_ROOT)");
}

// File first, then every flag the user actually passed.
fres::RunConfig resolve(const CLI::App* cmd, const CommonFlags& f) {
    fres::RunConfig cfg;
    if (!f.config_path.empty()) cfg = fres::load_config_file(f.config_path);
    if (cmd->count("--seed") > 0) {
        cfg.scenario_seed = f.seed;
        cfg.run_seed = f.seed;
        cfg.agent.seed = f.seed;
    }
    if (cmd->count("--ues") > 0) cfg.scenario.n_ues = f.ues;
    if (cmd->count("--uavs") > 0) cfg.scenario.initial_uavs = f.uavs;
    if (cmd->count("--slots") > 0) cfg.episode.total_timeslots = f.slots;
    if (cmd->count("--uav-schedule") > 0) {
        fres::parse_uav_schedule(f.uav_schedule); // reject malformed text here
        cfg.episode.uav_schedule = f.uav_schedule;
    }
    if (cmd->count("--refine-mode") > 0) {
        fres::parse_refinement_mode(f.refine_mode);
        cfg.episode.refinement_mode = f.refine_mode;
    }
    if (cmd->count("--out") > 0) cfg.out_dir = f.out_dir;
    return cfg;
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        out.push_back(text.substr(start, comma == std::string::npos ? std::string::npos
                                                                    : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"IRS- and UAV-assisted edge-computing scheduler: simulation, "
                 "training and comparison experiments"};
    app.require_subcommand(1);

    CommonFlags train_f, compare_f, oracle_f, place_f, qpb_f;
    std::string methods_csv = "fres,random,local,remote,ts";
    int n_seeds = 0;
    bool corrupt_gradient = false;

    auto* train = app.add_subcommand("train", "run one learning episode and checkpoint it");
    add_common(train, train_f);

    auto* compare =
        app.add_subcommand("compare", "matched-seed comparison of scheduling methods");
    add_common(compare, compare_f);
    compare->add_option("--methods", methods_csv,
                        "comma list from fres,random,local,remote,ts,lts,sa,asa");
    compare->add_option("--n-seeds", n_seeds, "number of matched seeds");

    auto* oracle = app.add_subcommand(
        "oracle-check", "verify beamforming, search and gradients against oracles");
    add_common(oracle, oracle_f);
    oracle
        ->add_flag("--corrupt-gradient", corrupt_gradient,
                   "negative control: perturb one analytic gradient")
        ->group(""); // test hook, hidden from help

    auto* place = app.add_subcommand("placement", "cluster users and report UAV positions");
    add_common(place, place_f);

    auto* qpb = app.add_subcommand("qpb-demo", "per-pair beamformed link gain report");
    add_common(qpb, qpb_f);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return fres::cmd_train(resolve(train, train_f), std::cout);
        if (compare->parsed()) {
            fres::RunConfig cfg = resolve(compare, compare_f);
            if (compare->count("--n-seeds") > 0) {
                if (n_seeds < 1) throw fres::ConfigError("compare: n_seeds must be at least 1");
                cfg.n_seeds = n_seeds;
            }
            return fres::cmd_compare(cfg, split_csv(methods_csv), std::cout);
        }
        if (oracle->parsed()) {
            fres::OracleCheckOptions opt;
            opt.corrupt_gradient = corrupt_gradient;
            if (oracle->count("--ues") > 0) opt.ues_override = oracle_f.ues;
            fres::RunConfig cfg = resolve(oracle, oracle_f);
            // the override sizes the oracle instances, not the scenario field
            cfg.scenario.n_ues = fres::RunConfig{}.scenario.n_ues;
            return fres::cmd_oracle_check(cfg, opt, std::cout);
        }
        if (place->parsed()) return fres::cmd_placement(resolve(place, place_f), std::cout);
        if (qpb->parsed()) return fres::cmd_qpb_demo(resolve(qpb, qpb_f), std::cout);
    } catch (const fres::BudgetError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const fres::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
