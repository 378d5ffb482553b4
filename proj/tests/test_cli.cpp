#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "fres/cli.hpp"
#include "fres/config.hpp"
#include "fres/errors.hpp"

using namespace fres;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per section; removed on destruction.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("fres_cli_test_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Small, fast experiment definition shared by the command tests.
RunConfig small_config(const fs::path& out) {
    RunConfig cfg;
    cfg.scenario.n_ues = 6;
    cfg.scenario.initial_uavs = 2;
    cfg.episode.total_timeslots = 30;
    cfg.scenario_seed = 5;
    cfg.run_seed = 5;
    cfg.agent.seed = 5;
    cfg.out_dir = out.string();
    return cfg;
}

} // namespace

TEST_CASE("output directory resolution order") {
    RunConfig cfg;
    cfg.out_dir = "/explicit/dir";
    CHECK(resolve_out_dir(cfg) == "/explicit/dir");

    cfg.out_dir.clear();
    setenv("FRES_OUT_ROOT", "/from/env", 1);
    CHECK(resolve_out_dir(cfg) == "/from/env");
    unsetenv("FRES_OUT_ROOT");
    CHECK(resolve_out_dir(cfg) == "fres-out");
}

TEST_CASE("training run writes records, checkpoint and effective config") {
    TempDir tmp("train");
    const RunConfig cfg = small_config(tmp.path);
    std::ostringstream log;
    REQUIRE(cmd_train(cfg, log) == 0);

    const std::string hash = config_hash(cfg);
    const fs::path records = tmp.path / ("records_fres_seed5_" + hash + ".csv");
    const fs::path checkpoint = tmp.path / ("checkpoint_fres_seed5_" + hash + ".json");
    const fs::path effective = tmp.path / ("config_effective_" + hash + ".json");
    REQUIRE(fs::exists(records));
    REQUIRE(fs::exists(checkpoint));
    REQUIRE(fs::exists(effective));

    SECTION("the records file carries the documented header and one row per slot") {
        const std::string csv = slurp(records);
        CHECK(csv.rfind(kSlotCsvHeader, 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 31); // header + 30 slots
    }
    SECTION("the echoed config loads back to the run's exact configuration") {
        CHECK(load_config(slurp(effective)) == cfg);
    }
    SECTION("the checkpoint restores a working agent") {
        auto agent = MultiTaskAgent::load(slurp(checkpoint));
        CHECK(agent.current_m() == 2);
    }
    SECTION("a rerun reproduces the records byte for byte") {
        TempDir tmp2("train_rerun");
        RunConfig cfg2 = cfg;
        cfg2.out_dir = tmp2.path.string();
        std::ostringstream log2;
        REQUIRE(cmd_train(cfg2, log2) == 0);
        const std::string h2 = config_hash(cfg2);
        CHECK(slurp(records) ==
              slurp(tmp2.path / ("records_fres_seed5_" + h2 + ".csv")));
    }
}

TEST_CASE("comparison command contracts") {
    TempDir tmp("compare");
    RunConfig cfg = small_config(tmp.path);

    SECTION("fewer than two methods is refused") {
        std::ostringstream log;
        CHECK_THROWS_AS(cmd_compare(cfg, {"fres"}, log), ConfigError);
    }
    SECTION("unknown method names are refused by name") {
        std::ostringstream log;
        try {
            cmd_compare(cfg, {"fres", "bogus"}, log);
            FAIL("expected a config error");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("bogus") != std::string::npos);
        }
    }
    SECTION("duplicated methods are refused") {
        std::ostringstream log;
        CHECK_THROWS_AS(cmd_compare(cfg, {"local", "local"}, log), ConfigError);
    }
    SECTION("a single seed reports exactly zero spread") {
        std::ostringstream log;
        REQUIRE(cmd_compare(cfg, {"local", "remote"}, log) == 0);
        const std::string rows =
            slurp(tmp.path / ("summary_compare_" + config_hash(cfg) + ".csv"));
        CHECK(rows.rfind("method,mean_j,std_j\n", 0) == 0);
        CHECK(rows.find("local,") != std::string::npos);
        CHECK(rows.find(",0\n") != std::string::npos);
    }
    SECTION("search methods emit per-iteration traces, policies emit curves") {
        cfg.n_seeds = 2;
        cfg.baseline_search.max_iter = 15;
        std::ostringstream log;
        REQUIRE(cmd_compare(cfg, {"lts", "ts", "sa", "asa"}, log) == 0);
        const std::string hash = config_hash(cfg);
        for (const char* m : {"lts", "ts", "sa", "asa"}) {
            const std::string trace =
                slurp(tmp.path / ("trace_" + std::string(m) + "_" + hash + ".csv"));
            CHECK(trace.rfind("iteration,mean_best_j\n", 0) == 0);
            CHECK(std::count(trace.begin(), trace.end(), '\n') >= 3);
        }
        // lts/ts double as per-slot policies and also get curves
        CHECK(fs::exists(tmp.path / ("curve_lts_" + hash + ".csv")));
        CHECK(fs::exists(tmp.path / ("curve_ts_" + hash + ".csv")));
        CHECK(!fs::exists(tmp.path / ("curve_sa_" + hash + ".csv")));
    }
}

TEST_CASE("oracle check command") {
    TempDir tmp("oracle");
    RunConfig cfg;
    cfg.out_dir = tmp.path.string();

    SECTION("the default desk-scale protocol passes every check") {
        std::ostringstream log;
        REQUIRE(cmd_oracle_check(cfg, {}, log) == 0);
        CHECK(log.str().find("overall: PASS") != std::string::npos);
        const std::string report =
            slurp(tmp.path / ("oracle_check_" + config_hash(cfg) + ".json"));
        CHECK(report.find("\"overall\": \"pass\"") != std::string::npos);
    }
    SECTION("a corrupted gradient is caught (negative control)") {
        OracleCheckOptions opt;
        opt.corrupt_gradient = true;
        std::ostringstream log;
        CHECK(cmd_oracle_check(cfg, opt, log) == 1);
        CHECK(log.str().find("gradient: FAIL") != std::string::npos);
    }
    SECTION("an oversized instance trips the enumeration budget") {
        OracleCheckOptions opt;
        opt.ues_override = 6;
        std::ostringstream log;
        CHECK_THROWS_AS(cmd_oracle_check(cfg, opt, log), BudgetError);
    }
}

TEST_CASE("placement and link-report commands write their artifacts") {
    TempDir tmp("artifacts");
    RunConfig cfg;
    cfg.scenario.n_ues = 5;
    cfg.scenario.initial_uavs = 2;
    cfg.scenario_seed = 3;
    cfg.out_dir = tmp.path.string();
    const std::string hash = config_hash(cfg);

    std::ostringstream log;
    REQUIRE(cmd_placement(cfg, log) == 0);
    const std::string placement = slurp(tmp.path / ("placement_" + hash + ".csv"));
    CHECK(placement.rfind("uav,x_m,y_m,z_m\n", 0) == 0);
    CHECK(std::count(placement.begin(), placement.end(), '\n') == 3); // header + 2 UAVs

    REQUIRE(cmd_qpb_demo(cfg, log) == 0);
    const std::string links = slurp(tmp.path / ("qpb_demo_" + hash + ".csv"));
    CHECK(links.rfind("ue,uav,irs,gain_db,ideal_gain_db,quantization_loss_db,rate_bps\n", 0) ==
          0);
    CHECK(std::count(links.begin(), links.end(), '\n') == 11); // header + 5*2 pairs

    SECTION("quantization losses are non-negative and below the half-step bound") {
        // with 8 levels the aligned-sum loss cannot exceed -20log10(cos(pi/8))
        std::istringstream in(links);
        std::string line;
        std::getline(in, line);
        const double bound_db = -20.0 * std::log10(std::cos(std::numbers::pi / 8.0));
        while (std::getline(in, line)) {
            const auto last_comma = line.rfind(',');
            const auto prev_comma = line.rfind(',', last_comma - 1);
            const double loss =
                std::stod(line.substr(prev_comma + 1, last_comma - prev_comma - 1));
            CHECK(loss >= 0.0);
            CHECK(loss <= bound_db + 1e-9);
        }
    }
}
