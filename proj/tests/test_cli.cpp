#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <map>

#include "swarmlab/cli.hpp"

using namespace swarmlab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "swarmlab_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file())
            out[fs::relative(entry.path(), dir).string()] = read_file(entry.path());
    return out;
}

void write_config(const fs::path& path, const std::string& body) { write_file(path, body); }

}  // namespace

TEST_CASE("config: defaults, validation, round trip") {
    const fs::path dir = fresh_dir("config");
    write_config(dir / "c.json", "{\"n_agents\": 12, \"dt\": 0.01}\n");
    const RunConfig cfg = load_config(dir / "c.json");
    CHECK(cfg.n_agents == 12);
    CHECK(cfg.dt == 0.01);
    CHECK(cfg.comm_radius == 1.0);  // default preserved
    CHECK(cfg.accel_clamp == 10.0);

    // loading the echoed config and echoing again is byte-identical
    const std::string echo1 = effective_config_text(cfg);
    write_config(dir / "echo.json", echo1);
    const RunConfig cfg2 = load_config(dir / "echo.json");
    CHECK(effective_config_text(cfg2) == echo1);

    write_config(dir / "bad.json", "{\"n_agents\": 1}\n");
    CHECK_THROWS_AS(load_config(dir / "bad.json"), config_error);
    write_config(dir / "bad2.json", "{\"min_dist\": 2.0}\n");
    CHECK_THROWS_AS(load_config(dir / "bad2.json"), config_error);
    CHECK_THROWS_AS(load_config(dir / "missing.json"), config_error);
}

TEST_CASE("gen-dataset: deterministic byte-identical outputs") {
    const fs::path dir = fresh_dir("gen");
    write_config(dir / "c.json", "{\"n_agents\": 8, \"seeds\": 3}\n");

    cli::CommonArgs a;
    a.config_path = (dir / "c.json").string();
    a.seed = 42;
    a.out = (dir / "a").string();
    REQUIRE(cli::cmd_gen_dataset(a) == 0);
    a.out = (dir / "b").string();
    a.jobs = 3;  // fan-out must not change bytes
    REQUIRE(cli::cmd_gen_dataset(a) == 0);
    CHECK(dir_contents(dir / "a") == dir_contents(dir / "b"));

    // a different seed changes the conditions
    a.out = (dir / "c").string();
    a.seed = 43;
    REQUIRE(cli::cmd_gen_dataset(a) == 0);
    CHECK(dir_contents(dir / "a") != dir_contents(dir / "c"));
}

TEST_CASE("eval-flocking: determinism and derived-only plots") {
    const fs::path dir = fresh_dir("evalf");
    write_config(dir / "c.json",
                 "{\"n_agents\": 8, \"seeds\": 3, \"dt\": 0.01, \"steps\": 30}\n");
    cli::CommonArgs a;
    a.config_path = (dir / "c.json").string();
    a.seed = 5;
    a.out = (dir / "a").string();
    REQUIRE(cli::cmd_eval_flocking(a) == 0);
    a.out = (dir / "b").string();
    a.jobs = 4;
    REQUIRE(cli::cmd_eval_flocking(a) == 0);
    CHECK(dir_contents(dir / "a") == dir_contents(dir / "b"));
    CHECK(fs::exists(dir / "a" / "vel_var.svg"));
    CHECK(fs::exists(dir / "a" / "summary.csv"));

    // SVG emission derives from the runs; re-emitting does not alter metrics
    const std::string metrics_before = read_file(dir / "a" / "summary.csv");
    write_svg_chart(dir / "a" / "extra.svg", "t", "x", "y", {});
    CHECK(read_file(dir / "a" / "summary.csv") == metrics_before);
}

TEST_CASE("eval-leader and eval-obstacle: deterministic outputs") {
    const fs::path dir = fresh_dir("evallo");
    write_config(dir / "c.json",
                 "{\"n_agents\": 8, \"seeds\": 2, \"dt\": 0.01, \"steps\": 25, "
                 "\"obstacle\": {\"sides\": [6], \"step_cap\": 400}, \"write_traces\": false}\n");
    cli::CommonArgs a;
    a.config_path = (dir / "c.json").string();
    a.seed = 9;

    a.out = (dir / "l1").string();
    REQUIRE(cli::cmd_eval_leader(a) == 0);
    a.out = (dir / "l2").string();
    a.jobs = 2;
    REQUIRE(cli::cmd_eval_leader(a) == 0);
    CHECK(dir_contents(dir / "l1") == dir_contents(dir / "l2"));
    const std::string summary = read_file(dir / "l1" / "summary.csv");
    CHECK(summary.find("mlvd_med") != std::string::npos);

    a.jobs = 1;
    a.out = (dir / "o1").string();
    REQUIRE(cli::cmd_eval_obstacle(a) == 0);
    a.out = (dir / "o2").string();
    a.jobs = 4;
    REQUIRE(cli::cmd_eval_obstacle(a) == 0);
    CHECK(dir_contents(dir / "o1") == dir_contents(dir / "o2"));
    const std::string results = read_file(dir / "o1" / "results.csv");
    CHECK(results.rfind("seed,outcome,steps,perimeter,technique", 0) == 0);
}

TEST_CASE("train: determinism and resume reproduces the tail") {
    const fs::path dir = fresh_dir("train");
    const std::string base =
        "{\"controller\": \"etdagnn\", \"n_agents\": 6, "
        "\"train\": {\"epochs\": %d, \"steps\": 10, \"batches_per_epoch\": 4, "
        "\"batch_size\": 3, \"init_bank\": 2, \"val_bank\": 1, \"validate_every\": 2%s}}\n";
    char buf[512];
    std::snprintf(buf, sizeof(buf), base.c_str(), 4, "");
    write_config(dir / "full.json", buf);

    cli::CommonArgs a;
    a.config_path = (dir / "full.json").string();
    a.seed = 77;
    a.out = (dir / "full_a").string();
    REQUIRE(cli::cmd_train(a) == 0);
    a.out = (dir / "full_b").string();
    REQUIRE(cli::cmd_train(a) == 0);
    CHECK(dir_contents(dir / "full_a") == dir_contents(dir / "full_b"));

    // first half, then resume to the same total
    std::snprintf(buf, sizeof(buf), base.c_str(), 2, "");
    write_config(dir / "half.json", buf);
    a.config_path = (dir / "half.json").string();
    a.out = (dir / "half").string();
    REQUIRE(cli::cmd_train(a) == 0);

    const std::string resume_field =
        ", \"resume\": \"" + (dir / "half" / "train_state.txt").string() + "\"";
    std::snprintf(buf, sizeof(buf), base.c_str(), 4, resume_field.c_str());
    write_config(dir / "resume.json", buf);
    a.config_path = (dir / "resume.json").string();
    a.out = (dir / "resumed").string();
    REQUIRE(cli::cmd_train(a) == 0);

    CHECK(read_file(dir / "resumed" / "checkpoint.txt") ==
          read_file(dir / "full_a" / "checkpoint.txt"));

    // the resumed log holds exactly the tail rows of the full log
    const std::string full_log = read_file(dir / "full_a" / "train_log.csv");
    const std::string resumed_log = read_file(dir / "resumed" / "train_log.csv");
    std::istringstream fl(full_log), rl(resumed_log);
    std::vector<std::string> full_lines, resumed_lines;
    std::string line;
    while (std::getline(fl, line)) full_lines.push_back(line);
    while (std::getline(rl, line)) resumed_lines.push_back(line);
    REQUIRE(full_lines.size() == 5);    // header + 4 epochs
    REQUIRE(resumed_lines.size() == 3);  // header + epochs 2..3
    CHECK(resumed_lines[1] == full_lines[3]);
    CHECK(resumed_lines[2] == full_lines[4]);
}

TEST_CASE("ffbc + bound commands") {
    const fs::path dir = fresh_dir("ffbc");
    write_config(dir / "c.json",
                 "{\"n_agents\": 6, \"ffbc\": {\"sims\": 1, \"steps\": 6, \"epochs\": 2}}\n");
    cli::CommonArgs a;
    a.config_path = (dir / "c.json").string();
    a.seed = 13;
    a.out = (dir / "a").string();
    REQUIRE(cli::cmd_ffbc(a) == 0);
    a.out = (dir / "b").string();
    REQUIRE(cli::cmd_ffbc(a) == 0);
    CHECK(dir_contents(dir / "a") == dir_contents(dir / "b"));

    for (const char* tag : {"tdagnn", "tdagnn-tf", "tdagnn-tf-mu", "etdagnn"}) {
        CHECK(fs::exists(dir / "a" / (std::string("bound_report_") + tag + ".csv")));
        CHECK(fs::exists(dir / "a" / (std::string("checkpoint_") + tag + ".txt")));
    }
    const std::string report = read_file(dir / "a" / "bound_report_etdagnn.csv");
    CHECK(report.rfind("epoch,term1,term2,term3,total,empirical_gap,B,alpha,W,sum_log_frob", 0) ==
          0);

    // bound command on the emitted artifacts
    nlohmann::json bc;
    bc["n_agents"] = 6;
    bc["bound"] = {{"checkpoint", (dir / "a" / "checkpoint_etdagnn.txt").string()},
                   {"train_dataset", (dir / "a" / "ffbc_mean_train.swarmdata").string()},
                   {"test_dataset", (dir / "a" / "ffbc_mean_test.swarmdata").string()}};
    write_config(dir / "bound.json", bc.dump() + "\n");
    a.config_path = (dir / "bound.json").string();
    a.out = (dir / "bound_out").string();
    REQUIRE(cli::cmd_bound(a) == 0);
    CHECK(fs::exists(dir / "bound_out" / "bound_report.csv"));
}

TEST_CASE("cli run: exit codes") {
    const fs::path dir = fresh_dir("exit");
    // config error -> 2
    write_config(dir / "bad.json", "{\"scenario\": \"nope\"}\n");
    std::string cfg_arg = (dir / "bad.json").string();
    std::string out_arg = (dir / "out").string();
    const char* argv_bad[] = {"swarmlab", "eval-flocking", "--config", cfg_arg.c_str(),
                              "--out", out_arg.c_str()};
    CHECK(cli::run(6, const_cast<char**>(argv_bad)) == 2);

    // unknown subcommand -> 2
    const char* argv_unknown[] = {"swarmlab", "frobnicate"};
    CHECK(cli::run(2, const_cast<char**>(argv_unknown)) == 2);

    // net controller without checkpoint -> 2
    write_config(dir / "net.json", "{\"controller\": \"etdagnn\", \"seeds\": 1, \"steps\": 2}\n");
    cfg_arg = (dir / "net.json").string();
    const char* argv_net[] = {"swarmlab", "eval-flocking", "--config", cfg_arg.c_str(),
                              "--out", out_arg.c_str()};
    CHECK(cli::run(6, const_cast<char**>(argv_net)) == 2);

    // generation failure -> 3 (deg_min can never exceed n - 1)
    write_config(dir / "dense.json",
                 "{\"n_agents\": 2, \"seeds\": 1, \"deg_min\": 3, \"steps\": 1}\n");
    cfg_arg = (dir / "dense.json").string();
    const char* argv_dense[] = {"swarmlab", "gen-dataset", "--config", cfg_arg.c_str(),
                                "--out", out_arg.c_str()};
    CHECK(cli::run(6, const_cast<char**>(argv_dense)) == 3);
}
