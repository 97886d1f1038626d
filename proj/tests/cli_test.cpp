#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include <json.hpp>

#include "amrmc/cli.hpp"
#include "amrmc/io.hpp"

using namespace amrmc;

namespace {

std::string temp_file(const std::string& name, const std::string& contents) {
    const std::string path = "/tmp/amrmc_test_" + name;
    std::ofstream out(path);
    out << contents;
    return path;
}

struct CliResult {
    int exit_code = -1;
    std::string out;
};

CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(AMRMC_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult r;
    char buf[4096];
    std::size_t got;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    const int status = pclose(pipe);
    r.exit_code = WEXITSTATUS(status);
    return r;
}

}  // namespace

TEST_CASE("parse_config: minimal sweep document gets defaults applied and echoed") {
    const RunConfig cfg = parse_config(
        R"({"subcommand":"sweep","base_seed":1,"setting":"normal",
            "K_values":[1,2],"N_values":[500,1000]})");
    CHECK(cfg.sweep.batches == 5000);
    CHECK(cfg.sweep.scaled_threshold == 7);
    CHECK(cfg.sweep.n_ref == 500000);
    CHECK(cfg.sweep.t1 == 1.0);
    CHECK(cfg.sweep.t2 == 2.0);
    const auto echoed = nlohmann::json::parse(cfg.effective);
    CHECK(echoed["batches"] == 5000);
    CHECK(echoed["scaled_threshold"] == 7);
    CHECK(echoed["N_ref"] == 500000);
}

TEST_CASE("parse_config: unknown keys are rejected by name") {
    try {
        parse_config(R"({"subcommand":"sweep","base_seed":1,"K_values":[1],
                         "N_values":[500],"rho_":2.0})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        bool found = false;
        for (const auto& f : e.failures())
            if (f.find("unknown key: rho_") != std::string::npos) found = true;
        CHECK(found);
    }
}

TEST_CASE("parse_config: missing base_seed is an error, and all failures are listed") {
    try {
        parse_config(R"({"subcommand":"sweep","K_values":[1],"N_values":[500],"bogus":1})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        bool seed = false, unknown = false;
        for (const auto& f : e.failures()) {
            if (f.find("base_seed required") != std::string::npos) seed = true;
            if (f.find("unknown key: bogus") != std::string::npos) unknown = true;
        }
        CHECK(seed);
        CHECK(unknown);
        CHECK(e.failures().size() >= 2);
    }
}

TEST_CASE("parse_config: malformed JSON") {
    CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
    CHECK_THROWS_AS(parse_config("[1,2]"), ConfigError);
}

TEST_CASE("critical subcommand output") {
    const RunConfig cfg = parse_config(
        R"({"subcommand":"critical","base_seed":1,"setting":"normal-single","rho":2.0,"N":500})");
    CHECK(run_subcommand(cfg) == "2.530\n");

    const RunConfig list = parse_config(
        R"({"subcommand":"critical","base_seed":1,"setting":"normal-single","rho":2.0,
            "N_values":[500,128000]})");
    const std::string csv = run_subcommand(list);
    CHECK(csv.find("N,K_lower,K_upper\n") == 0);
    CHECK(csv.find("500,2.530,2.530") != std::string::npos);
    CHECK(csv.find("128000,4.788,4.788") != std::string::npos);

    CHECK_THROWS_AS(
        parse_config(R"({"subcommand":"critical","base_seed":1,"setting":"normal-single"})"),
        ConfigError);
}

TEST_CASE("moments subcommand: CSV table and gram JSON") {
    const RunConfig cfg = parse_config(
        R"({"subcommand":"moments","base_seed":1,"setting":"normal","k_max":2,"rho":2.0})");
    const std::string csv = run_subcommand(cfg);
    CHECK(csv.find("setting,k1,k2,rho,t1,t2,first,fourth\n") == 0);
    // 3x3 rows plus header
    int lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == 10);
    CHECK(csv.find("normal,1,1,2,nan,nan,0.707107,2") != std::string::npos);

    const RunConfig gram = parse_config(
        R"({"subcommand":"moments","base_seed":1,"setting":"lognormal","k_max":2,"t1":0.5,"gram":true})");
    const std::string json_text = run_subcommand(gram);
    const auto doc = nlohmann::json::parse(json_text);
    CHECK(doc.contains("log_det"));
    CHECK(doc["inverse_available"] == true);
    CHECK(doc["basis"]["family"] == "expmart");
}

TEST_CASE("bounds subcommand JSON") {
    const RunConfig single = parse_config(
        R"({"subcommand":"bounds","base_seed":1,"kind":"single","K":4,"N":500,"rho":2.0})");
    const auto doc = nlohmann::json::parse(run_subcommand(single));
    CHECK(doc["lower"].get<double>() == doctest::Approx(0.3456).epsilon(1e-12));
    CHECK(doc["upper"].get<double>() == doctest::Approx(5400.0).epsilon(1e-12));
    CHECK(doc["constants"]["k_star"] == 2.0);

    const RunConfig multi = parse_config(
        R"({"subcommand":"bounds","base_seed":1,"kind":"multi","setting":"normal",
            "m":3,"n":3,"K":2,"N":1000,"c":2.0,"t_m":1.5})");
    const auto mdoc = nlohmann::json::parse(run_subcommand(multi));
    CHECK(mdoc["lower"].get<double>() == 0.0);
    CHECK(mdoc["upper"].get<double>() == 0.0);
    CHECK(mdoc["asymptotic"] == true);
}

TEST_CASE("price JSON and batch-metadata round trip") {
    const RunConfig cfg = parse_config(
        R"({"subcommand":"price","base_seed":77,"process":"geometric",
            "times":[0.5,1.0],"basis_family":"expmart","basis_order":2,
            "payoff":"put","strike":1.0,"n_paths":2000})");
    const std::string text = run_subcommand(cfg);
    const auto doc = nlohmann::json::parse(text);
    CHECK(doc["process"] == "geometric");
    CHECK(doc["generator"] == std::string(kGeneratorName));
    CHECK(doc["seed"]["base_seed"] == 77);
    CHECK(doc["basis"]["family"] == "expmart");
    CHECK(doc["basis"]["order"] == 2);
    CHECK(doc["betas"].size() == 1);
    CHECK(doc["betas"][0].size() == 3);
    CHECK(doc["dates"] == nlohmann::json::parse("[0.5,1.0]"));
    const double v0 = doc["value_estimate"].get<double>();
    const double c0 = doc["continuation_estimate"].get<double>();
    CHECK(v0 == std::max(0.0, c0));  // h_0(S(0)) = max(1 - 1, 0) = 0

    // 17-significant-digit doubles round-trip exactly through the JSON text
    const RunConfig again = parse_config(
        R"({"subcommand":"price","base_seed":77,"process":"geometric",
            "times":[0.5,1.0],"basis_family":"expmart","basis_order":2,
            "payoff":"put","strike":1.0,"n_paths":2000})");
    const auto doc2 = nlohmann::json::parse(run_subcommand(again));
    CHECK(doc2["value_estimate"].get<double>() == v0);
}

TEST_CASE("sweep CSV schema and row round trip") {
    const RunConfig cfg = parse_config(
        R"({"subcommand":"sweep","base_seed":3,"setting":"normal","K_values":[1,2],
            "N_values":[500],"batches":25})");
    const std::string csv = run_subcommand(cfg);
    CHECK(csv.find(std::string(kSweepCsvHeader) + "\n") == 0);

    std::vector<std::string> rows;
    std::size_t pos = csv.find('\n') + 1;
    while (pos < csv.size()) {
        const std::size_t next = csv.find('\n', pos);
        rows.push_back(csv.substr(pos, next - pos));
        pos = next + 1;
    }
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        const auto [setting, cell] = parse_mse_cell_csv_row(row);
        CHECK(mse_cell_csv_row(setting, cell) == row);  // lossless round trip
        CHECK(setting == Setting::Normal);
        CHECK(cell.batches == 25);
    }
}

TEST_CASE("json number formatting: 17 significant digits, round-trip exact") {
    CHECK(json_double(0.1) == "0.10000000000000001");
    CHECK(json_double(0.5) == "0.5");
    CHECK(json_double(1.0 / 3.0) == "0.33333333333333331");
    for (double x : {1.0 / 3.0, 0.1, 6.058, 2.0 / 7.0, 1e-300, 123456.789012345}) {
        const double back = std::strtod(json_double(x).c_str(), nullptr);
        CHECK(back == x);
    }
    CHECK(json_double(std::numeric_limits<double>::infinity()) == "null");
    CHECK(json_double(std::numeric_limits<double>::quiet_NaN()) == "null");
}

TEST_CASE("cli binary: exit codes and stream discipline") {
    // 0: success, data on stdout only
    const std::string good = temp_file(
        "crit.json",
        R"({"subcommand":"critical","base_seed":1,"setting":"normal-single","rho":2.0,"N":500})");
    const CliResult ok = run_cli("--config " + good);
    CHECK(ok.exit_code == 0);
    CHECK(ok.out == "2.530\n");

    // command-line subcommand stands in for a missing config field
    const std::string noname = temp_file(
        "crit2.json", R"({"base_seed":1,"setting":"normal-single","rho":2.0,"N":500})");
    const CliResult named = run_cli("critical --config " + noname);
    CHECK(named.exit_code == 0);
    CHECK(named.out == "2.530\n");

    // 1: validation failure
    const std::string bad = temp_file(
        "bad.json", R"({"subcommand":"sweep","base_seed":1,"K_values":[1],"N_values":[500],"rho_":1})");
    CHECK(run_cli("--config " + bad).exit_code == 1);

    // subcommand mismatch
    CHECK(run_cli("sweep --config " + good).exit_code == 1);

    // 2: numerical failure (Gram conditioning refusal)
    const std::string gram_fail = temp_file(
        "gramfail.json",
        R"({"subcommand":"price","base_seed":1,"process":"geometric","times":[1.0,2.0],
            "basis_family":"expmart","basis_order":8,"payoff":"put","strike":1.0,"n_paths":100})");
    CHECK(run_cli("--config " + gram_fail).exit_code == 2);

    // 3: unwritable output path
    CHECK(run_cli("--config " + good + " --out /nonexistent_dir/x.csv").exit_code == 3);

    // 3: unreadable config
    CHECK(run_cli("--config /nonexistent_dir/missing.json").exit_code == 3);
}

TEST_CASE("cli binary: byte-identical data output across thread counts") {
    const std::string cfg = temp_file(
        "sweep_threads.json",
        R"({"subcommand":"sweep","base_seed":5,"setting":"normal","K_values":[1,3],
            "N_values":[500],"batches":30})");
    const CliResult one = run_cli("--config " + cfg + " --threads 1");
    const CliResult three = run_cli("--config " + cfg + " --threads 3");
    CHECK(one.exit_code == 0);
    CHECK(three.exit_code == 0);
    CHECK(one.out == three.out);
}

TEST_CASE("sweep formats: json and plot exports") {
    const std::string base =
        R"({"subcommand":"sweep","base_seed":3,"setting":"normal","K_values":[1],
            "N_values":[500],"batches":20,"format":")";
    const auto csv_doc = parse_config(base + "csv\"}");
    const auto json_doc = parse_config(base + "json\"}");
    const auto plot_doc = parse_config(base + "plot\"}");
    CHECK(run_subcommand(csv_doc).find(std::string(kSweepCsvHeader)) == 0);
    const auto parsed = nlohmann::json::parse(run_subcommand(json_doc));
    CHECK(parsed["cells"].size() == 1);
    CHECK(parsed["grid"]["batches"] == 20);
    CHECK(parsed["cells"][0]["regime"] == "subcritical");
    const std::string plot = run_subcommand(plot_doc);
    CHECK(plot.find("kind,K,N,value\n") == 0);
    CHECK(plot.find("mse,1,500,") != std::string::npos);
    CHECK(plot.find("critical_lower,") != std::string::npos);
    CHECK_THROWS_AS(parse_config(base + "yaml\"}"), ConfigError);
}

TEST_CASE("check subcommand emits the assumption report") {
    const RunConfig cfg = parse_config(
        R"({"subcommand":"check","base_seed":21,"process":"geometric",
            "times":[0.5,1.0],"basis_family":"expmart","basis_order":2,
            "payoff":"put","strike":1.0,"probe_paths":10000})");
    const auto doc = nlohmann::json::parse(run_subcommand(cfg));
    CHECK(doc.contains("all_pass"));
    CHECK(doc["checks"].size() > 0);
    bool has_b3 = false;
    for (const auto& c : doc["checks"])
        if (c["condition"] == "B3") has_b3 = true;
    CHECK(has_b3);
}

TEST_CASE("cli binary: AMRMC_THREADS fallback keeps output identical") {
    const std::string cfg = temp_file(
        "sweep_env.json",
        R"({"subcommand":"sweep","base_seed":5,"setting":"normal","K_values":[2],
            "N_values":[500],"batches":30})");
    const CliResult plain = run_cli("--config " + cfg);
    CliResult env;
    {
        const std::string cmd = std::string("AMRMC_THREADS=3 ") + AMRMC_CLI_PATH +
                                " --config " + cfg + " 2>/dev/null";
        FILE* pipe = popen(cmd.c_str(), "r");
        REQUIRE(pipe != nullptr);
        char buf[4096];
        std::size_t got;
        while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) env.out.append(buf, got);
        env.exit_code = WEXITSTATUS(pclose(pipe));
    }
    CHECK(plain.exit_code == 0);
    CHECK(env.exit_code == 0);
    CHECK(plain.out == env.out);
}

TEST_CASE("cli binary: --seed overrides the config base_seed") {
    const std::string cfg = temp_file(
        "sweep_seed.json",
        R"({"subcommand":"sweep","base_seed":5,"setting":"normal","K_values":[2],
            "N_values":[500],"batches":30})");
    const CliResult base = run_cli("--config " + cfg);
    const CliResult same = run_cli("--config " + cfg + " --seed 5");
    const CliResult other = run_cli("--config " + cfg + " --seed 6");
    CHECK(base.out == same.out);
    CHECK(base.out != other.out);
}

TEST_CASE("cli binary: --out writes the same bytes as stdout") {
    const std::string cfg = temp_file(
        "moments_out.json",
        R"({"subcommand":"moments","base_seed":1,"setting":"normal","k_max":1,"rho":2.0})");
    const CliResult direct = run_cli("--config " + cfg);
    const std::string out_path = "/tmp/amrmc_test_moments.csv";
    const CliResult filed = run_cli("--config " + cfg + " --out " + out_path);
    CHECK(filed.exit_code == 0);
    CHECK(filed.out.empty());
    std::ifstream in(out_path, std::ios::binary);
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(contents == direct.out);
}
