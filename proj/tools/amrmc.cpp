// amrmc: regression Monte Carlo toolkit for Bermudan optimal stopping.
// Usage: amrmc [subcommand] --config <path> [--out <path>] [--threads <n>] [--seed <u64>]

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "amrmc/cli.hpp"

namespace {

void usage(std::ostream& os) {
    os << "usage: amrmc [price|sweep|moments|bounds|critical|check]\n"
          "             --config <path> [--out <path>] [--threads <n>] [--seed <u64>]\n"
          "Subcommand may come from the command line or the config document;\n"
          "if both are given they must agree. --seed overrides the config's\n"
          "base_seed; --threads overrides the config, which overrides the\n"
          "AMRMC_THREADS environment variable.\n";
}

}  // namespace

int main(int argc, char** argv) {
    std::string subcommand;
    std::string config_path;
    std::string out_path;
    bool out_set = false;
    int threads = -1;
    bool seed_set = false;
    std::uint64_t seed = 0;

    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        auto next = [&](const char* what) -> const char* {
            if (i + 1 >= argc) {
                std::cerr << "error: " << what << " expects a value\n";
                std::exit(1);
            }
            return argv[++i];
        };
        if (arg == "--config") {
            config_path = next("--config");
        } else if (arg == "--out") {
            out_path = next("--out");
            out_set = true;
        } else if (arg == "--threads") {
            threads = std::atoi(next("--threads"));
        } else if (arg == "--seed") {
            seed = std::strtoull(next("--seed"), nullptr, 10);
            seed_set = true;
        } else if (arg == "--help" || arg == "-h") {
            usage(std::cout);
            return 0;
        } else if (!arg.empty() && arg[0] != '-' && subcommand.empty()) {
            subcommand = arg;
        } else {
            std::cerr << "error: unknown argument: " << arg << "\n";
            usage(std::cerr);
            return 1;
        }
    }
    if (config_path.empty()) {
        std::cerr << "error: --config is required\n";
        usage(std::cerr);
        return 1;
    }

    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
        std::cerr << "i/o failure: cannot read config: " << config_path << "\n";
        return 3;
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();

    std::string text = buffer.str();
    amrmc::RunConfig cfg;
    try {
        // A command-line subcommand may stand in for a missing config field.
        if (!subcommand.empty()) {
            auto doc = nlohmann::json::parse(text, nullptr, false);
            if (doc.is_object() && !doc.contains("subcommand")) {
                doc["subcommand"] = subcommand;
                text = doc.dump();
            }
        }
        cfg = amrmc::parse_config(text);
    } catch (const amrmc::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    if (!subcommand.empty() && cfg.subcommand != subcommand) {
        std::cerr << "error: subcommand mismatch: command line says \"" << subcommand
                  << "\", config says \"" << cfg.subcommand << "\"\n";
        return 1;
    }
    if (seed_set) cfg.base_seed = seed;
    if (out_set) cfg.output_path = out_path;
    if (threads >= 0) {
        cfg.threads = threads;
    } else if (cfg.threads == 0) {
        if (const char* env = std::getenv("AMRMC_THREADS")) cfg.threads = std::atoi(env);
    }

    std::cerr << "amrmc " << cfg.subcommand << " (effective config):\n"
              << cfg.effective << "\n";
    return amrmc::dispatch(cfg);
}
