// cvql: key-rate, sweep, trusted-noise and Monte-Carlo runs from a JSON config.
//
//   cvql keyrate --config point.json --direction rr --optimize-vm
//   cvql sweep   --config loss.json --with-eta-max --out loss.csv
//   cvql table1  --config table1.json
//   cvql mc      --config mc.json --assume-no-leakage --seed 7

#include <iostream>

#include <CLI11.hpp>

#include "cvql/runner.hpp"

namespace {

struct Flags {
    std::string config;
    std::string direction = "both";
    bool optimize_vm = false;
    bool with_eta_max = false;
    bool assume_no_leakage = false;
    std::string out;
    std::string format;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

void add_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON run configuration")->required();
    cmd->add_option("--direction", f.direction, "dr, rr or both")
        ->check(CLI::IsMember({"dr", "rr", "both"}));
    cmd->add_flag("--optimize-vm", f.optimize_vm, "optimise V_M for the selected direction");
    cmd->add_flag("--with-eta-max", f.with_eta_max, "add maximal tolerable loss columns");
    cmd->add_flag("--assume-no-leakage", f.assume_no_leakage, "estimate with k forced to 0");
    cmd->add_option("--out", f.out, "output path ('-' for stdout)");
    cmd->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--seed", f.seed, "Monte-Carlo seed (overrides mc.seed)");
    cmd->add_option("--threads", f.threads, "sweep worker threads (0 = all cores)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"CV-QKD key rates with modulation leakage"};
    app.require_subcommand(1);
    Flags flags;
    auto* keyrate = app.add_subcommand("keyrate", "single key-rate report as JSON");
    auto* sweep = app.add_subcommand("sweep", "one-axis parameter sweep");
    auto* table1 = app.add_subcommand("table1", "trusted-noise viability matrix");
    auto* mc = app.add_subcommand("mc", "Monte-Carlo estimation closure check");
    for (auto* cmd : {keyrate, sweep, table1, mc}) {
        add_flags(cmd, flags);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cvql::run::exit_error;
    }

    try {
        cvql::run::RunOptions options;
        options.direction = cvql::run::parse_direction(flags.direction);
        options.optimize_vm = flags.optimize_vm;
        options.with_eta_max = flags.with_eta_max;
        options.assume_no_leakage = flags.assume_no_leakage;
        options.threads = flags.threads;
        auto* cmd = app.get_subcommands().front();
        if (cmd->count("--out") > 0) options.out = flags.out;
        if (cmd->count("--format") > 0) options.format = flags.format;
        if (cmd->count("--seed") > 0) options.seed = flags.seed;

        const auto cfg = cvql::run::load_config(flags.config);
        if (cmd == keyrate) return cvql::run::cmd_keyrate(cfg, options, std::cout);
        if (cmd == sweep) return cvql::run::cmd_sweep(cfg, options, std::cout);
        if (cmd == table1) return cvql::run::cmd_table1(cfg, options, std::cout);
        return cvql::run::cmd_mc(cfg, options, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "cvql: " << e.what() << "\n";
        return cvql::run::exit_error;
    }
}
