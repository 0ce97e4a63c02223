#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cvql/runner.hpp"

using namespace cvql;
using namespace cvql::run;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string error_of(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream s(text);
    std::string line;
    while (std::getline(s, line)) out.push_back(line);
    return out;
}

} // namespace

TEST_CASE("config round trip is idempotent for the shipped configs") {
    for (const auto& entry : fs::directory_iterator(CVQL_CONFIG_DIR)) {
        if (entry.path().extension() != ".json") continue;
        CAPTURE(entry.path().string());
        const auto once = to_json(load_config(entry.path().string())).dump(2);
        const auto twice = to_json(parse_config_text(once)).dump(2);
        CHECK(once == twice);
    }
}

TEST_CASE("config round trip keeps every block") {
    const std::string text = R"({
      "protocol": {"V_M": 2.5, "eta_Ch": {"start": 0.01, "stop": 20, "points": 5, "scale": "dB"},
                   "eps_Ch": 0.03, "block_size": 1000000},
      "modulator": {"k_floor": 0.05, "rho_convention": "amplitude20"},
      "outputs": {"path": "x.csv", "format": "csv"},
      "mc": {"n": 5000, "seed": 18446744073709551615}
    })";
    const auto cfg = parse_config_text(text);
    CHECK(cfg.mc->seed == 18446744073709551615ULL);
    CHECK(cfg.modulator->rho_convention == RhoConvention::amplitude20);
    const auto once = to_json(cfg);
    CHECK(once == to_json(parse_config(nlohmann::json::parse(once.dump()))));
    CHECK(once["protocol"]["eta_Ch"]["scale"] == "dB");
}

TEST_CASE("unknown or malformed keys are rejected by name") {
    CHECK(error_of(R"({"protocol": {"eta_ch": 0.5}})").find("protocol.eta_ch") != std::string::npos);
    CHECK(error_of(R"({"protocl": {}})").find("protocl") != std::string::npos);
    CHECK(error_of(R"({"protocol": {"V_M": "five"}})").find("protocol.V_M") != std::string::npos);
    CHECK(error_of(R"({"protocol": {"V_M": {"start": 1, "stop": 2, "points": 3, "scale": "dB"}}})")
              .find("protocol.V_M.scale") != std::string::npos);
    CHECK(error_of(R"({"protocol": {"V_M": {"start": 1, "stop": 2}}})").find("points") !=
          std::string::npos);
    CHECK(error_of(R"({"mc": {"n": 1.5}})").find("mc.n") != std::string::npos);
    CHECK(error_of(R"({"outputs": {"format": "xml"}})").find("outputs.format") != std::string::npos);
    CHECK(error_of(R"({"modulator": {"rho_convention": "power"}})").find("modulator.rho_convention") !=
          std::string::npos);
    CHECK(error_of(R"({"protocol": {"k": 0.1}, "modulator": {"rho": 2}})").find("modulator.rho") !=
          std::string::npos);
    CHECK(error_of("{not json").find("JSON") != std::string::npos);
}

TEST_CASE("at most one sweep axis") {
    const auto msg = error_of(R"({"protocol": {"V_M": {"start": 1, "stop": 2, "points": 2},
                                               "k": {"start": 0, "stop": 1, "points": 2}}})");
    CHECK(msg.find("second sweep axis") != std::string::npos);
    const auto cfg = parse_config_text(R"({"protocol": {"k": {"start": 0, "stop": 1, "points": 3}}})");
    CHECK(sweep_axis(cfg)->name == "k");
    CHECK_THROWS_AS(params_at(cfg), Error);
    CHECK(params_at(cfg, 0.5).leakage == 0.5);
}

TEST_CASE("sweep values and dB transmittance") {
    Sweep lin{0.0, 1.0, 5, "linear"};
    CHECK(lin.values() == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    Sweep lg{0.01, 100.0, 5, "log"};
    CHECK(lg.values()[2] == doctest::Approx(1.0));
    const auto cfg = parse_config_text(
        R"({"protocol": {"eta_Ch": {"start": 0, "stop": 30, "points": 4, "scale": "dB"}}})");
    CHECK(params_at(cfg, 10.0).channel_transmittance == doctest::Approx(0.1));
    CHECK(params_at(cfg, 30.0).channel_transmittance == doctest::Approx(0.001));
}

TEST_CASE("modulator rho sets k") {
    const auto cfg = parse_config_text(R"({"modulator": {"rho": 3, "k_floor": 0.0631}})");
    CHECK(params_at(cfg).leakage == doctest::Approx(rho_to_k(3.0, 0.0631)));
}

TEST_CASE("keyrate output is the library report") {
    const auto cfg = load_config(std::string(CVQL_CONFIG_DIR) + "/keyrate.json");
    RunOptions o;
    std::ostringstream out;
    const int code = cmd_keyrate(cfg, o, out);
    const auto j = nlohmann::json::parse(out.str());
    const auto lib = key_rate(params_at(cfg));
    CHECK(code == exit_ok);
    CHECK(j["R_RR"].get<double>() == lib.rate_reverse);
    CHECK(j["R_DR"].get<double>() == lib.rate_direct);
    CHECK(j["I_AB"].get<double>() == lib.mutual_information);
    CHECK(j["chi_RR"].get<double>() == lib.chi_reverse);
    CHECK(j["dR_RR"].get<double>() == doctest::Approx(leakage_penalty(params_at(cfg), Direction::reverse)));

    o.optimize_vm = true;
    o.direction = DirectionChoice::rr;
    std::ostringstream out2;
    CHECK(cmd_keyrate(cfg, o, out2) == exit_ok);
    const auto opt = optimize_vm(params_at(cfg), Direction::reverse);
    CHECK(nlohmann::json::parse(out2.str())["R_RR"].get<double>() == opt.rate);
    CHECK(opt.rate > 0.0);
}

TEST_CASE("keyrate exit codes") {
    RunOptions dr;
    dr.direction = DirectionChoice::dr;
    dr.optimize_vm = true;
    std::ostringstream sink;
    for (double eta : {0.999, 0.5, 0.01}) {
        auto cfg = parse_config_text(R"({"protocol": {"k": 1, "eps_Ch": 0.02, "beta": 0.96}})");
        cfg.protocol["eta_Ch"] = eta;
        CHECK(cmd_keyrate(cfg, dr, sink) == exit_insecure);
    }
    const auto zero_beta = parse_config_text(R"({"protocol": {"beta": 0, "eta_Ch": 0.9}})");
    CHECK(cmd_keyrate(zero_beta, RunOptions{}, sink) == exit_insecure);
}

TEST_CASE("sweep CSV is the library evaluated row by row") {
    const auto cfg = parse_config_text(R"({
      "protocol": {"V_M": 4, "k": 0.25, "eps_Ch": 0.02, "beta": 0.96,
                   "eta_Ch": {"start": 0.5, "stop": 12, "points": 5, "scale": "dB"}}})");
    RunOptions o;
    o.with_eta_max = true;
    o.threads = 1;
    std::ostringstream out;
    CHECK(cmd_sweep(cfg, o, out) == exit_ok);
    const auto text = out.str();
    CHECK(text.find('\r') == std::string::npos);
    const auto lines = lines_of(text);
    REQUIRE(lines.size() == 6);
    CHECK(lines[0] == csv_header);

    const auto values = sweep_axis(cfg)->sweep.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto cells = split(lines[i + 1]);
        REQUIRE(cells.size() == 16);
        const auto p = params_at(cfg, values[i]);
        const auto k = key_rate(p);
        CHECK(cells[0] == format_number(values[i]));
        CHECK(cells[1] == format_number(p.modulation_variance));
        CHECK(cells[2] == format_number(p.leakage));
        CHECK(cells[3] == format_number(k.mutual_information));
        CHECK(cells[4] == format_number(k.chi_direct));
        CHECK(cells[5] == format_number(k.chi_reverse));
        CHECK(cells[6] == format_number(k.rate_direct));
        CHECK(cells[7] == format_number(k.rate_reverse));
        CHECK(cells[8] == format_number(k.rate_direct_clamped));
        CHECK(cells[9] == format_number(k.rate_reverse_clamped));
        CHECK(std::stod(cells[10]) == doctest::Approx(leakage_penalty(p, Direction::direct)).epsilon(1e-8));
        CHECK(std::stod(cells[11]) == doctest::Approx(leakage_penalty(p, Direction::reverse)).epsilon(1e-8));
        CHECK(cells[12] == format_number(max_additional_loss(p, Direction::direct).additional_loss_db));
        CHECK(cells[13] == format_number(max_additional_loss(p, Direction::reverse).additional_loss_db));
        CHECK(std::stod(cells[14]) ==
              doctest::Approx(loss_penalty_db(p, Direction::direct)).epsilon(1e-8));
        CHECK(std::stod(cells[15]) ==
              doctest::Approx(loss_penalty_db(p, Direction::reverse)).epsilon(1e-8));
    }
}

TEST_CASE("optional columns stay empty unless requested") {
    const auto cfg = parse_config_text(
        R"({"protocol": {"k": {"start": 0, "stop": 0.5, "points": 3}, "eta_Ch": 0.5}})");
    std::ostringstream out;
    RunOptions o;
    cmd_sweep(cfg, o, out);
    const auto lines = lines_of(out.str());
    CHECK(split(lines[1]).size() == 16);
    CHECK(lines[1].substr(lines[1].size() - 4) == ",,,,");

    o.with_eta_max = true;
    o.direction = DirectionChoice::rr;
    std::ostringstream rr;
    cmd_sweep(cfg, o, rr);
    const auto cells = split(lines_of(rr.str())[2]);
    CHECK(cells[12].empty());
    CHECK_FALSE(cells[13].empty());
}

TEST_CASE("sweep rows do not depend on the thread count") {
    const auto cfg = load_config(std::string(CVQL_CONFIG_DIR) + "/rho_sweep_b2b.json");
    RunOptions one;
    one.threads = 1;
    one.with_eta_max = true;
    RunOptions many = one;
    many.threads = 4;
    CHECK(format_csv(run_sweep(cfg, one)) == format_csv(run_sweep(cfg, many)));
}

TEST_CASE("rho sweep gives a k column symmetric about zero") {
    const auto cfg = parse_config_text(
        R"({"modulator": {"rho": {"start": -10, "stop": 10, "points": 41}, "k_floor": 0}})");
    const auto rows = run_sweep(cfg, RunOptions{});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].params.leakage == doctest::Approx(rows[rows.size() - 1 - i].params.leakage).epsilon(1e-14));
    }
    CHECK(rows[20].params.leakage == 0.0);
}

TEST_CASE("loss sweep: leakage moves the reverse-reconciliation zero crossing to lower loss") {
    auto crossing = [](const char* k) {
        auto cfg = parse_config_text(std::string(R"({"protocol": {"eps_Ch": 0.02, "beta": 0.96, "k": )") + k +
                                     R"(, "eta_Ch": {"start": 0.01, "stop": 30, "points": 300, "scale": "dB"}}})");
        RunOptions o;
        o.optimize_vm = true;
        o.direction = DirectionChoice::rr;
        const auto rows = run_sweep(cfg, o);
        for (const auto& r : rows) {
            if (!(r.report.rate_reverse > 0.0)) return r.sweep_value;
        }
        return 1e9;
    };
    CHECK(crossing("0.2") < crossing("0"));
}

TEST_CASE("sweep writes the file and a metadata sidecar") {
    const auto dir = fs::temp_directory_path() / "cvql_runner_test";
    fs::create_directories(dir);
    const auto csv = dir / "k.csv";
    auto cfg = parse_config_text(R"({"protocol": {"k": {"start": 0, "stop": 0.5, "points": 3}}})");
    RunOptions o;
    o.out = csv.string();
    std::ostringstream unused;
    CHECK(cmd_sweep(cfg, o, unused) == exit_ok);
    CHECK(unused.str().empty());
    CHECK(slurp(csv).rfind(csv_header, 0) == 0);
    const auto meta = nlohmann::json::parse(slurp(dir / "k.csv.meta.json"));
    CHECK(meta["sweep_var"] == "k");
    CHECK(meta["rows"] == 3);
    CHECK(meta["config"] == nlohmann::json::parse(to_json(cfg).dump()));

    o.out = (dir / "missing_dir" / "x.csv").string();
    CHECK_THROWS_AS(cmd_sweep(cfg, o, unused), Error);
    fs::remove_all(dir);
}

TEST_CASE("table1 command reports the library verdicts and grids") {
    const auto cfg = load_config(std::string(CVQL_CONFIG_DIR) + "/trusted_noise.json");
    std::ostringstream out;
    CHECK(cmd_table1(cfg, RunOptions{}, out) == exit_ok);
    const auto j = nlohmann::json::parse(out.str());
    const auto p = params_at(cfg);
    for (NoisePoint np : {NoisePoint::prep_shared, NoisePoint::prep_signal, NoisePoint::leakage,
                          NoisePoint::detection}) {
        for (Direction d : {Direction::direct, Direction::reverse}) {
            const auto v = trusted_noise_viability(p, np, d);
            const std::string name(to_string(np));
            const std::string dir(to_string(d));
            CHECK(j["matrix"][name][dir] == std::string(to_string(v.verdict)));
            CHECK(j["grids"][name]["R_" + dir].get<std::vector<double>>() == v.rate);
        }
    }
    auto no_detector = cfg;
    no_detector.protocol["eta_D"] = 1.0;
    no_detector.protocol.erase("eps_D");
    CHECK_THROWS_AS(cmd_table1(no_detector, RunOptions{}, out), Error);
}

TEST_CASE("mc command is byte-identical per seed and matches the library") {
    auto cfg = load_config(std::string(CVQL_CONFIG_DIR) + "/mc.json");
    cfg.mc->n = 20000;
    RunOptions o;
    std::ostringstream a, b;
    CHECK(cmd_mc(cfg, o, a) == exit_ok);
    CHECK(cmd_mc(cfg, o, b) == exit_ok);
    CHECK(a.str() == b.str());
    const auto j = nlohmann::json::parse(a.str());
    const auto lib = end_to_end_consistency(params_at(cfg), 20000, cfg.mc->seed);
    CHECK(j["estimated_rate"]["R_RR"].get<double>() == lib.estimated_rate.rate_reverse);
    CHECK(j["estimates"]["k"]["value"].get<double>() == lib.estimates.leakage.value);

    o.seed = 99;
    std::ostringstream c;
    cmd_mc(cfg, o, c);
    CHECK(c.str() != a.str());

    cfg.mc->n = 999;
    CHECK_THROWS_AS(cmd_mc(cfg, o, c), Error);
    cfg.mc.reset();
    CHECK_THROWS_AS(cmd_mc(cfg, o, c), Error);
}

TEST_CASE("mc misuse exits with the no-security code") {
    const auto cfg = load_config(std::string(CVQL_CONFIG_DIR) + "/mc_leakage.json");
    RunOptions o;
    o.assume_no_leakage = true;
    std::ostringstream out;
    CHECK(cmd_mc(cfg, o, out) == exit_insecure);
    CHECK(nlohmann::json::parse(out.str())["verdict"] == "overestimates key");
}
