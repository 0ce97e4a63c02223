#pragma once

// Run configuration and the four command implementations behind the cvql
// executable. The executable only parses flags and forwards here.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cvql/estimation.hpp"
#include "cvql/modulator.hpp"
#include "cvql/security.hpp"

namespace cvql::run {

struct Sweep {
    double start = 0.0;
    double stop = 0.0;
    int points = 2;
    std::string scale = "linear"; // linear | dB | log

    // Points in config units (dB attenuation for scale dB), start to stop inclusive.
    std::vector<double> values() const;
};

using Field = std::variant<double, Sweep>;

// Protocol keys in serialisation order.
inline const std::vector<std::string> protocol_keys = {
    "V_M", "k", "eta_Ch", "eps_Ch", "eta_D", "eps_D", "eps_P1", "eps_P2", "eps_L", "beta", "block_size"};

struct ModulatorBlock {
    std::optional<Field> rho; // dB
    double k_floor = default_k_floor;
    RhoConvention rho_convention = RhoConvention::amplitude10;
};

struct OutputsBlock {
    std::optional<std::string> path;
    std::optional<std::string> format; // csv | json
};

struct McBlock {
    std::size_t n = 1000000;
    std::uint64_t seed = 1;
};

struct RunConfig {
    std::map<std::string, Field> protocol; // only keys present in the file
    std::optional<ModulatorBlock> modulator;
    std::optional<OutputsBlock> outputs;
    std::optional<McBlock> mc;
};

// Config errors are invalid-argument errors whose message names the key.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
nlohmann::ordered_json to_json(const RunConfig& cfg);

struct SweepAxis {
    std::string name; // protocol key or "rho"
    Sweep sweep;
};

// Empty when nothing is swept; throws if more than one field is.
std::optional<SweepAxis> sweep_axis(const RunConfig& cfg);

// Parameters with every scalar applied. When `swept_value` is given it is
// assigned to the sweep axis (in config units).
ProtocolParams params_at(const RunConfig& cfg, std::optional<double> swept_value = std::nullopt);

enum class DirectionChoice { dr, rr, both };
DirectionChoice parse_direction(const std::string& text);
std::string_view to_string(DirectionChoice d) noexcept;

struct RunOptions {
    DirectionChoice direction = DirectionChoice::both;
    bool optimize_vm = false;
    bool with_eta_max = false;
    bool assume_no_leakage = false;
    std::optional<std::string> out;
    std::optional<std::string> format;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0; // 0 = hardware concurrency
};

// One evaluated parameter point: a sweep row or the keyrate result.
struct PointResult {
    double sweep_value = 0.0;
    ProtocolParams params;
    KeyRateReport report;
    double penalty_direct = 0.0;  // R(k=0) - R(k)
    double penalty_reverse = 0.0;
    std::optional<double> eta_max_direct; // dB
    std::optional<double> eta_max_reverse;
    std::optional<double> eta_penalty_direct;
    std::optional<double> eta_penalty_reverse;
};

// With optimize_vm, V_M is replaced by the optimum for the selected direction
// (reverse when both are selected).
PointResult evaluate_point(const ProtocolParams& p, const RunOptions& options, double sweep_value = 0.0);

std::vector<PointResult> run_sweep(const RunConfig& cfg, const RunOptions& options);

inline const std::string csv_header =
    "sweep_var,V_M,k,I_AB,chi_DR,chi_RR,R_DR,R_RR,R_DR_clamped,R_RR_clamped,dR_DR,dR_RR,"
    "eta_max_DR_dB,eta_max_RR_dB,d_eta_DR_dB,d_eta_RR_dB";

std::string format_number(double v); // %.9g
std::string format_csv(const std::vector<PointResult>& rows);
nlohmann::ordered_json rows_to_json(const std::vector<PointResult>& rows);
nlohmann::ordered_json report_to_json(const PointResult& point);
nlohmann::ordered_json consistency_to_json(const ConsistencyReport& report);

inline constexpr int exit_ok = 0;
inline constexpr int exit_error = 1;
inline constexpr int exit_insecure = 2;

int cmd_keyrate(const RunConfig& cfg, const RunOptions& options, std::ostream& out);
int cmd_sweep(const RunConfig& cfg, const RunOptions& options, std::ostream& out);
int cmd_table1(const RunConfig& cfg, const RunOptions& options, std::ostream& out);
int cmd_mc(const RunConfig& cfg, const RunOptions& options, std::ostream& out);

} // namespace cvql::run
