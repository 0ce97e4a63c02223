#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "cvql/runner.hpp"

namespace cvql::run {

namespace {

using ojson = nlohmann::ordered_json;

bool selects(DirectionChoice choice, Direction d) {
    return choice == DirectionChoice::both ||
           (choice == DirectionChoice::dr) == (d == Direction::direct);
}

Direction primary(DirectionChoice choice) {
    return choice == DirectionChoice::dr ? Direction::direct : Direction::reverse;
}

ojson params_to_json(const ProtocolParams& p) {
    ojson j;
    j["V_M"] = p.modulation_variance;
    j["k"] = p.leakage;
    j["eta_Ch"] = p.channel_transmittance;
    j["eps_Ch"] = p.channel_noise;
    j["eta_D"] = p.detection_efficiency;
    j["eps_D"] = p.detection_noise;
    j["eps_P1"] = p.prep_noise_shared;
    j["eps_P2"] = p.prep_noise_signal;
    j["eps_L"] = p.leakage_noise;
    j["beta"] = p.reconciliation_efficiency;
    j["block_size"] = p.block_size;
    return j;
}

ojson estimate_to_json(const Estimate& e) {
    return ojson{{"value", e.value}, {"standard_error", e.standard_error}, {"fixed", e.fixed}};
}

std::optional<std::string> output_path(const RunConfig& cfg, const RunOptions& options) {
    if (options.out) {
        return options.out;
    }
    if (cfg.outputs && cfg.outputs->path) {
        return cfg.outputs->path;
    }
    return std::nullopt;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw Error(Errc::invalid_argument, "config key 'outputs.path': cannot write '" + path + "'");
    }
    file << text;
    if (!file) {
        throw Error(Errc::invalid_argument, "config key 'outputs.path': write failed for '" + path + "'");
    }
}

// Writes to --out / outputs.path when given, otherwise to `out`.
void emit(const RunConfig& cfg, const RunOptions& options, std::ostream& out, const std::string& text) {
    const auto path = output_path(cfg, options);
    if (path && *path != "-") {
        write_file(*path, text);
    } else {
        out << text;
    }
}

std::string axis_units(const SweepAxis& axis, const RunConfig& cfg) {
    if (axis.name == "rho") {
        return "dB RF scaling, " + std::string(to_string(cfg.modulator->rho_convention));
    }
    if (axis.sweep.scale == "dB") {
        return "dB attenuation, " + axis.name + " = 10^(-x/10)";
    }
    return "config units";
}

} // namespace

PointResult evaluate_point(const ProtocolParams& p, const RunOptions& options, double sweep_value) {
    PointResult r;
    r.sweep_value = sweep_value;
    r.params = p;
    if (options.optimize_vm) {
        r.params.modulation_variance = optimize_vm(p, primary(options.direction)).modulation_variance;
    }
    r.report = key_rate(r.params);

    ProtocolParams ignorant = r.params;
    ignorant.leakage = 0.0;
    const auto reference = key_rate(ignorant);
    r.penalty_direct = reference.rate_direct - r.report.rate_direct;
    r.penalty_reverse = reference.rate_reverse - r.report.rate_reverse;

    if (options.with_eta_max) {
        LossSearchOptions search;
        search.optimize_vm = options.optimize_vm;
        for (Direction d : {Direction::direct, Direction::reverse}) {
            if (!selects(options.direction, d)) {
                continue;
            }
            const double limit = max_additional_loss(r.params, d, search).additional_loss_db;
            const double limit0 = max_additional_loss(ignorant, d, search).additional_loss_db;
            if (d == Direction::direct) {
                r.eta_max_direct = limit;
                r.eta_penalty_direct = limit0 - limit;
            } else {
                r.eta_max_reverse = limit;
                r.eta_penalty_reverse = limit0 - limit;
            }
        }
    }
    return r;
}

std::vector<PointResult> run_sweep(const RunConfig& cfg, const RunOptions& options) {
    const auto axis = sweep_axis(cfg);
    if (!axis) {
        throw Error(Errc::invalid_argument, "sweep needs exactly one swept field in the config");
    }
    if (options.optimize_vm && axis->name == "V_M") {
        throw Error(Errc::invalid_argument, "config key 'protocol.V_M': cannot sweep V_M with --optimize-vm");
    }
    const auto values = axis->sweep.values();
    std::vector<ProtocolParams> params;
    params.reserve(values.size());
    for (double v : values) {
        params.push_back(params_at(cfg, v));
        params.back().validate();
    }

    std::vector<PointResult> rows(values.size());
    std::vector<std::exception_ptr> errors(values.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < values.size(); i = next++) {
            try {
                rows[i] = evaluate_point(params[i], options, values[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    unsigned threads = options.threads != 0 ? options.threads : std::thread::hardware_concurrency();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(values.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return rows;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string format_csv(const std::vector<PointResult>& rows) {
    auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
    std::string text = csv_header + "\n";
    for (const auto& r : rows) {
        const auto& k = r.report;
        const std::string fields[] = {
            format_number(r.sweep_value),
            format_number(r.params.modulation_variance),
            format_number(r.params.leakage),
            format_number(k.mutual_information),
            format_number(k.chi_direct),
            format_number(k.chi_reverse),
            format_number(k.rate_direct),
            format_number(k.rate_reverse),
            format_number(k.rate_direct_clamped),
            format_number(k.rate_reverse_clamped),
            format_number(r.penalty_direct),
            format_number(r.penalty_reverse),
            opt(r.eta_max_direct),
            opt(r.eta_max_reverse),
            opt(r.eta_penalty_direct),
            opt(r.eta_penalty_reverse),
        };
        for (std::size_t i = 0; i < std::size(fields); ++i) {
            text += (i == 0 ? "" : ",") + fields[i];
        }
        text += "\n";
    }
    return text;
}

ojson report_to_json(const PointResult& point) {
    const auto& k = point.report;
    ojson j;
    j["params"] = params_to_json(point.params);
    j["I_AB"] = k.mutual_information;
    j["chi_DR"] = k.chi_direct;
    j["chi_RR"] = k.chi_reverse;
    j["R_DR"] = k.rate_direct;
    j["R_RR"] = k.rate_reverse;
    j["R_DR_clamped"] = k.rate_direct_clamped;
    j["R_RR_clamped"] = k.rate_reverse_clamped;
    j["finite_size_penalty"] = k.finite_size_penalty;
    j["dR_DR"] = point.penalty_direct;
    j["dR_RR"] = point.penalty_reverse;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) {
            j[key] = *v;
        }
    };
    put("eta_max_DR_dB", point.eta_max_direct);
    put("eta_max_RR_dB", point.eta_max_reverse);
    put("d_eta_DR_dB", point.eta_penalty_direct);
    put("d_eta_RR_dB", point.eta_penalty_reverse);
    j["modes"] = k.mode_count;
    return j;
}

ojson rows_to_json(const std::vector<PointResult>& rows) {
    ojson arr = ojson::array();
    for (const auto& r : rows) {
        ojson j;
        j["sweep_var"] = r.sweep_value;
        const auto fields = report_to_json(r);
        for (const auto& [key, value] : fields.items()) {
            j[key] = value;
        }
        arr.push_back(j);
    }
    return arr;
}

ojson consistency_to_json(const ConsistencyReport& report) {
    ojson j;
    const auto& e = report.estimates;
    j["n"] = e.n;
    j["estimates"] = {{"V_M", estimate_to_json(e.modulation_variance)},
                      {"k", estimate_to_json(e.leakage)},
                      {"eta_Ch", estimate_to_json(e.channel_transmittance)},
                      {"eps_Ch", estimate_to_json(e.channel_noise)}};
    j["warnings"] = e.warnings;
    j["estimated_params"] = params_to_json(report.estimated_params);
    j["true_rate"] = {{"R_DR", report.true_rate.rate_direct}, {"R_RR", report.true_rate.rate_reverse}};
    j["estimated_rate"] = {{"R_DR", report.estimated_rate.rate_direct},
                           {"R_RR", report.estimated_rate.rate_reverse}};
    j["rate_standard_error"] = {{"DR", report.rate_error_direct}, {"RR", report.rate_error_reverse}};
    j["tolerance"] = {{"DR", report.tolerance_direct}, {"RR", report.tolerance_reverse}};
    j["verdict_by_direction"] = {{"DR", std::string(to_string(report.verdict_in(Direction::direct)))},
                                 {"RR", std::string(to_string(report.verdict_in(Direction::reverse)))}};
    j["verdict"] = std::string(to_string(report.verdict));
    return j;
}

int cmd_keyrate(const RunConfig& cfg, const RunOptions& options, std::ostream& out) {
    const auto p = params_at(cfg);
    const auto point = evaluate_point(p, options);
    ojson j;
    j["direction"] = std::string(to_string(options.direction));
    j["optimize_vm"] = options.optimize_vm;
    const auto fields = report_to_json(point);
    for (const auto& [key, value] : fields.items()) {
        j[key] = value;
    }
    emit(cfg, options, out, j.dump(2) + "\n");

    bool secure = false;
    for (Direction d : {Direction::direct, Direction::reverse}) {
        secure = secure || (selects(options.direction, d) && point.report.rate(d) > 0.0);
    }
    return secure ? exit_ok : exit_insecure;
}

int cmd_sweep(const RunConfig& cfg, const RunOptions& options, std::ostream& out) {
    std::string format = "csv";
    if (options.format) {
        format = *options.format;
    } else if (cfg.outputs && cfg.outputs->format) {
        format = *cfg.outputs->format;
    }
    if (format != "csv" && format != "json") {
        throw Error(Errc::invalid_argument, "--format must be csv or json");
    }
    const auto rows = run_sweep(cfg, options);
    const auto axis = *sweep_axis(cfg);
    const std::string text = format == "csv" ? format_csv(rows) : rows_to_json(rows).dump(2) + "\n";
    emit(cfg, options, out, text);

    const auto path = output_path(cfg, options);
    if (path && *path != "-") {
        ojson meta;
        meta["command"] = "sweep";
        meta["sweep_var"] = axis.name;
        meta["sweep_units"] = axis_units(axis, cfg);
        meta["channel_loss_convention"] = "attenuation dB >= 0, eta_Ch = 10^(-loss/10)";
        meta["rho_convention"] =
            std::string(to_string(cfg.modulator ? cfg.modulator->rho_convention : RhoConvention::amplitude10));
        meta["k_floor"] = cfg.modulator ? cfg.modulator->k_floor : default_k_floor;
        meta["direction"] = std::string(to_string(options.direction));
        meta["optimize_vm"] = options.optimize_vm;
        meta["with_eta_max"] = options.with_eta_max;
        meta["dR"] = "R(k=0) - R(k), raw rates";
        meta["d_eta"] = "eta_max(k=0) - eta_max(k), dB";
        meta["format"] = format;
        meta["rows"] = rows.size();
        meta["config"] = to_json(cfg);
        write_file(*path + ".meta.json", meta.dump(2) + "\n");
    }
    return exit_ok;
}

int cmd_table1(const RunConfig& cfg, const RunOptions& options, std::ostream& out) {
    const auto p = params_at(cfg);
    ojson matrix;
    ojson grids;
    for (NoisePoint point : {NoisePoint::prep_shared, NoisePoint::prep_signal, NoisePoint::leakage,
                             NoisePoint::detection}) {
        const std::string name(to_string(point));
        ojson grid;
        for (Direction d : {Direction::direct, Direction::reverse}) {
            const auto result = trusted_noise_viability(p, point, d);
            const std::string dir(to_string(d));
            matrix[name][dir] = std::string(to_string(result.verdict));
            grid["noise"] = result.noise;
            grid["R_" + dir] = result.rate;
        }
        grids[name] = grid;
    }
    ojson j;
    j["params"] = params_to_json(p);
    j["matrix"] = matrix;
    j["grids"] = grids;
    j["threshold"] = viability_threshold;
    emit(cfg, options, out, j.dump(2) + "\n");
    return exit_ok;
}

int cmd_mc(const RunConfig& cfg, const RunOptions& options, std::ostream& out) {
    if (!cfg.mc) {
        throw Error(Errc::invalid_argument, "config key 'mc': block missing");
    }
    if (cfg.mc->n < min_estimation_samples) {
        throw Error(Errc::invalid_argument, "config key 'mc.n': must be >= " +
                                                std::to_string(min_estimation_samples));
    }
    const auto p = params_at(cfg);
    const std::uint64_t seed = options.seed.value_or(cfg.mc->seed);
    ConsistencyOptions copts;
    copts.assume_no_leakage = options.assume_no_leakage;
    const auto report = end_to_end_consistency(p, cfg.mc->n, seed, copts);

    ojson j;
    j["seed"] = seed;
    j["generator"] = std::string(sampler_algorithm);
    j["assume_no_leakage"] = options.assume_no_leakage;
    j["direction"] = std::string(to_string(options.direction));
    j["true_params"] = params_to_json(p);
    const auto fields = consistency_to_json(report);
    for (const auto& [key, value] : fields.items()) {
        j[key] = value;
    }
    emit(cfg, options, out, j.dump(2) + "\n");

    for (Direction d : {Direction::direct, Direction::reverse}) {
        if (selects(options.direction, d) && report.verdict_in(d) == Verdict::overestimates_key) {
            return exit_insecure;
        }
    }
    return exit_ok;
}

} // namespace cvql::run
