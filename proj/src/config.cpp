#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cvql/runner.hpp"

namespace cvql::run {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& key, const std::string& message) {
    throw Error(Errc::invalid_argument, "config key '" + key + "': " + message);
}

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    for (const auto& [name, value] : obj.items()) {
        if (allowed.count(name) == 0) {
            fail(where.empty() ? name : where + "." + name, "unknown key");
        }
    }
}

double number(const json& j, const std::string& key) {
    if (!j.is_number()) {
        fail(key, "expected a number");
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        fail(key, "must be finite");
    }
    return v;
}

std::uint64_t whole(const json& j, const std::string& key) {
    if (j.is_number_unsigned()) {
        return j.get<std::uint64_t>();
    }
    const double v = number(j, key);
    if (v < 0.0 || v != std::floor(v)) {
        fail(key, "expected a non-negative integer");
    }
    return static_cast<std::uint64_t>(v);
}

Sweep parse_sweep(const json& j, const std::string& key, bool allow_db) {
    reject_unknown(j, key, {"start", "stop", "points", "scale"});
    for (const char* required : {"start", "stop", "points"}) {
        if (!j.contains(required)) {
            fail(key + "." + required, "missing");
        }
    }
    Sweep s;
    s.start = number(j["start"], key + ".start");
    s.stop = number(j["stop"], key + ".stop");
    const auto points = whole(j["points"], key + ".points");
    if (points < 1 || points > 100000) {
        fail(key + ".points", "must lie in [1, 100000]");
    }
    s.points = static_cast<int>(points);
    if (j.contains("scale")) {
        if (!j["scale"].is_string()) {
            fail(key + ".scale", "expected a string");
        }
        s.scale = j["scale"].get<std::string>();
    }
    if (s.scale != "linear" && s.scale != "log" && s.scale != "dB") {
        fail(key + ".scale", "must be linear, dB or log");
    }
    if (s.scale == "dB" && !allow_db) {
        fail(key + ".scale", "dB applies to transmittances (eta_Ch, eta_D) only");
    }
    if (s.scale == "dB" && (s.start < 0.0 || s.stop < 0.0)) {
        fail(key, "attenuation in dB must be >= 0");
    }
    if (s.scale == "log" && !(s.start > 0.0 && s.stop > 0.0)) {
        fail(key, "log scale needs positive endpoints");
    }
    return s;
}

Field parse_field(const json& j, const std::string& key, bool allow_db) {
    if (j.is_object()) {
        return parse_sweep(j, key, allow_db);
    }
    return number(j, key);
}

bool is_transmittance(const std::string& key) { return key == "eta_Ch" || key == "eta_D"; }

json field_to_json(const Field& f) {
    if (const auto* v = std::get_if<double>(&f)) {
        return *v;
    }
    const auto& s = std::get<Sweep>(f);
    nlohmann::ordered_json j;
    j["start"] = s.start;
    j["stop"] = s.stop;
    j["points"] = s.points;
    j["scale"] = s.scale;
    return j;
}

void assign(ProtocolParams& p, const std::string& key, double value) {
    if (key == "V_M") p.modulation_variance = value;
    else if (key == "k") p.leakage = value;
    else if (key == "eta_Ch") p.channel_transmittance = value;
    else if (key == "eps_Ch") p.channel_noise = value;
    else if (key == "eta_D") p.detection_efficiency = value;
    else if (key == "eps_D") p.detection_noise = value;
    else if (key == "eps_P1") p.prep_noise_shared = value;
    else if (key == "eps_P2") p.prep_noise_signal = value;
    else if (key == "eps_L") p.leakage_noise = value;
    else if (key == "beta") p.reconciliation_efficiency = value;
    else if (key == "block_size") {
        if (value < 0.0) {
            fail("protocol.block_size", "must be >= 0");
        }
        p.block_size = static_cast<std::uint64_t>(std::llround(value));
    } else {
        fail("protocol." + key, "unknown key");
    }
}

} // namespace

std::vector<double> Sweep::values() const {
    std::vector<double> out;
    if (points == 1) {
        out.push_back(start);
        return out;
    }
    for (int i = 0; i < points; ++i) {
        const double t = static_cast<double>(i) / (points - 1);
        if (scale == "log") {
            out.push_back(std::exp(std::log(start) + t * (std::log(stop) - std::log(start))));
        } else {
            out.push_back(start + t * (stop - start));
        }
    }
    out.back() = stop;
    return out;
}

RunConfig parse_config(const json& doc) {
    if (!doc.is_object()) {
        fail("<root>", "expected an object");
    }
    reject_unknown(doc, "", {"protocol", "modulator", "outputs", "mc"});
    RunConfig cfg;

    if (doc.contains("protocol")) {
        const auto& proto = doc["protocol"];
        if (!proto.is_object()) {
            fail("protocol", "expected an object");
        }
        reject_unknown(proto, "protocol",
                       std::set<std::string>(protocol_keys.begin(), protocol_keys.end()));
        for (const auto& [name, value] : proto.items()) {
            cfg.protocol[name] = parse_field(value, "protocol." + name, is_transmittance(name));
        }
    }

    if (doc.contains("modulator")) {
        const auto& mod = doc["modulator"];
        if (!mod.is_object()) {
            fail("modulator", "expected an object");
        }
        reject_unknown(mod, "modulator", {"rho", "k_floor", "rho_convention"});
        ModulatorBlock block;
        if (mod.contains("rho")) {
            block.rho = parse_field(mod["rho"], "modulator.rho", false);
        }
        if (mod.contains("k_floor")) {
            block.k_floor = number(mod["k_floor"], "modulator.k_floor");
            if (block.k_floor < 0.0 || block.k_floor >= 1.0) {
                fail("modulator.k_floor", "must lie in [0, 1)");
            }
        }
        if (mod.contains("rho_convention")) {
            if (!mod["rho_convention"].is_string()) {
                fail("modulator.rho_convention", "expected a string");
            }
            try {
                block.rho_convention = parse_rho_convention(mod["rho_convention"].get<std::string>());
            } catch (const Error&) {
                fail("modulator.rho_convention", "must be amplitude10 or amplitude20");
            }
        }
        if (block.rho && cfg.protocol.count("k") != 0) {
            fail("modulator.rho", "conflicts with protocol.k; give one or the other");
        }
        cfg.modulator = block;
    }

    if (doc.contains("outputs")) {
        const auto& o = doc["outputs"];
        if (!o.is_object()) {
            fail("outputs", "expected an object");
        }
        reject_unknown(o, "outputs", {"path", "format"});
        OutputsBlock block;
        if (o.contains("path")) {
            if (!o["path"].is_string()) {
                fail("outputs.path", "expected a string");
            }
            block.path = o["path"].get<std::string>();
        }
        if (o.contains("format")) {
            if (!o["format"].is_string()) {
                fail("outputs.format", "expected a string");
            }
            block.format = o["format"].get<std::string>();
            if (*block.format != "csv" && *block.format != "json") {
                fail("outputs.format", "must be csv or json");
            }
        }
        cfg.outputs = block;
    }

    if (doc.contains("mc")) {
        const auto& m = doc["mc"];
        if (!m.is_object()) {
            fail("mc", "expected an object");
        }
        reject_unknown(m, "mc", {"n", "seed"});
        McBlock block;
        if (m.contains("n")) {
            block.n = whole(m["n"], "mc.n");
        }
        if (m.contains("seed")) {
            block.seed = whole(m["seed"], "mc.seed");
        }
        cfg.mc = block;
    }

    sweep_axis(cfg); // rejects multiple axes early
    return cfg;
}

RunConfig parse_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(Errc::invalid_argument, std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::invalid_argument, "cannot read config file '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
    nlohmann::ordered_json doc;
    if (!cfg.protocol.empty()) {
        nlohmann::ordered_json proto = nlohmann::ordered_json::object();
        for (const auto& key : protocol_keys) {
            if (auto it = cfg.protocol.find(key); it != cfg.protocol.end()) {
                proto[key] = field_to_json(it->second);
            }
        }
        doc["protocol"] = proto;
    }
    if (cfg.modulator) {
        nlohmann::ordered_json mod;
        if (cfg.modulator->rho) {
            mod["rho"] = field_to_json(*cfg.modulator->rho);
        }
        mod["k_floor"] = cfg.modulator->k_floor;
        mod["rho_convention"] = std::string(to_string(cfg.modulator->rho_convention));
        doc["modulator"] = mod;
    }
    if (cfg.outputs) {
        nlohmann::ordered_json o = nlohmann::ordered_json::object();
        if (cfg.outputs->path) {
            o["path"] = *cfg.outputs->path;
        }
        if (cfg.outputs->format) {
            o["format"] = *cfg.outputs->format;
        }
        doc["outputs"] = o;
    }
    if (cfg.mc) {
        doc["mc"] = {{"n", cfg.mc->n}, {"seed", cfg.mc->seed}};
    }
    if (doc.is_null()) {
        doc = nlohmann::ordered_json::object();
    }
    return doc;
}

std::optional<SweepAxis> sweep_axis(const RunConfig& cfg) {
    std::optional<SweepAxis> axis;
    auto consider = [&](const std::string& name, const Field& f) {
        if (const auto* s = std::get_if<Sweep>(&f)) {
            if (axis) {
                fail(name, "second sweep axis (already sweeping " + axis->name + ")");
            }
            axis = SweepAxis{name, *s};
        }
    };
    for (const auto& [name, field] : cfg.protocol) {
        consider(name, field);
    }
    if (cfg.modulator && cfg.modulator->rho) {
        consider("rho", *cfg.modulator->rho);
    }
    return axis;
}

ProtocolParams params_at(const RunConfig& cfg, std::optional<double> swept_value) {
    const auto axis = sweep_axis(cfg);
    if (axis && !swept_value) {
        fail(axis->name, "is a sweep; this command needs fixed parameters");
    }
    auto value_of = [&](const Field& f) {
        if (const auto* v = std::get_if<double>(&f)) {
            return *v;
        }
        const auto& s = std::get<Sweep>(f);
        return s.scale == "dB" ? std::pow(10.0, -*swept_value / 10.0) : *swept_value;
    };

    ProtocolParams p;
    for (const auto& [name, field] : cfg.protocol) {
        assign(p, name, value_of(field));
    }
    if (cfg.modulator && cfg.modulator->rho) {
        const double rho = value_of(*cfg.modulator->rho);
        p.leakage = rho_to_k(rho, cfg.modulator->k_floor, cfg.modulator->rho_convention);
    }
    return p;
}

DirectionChoice parse_direction(const std::string& text) {
    if (text == "dr") return DirectionChoice::dr;
    if (text == "rr") return DirectionChoice::rr;
    if (text == "both") return DirectionChoice::both;
    throw Error(Errc::invalid_argument, "--direction must be dr, rr or both");
}

std::string_view to_string(DirectionChoice d) noexcept {
    switch (d) {
    case DirectionChoice::dr: return "dr";
    case DirectionChoice::rr: return "rr";
    case DirectionChoice::both: return "both";
    }
    return "?";
}

} // namespace cvql::run
