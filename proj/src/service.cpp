#include "sonofield/service.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "sonofield/audio_mask.hpp"
#include "sonofield/error.hpp"

namespace sonofield {

using nlohmann::json;

namespace {

HttpResult error(int status, const std::string& message) {
    return {status, json{{"error", message}}.dump()};
}

struct NotFound : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const NeuralTransferField& model_or_throw(const ServiceState& state, const json& j) {
    if (!j.contains("model") || !j["model"].is_string()) {
        if (state.models().size() == 1) return *state.models().begin()->second;
        throw UsageError("model: missing model id");
    }
    const std::string id = j["model"].get<std::string>();
    const NeuralTransferField* f = state.find(id);
    if (!f) throw NotFound("unknown model '" + id + "'");
    return *f;
}

double number(const json& j, const char* name) {
    if (!j.is_number()) throw UsageError(std::string(name) + ": expected a number");
    return j.get<double>();
}

std::vector<double> numbers(const json& j, const char* name) {
    if (!j.is_array()) throw UsageError(std::string(name) + ": expected an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const json& x : j) out.push_back(number(x, name));
    return out;
}

double parse_double(const std::string& s, const char* name) {
    const char* b = s.c_str();
    char* e = nullptr;
    const double x = std::strtod(b, &e);
    if (e == b || *e != '\0') throw UsageError(std::string(name) + ": '" + s + "' is not a number");
    return x;
}

std::vector<double> parse_csv(const std::string& s, const char* name) {
    std::vector<double> out;
    if (s.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = s.find(',', start);
        out.push_back(parse_double(s.substr(start, comma - start), name));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

json to_json_values(std::span<const double> xs) {
    json a = json::array();
    for (double x : xs) a.push_back(x);
    return a;
}

template <typename Fn>
HttpResult guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const NotFound& e) {
        return error(404, e.what());
    } catch (const json::exception& e) {
        return error(400, std::string("malformed request: ") + e.what());
    } catch (const UsageError& e) {
        return error(400, e.what());
    } catch (const DataError& e) {
        return error(400, e.what());
    }
}

}  // namespace

void ServiceState::add(std::string id, NeuralTransferField field) {
    if (models_.contains(id)) throw UsageError("duplicate model id '" + id + "'");
    models_.emplace(std::move(id), std::make_shared<const NeuralTransferField>(std::move(field)));
}

ServiceState ServiceState::from_files(const std::vector<std::filesystem::path>& paths) {
    if (paths.empty()) throw UsageError("serve needs at least one model file");
    ServiceState s;
    for (const auto& p : paths) s.add(p.stem().string(), NeuralTransferField::load(p));
    return s;
}

const NeuralTransferField* ServiceState::find(const std::string& id) const {
    const auto it = models_.find(id);
    return it == models_.end() ? nullptr : it->second.get();
}

HttpResult handle_meta(const ServiceState& state) {
    json models = json::array();
    for (const auto& [id, f] : state.models()) {
        const FieldMeta& m = f->meta();
        json ranges = json::array();
        for (std::size_t i = 0; i < m.labels.size(); ++i) ranges.push_back({0.0, 1.0});
        models.push_back({{"id", id},
                          {"scene", m.scene.id},
                          {"labels", m.labels},
                          {"condition_ranges", ranges},
                          {"f_range", {m.f_min, m.f_max}},
                          {"r_range", {m.r_min, m.r_max}},
                          {"origin", {m.origin.x(), m.origin.y(), m.origin.z()}},
                          {"outputs", f->outputs()},
                          {"provenance", m.provenance}});
    }
    return {200, json{{"models", models}}.dump()};
}

HttpResult handle_query(const ServiceState& state, const std::string& body) {
    return guarded([&]() -> HttpResult {
        const json j = json::parse(body);
        if (!j.is_object()) throw UsageError("request body must be a JSON object");
        const NeuralTransferField& field = model_or_throw(state, j);
        for (const char* key : {"theta", "phi", "r", "f", "v"})
            if (!j.contains(key)) throw UsageError(std::string(key) + ": missing");
        std::vector<NeuralTransferField::Query> qs;
        if (j["theta"].is_array()) {
            const auto th = numbers(j["theta"], "theta"), ph = numbers(j["phi"], "phi"), r = numbers(j["r"], "r"),
                       f = numbers(j["f"], "f");
            const std::size_t n = th.size();
            if (ph.size() != n || r.size() != n || f.size() != n)
                throw UsageError("theta, phi, r and f arrays must have equal length");
            const json& v = j["v"];
            // one shared condition vector, or one per query
            const bool shared = v.is_array() && (v.empty() || !v.front().is_array());
            if (!shared && (!v.is_array() || v.size() != n))
                throw UsageError("v: expected one vector or one per query");
            qs.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                qs[i] = {th[i], ph[i], r[i], shared ? numbers(v, "v") : numbers(v[i], "v"), f[i]};
        } else {
            qs.push_back({number(j["theta"], "theta"), number(j["phi"], "phi"), number(j["r"], "r"),
                          numbers(j["v"], "v"), number(j["f"], "f")});
        }
        if (!field.trained()) throw UsageError("model has not been trained");
        const std::vector<double> p = field.forward_batch(qs);
        return {200, json{{"p", to_json_values(p)}, {"outputs", field.outputs()}, {"count", qs.size()}}.dump()};
    });
}

HttpResult handle_ffat(const ServiceState& state, const std::map<std::string, std::string>& params) {
    return guarded([&]() -> HttpResult {
        json req = json::object();
        if (params.contains("model")) req["model"] = params.at("model");
        const NeuralTransferField& field = model_or_throw(state, req);
        auto get = [&](const char* k) -> const std::string& {
            const auto it = params.find(k);
            if (it == params.end()) throw UsageError(std::string(k) + ": missing");
            return it->second;
        };
        const double f = parse_double(get("f"), "f");
        const std::vector<double> v = params.contains("v") ? parse_csv(params.at("v"), "v") : std::vector<double>{};
        const double r = params.contains("r") ? parse_double(params.at("r"), "r")
                                              : 0.5 * (field.meta().r_min + field.meta().r_max);
        auto int_param = [&](const char* k, int fallback) {
            if (!params.contains(k)) return fallback;
            const double x = parse_double(params.at(k), k);
            if (x != std::floor(x) || x < 2 || x > 4096) throw UsageError(std::string(k) + ": expected an integer in [2, 4096]");
            return static_cast<int>(x);
        };
        const int w = int_param("w", 64), h = int_param("h", 32);
        const int channel = params.contains("channel") ? static_cast<int>(parse_double(params.at("channel"), "channel")) : 0;
        const FfatMap map = field.predict_map(v, f, r, w, h, channel);
        return {200, json{{"width", map.width},
                          {"height", map.height},
                          {"radius", map.radius},
                          {"frequency", map.frequency},
                          {"values", to_json_values(map.values)}}
                         .dump()};
    });
}

HttpResult handle_mask(const ServiceState& state, const std::string& body) {
    return guarded([&]() -> HttpResult {
        const json j = json::parse(body);
        if (!j.is_object()) throw UsageError("request body must be a JSON object");
        const NeuralTransferField& field = model_or_throw(state, j);
        if (!j.contains("trajectory") || !j["trajectory"].is_array() || j["trajectory"].empty())
            throw UsageError("trajectory: expected a non-empty array");
        Trajectory traj;
        for (const json& p : j["trajectory"]) {
            if (!p.is_object()) throw UsageError("trajectory: entries must be objects");
            for (const char* key : {"theta", "phi", "r", "v"})
                if (!p.contains(key)) throw UsageError(std::string("trajectory.") + key + ": missing");
            traj.push_back({numbers(p["v"], "v"),
                            {number(p["theta"], "theta"), number(p["phi"], "phi"), number(p["r"], "r")}});
        }
        const int bins = j.contains("mask_bins") ? static_cast<int>(number(j["mask_bins"], "mask_bins")) : 64;
        const double f_max = j.contains("f_max") ? number(j["f_max"], "f_max") : std::min(8000.0, field.meta().f_max);
        const int channel = j.contains("channel") ? static_cast<int>(number(j["channel"], "channel")) : 0;
        std::size_t frames = traj.size();
        if (j.contains("frames")) {
            const double fr = number(j["frames"], "frames");
            if (fr < 1 || fr != std::floor(fr)) throw UsageError("frames: expected a positive integer");
            frames = static_cast<std::size_t>(fr);
            traj = resample_trajectory(traj, frames);
        }
        const TransferMask m = build_mask(field, traj, frames, bins, f_max, channel);
        json values = json::array();
        for (float x : m.values) values.push_back(static_cast<double>(x));
        return {200, json{{"frames", m.frames}, {"mask_bins", m.mask_bins}, {"f_max", m.f_max}, {"values", values}}
                         .dump()};
    });
}

int default_port(int fallback) {
    if (const char* env = std::getenv("SONOFIELD_PORT")) {
        char* end = nullptr;
        const long p = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || p < 1 || p > 65535)
            throw UsageError(std::string("SONOFIELD_PORT is not a valid port: ") + env);
        return static_cast<int>(p);
    }
    return fallback;
}

void serve(const ServiceState& state, const ServeOptions& options) {
    httplib::Server server;
    auto reply = [](httplib::Response& res, const HttpResult& r) {
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    server.Get("/meta", [&](const httplib::Request&, httplib::Response& res) { reply(res, handle_meta(state)); });
    server.Post("/query", [&](const httplib::Request& req, httplib::Response& res) {
        reply(res, handle_query(state, req.body));
    });
    server.Get("/ffat", [&](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> params;
        for (const auto& [k, v] : req.params) params[k] = v;
        reply(res, handle_ffat(state, params));
    });
    server.Post("/mask", [&](const httplib::Request& req, httplib::Response& res) {
        reply(res, handle_mask(state, req.body));
    });
    if (options.ui_dir) {
        if (!std::filesystem::is_directory(*options.ui_dir))
            throw UsageError("UI directory " + options.ui_dir->string() + " does not exist");
        server.set_mount_point("/ui", options.ui_dir->string());
    }
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) res.set_content(json{{"error", "not found"}}.dump(), "application/json");
    });
    int port = options.port;
    if (port == 0) port = server.bind_to_any_port(options.host);
    else if (!server.bind_to_port(options.host, port)) port = -1;
    if (port < 0) throw UsageError("cannot bind " + options.host + ":" + std::to_string(options.port));
    if (options.on_ready) options.on_ready(port, [&server] { server.stop(); });
    server.listen_after_bind();
}

}  // namespace sonofield
