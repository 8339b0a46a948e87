#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sonofield/neural_field.hpp"

namespace sonofield {

/// Loaded models keyed by id (file stem). Immutable after construction.
class ServiceState {
public:
    void add(std::string id, NeuralTransferField field);
    static ServiceState from_files(const std::vector<std::filesystem::path>& paths);

    [[nodiscard]] const NeuralTransferField* find(const std::string& id) const;
    [[nodiscard]] const std::map<std::string, std::shared_ptr<const NeuralTransferField>>& models() const {
        return models_;
    }

private:
    std::map<std::string, std::shared_ptr<const NeuralTransferField>> models_;
};

struct HttpResult {
    int status = 200;
    std::string body;  // JSON
};

// Request handlers. Pure functions of (state, request); errors come back as
// {"error": ...} with 400 (bad input) or 404 (unknown model).
HttpResult handle_meta(const ServiceState& state);
HttpResult handle_query(const ServiceState& state, const std::string& body);
HttpResult handle_ffat(const ServiceState& state, const std::map<std::string, std::string>& params);
HttpResult handle_mask(const ServiceState& state, const std::string& body);

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::optional<std::filesystem::path> ui_dir;  // mounted under /ui
    /// Called once bound (port 0 picks a free port) with a thread-safe stop.
    std::function<void(int port, std::function<void()> stop)> on_ready;
};

/// Port from SONOFIELD_PORT, else `fallback`.
int default_port(int fallback = 8080);

/// Blocks until the process is stopped.
void serve(const ServiceState& state, const ServeOptions& options);

}  // namespace sonofield
