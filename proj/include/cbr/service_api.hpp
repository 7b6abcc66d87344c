#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "cbr/cycle_engine.hpp"
#include "cbr/error.hpp"
#include "cbr/repository.hpp"

namespace httplib {
class Server;
}

namespace cbr {

/// Wire-level error codes.
enum class ApiCode { BadRequest, NotFound, IllegalState, ValidationFailed, IoError };

std::string_view to_string(ApiCode code);
int http_status(ApiCode code);
ApiCode api_code(ErrorKind kind);

/// {"code": ..., "message": ..., "detail"?: ...}
Json api_error_body(ApiCode code, const std::string& message, const Json& detail = nullptr);

struct ServiceConfig {
    std::filesystem::path data_dir;
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::chrono::milliseconds session_timeout = std::chrono::minutes(30);
    std::size_t default_k = kDefaultK;
    /// When non-empty every endpoint except /health requires
    /// "Authorization: Bearer <token>".
    std::string bearer_token;
};

/// Reads CASEBASE_DATA, CASEBASE_PORT, CASEBASE_SESSION_TIMEOUT (seconds),
/// CASEBASE_DEFAULT_K and CASEBASE_TOKEN into `config` where set.
void apply_env(ServiceConfig& config);

Json results_to_json(const std::vector<RetrievalResult>& results);
Json session_to_json(const Session& session);

/// JSON-over-HTTP front end for case bases, 4R sessions and formative
/// evaluation.
///
///   GET    /health
///   GET    /schemas, /schemas/{id}
///   GET    /casebases                       POST /casebases?id=..[&schema=..]
///   GET    /casebases/{id}/cases, /casebases/{id}/cases/{caseId}
///   POST   /casebases/{id}/predict  {values, k}
///   POST   /casebases/{id}/evaluate {k}
///   POST   /sessions {caseBaseId}           GET /sessions/{id}
///   POST   /sessions/{id}/query   {values, k}
///   POST   /sessions/{id}/choose  {caseId}
///   POST   /sessions/{id}/revise  {edits}
///   POST   /sessions/{id}/retain  {newId}
///   DELETE /sessions/{id}
class Service {
public:
    /// Throws Error(Io) if the data directory is unusable.
    explicit Service(ServiceConfig config);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds the listening socket; returns the bound port.
    /// Throws Error(Io) on bind failure.
    int bind();

    /// Serves on the calling thread until stop(). Binds first if needed.
    void run();

    /// Binds and serves on a background thread; returns the port.
    int start();

    /// Stops accepting requests and closes every open session, flushing
    /// retained cases. Idempotent.
    void stop();

    int port() const { return port_; }
    CaseBaseStore& store() { return store_; }
    SessionManager& sessions() { return sessions_; }
    const ServiceConfig& config() const { return config_; }

private:
    void install_routes();
    void reaper_loop();

    ServiceConfig config_;
    CaseBaseStore store_;
    SessionManager sessions_;
    std::unique_ptr<httplib::Server> server_;
    int port_ = -1;

    std::thread listener_;
    std::thread reaper_;
    std::mutex reaper_mutex_;
    std::condition_variable reaper_cv_;
    bool stopping_ = false;
    std::atomic<bool> stopped_{false};
};

}  // namespace cbr
