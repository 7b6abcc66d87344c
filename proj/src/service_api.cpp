#include "cbr/service_api.hpp"

#include <cstdlib>
#include <functional>

#include <httplib.h>

#include "cbr/formative_eval.hpp"

namespace cbr {

std::string_view to_string(ApiCode code) {
    switch (code) {
        case ApiCode::BadRequest: return "bad_request";
        case ApiCode::NotFound: return "not_found";
        case ApiCode::IllegalState: return "illegal_state";
        case ApiCode::ValidationFailed: return "validation_failed";
        case ApiCode::IoError: return "io_error";
    }
    return "io_error";
}

int http_status(ApiCode code) {
    switch (code) {
        case ApiCode::BadRequest: return 400;
        case ApiCode::NotFound: return 404;
        case ApiCode::IllegalState: return 409;
        case ApiCode::ValidationFailed: return 422;
        case ApiCode::IoError: return 500;
    }
    return 500;
}

ApiCode api_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Parse: return ApiCode::BadRequest;
        case ErrorKind::Validation: return ApiCode::ValidationFailed;
        case ErrorKind::NotFound: return ApiCode::NotFound;
        case ErrorKind::IllegalState: return ApiCode::IllegalState;
        case ErrorKind::Io: return ApiCode::IoError;
    }
    return ApiCode::IoError;
}

Json api_error_body(ApiCode code, const std::string& message, const Json& detail) {
    Json body{{"code", std::string(to_string(code))}, {"message", message}};
    if (!detail.is_null()) body["detail"] = detail;
    return body;
}

void apply_env(ServiceConfig& config) {
    auto env = [](const char* name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name); v && *v) return std::string(v);
        return std::nullopt;
    };
    if (auto v = env("CASEBASE_DATA")) config.data_dir = *v;
    try {
        if (auto v = env("CASEBASE_PORT")) config.port = std::stoi(*v);
        if (auto v = env("CASEBASE_SESSION_TIMEOUT")) config.session_timeout = std::chrono::seconds(std::stol(*v));
        if (auto v = env("CASEBASE_DEFAULT_K")) config.default_k = std::stoul(*v);
    } catch (const std::exception&) {
        throw parse_error("malformed numeric CASEBASE_* environment variable");
    }
    if (auto v = env("CASEBASE_TOKEN")) config.bearer_token = *v;
}

Json results_to_json(const std::vector<RetrievalResult>& results) {
    Json out = Json::array();
    for (const auto& r : results) out.push_back({{"caseId", r.case_id}, {"score", r.score}});
    return out;
}

Json session_to_json(const Session& s) {
    Json j{{"id", s.id()}, {"caseBaseId", s.case_base_id()}, {"state", std::string(to_string(s.state()))}};
    j["k"] = s.requested_k() ? Json(s.requested_k()) : Json(nullptr);
    j["query"] = s.query() ? values_to_json(s.query()->values) : Json(nullptr);
    j["results"] = s.results() ? results_to_json(*s.results()) : Json(nullptr);
    j["workingCase"] = s.working_case() ? case_to_json(*s.working_case()) : Json(nullptr);
    j["retainedId"] = s.retained_id() ? Json(*s.retained_id()) : Json(nullptr);
    j["replaced"] = s.retain_replaced();
    return j;
}

// ---------------------------------------------------------------------------

namespace {

struct Reply {
    int status = 200;
    Json body;
};

using Route = std::function<Reply(const httplib::Request&)>;

Json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    Json body;
    try {
        body = Json::parse(req.body);
    } catch (const Json::parse_error& e) {
        throw parse_error(std::string("request body is not valid JSON: ") + e.what());
    }
    if (!body.is_object()) throw parse_error("request body must be a JSON object");
    return body;
}

std::size_t read_k(const Json& body, std::size_t fallback) {
    if (!body.contains("k") || body.at("k").is_null()) return fallback;
    const auto& k = body.at("k");
    if (!k.is_number_integer() || k.get<long long>() < 1) throw parse_error("'k' must be a positive integer");
    return k.get<std::size_t>();
}

std::string read_string(const Json& body, const char* key) {
    if (!body.contains(key) || !body.at(key).is_string())
        throw parse_error(std::string("request needs a string '") + key + "'");
    return body.at(key).get<std::string>();
}

Query read_query(const Json& body, const CaseSchema& schema) {
    if (!body.contains("values")) throw parse_error("request needs a 'values' object");
    Query q{values_from_json(schema, body.at("values"))};
    validate_query(schema, q);
    return q;
}

Edits read_edits(const Json& body, const CaseSchema& schema) {
    Edits edits;
    if (!body.contains("edits")) return edits;
    const auto& obj = body.at("edits");
    if (!obj.is_object()) throw parse_error("'edits' must be a JSON object");
    for (const auto& [name, v] : obj.items()) {
        const auto& spec = schema.at(name);
        edits[name] = v.is_null() ? std::nullopt : std::optional<Value>(value_from_json(spec, v));
    }
    return edits;
}

}  // namespace

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      store_(config_.data_dir),
      sessions_(store_),
      server_(std::make_unique<httplib::Server>()) {
    if (config_.default_k == 0) throw validation_error("default k must be at least 1");
    // httplib's default enables SO_REUSEPORT, which lets a second server
    // share a busy port silently. Plain SO_REUSEADDR makes the bind fail.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    install_routes();
}

Service::~Service() { stop(); }

void Service::install_routes() {
    auto& svr = *server_;

    auto wrap = [this](Route route, bool public_route = false) {
        return [this, route = std::move(route), public_route](const httplib::Request& req, httplib::Response& res) {
            Reply reply;
            try {
                if (!public_route && !config_.bearer_token.empty() &&
                    req.get_header_value("Authorization") != "Bearer " + config_.bearer_token) {
                    reply = {401, Json{{"code", "unauthorized"}, {"message", "missing or wrong bearer token"}}};
                } else {
                    reply = route(req);
                }
            } catch (const Error& e) {
                const auto code = api_code(e.kind());
                reply = {http_status(code), api_error_body(code, e.what())};
            } catch (const Json::exception& e) {
                reply = {400, api_error_body(ApiCode::BadRequest, e.what())};
            } catch (const std::exception& e) {
                reply = {500, api_error_body(ApiCode::IoError, e.what())};
            }
            res.status = reply.status;
            res.set_content(reply.body.dump(), "application/json");
        };
    };

    svr.Get("/health", wrap([](const httplib::Request&) { return Reply{200, {{"status", "ok"}}}; }, true));

    // --- schemas ---------------------------------------------------------
    svr.Get("/schemas", wrap([this](const httplib::Request&) {
                Json list = Json::array();
                for (const auto& id : store_.schemas().ids()) list.push_back(schema_to_json(store_.schemas().get(id)));
                return Reply{200, {{"schemas", list}}};
            }));
    svr.Get(R"(/schemas/([^/]+))", wrap([this](const httplib::Request& req) {
                return Reply{200, schema_to_json(store_.schemas().get(req.matches[1]))};
            }));

    // --- case bases --------------------------------------------------------
    svr.Get("/casebases", wrap([this](const httplib::Request&) {
                return Reply{200, {{"caseBases", store_.list()}}};
            }));
    svr.Post("/casebases", wrap([this](const httplib::Request& req) {
                 if (!req.has_param("id")) throw parse_error("query parameter 'id' is required");
                 const auto id = req.get_param_value("id");
                 const auto type = req.get_header_value("Content-Type");
                 bool is_csv = type.find("csv") != std::string::npos;
                 if (type.find("json") == std::string::npos && !is_csv) {
                     auto first = req.body.find_first_not_of(" \t\r\n");
                     is_csv = first == std::string::npos || req.body[first] != '{';
                 }
                 std::optional<CaseBase> base;
                 if (is_csv) {
                     if (!req.has_param("schema")) throw parse_error("CSV upload needs a 'schema' query parameter");
                     base = parse_csv(req.body, store_.schemas().get(req.get_param_value("schema")));
                 } else {
                     base = parse_json(req.body, store_.schemas().get(peek_schema_id(req.body)));
                 }
                 store_.create(id, *base);
                 return Reply{201, {{"id", id}, {"schemaId", base->schema_id()}, {"size", base->size()}}};
             }));
    svr.Get(R"(/casebases/([^/]+)/cases)", wrap([this](const httplib::Request& req) {
                return Reply{200, case_base_to_json(*store_.open(req.matches[1])->snapshot())};
            }));
    svr.Get(R"(/casebases/([^/]+)/cases/([^/]+))", wrap([this](const httplib::Request& req) {
                auto snap = store_.open(req.matches[1])->snapshot();
                return Reply{200, case_to_json(get_case(*snap, std::string(req.matches[2])))};
            }));
    svr.Post(R"(/casebases/([^/]+)/predict)", wrap([this](const httplib::Request& req) {
                 auto snap = store_.open(req.matches[1])->snapshot();
                 const auto body = parse_body(req);
                 const auto query = read_query(body, snap->schema());
                 const auto dist = predict_final_grade(*snap, query, read_k(body, config_.default_k));
                 return Reply{200,
                              {{"distribution", distribution_to_json(dist)},
                               {"feedback", generate_feedback(snap->schema(), dist, query)}}};
             }));
    svr.Post(R"(/casebases/([^/]+)/evaluate)", wrap([this](const httplib::Request& req) {
                 auto snap = store_.open(req.matches[1])->snapshot();
                 const auto body = parse_body(req);
                 return Reply{200, loo_report_to_json(leave_one_out(*snap, read_k(body, config_.default_k)))};
             }));

    // --- sessions -----------------------------------------------------------
    svr.Post("/sessions", wrap([this](const httplib::Request& req) {
                 const auto id = sessions_.start(read_string(parse_body(req), "caseBaseId"));
                 Json out;
                 sessions_.with_session(id, [&](Session& s) { out = session_to_json(s); });
                 return Reply{201, out};
             }));
    svr.Get(R"(/sessions/([^/]+))", wrap([this](const httplib::Request& req) {
                Json out;
                sessions_.with_session(req.matches[1], [&](Session& s) { out = session_to_json(s); });
                return Reply{200, out};
            }));

    auto session_op = [this](std::function<void(Session&, const Json&)> op) {
        return [this, op = std::move(op)](const httplib::Request& req) {
            const auto body = parse_body(req);
            Json out;
            sessions_.with_session(req.matches[1], [&](Session& s) {
                op(s, body);
                out = session_to_json(s);
            });
            return Reply{200, out};
        };
    };

    svr.Post(R"(/sessions/([^/]+)/query)", wrap(session_op([this](Session& s, const Json& body) {
                 // State before payload: an illegal call is a 409 whatever its body.
                 s.require_legal(SessionOp::SubmitQuery);
                 s.submit_query(read_query(body, s.schema()), read_k(body, config_.default_k));
             })));
    svr.Post(R"(/sessions/([^/]+)/choose)", wrap(session_op([](Session& s, const Json& body) {
                 s.require_legal(SessionOp::ChooseCase);
                 s.choose_case(read_string(body, "caseId"));
             })));
    svr.Post(R"(/sessions/([^/]+)/revise)", wrap(session_op([](Session& s, const Json& body) {
                 s.require_legal(SessionOp::Revise);
                 s.revise(read_edits(body, s.schema()));
             })));
    svr.Post(R"(/sessions/([^/]+)/retain)", wrap(session_op([](Session& s, const Json& body) {
                 s.require_legal(SessionOp::Retain);
                 s.retain(read_string(body, "newId"));
             })));
    svr.Delete(R"(/sessions/([^/]+))", wrap(session_op([](Session& s, const Json&) { s.close(); })));
}

int Service::bind() {
    if (port_ >= 0) return port_;
    if (config_.port == 0) {
        port_ = server_->bind_to_any_port(config_.host);
        if (port_ < 0) throw io_error("cannot bind to " + config_.host);
    } else {
        if (!server_->bind_to_port(config_.host, config_.port))
            throw io_error("cannot bind to " + config_.host + ":" + std::to_string(config_.port));
        port_ = config_.port;
    }
    return port_;
}

void Service::reaper_loop() {
    using namespace std::chrono;
    const auto interval = std::clamp(duration_cast<milliseconds>(config_.session_timeout / 4), milliseconds(10),
                                     milliseconds(5000));
    std::unique_lock lock(reaper_mutex_);
    while (!stopping_) {
        reaper_cv_.wait_for(lock, interval, [this] { return stopping_; });
        if (stopping_) break;
        lock.unlock();
        sessions_.reap_idle(config_.session_timeout);
        lock.lock();
    }
}

void Service::run() {
    bind();
    reaper_ = std::thread([this] { reaper_loop(); });
    server_->listen_after_bind();
}

int Service::start() {
    bind();
    reaper_ = std::thread([this] { reaper_loop(); });
    listener_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void Service::stop() {
    if (stopped_.exchange(true)) return;
    server_->stop();
    if (listener_.joinable()) listener_.join();
    {
        std::lock_guard lock(reaper_mutex_);
        stopping_ = true;
    }
    reaper_cv_.notify_all();
    if (reaper_.joinable()) reaper_.join();
    sessions_.close_all();
}

}  // namespace cbr
