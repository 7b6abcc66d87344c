#include "cbr/cli.hpp"

#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>

#include <pthread.h>

#include <CLI11.hpp>

#include "cbr/formative_eval.hpp"
#include "cbr/repository.hpp"
#include "cbr/service_api.hpp"

namespace cbr::cli {

namespace fs = std::filesystem;

int exit_status(ErrorKind kind) { return kind == ErrorKind::Io ? kIoError : kDataError; }

std::string format_score(double score) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", score);
    return buf;
}

Query parse_query_arg(const CaseSchema& schema, std::string_view text) {
    const auto first = text.find_first_not_of(" \t\n");
    Query q;
    if (first != std::string_view::npos && text[first] == '{') {
        Json doc;
        try {
            doc = Json::parse(text);
        } catch (const Json::parse_error& e) {
            throw parse_error(std::string("--query is not valid JSON: ") + e.what());
        }
        q.values = values_from_json(schema, doc);
    } else {
        std::size_t pos = 0;
        while (pos <= text.size()) {
            auto end = text.find(',', pos);
            if (end == std::string_view::npos) end = text.size();
            auto pair = text.substr(pos, end - pos);
            pos = end + 1;
            if (pair.find_first_not_of(" \t") == std::string_view::npos) continue;
            const auto eq = pair.find('=');
            if (eq == std::string_view::npos) throw parse_error("query term '" + std::string(pair) + "' is not key=value");
            auto trim = [](std::string_view s) {
                const auto b = s.find_first_not_of(" \t");
                const auto e = s.find_last_not_of(" \t");
                return b == std::string_view::npos ? std::string_view{} : s.substr(b, e - b + 1);
            };
            const auto key = std::string(trim(pair.substr(0, eq)));
            const auto value = trim(pair.substr(eq + 1));
            const auto& spec = schema.at(key);
            if (value.empty()) continue;  // blank means absent
            q.values.insert_or_assign(key, parse_value(spec, value));
        }
    }
    validate_query(schema, q);
    return q;
}

namespace {

fs::path locate(const fs::path& path) {
    std::error_code ec;
    if (fs::exists(path, ec) || path.is_absolute()) return path;
    if (const char* data = std::getenv("CASEBASE_DATA"); data && *data) {
        const fs::path dir(data);
        if (fs::exists(dir / path, ec)) return dir / path;
        auto with_ext = dir / path;
        with_ext += ".json";
        if (fs::exists(with_ext, ec)) return with_ext;
    }
    return path;
}

CaseSchema schema_for_json(const fs::path& file, const std::string& text) {
    const auto id = peek_schema_id(text);
    SchemaRegistry registry;
    std::vector<fs::path> dirs{file.parent_path() / "schemas"};
    if (const char* data = std::getenv("CASEBASE_DATA"); data && *data) dirs.emplace_back(fs::path(data) / "schemas");
    for (const auto& d : dirs) {
        if (registry.find(id)) break;
        registry.load_directory(d);
    }
    return registry.get(id);
}

}  // namespace

CaseBase load_case_base_arg(const fs::path& arg, const std::string& schema_ref) {
    const auto path = locate(arg);
    const auto format = format_from_path(path).value_or(Format::Json);
    if (format == Format::Csv) return load(path, Format::Csv, resolve_schema(schema_ref.empty() ? "student" : schema_ref));
    if (!schema_ref.empty()) return load(path, Format::Json, resolve_schema(schema_ref));
    const auto text = read_file(path);
    const auto schema = schema_for_json(path, text);
    try {
        return parse_json(text, schema);
    } catch (const Error& e) {
        throw Error(e.kind(), path.filename().string() + ": " + e.what());
    }
}

namespace {

void print_schema(const CaseSchema& schema, std::ostream& out) {
    out << "schema " << schema.id() << " (" << schema.size() << " attributes)\n";
    out << std::left << std::setw(24) << "name" << std::setw(13) << "type" << std::setw(15) << "group"
        << std::setw(8) << "weight"
        << "domain\n";
    for (const auto& a : schema.attributes()) {
        std::string domain;
        if (const auto* n = std::get_if<NumericType>(&a.type))
            domain = "[" + format_number(n->min) + ", " + format_number(n->max) + "]";
        else if (const auto* g = std::get_if<GradeType>(&a.type))
            for (std::size_t i = 0; i < g->scale.size(); ++i) domain += (i ? " < " : "") + g->scale[i];
        else if (const auto* c = std::get_if<CategoricalType>(&a.type))
            for (std::size_t i = 0; i < c->allowed.size(); ++i) domain += (i ? ", " : "{") + c->allowed[i];
        if (std::holds_alternative<CategoricalType>(a.type)) domain += "}";
        out << std::setw(24) << a.name << std::setw(13) << type_name(a.type) << std::setw(15) << to_string(a.group)
            << std::setw(8) << format_number(a.weight) << domain << '\n';
    }
}

void print_cases(const CaseBase& base, std::ostream& out) {
    const auto& attrs = base.schema().attributes();
    out << "id";
    for (const auto& a : attrs) out << '\t' << a.name;
    out << '\n';
    for (const auto& c : base.cases()) {
        out << c.id;
        for (const auto& a : attrs) {
            out << '\t';
            if (const auto* v = c.get(a.name))
                out << format_value(*v);
            else
                out << "-";
        }
        out << '\n';
    }
    out << base.size() << " case" << (base.size() == 1 ? "" : "s") << " (schema " << base.schema_id() << ")\n";
}

int serve(ServiceConfig config, std::ostream& out) {
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    // Block before any thread starts so only sigwait below sees them.
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    Service service(std::move(config));
    const int port = service.start();
    out << "serving " << service.config().data_dir.string() << " on http://" << service.config().host << ":" << port
        << std::endl;

    int sig = 0;
    sigwait(&signals, &sig);
    out << "shutting down (signal " << sig << "), flushing open sessions" << std::endl;
    service.stop();
    pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
    return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Case-based reasoning workbench: retrieve, reuse, revise and retain student cases", "cbr"};
    app.require_subcommand(1);

    // schema
    auto* schema_cmd = app.add_subcommand("schema", "Validate or show schema documents");
    schema_cmd->require_subcommand(1);
    std::string schema_file;
    auto* schema_validate = schema_cmd->add_subcommand("validate", "Check a schema document");
    schema_validate->add_option("file", schema_file, "Schema JSON file")->required();
    std::string builtin;
    std::string show_file;
    bool show_json = false;
    auto* schema_show = schema_cmd->add_subcommand("show", "Print a schema");
    auto* builtin_opt = schema_show->add_option("--builtin", builtin, "Bundled schema name (student)");
    schema_show->add_option("file", show_file, "Schema JSON file")->excludes(builtin_opt);
    schema_show->add_flag("--json", show_json, "Print the schema document");

    // casebase
    auto* cb_cmd = app.add_subcommand("casebase", "Import and inspect case bases");
    cb_cmd->require_subcommand(1);
    std::string import_csv, import_schema = "student", import_out;
    auto* cb_import = cb_cmd->add_subcommand("import", "Convert a CSV case base to canonical JSON");
    cb_import->add_option("csv", import_csv, "CSV file")->required();
    cb_import->add_option("--schema", import_schema, "Schema file or bundled name")->capture_default_str();
    cb_import->add_option("-o,--output", import_out, "Output JSON file")->required();
    std::string list_file, list_schema;
    bool list_json = false;
    auto* cb_list = cb_cmd->add_subcommand("list", "List the cases of a case base");
    cb_list->add_option("casebase", list_file, "Case base file (.json or .csv)")->required();
    cb_list->add_option("--schema", list_schema, "Schema file or bundled name");
    cb_list->add_flag("--json", list_json, "Print canonical JSON");

    // retrieve / predict / evaluate
    std::string base_file, base_schema, query_text;
    std::size_t k = kDefaultK;
    bool as_json = false;
    auto add_base = [&](CLI::App* cmd) {
        cmd->add_option("casebase", base_file, "Case base file (.json or .csv)")->required();
        cmd->add_option("--schema", base_schema, "Schema file or bundled name");
        cmd->add_option("-k", k, "Number of neighbors")->check(CLI::PositiveNumber)->capture_default_str();
        cmd->add_flag("--json", as_json, "Machine-readable output");
    };
    auto* retrieve_cmd = app.add_subcommand("retrieve", "Rank the k most similar cases");
    add_base(retrieve_cmd);
    retrieve_cmd->add_option("-q,--query", query_text, "JSON object or key=value,... pairs")->required();
    auto* predict_cmd = app.add_subcommand("predict", "Final-grade outlook and feedback for a partial case");
    add_base(predict_cmd);
    predict_cmd->add_option("-q,--query", query_text, "JSON object or key=value,... pairs")->required();
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Leave-one-out accuracy of the grade suggestion (JSON)");
    add_base(evaluate_cmd);

    // serve
    std::string data_dir;
    std::optional<int> port;
    std::optional<std::string> host, token;
    std::optional<long> timeout_seconds;
    std::optional<std::size_t> default_k;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--data", data_dir, "Case base directory (default: $CASEBASE_DATA)");
    serve_cmd->add_option("--port", port, "Port, 0 = any free port (default 8080)");
    serve_cmd->add_option("--host", host, "Bind address (default 127.0.0.1)");
    serve_cmd->add_option("--session-timeout", timeout_seconds, "Idle session timeout in seconds (default 1800)")
        ->check(CLI::PositiveNumber);
    serve_cmd->add_option("--default-k", default_k, "Default k (default 5)")->check(CLI::PositiveNumber);
    serve_cmd->add_option("--token", token, "Require this bearer token");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsageError;
    }

    try {
        if (schema_validate->parsed()) {
            const auto schema = define_schema_text(read_file(schema_file));
            out << "valid: schema " << schema.id() << " with " << schema.size() << " attributes\n";
            return kSuccess;
        }
        if (schema_show->parsed()) {
            if (builtin.empty() && show_file.empty()) {
                err << "schema show: give --builtin <name> or a schema file\n";
                return kUsageError;
            }
            const auto schema = show_file.empty() ? resolve_schema("builtin:" + builtin)
                                                  : define_schema_text(read_file(show_file));
            if (show_json)
                out << schema_to_json(schema).dump(2) << '\n';
            else
                print_schema(schema, out);
            return kSuccess;
        }
        if (cb_import->parsed()) {
            const auto base = load(import_csv, Format::Csv, resolve_schema(import_schema));
            save(base, import_out, Format::Json);
            err << "imported " << base.size() << " cases into " << import_out << '\n';
            return kSuccess;
        }
        if (cb_list->parsed()) {
            const auto base = load_case_base_arg(list_file, list_schema);
            if (list_json)
                out << to_json_text(base);
            else
                print_cases(base, out);
            return kSuccess;
        }
        if (retrieve_cmd->parsed()) {
            const auto base = load_case_base_arg(base_file, base_schema);
            const auto query = parse_query_arg(base.schema(), query_text);
            const auto results = retrieve_k(base, query, k);
            if (as_json) {
                out << Json{{"k", k}, {"results", results_to_json(results)}}.dump(2) << '\n';
            } else {
                out << std::left << std::setw(6) << "rank" << std::setw(16) << "caseId" << "score\n";
                for (std::size_t i = 0; i < results.size(); ++i)
                    out << std::setw(6) << i + 1 << std::setw(16) << results[i].case_id
                        << format_score(results[i].score) << '\n';
            }
            return kSuccess;
        }
        if (predict_cmd->parsed()) {
            const auto base = load_case_base_arg(base_file, base_schema);
            const auto query = parse_query_arg(base.schema(), query_text);
            const auto dist = predict_final_grade(base, query, k);
            const auto feedback = generate_feedback(base.schema(), dist, query);
            if (as_json) {
                out << Json{{"distribution", distribution_to_json(dist)}, {"feedback", feedback}}.dump(2) << '\n';
            } else {
                out << "neighbors:\n";
                for (const auto& nb : dist.neighbors)
                    out << "  " << std::left << std::setw(16) << nb.result.case_id << std::setw(16)
                        << format_score(nb.result.score) << nb.grade << '\n';
                out << "distribution:";
                for (auto it = dist.scale.rbegin(); it != dist.scale.rend(); ++it)
                    if (dist.counts.count(*it))
                        out << ' ' << *it << '=' << dist.counts.at(*it) << " ("
                            << format_number(std::round(dist.proportions.at(*it) * 1000) / 10) << "%)";
                out << "\nsuggestion: " << dist.suggestion << "\n\n" << feedback;
            }
            return kSuccess;
        }
        if (evaluate_cmd->parsed()) {
            const auto base = load_case_base_arg(base_file, base_schema);
            out << loo_report_to_json(leave_one_out(base, k)).dump(2) << '\n';
            return kSuccess;
        }
        if (serve_cmd->parsed()) {
            ServiceConfig config;
            apply_env(config);
            if (!data_dir.empty()) config.data_dir = data_dir;
            if (port) config.port = *port;
            if (host) config.host = *host;
            if (token) config.bearer_token = *token;
            if (timeout_seconds) config.session_timeout = std::chrono::seconds(*timeout_seconds);
            if (default_k) config.default_k = *default_k;
            if (config.data_dir.empty()) {
                err << "serve: no data directory (use --data or CASEBASE_DATA)\n";
                return kUsageError;
            }
            return serve(std::move(config), out);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_status(e.kind());
    }
    err << app.help();
    return kUsageError;
}

}  // namespace cbr::cli
