#include "cbr/repository.hpp"

#include <algorithm>
#include <cctype>

#include "cbr/error.hpp"

namespace cbr {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// SchemaRegistry
// ---------------------------------------------------------------------------

SchemaRegistry::SchemaRegistry() { add(student_schema()); }

void SchemaRegistry::add(CaseSchema schema) {
    auto id = schema.id();
    schemas_.insert_or_assign(std::move(id), std::move(schema));
}

void SchemaRegistry::load_directory(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) return;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir, ec))
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        try {
            add(define_schema_text(read_file(f)));
        } catch (const Error& e) {
            throw Error(e.kind(), f.filename().string() + ": " + e.what());
        }
    }
}

const CaseSchema* SchemaRegistry::find(const std::string& id) const {
    auto it = schemas_.find(id);
    return it == schemas_.end() ? nullptr : &it->second;
}

const CaseSchema& SchemaRegistry::get(const std::string& id) const {
    if (const auto* s = find(id)) return *s;
    throw not_found("schema '" + id + "' not found");
}

std::vector<std::string> SchemaRegistry::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : schemas_) out.push_back(id);
    return out;
}

CaseSchema resolve_schema(const std::string& ref) {
    constexpr std::string_view prefix = "builtin:";
    std::string name = ref;
    if (ref.rfind(prefix, 0) == 0) {
        name = ref.substr(prefix.size());
    } else {
        std::error_code ec;
        if (fs::is_regular_file(ref, ec)) return define_schema_text(read_file(ref));
    }
    SchemaRegistry builtins;
    if (const auto* s = builtins.find(name)) return *s;
    throw not_found("schema '" + ref + "' is neither a file nor a bundled schema");
}

// ---------------------------------------------------------------------------
// LiveCaseBase
// ---------------------------------------------------------------------------

LiveCaseBase::LiveCaseBase(std::string id, fs::path path, CaseBase initial)
    : id_(std::move(id)), path_(std::move(path)), head_(std::make_shared<const CaseBase>(std::move(initial))) {}

std::shared_ptr<const CaseBase> LiveCaseBase::snapshot() const {
    std::lock_guard lock(mutex_);
    return head_;
}

bool LiveCaseBase::retain(const Case& c) {
    std::lock_guard lock(mutex_);
    const bool existed = head_->find(c.id) != nullptr;
    head_ = std::make_shared<const CaseBase>(retain_case(*head_, c));
    dirty_ = true;
    return existed;
}

void LiveCaseBase::flush() {
    std::lock_guard lock(mutex_);
    if (!dirty_) return;
    save(*head_, path_, Format::Json);
    dirty_ = false;
}

bool LiveCaseBase::dirty() const {
    std::lock_guard lock(mutex_);
    return dirty_;
}

// ---------------------------------------------------------------------------
// CaseBaseStore
// ---------------------------------------------------------------------------

bool is_valid_store_id(const std::string& id) {
    if (id.empty() || id.size() > 128) return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char ch) {
        return std::isalnum(ch) || ch == '_' || ch == '-' || ch == '.';
    }) && id.front() != '.';
}

CaseBaseStore::CaseBaseStore(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    if (!fs::is_directory(dir_, ec)) throw io_error("data directory '" + dir_.string() + "' is not a directory");
    fs::directory_iterator probe(dir_, ec);
    if (ec) throw io_error("data directory '" + dir_.string() + "' is not readable: " + ec.message());
    schemas_.load_directory(dir_ / "schemas");
}

fs::path CaseBaseStore::path_for(const std::string& id) const { return dir_ / (id + ".json"); }

std::vector<std::string> CaseBaseStore::list() const {
    std::vector<std::string> ids;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir_, ec)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        auto stem = entry.path().stem().string();
        if (is_valid_store_id(stem)) ids.push_back(std::move(stem));
    }
    {
        std::lock_guard lock(mutex_);
        for (const auto& [id, _] : loaded_) ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

bool CaseBaseStore::contains(const std::string& id) const {
    if (!is_valid_store_id(id)) return false;
    {
        std::lock_guard lock(mutex_);
        if (loaded_.count(id)) return true;
    }
    std::error_code ec;
    return fs::is_regular_file(path_for(id), ec);
}

std::shared_ptr<LiveCaseBase> CaseBaseStore::open(const std::string& id) {
    if (!is_valid_store_id(id)) throw not_found("case base '" + id + "' not found");
    std::lock_guard lock(mutex_);
    if (auto it = loaded_.find(id); it != loaded_.end()) return it->second;

    const auto path = path_for(id);
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw not_found("case base '" + id + "' not found");
    const auto text = read_file(path);
    const auto& schema = schemas_.get(peek_schema_id(text));
    CaseBase base = [&] {
        try {
            return parse_json(text, schema);
        } catch (const Error& e) {
            throw Error(e.kind(), path.filename().string() + ": " + e.what());
        }
    }();
    auto live = std::make_shared<LiveCaseBase>(id, path, std::move(base));
    loaded_.emplace(id, live);
    return live;
}

std::shared_ptr<LiveCaseBase> CaseBaseStore::create(const std::string& id, const CaseBase& base) {
    if (!is_valid_store_id(id)) throw validation_error("invalid case base id '" + id + "'");
    if (!schemas_.find(base.schema_id()))
        throw validation_error("schema '" + base.schema_id() + "' is not registered in this store");
    std::lock_guard lock(mutex_);
    const auto path = path_for(id);
    std::error_code ec;
    if (loaded_.count(id) || fs::exists(path, ec)) throw illegal_state("case base '" + id + "' already exists");
    save(base, path, Format::Json);
    auto live = std::make_shared<LiveCaseBase>(id, path, base);
    loaded_.emplace(id, live);
    return live;
}

void CaseBaseStore::flush_all() {
    std::vector<std::shared_ptr<LiveCaseBase>> bases;
    {
        std::lock_guard lock(mutex_);
        for (const auto& [_, b] : loaded_) bases.push_back(b);
    }
    for (const auto& b : bases) b->flush();
}

}  // namespace cbr
