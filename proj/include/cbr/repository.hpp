#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "cbr/case_base.hpp"

namespace cbr {

/// Schemas known by id: the bundled student schema plus any schema
/// documents found in a directory.
class SchemaRegistry {
public:
    SchemaRegistry();

    /// Loads every *.json file in `dir` as a schema document.
    void load_directory(const std::filesystem::path& dir);
    void add(CaseSchema schema);

    /// Throws Error(NotFound).
    const CaseSchema& get(const std::string& id) const;
    const CaseSchema* find(const std::string& id) const;
    std::vector<std::string> ids() const;

private:
    std::map<std::string, CaseSchema> schemas_;
};

/// Resolves a schema argument: a path to a schema document, or the name of
/// a bundled schema ("student", optionally written "builtin:student").
CaseSchema resolve_schema(const std::string& ref);

/// The live, mutable head of one named case base. Readers take immutable
/// snapshots; retains are serialized by a writer lock and replace the head.
class LiveCaseBase {
public:
    LiveCaseBase(std::string id, std::filesystem::path path, CaseBase initial);

    const std::string& id() const { return id_; }
    const std::filesystem::path& path() const { return path_; }

    std::shared_ptr<const CaseBase> snapshot() const;

    /// Returns true when the id already existed (replacement).
    bool retain(const Case& c);

    /// Saves to disk if anything was retained since the last flush.
    void flush();
    bool dirty() const;

private:
    std::string id_;
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::shared_ptr<const CaseBase> head_;
    bool dirty_ = false;
};

/// Directory-backed registry of named case bases (the persistence layer).
///
/// Layout:
///   <dir>/<caseBaseId>.json   case bases, JSON format
///   <dir>/schemas/*.json      additional schema documents
class CaseBaseStore {
public:
    /// Throws Error(Io) when `dir` is not a readable directory.
    explicit CaseBaseStore(std::filesystem::path dir);

    const std::filesystem::path& directory() const { return dir_; }
    const SchemaRegistry& schemas() const { return schemas_; }

    std::vector<std::string> list() const;
    bool contains(const std::string& id) const;

    /// Loads the case base on first use. Throws Error(NotFound) for an unknown id.
    std::shared_ptr<LiveCaseBase> open(const std::string& id);

    /// Registers and writes a new case base. Throws Error(IllegalState) if
    /// the id is taken.
    std::shared_ptr<LiveCaseBase> create(const std::string& id, const CaseBase& base);

    /// Flushes every loaded case base.
    void flush_all();

private:
    std::filesystem::path path_for(const std::string& id) const;

    std::filesystem::path dir_;
    SchemaRegistry schemas_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<LiveCaseBase>> loaded_;
};

/// Case-base ids double as file names: [A-Za-z0-9_.-], at most 128 chars,
/// no leading dot.
bool is_valid_store_id(const std::string& id);

}  // namespace cbr
