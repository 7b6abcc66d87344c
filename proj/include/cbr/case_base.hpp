#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cbr/case_model.hpp"
#include "cbr/similarity.hpp"

namespace cbr {

enum class Format { Csv, Json };

/// Infers the format from a file extension (.csv / .json).
std::optional<Format> format_from_path(const std::filesystem::path& path);

/// An immutable, validated collection of cases sharing one schema.
/// Case ids are unique and every case passes validate_case.
class CaseBase {
public:
    /// Throws Error(Validation) on a duplicate id or an invalid case.
    static CaseBase create(CaseSchema schema, std::vector<Case> cases = {});

    const CaseSchema& schema() const { return *schema_; }
    const std::string& schema_id() const { return schema_->id(); }
    const std::vector<Case>& cases() const { return cases_; }
    std::size_t size() const { return cases_.size(); }
    bool empty() const { return cases_.empty(); }

    const Case* find(std::string_view id) const;

    bool operator==(const CaseBase& other) const;

private:
    CaseBase(std::shared_ptr<const CaseSchema> schema, std::vector<Case> cases)
        : schema_(std::move(schema)), cases_(std::move(cases)) {}

    std::shared_ptr<const CaseSchema> schema_;
    std::vector<Case> cases_;

    friend CaseBase retain_case(const CaseBase&, Case);
};

// --- persistence ------------------------------------------------------------

CaseBase load(const std::filesystem::path& path, Format format, const CaseSchema& schema);
CaseBase load(const std::filesystem::path& path, const CaseSchema& schema);
void save(const CaseBase& base, const std::filesystem::path& path, Format format);

/// CSV: header "id,<attr>,<attr>,..." in schema order; an unquoted empty
/// field is an absent value, a quoted empty field ("") an empty string.
CaseBase parse_csv(std::string_view text, const CaseSchema& schema);
std::string to_csv(const CaseBase& base);

/// JSON: {"schemaId": ..., "cases": [{"id": ..., "values": {...}}]}.
/// Output is canonical: sorted keys, shortest round-trip numbers.
CaseBase parse_json(std::string_view text, const CaseSchema& schema);
CaseBase case_base_from_json(const Json& doc, const CaseSchema& schema);
Json case_base_to_json(const CaseBase& base);
std::string to_json_text(const CaseBase& base);

/// Reads "schemaId" out of a JSON case-base document without validating cases.
std::string peek_schema_id(std::string_view json_text);

// --- retain and lookup --------------------------------------------------

/// Replaces the case with the same id, or appends it. The input base is
/// untouched; an invalid case throws Error(Validation) and nothing changes.
CaseBase retain_case(const CaseBase& base, Case c);

/// Throws Error(NotFound) for an unknown id.
const Case& get_case(const CaseBase& base, std::string_view id);
const std::vector<Case>& list_cases(const CaseBase& base);

inline std::vector<RetrievalResult> retrieve_k(const CaseBase& base, const Query& query, std::size_t k = kDefaultK) {
    return retrieve_k(base.cases(), base.schema(), query, k);
}

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames over the destination.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace cbr
