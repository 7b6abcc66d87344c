#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <json.hpp>

namespace cbr {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Attribute types
// ---------------------------------------------------------------------------

struct NumericType {
    double min = 0.0;
    double max = 1.0;
};

/// Ordered letter-grade scale, worst first.
struct GradeType {
    std::vector<std::string> scale;
};

struct BooleanType {};

struct CategoricalType {
    std::vector<std::string> allowed;
};

/// Free text. Never compared, so it always carries weight 0.
struct TextType {};

using AttributeType = std::variant<NumericType, GradeType, BooleanType, CategoricalType, TextType>;

std::string_view type_name(const AttributeType& type);

/// The four parts of a case.
enum class Group { Description, Solution, Result, Justification };

std::string_view to_string(Group group);
std::optional<Group> group_from_string(std::string_view text);

struct AttributeSpec {
    std::string name;
    AttributeType type;
    double weight = 0.0;
    Group group = Group::Description;

    bool is_numeric() const { return std::holds_alternative<NumericType>(type); }
    bool is_grade() const { return std::holds_alternative<GradeType>(type); }
    bool is_text() const { return std::holds_alternative<TextType>(type); }
};

// ---------------------------------------------------------------------------
// Values, cases, queries
// ---------------------------------------------------------------------------

/// A present attribute value. Numeric -> double, Boolean -> bool,
/// Grade/Categorical/Text -> string (grades are stored as their canonical
/// scale label). An absent value is simply missing from the value map.
using Value = std::variant<double, bool, std::string>;

using ValueMap = std::map<std::string, Value>;

struct Case {
    std::string id;
    ValueMap values;

    const Value* get(const std::string& name) const;
    bool operator==(const Case&) const = default;
};

/// The new case T: a partial description used as a retrieval probe.
struct Query {
    ValueMap values;

    bool operator==(const Query&) const = default;
};

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

/// Named, typed, weighted attributes partitioned into case groups.
/// Instances are always valid: construction goes through `create` or
/// `define_schema`, both of which check every invariant.
class CaseSchema {
public:
    static CaseSchema create(std::string id, std::vector<AttributeSpec> attributes);

    const std::string& id() const { return id_; }
    const std::vector<AttributeSpec>& attributes() const { return attributes_; }
    std::size_t size() const { return attributes_.size(); }

    const AttributeSpec* find(std::string_view name) const;
    const AttributeSpec& at(std::string_view name) const;

    /// Copy with every weight multiplied by `factor`; factor*w must stay in [0,1].
    CaseSchema with_scaled_weights(double factor) const;

    /// Copy with one attribute's weight replaced.
    CaseSchema with_weight(std::string_view name, double weight) const;

    /// First Grade attribute in the solution group, if any.
    const AttributeSpec* solution_grade() const;

    bool operator==(const CaseSchema& other) const;

private:
    CaseSchema() = default;

    std::string id_;
    std::vector<AttributeSpec> attributes_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Parses and validates a schema-definition document.
/// Throws Error(Parse) for malformed structure, Error(Validation) for
/// invariant violations; messages name the offending attribute.
CaseSchema define_schema(const Json& document);
CaseSchema define_schema_text(std::string_view text);

Json schema_to_json(const CaseSchema& schema);

/// The bundled Microprocessor Systems student model (11 attributes).
CaseSchema student_schema();

/// Case-insensitive lookup of `text` in `scale`, returning the canonical label.
std::string parse_grade(std::string_view text, const std::vector<std::string>& scale);

/// Position of `label` in the scale (0 = worst). Throws if absent.
std::size_t grade_rank(const std::string& label, const std::vector<std::string>& scale);

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
    std::string attribute;
    std::string message;

    std::string to_string() const;
};

using ValidationReport = std::vector<Violation>;

/// Checks a single present value against its attribute type.
std::optional<std::string> check_value(const AttributeSpec& spec, const Value& value);

/// Never throws on well-formed inputs; an empty report means the case conforms.
ValidationReport validate_case(const CaseSchema& schema, const Case& c);

/// Throws Error(Validation) listing every violation.
void require_valid(const CaseSchema& schema, const Case& c);

/// Throws Error(Validation) unless the query only names description
/// attributes, every value conforms, and at least one weighted value is present.
void validate_query(const CaseSchema& schema, const Query& query);

/// The description part of a case as a query (present values with weight > 0).
Query query_from_case(const CaseSchema& schema, const Case& c);

// ---------------------------------------------------------------------------
// Value conversion
// ---------------------------------------------------------------------------

/// Converts a JSON scalar to a typed value (grades canonicalized).
Value value_from_json(const AttributeSpec& spec, const Json& json);
Json value_to_json(const Value& value);

/// Parses text by attribute type: numbers, grade letters, true/false, labels.
Value parse_value(const AttributeSpec& spec, std::string_view text);

/// Canonical text form; doubles use the shortest round-trip representation.
std::string format_value(const Value& value);
std::string format_number(double value);

/// Reads {"name": value, ...}; nulls are skipped (absent).
ValueMap values_from_json(const CaseSchema& schema, const Json& object);
Json values_to_json(const ValueMap& values);

Json case_to_json(const Case& c);
Case case_from_json(const CaseSchema& schema, const Json& json);

}  // namespace cbr
