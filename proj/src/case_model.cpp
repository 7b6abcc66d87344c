#include "cbr/case_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "cbr/error.hpp"

namespace cbr {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

std::string attr_error(const std::string& name, const std::string& what) {
    return "attribute '" + name + "': " + what;
}

void check_spec(const AttributeSpec& spec) {
    if (spec.name.empty()) throw validation_error("attribute with empty name");
    if (!(spec.weight >= 0.0 && spec.weight <= 1.0))
        throw validation_error(attr_error(spec.name, "weight out of range [0,1]: " + format_number(spec.weight)));

    std::visit(overloaded{
                   [&](const NumericType& t) {
                       if (!std::isfinite(t.min) || !std::isfinite(t.max) || !(t.min < t.max))
                           throw validation_error(attr_error(spec.name, "numeric range requires min < max"));
                   },
                   [&](const GradeType& t) {
                       if (t.scale.empty()) throw validation_error(attr_error(spec.name, "empty grade scale"));
                       std::set<std::string> seen;
                       for (const auto& label : t.scale) {
                           if (label.empty()) throw validation_error(attr_error(spec.name, "empty grade label"));
                           if (!seen.insert(lower(label)).second)
                               throw validation_error(attr_error(spec.name, "duplicate grade label '" + label + "'"));
                       }
                   },
                   [&](const BooleanType&) {},
                   [&](const CategoricalType& t) {
                       if (t.allowed.empty())
                           throw validation_error(attr_error(spec.name, "empty categorical allowed set"));
                       std::set<std::string> seen;
                       for (const auto& label : t.allowed)
                           if (!seen.insert(label).second)
                               throw validation_error(attr_error(spec.name, "duplicate category '" + label + "'"));
                   },
                   [&](const TextType&) {
                       if (spec.weight != 0.0)
                           throw validation_error(attr_error(spec.name, "text attributes must have weight 0"));
                   },
               },
               spec.type);
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view type_name(const AttributeType& type) {
    return std::visit(overloaded{
                          [](const NumericType&) { return std::string_view{"numeric"}; },
                          [](const GradeType&) { return std::string_view{"grade"}; },
                          [](const BooleanType&) { return std::string_view{"boolean"}; },
                          [](const CategoricalType&) { return std::string_view{"categorical"}; },
                          [](const TextType&) { return std::string_view{"text"}; },
                      },
                      type);
}

std::string_view to_string(Group group) {
    switch (group) {
        case Group::Description: return "description";
        case Group::Solution: return "solution";
        case Group::Result: return "result";
        case Group::Justification: return "justification";
    }
    return "description";
}

std::optional<Group> group_from_string(std::string_view text) {
    if (text == "description") return Group::Description;
    if (text == "solution") return Group::Solution;
    if (text == "result") return Group::Result;
    if (text == "justification") return Group::Justification;
    return std::nullopt;
}

const Value* Case::get(const std::string& name) const {
    auto it = values.find(name);
    return it == values.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// CaseSchema
// ---------------------------------------------------------------------------

CaseSchema CaseSchema::create(std::string id, std::vector<AttributeSpec> attributes) {
    if (id.empty()) throw validation_error("schema id must not be empty");
    if (attributes.empty()) throw validation_error("schema '" + id + "' has no attributes");

    CaseSchema schema;
    schema.id_ = std::move(id);
    for (std::size_t i = 0; i < attributes.size(); ++i) {
        check_spec(attributes[i]);
        if (!schema.index_.emplace(attributes[i].name, i).second)
            throw validation_error(attr_error(attributes[i].name, "duplicate attribute"));
    }
    bool weighted = std::any_of(attributes.begin(), attributes.end(), [](const AttributeSpec& a) {
        return a.group == Group::Description && a.weight > 0.0;
    });
    if (!weighted)
        throw validation_error("schema '" + schema.id_ + "' needs a description attribute with weight > 0");
    schema.attributes_ = std::move(attributes);
    return schema;
}

const AttributeSpec* CaseSchema::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &attributes_[it->second];
}

const AttributeSpec& CaseSchema::at(std::string_view name) const {
    if (const auto* spec = find(name)) return *spec;
    throw validation_error(attr_error(std::string(name), "unknown attribute"));
}

CaseSchema CaseSchema::with_scaled_weights(double factor) const {
    auto attrs = attributes_;
    for (auto& a : attrs) a.weight *= factor;
    return create(id_, std::move(attrs));
}

CaseSchema CaseSchema::with_weight(std::string_view name, double weight) const {
    auto attrs = attributes_;
    bool found = false;
    for (auto& a : attrs) {
        if (a.name == name) {
            a.weight = weight;
            found = true;
        }
    }
    if (!found) throw validation_error(attr_error(std::string(name), "unknown attribute"));
    return create(id_, std::move(attrs));
}

const AttributeSpec* CaseSchema::solution_grade() const {
    for (const auto& a : attributes_)
        if (a.group == Group::Solution && a.is_grade()) return &a;
    return nullptr;
}

bool CaseSchema::operator==(const CaseSchema& other) const {
    return schema_to_json(*this) == schema_to_json(other);
}

// ---------------------------------------------------------------------------
// Schema documents
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> string_list(const Json& j, const std::string& attr, const char* key) {
    if (!j.is_array()) throw parse_error(attr_error(attr, std::string("'") + key + "' must be an array of strings"));
    std::vector<std::string> out;
    for (const auto& item : j) {
        if (!item.is_string())
            throw parse_error(attr_error(attr, std::string("'") + key + "' must be an array of strings"));
        out.push_back(item.get<std::string>());
    }
    return out;
}

double number_field(const Json& j, const std::string& attr, const char* key) {
    if (!j.contains(key)) throw parse_error(attr_error(attr, std::string("missing '") + key + "'"));
    const auto& v = j.at(key);
    if (!v.is_number()) throw parse_error(attr_error(attr, std::string("'") + key + "' must be a number"));
    return v.get<double>();
}

AttributeSpec spec_from_json(const Json& j, std::size_t position) {
    if (!j.is_object()) throw parse_error("attribute #" + std::to_string(position) + " is not an object");
    if (!j.contains("name") || !j.at("name").is_string())
        throw parse_error("attribute #" + std::to_string(position) + " lacks a string 'name'");

    AttributeSpec spec;
    spec.name = j.at("name").get<std::string>();

    if (!j.contains("type") || !j.at("type").is_string()) throw parse_error(attr_error(spec.name, "missing 'type'"));
    const auto type = j.at("type").get<std::string>();

    std::set<std::string> allowed_keys{"name", "type", "weight", "group"};
    if (type == "numeric") {
        spec.type = NumericType{number_field(j, spec.name, "min"), number_field(j, spec.name, "max")};
        allowed_keys.insert({"min", "max"});
    } else if (type == "grade") {
        if (!j.contains("scale")) throw parse_error(attr_error(spec.name, "missing 'scale'"));
        spec.type = GradeType{string_list(j.at("scale"), spec.name, "scale")};
        allowed_keys.insert("scale");
    } else if (type == "boolean") {
        spec.type = BooleanType{};
    } else if (type == "categorical") {
        if (!j.contains("allowed")) throw parse_error(attr_error(spec.name, "missing 'allowed'"));
        spec.type = CategoricalType{string_list(j.at("allowed"), spec.name, "allowed")};
        allowed_keys.insert("allowed");
    } else if (type == "text") {
        spec.type = TextType{};
    } else {
        throw parse_error(attr_error(spec.name, "unknown type '" + type + "'"));
    }

    for (const auto& [key, _] : j.items())
        if (!allowed_keys.count(key))
            throw parse_error(attr_error(spec.name, "unknown key '" + key + "' for type " + type));

    spec.weight = number_field(j, spec.name, "weight");

    if (!j.contains("group") || !j.at("group").is_string()) throw parse_error(attr_error(spec.name, "missing 'group'"));
    auto group = group_from_string(j.at("group").get<std::string>());
    if (!group) throw parse_error(attr_error(spec.name, "unknown group '" + j.at("group").get<std::string>() + "'"));
    spec.group = *group;
    return spec;
}

}  // namespace

CaseSchema define_schema(const Json& document) {
    if (!document.is_object()) throw parse_error("schema document must be a JSON object");
    for (const auto& [key, _] : document.items())
        if (key != "id" && key != "attributes") throw parse_error("unknown schema key '" + key + "'");
    if (!document.contains("id") || !document.at("id").is_string()) throw parse_error("schema lacks a string 'id'");
    if (!document.contains("attributes") || !document.at("attributes").is_array())
        throw parse_error("schema lacks an 'attributes' array");

    std::vector<AttributeSpec> attrs;
    std::size_t pos = 0;
    for (const auto& a : document.at("attributes")) attrs.push_back(spec_from_json(a, pos++));
    return CaseSchema::create(document.at("id").get<std::string>(), std::move(attrs));
}

CaseSchema define_schema_text(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw parse_error(std::string("schema document is not valid JSON: ") + e.what());
    }
    return define_schema(doc);
}

Json schema_to_json(const CaseSchema& schema) {
    Json attrs = Json::array();
    for (const auto& a : schema.attributes()) {
        Json j;
        j["name"] = a.name;
        j["type"] = std::string(type_name(a.type));
        j["weight"] = a.weight;
        j["group"] = std::string(to_string(a.group));
        std::visit(overloaded{
                       [&](const NumericType& t) {
                           j["min"] = t.min;
                           j["max"] = t.max;
                       },
                       [&](const GradeType& t) { j["scale"] = t.scale; },
                       [&](const CategoricalType& t) { j["allowed"] = t.allowed; },
                       [](const auto&) {},
                   },
                   a.type);
        attrs.push_back(std::move(j));
    }
    return Json{{"id", schema.id()}, {"attributes", std::move(attrs)}};
}

CaseSchema student_schema() {
    const GradeType grades{{"E", "D", "C", "B", "A"}};
    const NumericType score{0.0, 100.0};
    return CaseSchema::create(
        "student",
        {
            {"studentId", TextType{}, 0.0, Group::Justification},
            {"gpa", NumericType{0.0, 4.0}, 1.0, Group::Description},
            {"gradeDigitalSystems", grades, 1.0, Group::Description},
            {"gradeBasicProgramming", grades, 1.0, Group::Description},
            {"skillAssembly", BooleanType{}, 1.0, Group::Description},
            {"skillProgramming", BooleanType{}, 1.0, Group::Description},
            {"skillInstrumentDesign", BooleanType{}, 1.0, Group::Description},
            {"quiz1", score, 1.0, Group::Description},
            {"midExam", score, 1.0, Group::Description},
            {"quiz2", score, 1.0, Group::Description},
            {"finalGrade", grades, 0.0, Group::Solution},
        });
}

std::string parse_grade(std::string_view text, const std::vector<std::string>& scale) {
    const auto key = lower(text);
    for (const auto& label : scale)
        if (lower(label) == key) return label;
    throw validation_error("unknown grade '" + std::string(text) + "' (scale: " + join(scale, ", ") + ")");
}

std::size_t grade_rank(const std::string& label, const std::vector<std::string>& scale) {
    auto it = std::find(scale.begin(), scale.end(), label);
    if (it == scale.end())
        throw validation_error("unknown grade '" + label + "' (scale: " + join(scale, ", ") + ")");
    return static_cast<std::size_t>(it - scale.begin());
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::string Violation::to_string() const { return attribute.empty() ? message : attribute + ": " + message; }

std::optional<std::string> check_value(const AttributeSpec& spec, const Value& value) {
    return std::visit(
        overloaded{
            [&](const NumericType& t) -> std::optional<std::string> {
                const auto* v = std::get_if<double>(&value);
                if (!v) return "expected a number";
                if (!std::isfinite(*v) || *v < t.min || *v > t.max)
                    return spec.name + " out of range [" + format_number(t.min) + "," + format_number(t.max) +
                           "]: " + format_number(*v);
                return std::nullopt;
            },
            [&](const GradeType& t) -> std::optional<std::string> {
                const auto* v = std::get_if<std::string>(&value);
                if (!v) return "expected a grade label";
                if (std::find(t.scale.begin(), t.scale.end(), *v) == t.scale.end())
                    return "unknown grade '" + *v + "' (scale: " + join(t.scale, ", ") + ")";
                return std::nullopt;
            },
            [&](const BooleanType&) -> std::optional<std::string> {
                if (!std::holds_alternative<bool>(value)) return "expected true/false";
                return std::nullopt;
            },
            [&](const CategoricalType& t) -> std::optional<std::string> {
                const auto* v = std::get_if<std::string>(&value);
                if (!v) return "expected a category label";
                if (std::find(t.allowed.begin(), t.allowed.end(), *v) == t.allowed.end())
                    return "'" + *v + "' not in allowed set (" + join(t.allowed, ", ") + ")";
                return std::nullopt;
            },
            [&](const TextType&) -> std::optional<std::string> {
                if (!std::holds_alternative<std::string>(value)) return "expected text";
                return std::nullopt;
            },
        },
        spec.type);
}

ValidationReport validate_case(const CaseSchema& schema, const Case& c) {
    ValidationReport report;
    if (c.id.empty()) report.push_back({"", "case id must not be empty"});
    for (const auto& [name, value] : c.values) {
        const auto* spec = schema.find(name);
        if (!spec) {
            report.push_back({name, "unknown attribute"});
            continue;
        }
        if (auto problem = check_value(*spec, value)) report.push_back({name, *problem});
    }
    return report;
}

void require_valid(const CaseSchema& schema, const Case& c) {
    auto report = validate_case(schema, c);
    if (report.empty()) return;
    std::string msg = "case '" + c.id + "' invalid:";
    for (const auto& v : report) msg += " " + v.to_string() + ";";
    msg.pop_back();
    throw validation_error(msg);
}

void validate_query(const CaseSchema& schema, const Query& query) {
    bool weighted = false;
    for (const auto& [name, value] : query.values) {
        const auto* spec = schema.find(name);
        if (!spec) throw validation_error(attr_error(name, "unknown attribute"));
        if (spec->group != Group::Description)
            throw validation_error(attr_error(name, "query may only contain description attributes"));
        if (auto problem = check_value(*spec, value)) throw validation_error(attr_error(name, *problem));
        weighted = weighted || spec->weight > 0.0;
    }
    if (!weighted) throw validation_error("query has no weighted description attribute");
}

Query query_from_case(const CaseSchema& schema, const Case& c) {
    Query q;
    for (const auto& a : schema.attributes()) {
        if (a.group != Group::Description || a.weight <= 0.0) continue;
        if (const auto* v = c.get(a.name)) q.values.emplace(a.name, *v);
    }
    return q;
}

// ---------------------------------------------------------------------------
// Value conversion
// ---------------------------------------------------------------------------

Value value_from_json(const AttributeSpec& spec, const Json& json) {
    auto mismatch = [&](const char* what) {
        return validation_error(attr_error(spec.name, std::string("expected ") + what + ", got " + json.dump()));
    };
    return std::visit(overloaded{
                          [&](const NumericType&) -> Value {
                              if (!json.is_number()) throw mismatch("a number");
                              return json.get<double>();
                          },
                          [&](const GradeType& t) -> Value {
                              if (!json.is_string()) throw mismatch("a grade label");
                              try {
                                  return parse_grade(json.get<std::string>(), t.scale);
                              } catch (const Error& e) {
                                  throw validation_error(attr_error(spec.name, e.what()));
                              }
                          },
                          [&](const BooleanType&) -> Value {
                              if (!json.is_boolean()) throw mismatch("true/false");
                              return json.get<bool>();
                          },
                          [&](const auto&) -> Value {
                              if (!json.is_string()) throw mismatch("a string");
                              return json.get<std::string>();
                          },
                      },
                      spec.type);
}

Json value_to_json(const Value& value) {
    return std::visit([](const auto& v) { return Json(v); }, value);
}

Value parse_value(const AttributeSpec& spec, std::string_view text) {
    return std::visit(
        overloaded{
            [&](const NumericType&) -> Value {
                double v = 0.0;
                const auto* first = text.data();
                const auto* last = text.data() + text.size();
                if (!text.empty() && *first == '+') ++first;
                auto [ptr, ec] = std::from_chars(first, last, v);
                if (ec != std::errc{} || ptr != last || text.empty())
                    throw validation_error(attr_error(spec.name, "not a number: '" + std::string(text) + "'"));
                return v;
            },
            [&](const GradeType& t) -> Value {
                try {
                    return parse_grade(text, t.scale);
                } catch (const Error& e) {
                    throw validation_error(attr_error(spec.name, e.what()));
                }
            },
            [&](const BooleanType&) -> Value {
                const auto key = lower(text);
                if (key == "true") return true;
                if (key == "false") return false;
                throw validation_error(attr_error(spec.name, "expected true/false, got '" + std::string(text) + "'"));
            },
            [&](const auto&) -> Value { return std::string(text); },
        },
        spec.type);
}

std::string format_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::string format_value(const Value& value) {
    return std::visit(overloaded{
                          [](double v) { return format_number(v); },
                          [](bool v) { return std::string(v ? "true" : "false"); },
                          [](const std::string& v) { return v; },
                      },
                      value);
}

ValueMap values_from_json(const CaseSchema& schema, const Json& object) {
    if (!object.is_object()) throw parse_error("'values' must be a JSON object");
    ValueMap out;
    for (const auto& [name, v] : object.items()) {
        const auto* spec = schema.find(name);
        if (!spec) throw validation_error(attr_error(name, "unknown attribute"));
        if (v.is_null()) continue;
        out.emplace(name, value_from_json(*spec, v));
    }
    return out;
}

Json values_to_json(const ValueMap& values) {
    Json out = Json::object();
    for (const auto& [name, v] : values) out[name] = value_to_json(v);
    return out;
}

Json case_to_json(const Case& c) { return Json{{"id", c.id}, {"values", values_to_json(c.values)}}; }

Case case_from_json(const CaseSchema& schema, const Json& json) {
    if (!json.is_object()) throw parse_error("case record must be a JSON object");
    for (const auto& [key, _] : json.items())
        if (key != "id" && key != "values") throw parse_error("unknown case key '" + key + "'");
    if (!json.contains("id") || !json.at("id").is_string()) throw parse_error("case record lacks a string 'id'");
    Case c;
    c.id = json.at("id").get<std::string>();
    if (json.contains("values")) {
        try {
            c.values = values_from_json(schema, json.at("values"));
        } catch (const Error& e) {
            throw Error(e.kind(), "case '" + c.id + "': " + e.what());
        }
    }
    return c;
}

}  // namespace cbr
