#include "cbr/case_base.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "cbr/error.hpp"

namespace cbr {

namespace fs = std::filesystem;

std::optional<Format> format_from_path(const fs::path& path) {
    auto ext = path.extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext == ".csv") return Format::Csv;
    if (ext == ".json") return Format::Json;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// CaseBase
// ---------------------------------------------------------------------------

namespace {

// Positions are 1-based record numbers for error messages.
void check_cases(const CaseSchema& schema, const std::vector<Case>& cases) {
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        auto [it, fresh] = seen.emplace(cases[i].id, i + 1);
        if (!fresh)
            throw validation_error("duplicate case id '" + cases[i].id + "' at records " +
                                   std::to_string(it->second) + " and " + std::to_string(i + 1));
        require_valid(schema, cases[i]);
    }
}

}  // namespace

CaseBase CaseBase::create(CaseSchema schema, std::vector<Case> cases) {
    check_cases(schema, cases);
    return CaseBase(std::make_shared<const CaseSchema>(std::move(schema)), std::move(cases));
}

const Case* CaseBase::find(std::string_view id) const {
    for (const auto& c : cases_)
        if (c.id == id) return &c;
    return nullptr;
}

bool CaseBase::operator==(const CaseBase& other) const {
    return schema() == other.schema() && cases_ == other.cases_;
}

CaseBase retain_case(const CaseBase& base, Case c) {
    require_valid(base.schema(), c);
    auto cases = base.cases_;
    auto it = std::find_if(cases.begin(), cases.end(), [&](const Case& x) { return x.id == c.id; });
    if (it != cases.end())
        *it = std::move(c);
    else
        cases.push_back(std::move(c));
    return CaseBase(base.schema_, std::move(cases));
}

const Case& get_case(const CaseBase& base, std::string_view id) {
    if (const auto* c = base.find(id)) return *c;
    throw not_found("case '" + std::string(id) + "' not found");
}

const std::vector<Case>& list_cases(const CaseBase& base) { return base.cases(); }

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

struct CsvField {
    std::string text;
    bool quoted = false;
};

struct CsvRecord {
    std::vector<CsvField> fields;
    std::size_t line = 0;  // line where the record starts
};

std::vector<CsvRecord> read_csv(std::string_view text) {
    std::vector<CsvRecord> records;
    std::size_t pos = 0;
    std::size_t line = 1;
    if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;

    while (pos < text.size()) {
        CsvRecord rec;
        rec.line = line;
        bool end_of_record = false;
        while (!end_of_record) {
            CsvField field;
            if (pos < text.size() && text[pos] == '"') {
                field.quoted = true;
                ++pos;
                for (;;) {
                    if (pos >= text.size()) throw parse_error("line " + std::to_string(rec.line) + ": unterminated quoted field");
                    char ch = text[pos++];
                    if (ch == '"') {
                        if (pos < text.size() && text[pos] == '"') {
                            field.text += '"';
                            ++pos;
                        } else {
                            break;
                        }
                    } else {
                        if (ch == '\n') ++line;
                        field.text += ch;
                    }
                }
                if (pos < text.size() && text[pos] != ',' && text[pos] != '\n' && text[pos] != '\r')
                    throw parse_error("line " + std::to_string(line) + ": unexpected character after closing quote");
            } else {
                while (pos < text.size() && text[pos] != ',' && text[pos] != '\n' && text[pos] != '\r') {
                    if (text[pos] == '"')
                        throw parse_error("line " + std::to_string(line) + ": stray quote in unquoted field");
                    field.text += text[pos++];
                }
            }
            rec.fields.push_back(std::move(field));

            if (pos >= text.size()) {
                end_of_record = true;
            } else if (text[pos] == ',') {
                ++pos;
            } else {
                if (text[pos] == '\r') ++pos;
                if (pos < text.size() && text[pos] == '\n') ++pos;
                ++line;
                end_of_record = true;
            }
        }
        // Blank lines carry no record.
        if (rec.fields.size() == 1 && rec.fields[0].text.empty() && !rec.fields[0].quoted) continue;
        records.push_back(std::move(rec));
    }
    return records;
}

bool needs_quotes(std::string_view s) {
    if (s.empty()) return true;
    if (s.front() == ' ' || s.back() == ' ') return true;
    return s.find_first_of(",\"\r\n") != std::string_view::npos;
}

void write_field(std::string& out, std::string_view s) {
    if (!needs_quotes(s)) {
        out += s;
        return;
    }
    out += '"';
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
}

}  // namespace

CaseBase parse_csv(std::string_view text, const CaseSchema& schema) {
    auto records = read_csv(text);
    if (records.empty()) throw parse_error("CSV has no header row");

    const auto& header = records.front().fields;
    std::vector<std::string> expected{"id"};
    for (const auto& a : schema.attributes()) expected.push_back(a.name);
    bool header_ok = header.size() == expected.size();
    for (std::size_t i = 0; header_ok && i < header.size(); ++i) header_ok = header[i].text == expected[i];
    if (!header_ok) {
        std::string want;
        for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
        throw parse_error("CSV header does not match schema '" + schema.id() + "'; expected: " + want);
    }

    std::vector<Case> cases;
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::string where = "row " + std::to_string(r) + " (line " + std::to_string(rec.line) + ")";
        if (rec.fields.size() != expected.size())
            throw parse_error(where + ": expected " + std::to_string(expected.size()) + " fields, got " +
                              std::to_string(rec.fields.size()));
        Case c;
        c.id = rec.fields[0].text;
        if (c.id.empty()) throw validation_error(where + ": empty case id");
        auto [it, fresh] = seen.emplace(c.id, r);
        if (!fresh)
            throw validation_error("duplicate case id '" + c.id + "' at rows " + std::to_string(it->second) +
                                   " and " + std::to_string(r));

        for (std::size_t i = 0; i < schema.size(); ++i) {
            const auto& spec = schema.attributes()[i];
            const auto& field = rec.fields[i + 1];
            if (field.text.empty() && !field.quoted) continue;
            try {
                Value v = parse_value(spec, field.text);
                if (auto problem = check_value(spec, v))
                    throw validation_error("attribute '" + spec.name + "': " + *problem);
                c.values.emplace(spec.name, std::move(v));
            } catch (const Error& e) {
                throw Error(e.kind(), where + ", case '" + c.id + "': " + e.what());
            }
        }
        cases.push_back(std::move(c));
    }
    return CaseBase::create(schema, std::move(cases));
}

std::string to_csv(const CaseBase& base) {
    std::string out = "id";
    for (const auto& a : base.schema().attributes()) {
        out += ',';
        write_field(out, a.name);
    }
    out += '\n';
    for (const auto& c : base.cases()) {
        write_field(out, c.id);
        for (const auto& a : base.schema().attributes()) {
            out += ',';
            if (const auto* v = c.get(a.name)) write_field(out, format_value(*v));
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

CaseBase case_base_from_json(const Json& doc, const CaseSchema& schema) {
    if (!doc.is_object()) throw parse_error("case base document must be a JSON object");
    for (const auto& [key, _] : doc.items())
        if (key != "schemaId" && key != "cases") throw parse_error("unknown case base key '" + key + "'");
    if (!doc.contains("schemaId") || !doc.at("schemaId").is_string())
        throw parse_error("case base lacks a string 'schemaId'");
    if (doc.at("schemaId").get<std::string>() != schema.id())
        throw validation_error("case base schema '" + doc.at("schemaId").get<std::string>() +
                               "' does not match schema '" + schema.id() + "'");
    if (!doc.contains("cases") || !doc.at("cases").is_array()) throw parse_error("case base lacks a 'cases' array");

    std::vector<Case> cases;
    std::size_t record = 0;
    for (const auto& j : doc.at("cases")) {
        ++record;
        try {
            cases.push_back(case_from_json(schema, j));
        } catch (const Error& e) {
            throw Error(e.kind(), "record " + std::to_string(record) + ": " + e.what());
        }
    }
    return CaseBase::create(schema, std::move(cases));
}

CaseBase parse_json(std::string_view text, const CaseSchema& schema) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw parse_error(std::string("case base is not valid JSON: ") + e.what());
    }
    return case_base_from_json(doc, schema);
}

Json case_base_to_json(const CaseBase& base) {
    Json cases = Json::array();
    for (const auto& c : base.cases()) cases.push_back(case_to_json(c));
    return Json{{"schemaId", base.schema_id()}, {"cases", std::move(cases)}};
}

std::string to_json_text(const CaseBase& base) { return case_base_to_json(base).dump(2) + "\n"; }

std::string peek_schema_id(std::string_view json_text) {
    Json doc;
    try {
        doc = Json::parse(json_text);
    } catch (const Json::parse_error& e) {
        throw parse_error(std::string("case base is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("schemaId") || !doc.at("schemaId").is_string())
        throw parse_error("case base lacks a string 'schemaId'");
    return doc.at("schemaId").get<std::string>();
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw io_error("read failed for '" + path.string() + "'");
    return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw io_error("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw io_error("cannot replace '" + path.string() + "'");
    }
}

CaseBase load(const fs::path& path, Format format, const CaseSchema& schema) {
    const auto text = read_file(path);
    try {
        return format == Format::Csv ? parse_csv(text, schema) : parse_json(text, schema);
    } catch (const Error& e) {
        throw Error(e.kind(), path.filename().string() + ": " + e.what());
    }
}

CaseBase load(const fs::path& path, const CaseSchema& schema) {
    auto format = format_from_path(path);
    if (!format) throw parse_error("cannot infer format of '" + path.string() + "' (expected .csv or .json)");
    return load(path, *format, schema);
}

void save(const CaseBase& base, const fs::path& path, Format format) {
    write_file_atomic(path, format == Format::Csv ? to_csv(base) : to_json_text(base));
}

}  // namespace cbr
