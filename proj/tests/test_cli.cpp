#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "cbr/cli.hpp"
#include "cbr/error.hpp"
#include "cbr/formative_eval.hpp"
#include "support.hpp"

using namespace cbr;
using test::TempDir;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

const std::string kFixture = test::fixture("student_fixture.json").string();

}  // namespace

TEST_CASE("exit status mapping") {
    CHECK(cli::exit_status(ErrorKind::Parse) == 1);
    CHECK(cli::exit_status(ErrorKind::Validation) == 1);
    CHECK(cli::exit_status(ErrorKind::NotFound) == 1);
    CHECK(cli::exit_status(ErrorKind::IllegalState) == 1);
    CHECK(cli::exit_status(ErrorKind::Io) == 3);
}

TEST_CASE("usage errors exit 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"retrieve", kFixture, "--query", "gpa=3", "--bogus"}).code == 2);
    CHECK(run({"retrieve", kFixture}).code == 2);
    CHECK(run({"retrieve", kFixture, "-q", "gpa=3", "-k", "0"}).code == 2);
    CHECK(run({"schema", "show"}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("schema show and validate") {
    auto shown = run({"schema", "show", "--builtin", "student"});
    CHECK(shown.code == 0);
    const auto rows = lines(shown.out);
    int attributes = 0;
    const auto schema = student_schema();
    for (const auto& a : schema.attributes())
        for (const auto& row : rows)
            if (row.rfind(a.name + " ", 0) == 0) {
                ++attributes;
                break;
            }
    CHECK(attributes == 11);

    auto as_json = run({"schema", "show", "--builtin", "student", "--json"});
    CHECK(as_json.code == 0);
    CHECK(Json::parse(as_json.out) == schema_to_json(student_schema()));
    CHECK(run({"schema", "show", "--builtin", "nope"}).code == 1);

    const auto bundled = (std::filesystem::path(CBR_FIXTURE_DIR) / ".." / "schemas" / "student.json").string();
    auto ok = run({"schema", "validate", bundled});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("11 attributes") != std::string::npos);

    TempDir dir;
    auto doc = schema_to_json(student_schema());
    doc["attributes"][1]["weight"] = 1.5;
    write_file_atomic(dir / "bad.json", doc.dump());
    auto bad = run({"schema", "validate", (dir / "bad.json").string()});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("weight out of range") != std::string::npos);
    CHECK(run({"schema", "validate", (dir / "missing.json").string()}).code == 3);
}

TEST_CASE("casebase import and list") {
    TempDir dir;
    const auto out = (dir / "imported.json").string();
    auto imported = run({"casebase", "import", test::fixture("student_fixture.csv").string(), "--schema", "student",
                         "-o", out});
    CHECK(imported.code == 0);
    CHECK(read_file(out) == read_file(kFixture));

    auto listed = run({"casebase", "list", kFixture});
    CHECK(listed.code == 0);
    CHECK(listed.out.find("S30") != std::string::npos);
    auto listed_json = run({"casebase", "list", kFixture, "--json"});
    CHECK(listed_json.out == read_file(kFixture));

    write_file_atomic(dir / "bad.csv", "id,gpa\nS1,2\n");
    CHECK(run({"casebase", "import", (dir / "bad.csv").string(), "-o", out}).code == 1);
}

TEST_CASE("retrieve table agrees with the brute-force oracle") {
    auto r = run({"retrieve", kFixture, "--query", "gpa=3.0,midExam=45", "-k", "5"});
    REQUIRE(r.code == 0);
    const auto rows = lines(r.out);
    REQUIRE(rows.size() == 6);

    const auto base = load(kFixture, student_schema());
    const Query q{{{"gpa", 3.0}, {"midExam", 45.0}}};
    const auto expected = test::oracle_retrieve(base.cases(), base.schema(), q, 5);
    double previous = 2.0;
    for (std::size_t i = 0; i < 5; ++i) {
        std::istringstream row(rows[i + 1]);
        std::size_t rank;
        std::string id, score;
        row >> rank >> id >> score;
        CHECK(rank == i + 1);
        CHECK(id == expected[i].case_id);
        CHECK(score == cli::format_score(expected[i].score));
        CHECK(std::stod(score) <= previous);
        previous = std::stod(score);
    }
}

TEST_CASE("retrieve JSON and query forms") {
    auto kv = run({"retrieve", kFixture, "-q", "gpa=3.1, gradeDigitalSystems=a ,quiz1=45", "--json"});
    auto js = run({"retrieve", kFixture, "-q", R"({"gpa": 3.1, "gradeDigitalSystems": "A", "quiz1": 45})", "--json"});
    REQUIRE(kv.code == 0);
    CHECK(kv.out == js.out);
    const auto doc = Json::parse(kv.out);
    CHECK(doc["k"] == 5);
    CHECK(doc["results"].size() == 5);

    const auto schema = student_schema();
    CHECK(cli::parse_query_arg(schema, "gpa=3,skillAssembly=true,quiz2=").values.size() == 2);
    CHECK_THROWS_AS(cli::parse_query_arg(schema, "gpa"), Error);
    CHECK_THROWS_AS(cli::parse_query_arg(schema, "age=3"), Error);
    CHECK_THROWS_AS(cli::parse_query_arg(schema, "finalGrade=A"), Error);
    CHECK_THROWS_AS(cli::parse_query_arg(schema, "{bad"), Error);

    CHECK(run({"retrieve", kFixture, "-q", "gpa=7"}).code == 1);
    CHECK(run({"retrieve", kFixture, "-q", "gpa=x"}).code == 1);
}

TEST_CASE("empty case base and missing files") {
    auto empty = run({"retrieve", test::fixture("empty.json").string(), "--query", "gpa=3.0"});
    CHECK(empty.code == 1);
    CHECK(empty.err.find("empty case base") != std::string::npos);
    CHECK(run({"retrieve", "/nonexistent/base.json", "-q", "gpa=3"}).code == 3);
}

TEST_CASE("CASEBASE_DATA locates case bases by name") {
    setenv("CASEBASE_DATA", CBR_FIXTURE_DIR, 1);
    auto r = run({"retrieve", "student_fixture", "-q", "gpa=3.0", "-k", "1"});
    unsetenv("CASEBASE_DATA");
    CHECK(r.code == 0);
}

TEST_CASE("predict and evaluate") {
    const std::string q = "gpa=3.1,gradeDigitalSystems=A,gradeBasicProgramming=B,quiz1=45,midExam=40";
    auto text = run({"predict", kFixture, "-q", q});
    CHECK(text.code == 0);
    CHECK(text.out.find("suggestion: B") != std::string::npos);
    CHECK(text.out.find("A=1 (20%) B=4 (80%)") != std::string::npos);
    CHECK(text.out.find("Levers toward A: quiz2") != std::string::npos);

    auto js = run({"predict", kFixture, "-q", q, "--json"});
    CHECK(js.code == 0);
    const auto doc = Json::parse(js.out);
    CHECK(doc["distribution"]["suggestion"] == "B");
    CHECK(doc["feedback"].get<std::string>().find("quiz2") != std::string::npos);

    auto ev = run({"evaluate", kFixture, "-k", "5"});
    CHECK(ev.code == 0);
    const auto report = Json::parse(ev.out);
    CHECK(report == loo_report_to_json(leave_one_out(load(kFixture, student_schema()), 5)));
    CHECK(report["total"] == 29);
}
