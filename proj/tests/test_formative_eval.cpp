#include <doctest.h>

#include <algorithm>

#include "cbr/error.hpp"
#include "cbr/formative_eval.hpp"
#include "support.hpp"

using namespace cbr;

namespace {

/// One numeric description attribute, one open numeric attribute and a
/// graded outcome. Case i sits at x = position so retrieval order is easy
/// to control.
CaseSchema line_schema() {
    return CaseSchema::create("line", {
                                          {"x", NumericType{0, 100}, 1.0, Group::Description},
                                          {"later", NumericType{0, 100}, 1.0, Group::Description},
                                          {"outcome", GradeType{{"E", "D", "C", "B", "A"}}, 0.0, Group::Solution},
                                      });
}

Case at(const std::string& id, double x, std::optional<std::string> grade, std::optional<double> later = {}) {
    Case c{id, {{"x", x}}};
    if (grade) c.values["outcome"] = *grade;
    if (later) c.values["later"] = *later;
    return c;
}

Query scenario_query() {
    return Query{{{"gpa", 3.1},
                  {"gradeDigitalSystems", std::string("A")},
                  {"gradeBasicProgramming", std::string("B")},
                  {"quiz1", 45.0},
                  {"midExam", 40.0}}};
}

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Io;
}

}  // namespace

TEST_CASE("fixture scenario: four B and one A") {
    const auto base = load(test::fixture("student_fixture.json"), student_schema());
    const auto q = scenario_query();
    const auto dist = predict_final_grade(base, q, 5);

    CHECK(dist.attribute == "finalGrade");
    CHECK(dist.counts == std::map<std::string, int>{{"A", 1}, {"B", 4}});
    CHECK(dist.proportions.at("B") == 0.8);
    CHECK(dist.proportions.at("A") == 0.2);
    CHECK(dist.suggestion == "B");
    CHECK(dist.best == "A");
    CHECK(dist.total() == 5);
    CHECK(dist.hint.find("A is attainable") != std::string::npos);

    const auto levers = find_levers(base.schema(), dist, q);
    REQUIRE(levers.size() == 1);
    CHECK(levers[0].attribute == "quiz2");
    CHECK(levers[0].better_mean == 90.0);
    CHECK(levers[0].typical_mean == doctest::Approx((55.0 + 50.0 + 58.0 + 52.0) / 4));

    const auto text = generate_feedback(base.schema(), dist, q);
    CHECK(text ==
          "Most likely finalGrade: B (4 of 5 similar cases).\n"
          "Best attainable: A (1 of 5 similar cases).\n"
          "Levers toward A: quiz2 (better outcomes averaged 90.0 vs 53.8 for B).\n"
          "Scoring well on these is what separated the better outcomes.\n");
    CHECK(generate_feedback(base.schema(), dist, q) == text);
}

TEST_CASE("unanimous neighborhood") {
    const auto schema = line_schema();
    std::vector<Case> cases{at("a", 10, "A"), at("b", 11, "A"), at("c", 12, "A"), at("d", 90, "E")};
    const auto dist = predict_final_grade(cases, schema, Query{{{"x", 10.0}}}, 3);
    CHECK(dist.suggestion == "A");
    CHECK(dist.proportions == std::map<std::string, double>{{"A", 1.0}});
    const auto text = generate_feedback(schema, dist, Query{{{"x", 10.0}}});
    CHECK(text.find("All similar cases share this outcome.") != std::string::npos);
    CHECK(text.find("Levers") == std::string::npos);
}

TEST_CASE("ties break toward the better grade") {
    const auto schema = line_schema();
    std::vector<Case> cases{at("a", 10, "C"), at("b", 11, "B"), at("c", 12, "A"), at("d", 13, "B"),
                            at("e", 14, "A")};
    const auto dist = predict_final_grade(cases, schema, Query{{{"x", 10.0}}}, 5);
    CHECK(dist.counts == std::map<std::string, int>{{"A", 2}, {"B", 2}, {"C", 1}});
    CHECK(dist.suggestion == "A");
    CHECK(dist.best == "A");
    CHECK(generate_feedback(schema, dist, Query{{{"x", 10.0}}}).find("No similar case did better than A") !=
          std::string::npos);
}

TEST_CASE("unlabeled neighbors are skipped and backfilled") {
    const auto schema = line_schema();
    std::vector<Case> cases{at("a", 10, std::nullopt), at("b", 11, "B"), at("c", 12, std::nullopt),
                            at("d", 13, "C"), at("e", 40, "D")};
    const auto dist = predict_final_grade(cases, schema, Query{{{"x", 10.0}}}, 3);
    REQUIRE(dist.neighbors.size() == 3);
    CHECK(dist.neighbors[0].result.case_id == "b");
    CHECK(dist.neighbors[1].result.case_id == "d");
    CHECK(dist.neighbors[2].result.case_id == "e");
    CHECK(dist.total() == 3);

    std::vector<Case> unlabeled{at("a", 10, std::nullopt), at("b", 20, std::nullopt)};
    CHECK_THROWS_WITH_AS(predict_final_grade(unlabeled, schema, Query{{{"x", 10.0}}}),
                         doctest::Contains("no labeled neighbors"), Error);
    CHECK_THROWS_WITH_AS(predict_final_grade(std::vector<Case>{}, schema, Query{{{"x", 10.0}}}),
                         doctest::Contains("empty case base"), Error);
}

TEST_CASE("fewer labeled cases than k uses what exists") {
    const auto schema = line_schema();
    std::vector<Case> cases{at("a", 10, "B"), at("b", 50, "C")};
    const auto dist = predict_final_grade(cases, schema, Query{{{"x", 10.0}}}, 5);
    CHECK(dist.total() == 2);
    CHECK(dist.suggestion == "B");
}

TEST_CASE("levers need an open attribute and a clear margin") {
    const auto schema = line_schema();
    std::vector<Case> cases{at("a", 10, "B", 40.0), at("b", 11, "B", 44.0), at("c", 12, "A", 60.0)};
    const Query open{{{"x", 10.0}}};
    const auto dist = predict_final_grade(cases, schema, open, 3);

    auto levers = find_levers(schema, dist, open);
    REQUIRE(levers.size() == 1);
    CHECK(levers[0].attribute == "later");
    CHECK(levers[0].typical_mean == 42.0);

    // Filled in by the query: no longer open.
    const Query filled{{{"x", 10.0}, {"later", 50.0}}};
    CHECK(find_levers(schema, predict_final_grade(cases, schema, filled, 3), filled).empty());
    CHECK(generate_feedback(schema, predict_final_grade(cases, schema, filled, 3), filled).find("Levers") ==
          std::string::npos);

    // A margin of 18 points misses a 20-point threshold.
    FeedbackOptions strict;
    strict.numeric_fraction = 0.20;
    CHECK(find_levers(schema, dist, open, strict).empty());

    // Exactly 10 points still counts.
    std::vector<Case> edge{at("a", 10, "B", 50.0), at("b", 11, "B", 50.0), at("c", 12, "A", 60.0)};
    CHECK(find_levers(schema, predict_final_grade(edge, schema, open, 3), open).size() == 1);
}

TEST_CASE("distribution JSON") {
    const auto base = load(test::fixture("student_fixture.json"), student_schema());
    const auto j = distribution_to_json(predict_final_grade(base, scenario_query()));
    CHECK(j["suggestion"] == "B");
    CHECK(j["counts"]["B"] == 4);
    CHECK(j["proportions"]["A"] == 0.2);
    CHECK(j["neighbors"].size() == 5);
    CHECK(j["neighbors"][0]["caseId"] == "S25");
}

TEST_CASE("leave-one-out on duplicated pairs with k=1") {
    test::Gen gen(41);
    const auto schema = student_schema();
    const std::vector<std::string> grades{"E", "D", "C", "B", "A"};
    std::vector<Case> cases;
    for (int i = 0; i < 25; ++i) {
        Case c = gen.make_case(schema, "P" + std::to_string(i) + "a", 1.0);
        c.values["finalGrade"] = grades[static_cast<std::size_t>(i) % grades.size()];
        Case twin = c;
        twin.id = "P" + std::to_string(i) + "b";
        cases.push_back(c);
        cases.push_back(twin);
    }
    const auto report = leave_one_out(CaseBase::create(schema, cases), 1);
    CHECK(report.total == 50);
    CHECK(report.exact_matches == 50);
    CHECK(report.accuracy == 1.0);
}

TEST_CASE("leave-one-out structure and errors") {
    const auto base = load(test::fixture("student_fixture.json"), student_schema());
    const auto report = leave_one_out(base, 5);
    CHECK(report.total == 29);
    int sum = 0;
    for (const auto& [_, n] : report.confusion) sum += n;
    CHECK(sum == report.total);
    CHECK(report.accuracy == double(report.exact_matches) / report.total);

    const auto j = loo_report_to_json(report);
    CHECK(j["total"] == 29);
    CHECK(j["k"] == 5);
    CHECK(j.contains("confusion"));

    const auto schema = line_schema();
    const auto single = CaseBase::create(schema, {at("a", 10, "B"), at("b", 20, std::nullopt)});
    CHECK(kind_of([&] { leave_one_out(single, 1); }) == ErrorKind::Validation);
}

TEST_CASE("property: counts match a brute-force neighbor oracle") {
    test::Gen gen(42);
    const auto schema = student_schema();
    const std::vector<std::string> grades{"E", "D", "C", "B", "A"};
    for (int trial = 0; trial < 300; ++trial) {
        auto cases = gen.cases(schema, gen.integer(1, 40), 0.8);
        const auto q = gen.query(schema);
        const std::size_t k = static_cast<std::size_t>(gen.integer(1, 8));

        std::vector<Case> labeled;
        for (const auto& c : cases)
            if (c.get("finalGrade") && test::oracle_global(schema, q, c) >= 0) labeled.push_back(c);
        const auto expected = test::oracle_retrieve(labeled, schema, q, k);
        if (expected.empty()) continue;

        std::map<std::string, int> want;
        for (const auto& r : expected)
            for (const auto& c : labeled)
                if (c.id == r.case_id) ++want[std::get<std::string>(*c.get("finalGrade"))];

        const auto dist = predict_final_grade(cases, schema, q, k);
        CHECK(dist.counts == want);
        double total = 0;
        for (const auto& [_, p] : dist.proportions) total += p;
        CHECK(std::fabs(total - 1.0) <= 1e-9);

        std::shuffle(cases.begin(), cases.end(), gen.rng());
        CHECK(predict_final_grade(cases, schema, q, k).counts == want);
    }
}
