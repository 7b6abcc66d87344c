#include "cbr/formative_eval.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>

#include "cbr/error.hpp"

namespace cbr {

namespace {

const AttributeSpec& graded_attribute(const CaseSchema& schema, const PredictOptions& options) {
    if (options.attribute.empty()) {
        if (const auto* spec = schema.solution_grade()) return *spec;
        throw validation_error("schema '" + schema.id() + "' has no graded solution attribute");
    }
    const auto& spec = schema.at(options.attribute);
    if (!spec.is_grade()) throw validation_error("attribute '" + spec.name + "' is not a grade");
    return spec;
}

std::string fixed1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

std::string cases_word(int n) { return n == 1 ? "case" : "cases"; }

}  // namespace

int GradeDistribution::total() const {
    int n = 0;
    for (const auto& [_, c] : counts) n += c;
    return n;
}

GradeDistribution predict_final_grade(std::span<const Case> cases, const CaseSchema& schema, const Query& query,
                                      std::size_t k, const PredictOptions& options, std::string_view exclude_id) {
    if (k == 0) throw validation_error("k must be at least 1");
    if (cases.empty()) throw validation_error("empty case base");
    validate_query(schema, query);
    const auto& target = graded_attribute(schema, options);
    const auto& scale = std::get<GradeType>(target.type).scale;

    struct Scored {
        double score;
        const Case* c;
    };
    std::vector<Scored> scored;
    scored.reserve(cases.size());
    for (const auto& c : cases) {
        if (!exclude_id.empty() && c.id == exclude_id) continue;
        double s = 0.0;
        if (try_global_similarity(schema, query, c, s)) scored.push_back({s, &c});
    }
    if (scored.empty()) throw validation_error("no comparable attributes between query and any case");
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.c->id < b.c->id;
    });

    GradeDistribution dist;
    dist.attribute = target.name;
    dist.scale = scale;
    for (const auto& s : scored) {
        if (dist.neighbors.size() == k) break;
        const auto* grade = s.c->get(target.name);
        if (!grade) continue;
        const auto& label = std::get<std::string>(*grade);
        dist.neighbors.push_back({{s.c->id, s.score}, label, *s.c});
        ++dist.counts[label];
    }
    if (dist.neighbors.empty()) throw validation_error("no labeled neighbors");

    const double n = static_cast<double>(dist.neighbors.size());
    for (const auto& [label, count] : dist.counts) dist.proportions[label] = count / n;

    // Majority vote, ties toward the better grade; scale runs worst -> best.
    int top = -1;
    for (const auto& label : scale) {
        auto it = dist.counts.find(label);
        if (it == dist.counts.end()) continue;
        if (it->second >= top) {
            top = it->second;
            dist.suggestion = label;
        }
        dist.best = label;
    }

    if (dist.best != dist.suggestion) {
        const int reached = dist.counts.at(dist.best);
        dist.hint = dist.best + " is attainable: " + std::to_string(reached) + " of " +
                    std::to_string(dist.neighbors.size()) + " similar " +
                    cases_word(static_cast<int>(dist.neighbors.size())) + " reached it.";
    } else {
        dist.hint = dist.suggestion + " is the most likely outcome.";
    }
    return dist;
}

std::vector<Lever> find_levers(const CaseSchema& schema, const GradeDistribution& dist, const Query& query,
                               const FeedbackOptions& options) {
    std::vector<Lever> levers;
    if (dist.best == dist.suggestion || dist.scale.empty()) return levers;
    const auto suggestion_rank = grade_rank(dist.suggestion, dist.scale);

    for (const auto& spec : schema.attributes()) {
        if (spec.group != Group::Description || query.values.count(spec.name)) continue;

        double threshold = 0.0;
        std::function<double(const Value&)> as_number;
        if (const auto* num = std::get_if<NumericType>(&spec.type)) {
            threshold = options.numeric_fraction * (num->max - num->min);
            as_number = [](const Value& v) { return std::get<double>(v); };
        } else if (const auto* g = std::get_if<GradeType>(&spec.type)) {
            threshold = options.grade_steps;
            as_number = [g](const Value& v) {
                return static_cast<double>(grade_rank(std::get<std::string>(v), g->scale));
            };
        } else {
            continue;
        }

        double better_sum = 0.0, typical_sum = 0.0;
        int better_n = 0, typical_n = 0;
        for (const auto& nb : dist.neighbors) {
            const auto* v = nb.record.get(spec.name);
            if (!v) continue;
            const auto rank = grade_rank(nb.grade, dist.scale);
            if (rank > suggestion_rank) {
                better_sum += as_number(*v);
                ++better_n;
            } else if (rank == suggestion_rank) {
                typical_sum += as_number(*v);
                ++typical_n;
            }
        }
        if (better_n == 0 || typical_n == 0) continue;
        const double better = better_sum / better_n;
        const double typical = typical_sum / typical_n;
        if (better - typical >= threshold) levers.push_back({spec.name, better, typical});
    }
    return levers;
}

std::string generate_feedback(const CaseSchema& schema, const GradeDistribution& dist, const Query& query,
                              const FeedbackOptions& options) {
    const int n = static_cast<int>(dist.neighbors.size());
    const auto of_n = [n](int count) {
        return std::to_string(count) + " of " + std::to_string(n) + " similar " + cases_word(n);
    };

    std::string text = "Most likely " + dist.attribute + ": " + dist.suggestion + " (" +
                       of_n(dist.counts.count(dist.suggestion) ? dist.counts.at(dist.suggestion) : 0) + ").\n";
    if (dist.counts.size() == 1) {
        text += "All similar cases share this outcome.\n";
        return text;
    }
    if (dist.best == dist.suggestion) {
        text += "No similar case did better than " + dist.best + ".\n";
        return text;
    }
    text += "Best attainable: " + dist.best + " (" + of_n(dist.counts.at(dist.best)) + ").\n";

    const auto levers = find_levers(schema, dist, query, options);
    if (levers.empty()) return text;

    text += "Levers toward " + dist.best + ":";
    for (std::size_t i = 0; i < levers.size(); ++i) {
        const auto& lv = levers[i];
        const auto& spec = schema.at(lv.attribute);
        std::string better = fixed1(lv.better_mean), typical = fixed1(lv.typical_mean);
        if (const auto* g = std::get_if<GradeType>(&spec.type)) {
            better = "grade step " + better + " of " + std::to_string(g->scale.size() - 1);
            typical = "grade step " + typical;
        }
        text += (i ? ";" : "");
        text += " " + lv.attribute + " (better outcomes averaged " + better + " vs " + typical + " for " +
                dist.suggestion + ")";
    }
    text += ".\nScoring well on these is what separated the better outcomes.\n";
    return text;
}

Json distribution_to_json(const GradeDistribution& dist) {
    Json counts = Json::object(), proportions = Json::object(), neighbors = Json::array();
    for (const auto& [label, c] : dist.counts) counts[label] = c;
    for (const auto& [label, p] : dist.proportions) proportions[label] = p;
    for (const auto& nb : dist.neighbors)
        neighbors.push_back({{"caseId", nb.result.case_id}, {"score", nb.result.score}, {"grade", nb.grade}});
    return Json{{"attribute", dist.attribute}, {"counts", counts},          {"proportions", proportions},
                {"suggestion", dist.suggestion}, {"best", dist.best},      {"hint", dist.hint},
                {"neighbors", neighbors}};
}

// ---------------------------------------------------------------------------

LooReport leave_one_out(const CaseBase& base, std::size_t k, const PredictOptions& options) {
    const auto& schema = base.schema();
    const auto& target = graded_attribute(schema, options);

    std::vector<const Case*> labeled;
    for (const auto& c : base.cases())
        if (c.get(target.name)) labeled.push_back(&c);
    if (labeled.size() < 2)
        throw validation_error("leave-one-out needs at least 2 cases with " + target.name + ", found " +
                               std::to_string(labeled.size()));

    LooReport report;
    report.k = k;
    for (const auto* held_out : labeled) {
        const auto query = query_from_case(schema, *held_out);
        if (query.values.empty())
            throw validation_error("case '" + held_out->id + "' has no weighted description values to query with");
        const auto dist = predict_final_grade(base.cases(), schema, query, k, options, held_out->id);
        const auto& actual = std::get<std::string>(*held_out->get(target.name));
        ++report.total;
        if (dist.suggestion == actual) ++report.exact_matches;
        ++report.confusion[{actual, dist.suggestion}];
    }
    report.accuracy = static_cast<double>(report.exact_matches) / report.total;
    return report;
}

Json loo_report_to_json(const LooReport& report) {
    Json confusion = Json::object();
    for (const auto& [key, count] : report.confusion) confusion[key.first][key.second] = count;
    return Json{{"k", report.k},
                {"total", report.total},
                {"exactMatches", report.exact_matches},
                {"accuracy", report.accuracy},
                {"confusion", confusion}};
}

}  // namespace cbr
