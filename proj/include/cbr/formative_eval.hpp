#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cbr/case_base.hpp"

namespace cbr {

/// A retrieved neighbor that carries a final grade.
struct GradedNeighbor {
    RetrievalResult result;
    std::string grade;
    Case record;
};

/// Final-grade outlook from the k nearest labeled neighbors.
struct GradeDistribution {
    std::string attribute;            // the graded solution attribute, e.g. finalGrade
    std::vector<std::string> scale;   // worst -> best
    std::map<std::string, int> counts;
    std::map<std::string, double> proportions;
    std::string suggestion;  // majority grade, ties toward the better grade
    std::string best;        // best grade among the neighbors
    std::string hint;
    std::vector<GradedNeighbor> neighbors;

    int total() const;
};

struct PredictOptions {
    /// Graded solution attribute; empty selects the schema's first
    /// solution-group grade attribute.
    std::string attribute;
};

/// Retrieves the k nearest neighbors that have a final grade (unlabeled
/// neighbors are skipped and replaced by the next in rank) and tallies
/// their grades. `exclude_id` removes one case from consideration.
/// Throws Error(Validation) "no labeled neighbors" if none qualifies.
GradeDistribution predict_final_grade(std::span<const Case> cases, const CaseSchema& schema, const Query& query,
                                      std::size_t k = kDefaultK, const PredictOptions& options = {},
                                      std::string_view exclude_id = {});

inline GradeDistribution predict_final_grade(const CaseBase& base, const Query& query, std::size_t k = kDefaultK,
                                             const PredictOptions& options = {}) {
    return predict_final_grade(base.cases(), base.schema(), query, k, options);
}

struct FeedbackOptions {
    /// Minimum mean advantage, as a fraction of a numeric attribute's range,
    /// for the attribute to count as a lever (0.10 -> 10 points on 0..100).
    double numeric_fraction = 0.10;
    /// Minimum mean advantage in grade steps for grade attributes.
    double grade_steps = 1.0;
};

/// An open attribute on which better-outcome neighbors did markedly better.
struct Lever {
    std::string attribute;
    double better_mean = 0.0;  // neighbors graded above the suggestion
    double typical_mean = 0.0; // neighbors graded at the suggestion
};

/// Description attributes absent from the query where the neighbors that
/// beat the suggestion averaged at least the threshold above the neighbors
/// that matched it. Numeric and grade attributes only; grades are compared
/// by rank.
std::vector<Lever> find_levers(const CaseSchema& schema, const GradeDistribution& dist, const Query& query,
                               const FeedbackOptions& options = {});

/// Deterministic advice text: the likely outcome, the best attainable one,
/// and any levers toward it.
std::string generate_feedback(const CaseSchema& schema, const GradeDistribution& dist, const Query& query,
                              const FeedbackOptions& options = {});

Json distribution_to_json(const GradeDistribution& dist);

// ---------------------------------------------------------------------------
// Leave-one-out
// ---------------------------------------------------------------------------

struct LooReport {
    std::size_t k = kDefaultK;
    int total = 0;
    int exact_matches = 0;
    double accuracy = 0.0;
    /// (actual, predicted) -> count
    std::map<std::pair<std::string, std::string>, int> confusion;
};

/// Holds out each labeled case in turn, queries with its description and
/// compares the suggested grade to the actual one.
/// Throws Error(Validation) when fewer than two cases are labeled.
LooReport leave_one_out(const CaseBase& base, std::size_t k = kDefaultK, const PredictOptions& options = {});

/// {"k", "total", "exactMatches", "accuracy", "confusion": {actual: {predicted: n}}}
Json loo_report_to_json(const LooReport& report);

}  // namespace cbr
