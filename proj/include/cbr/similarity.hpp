#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cbr/case_model.hpp"

namespace cbr {

/// Number of neighbors shown to the user when no k is given.
inline constexpr std::size_t kDefaultK = 5;

struct RetrievalResult {
    std::string case_id;
    double score = 0.0;  // in [0,1]

    bool operator==(const RetrievalResult&) const = default;
};

/// Per-attribute similarity f(t, s) in [0,1].
///
///   numeric      1 - |t - s| / (max - min)
///   grade        1 - |rank(t) - rank(s)| / (|scale| - 1)
///   boolean,
///   categorical  exact match
///
/// Normalization ranges come from the schema, not from observed data.
/// Calling this on a text attribute is a contract violation (std::logic_error);
/// a value that does not conform to the attribute throws Error(Validation).
double local_similarity(const AttributeSpec& spec, const Value& t, const Value& s);

/// Weighted average of local similarities over the attributes that carry
/// weight > 0 and are present in both the query and the case:
///
///   sim(T, S) = sum_i f(T_i, S_i) * w_i / sum_i w_i
///
/// Attributes missing on either side drop out of both sums.
/// Throws Error(Validation) "no comparable attributes" when that set is empty.
double global_similarity(const CaseSchema& schema, const Query& query, const Case& c);

/// Same as global_similarity but reports an empty comparable set as false
/// instead of throwing.
bool try_global_similarity(const CaseSchema& schema, const Query& query, const Case& c, double& score);

/// Scores every case and returns them ordered by score (non-increasing),
/// ties broken by ascending case id. Cases that share no comparable
/// attribute with the query are left out.
/// Throws on an empty case list or when no case is comparable.
std::vector<RetrievalResult> rank_cases(std::span<const Case> cases, const CaseSchema& schema, const Query& query);

/// The first min(k, comparable cases) entries of rank_cases. Linear scan.
std::vector<RetrievalResult> retrieve_k(std::span<const Case> cases, const CaseSchema& schema, const Query& query,
                                        std::size_t k = kDefaultK);

}  // namespace cbr
