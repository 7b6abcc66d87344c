#include "cbr/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cbr/error.hpp"

namespace cbr {

namespace {

bool ranks_before(const RetrievalResult& a, const RetrievalResult& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.case_id < b.case_id;
}

void require_conforming(const AttributeSpec& spec, const Value& v) {
    if (auto problem = check_value(spec, v))
        throw validation_error("attribute '" + spec.name + "': " + *problem);
}

}  // namespace

double local_similarity(const AttributeSpec& spec, const Value& t, const Value& s) {
    if (spec.is_text()) throw std::logic_error("local_similarity called on text attribute '" + spec.name + "'");
    require_conforming(spec, t);
    require_conforming(spec, s);

    if (const auto* num = std::get_if<NumericType>(&spec.type)) {
        const double diff = std::abs(std::get<double>(t) - std::get<double>(s));
        return std::clamp(1.0 - diff / (num->max - num->min), 0.0, 1.0);
    }
    if (const auto* grade = std::get_if<GradeType>(&spec.type)) {
        if (grade->scale.size() == 1) return 1.0;
        const auto rt = static_cast<double>(grade_rank(std::get<std::string>(t), grade->scale));
        const auto rs = static_cast<double>(grade_rank(std::get<std::string>(s), grade->scale));
        return 1.0 - std::abs(rt - rs) / static_cast<double>(grade->scale.size() - 1);
    }
    // boolean / categorical
    return t == s ? 1.0 : 0.0;
}

bool try_global_similarity(const CaseSchema& schema, const Query& query, const Case& c, double& score) {
    double weighted = 0.0;
    double total_weight = 0.0;
    for (const auto& spec : schema.attributes()) {
        if (spec.weight <= 0.0) continue;
        auto qt = query.values.find(spec.name);
        if (qt == query.values.end()) continue;
        const auto* cs = c.get(spec.name);
        if (!cs) continue;
        weighted += local_similarity(spec, qt->second, *cs) * spec.weight;
        total_weight += spec.weight;
    }
    if (total_weight <= 0.0) return false;
    score = std::clamp(weighted / total_weight, 0.0, 1.0);
    return true;
}

double global_similarity(const CaseSchema& schema, const Query& query, const Case& c) {
    double score = 0.0;
    if (!try_global_similarity(schema, query, c, score))
        throw validation_error("no comparable attributes between query and case '" + c.id + "'");
    return score;
}

std::vector<RetrievalResult> rank_cases(std::span<const Case> cases, const CaseSchema& schema, const Query& query) {
    if (cases.empty()) throw validation_error("empty case base");
    std::vector<RetrievalResult> ranked;
    ranked.reserve(cases.size());
    for (const auto& c : cases) {
        double score = 0.0;
        if (try_global_similarity(schema, query, c, score)) ranked.push_back({c.id, score});
    }
    if (ranked.empty()) throw validation_error("no comparable attributes between query and any case");
    std::sort(ranked.begin(), ranked.end(), ranks_before);
    return ranked;
}

std::vector<RetrievalResult> retrieve_k(std::span<const Case> cases, const CaseSchema& schema, const Query& query,
                                        std::size_t k) {
    if (k == 0) throw validation_error("k must be at least 1");
    if (cases.empty()) throw validation_error("empty case base");

    std::vector<RetrievalResult> scored;
    scored.reserve(cases.size());
    for (const auto& c : cases) {
        double score = 0.0;
        if (try_global_similarity(schema, query, c, score)) scored.push_back({c.id, score});
    }
    if (scored.empty()) throw validation_error("no comparable attributes between query and any case");

    const auto keep = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), ranks_before);
    scored.resize(keep);
    return scored;
}

}  // namespace cbr
