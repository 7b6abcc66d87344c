#pragma once

// Random generators and independent reference implementations shared by
// the unit tests and the acceptance suite. The oracles here recompute
// similarity from first principles and never call into the library's
// scoring code.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cbr/case_base.hpp"
#include "cbr/case_model.hpp"
#include "cbr/similarity.hpp"

namespace cbr::test {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(CBR_FIXTURE_DIR) / name; }

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("cbr-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::mt19937_64& rng() { return rng_; }

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }

    /// Weight in [0,1], zero with some probability, occasionally exactly 1.
    double weight() {
        const int pick = integer(0, 9);
        if (pick == 0) return 0.0;
        if (pick == 1) return 1.0;
        return uniform(0.0, 1.0);
    }

    CaseSchema schema(int max_attributes = 10) {
        for (;;) {
            const int n = integer(1, max_attributes);
            std::vector<AttributeSpec> attrs;
            for (int i = 0; i < n; ++i) {
                AttributeSpec a;
                a.name = "a" + std::to_string(i);
                switch (integer(0, 4)) {
                    case 0: {
                        const double lo = uniform(-50.0, 50.0);
                        a.type = NumericType{lo, lo + uniform(0.5, 200.0)};
                        break;
                    }
                    case 1: {
                        std::vector<std::string> scale;
                        const int levels = integer(1, 7);
                        for (int g = 0; g < levels; ++g) scale.push_back("g" + std::to_string(g));
                        a.type = GradeType{scale};
                        break;
                    }
                    case 2: a.type = BooleanType{}; break;
                    case 3: {
                        std::vector<std::string> allowed;
                        const int m = integer(1, 5);
                        for (int c = 0; c < m; ++c) allowed.push_back("c" + std::to_string(c));
                        a.type = CategoricalType{allowed};
                        break;
                    }
                    default: a.type = TextType{}; break;
                }
                a.weight = a.is_text() ? 0.0 : weight();
                const int g = integer(0, 9);
                a.group = g < 7 ? Group::Description : g == 7 ? Group::Solution : g == 8 ? Group::Result
                                                                                          : Group::Justification;
                attrs.push_back(std::move(a));
            }
            const bool weighted = std::any_of(attrs.begin(), attrs.end(), [](const AttributeSpec& a) {
                return a.group == Group::Description && a.weight > 0.0;
            });
            if (weighted) return CaseSchema::create("random", std::move(attrs));
        }
    }

    Value value(const AttributeSpec& spec) {
        if (const auto* n = std::get_if<NumericType>(&spec.type)) {
            const int pick = integer(0, 9);
            if (pick == 0) return n->min;
            if (pick == 1) return n->max;
            return uniform(n->min, n->max);
        }
        if (const auto* g = std::get_if<GradeType>(&spec.type))
            return g->scale[static_cast<std::size_t>(integer(0, static_cast<int>(g->scale.size()) - 1))];
        if (std::holds_alternative<BooleanType>(spec.type)) return chance(0.5);
        if (const auto* c = std::get_if<CategoricalType>(&spec.type))
            return c->allowed[static_cast<std::size_t>(integer(0, static_cast<int>(c->allowed.size()) - 1))];
        return std::string("note ") + std::to_string(integer(0, 999));
    }

    Case make_case(const CaseSchema& schema, const std::string& id, double presence = 0.85) {
        Case c;
        c.id = id;
        for (const auto& a : schema.attributes())
            if (chance(presence)) c.values.emplace(a.name, value(a));
        return c;
    }

    /// Query over description attributes with at least one weighted value.
    Query query(const CaseSchema& schema, double presence = 0.7) {
        std::vector<const AttributeSpec*> weighted;
        Query q;
        for (const auto& a : schema.attributes()) {
            if (a.group != Group::Description || a.is_text()) continue;
            if (a.weight > 0.0) weighted.push_back(&a);
            if (chance(presence)) q.values.emplace(a.name, value(a));
        }
        const auto* must = weighted[static_cast<std::size_t>(integer(0, static_cast<int>(weighted.size()) - 1))];
        if (!q.values.count(must->name)) q.values.emplace(must->name, value(*must));
        return q;
    }

    std::vector<Case> cases(const CaseSchema& schema, int count, double presence = 0.85) {
        std::vector<Case> out;
        for (int i = 0; i < count; ++i) out.push_back(make_case(schema, "C" + std::to_string(100000 + i), presence));
        std::shuffle(out.begin(), out.end(), rng_);
        return out;
    }

private:
    std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// f(t, s) recomputed directly from the attribute definition.
inline double oracle_local(const AttributeSpec& spec, const Value& t, const Value& s) {
    if (const auto* n = std::get_if<NumericType>(&spec.type)) {
        const double span = n->max - n->min;
        const double dist = std::fabs(std::get<double>(t) - std::get<double>(s));
        return 1.0 - dist / span;
    }
    if (const auto* g = std::get_if<GradeType>(&spec.type)) {
        int rt = -1, rs = -1;
        for (int i = 0; i < static_cast<int>(g->scale.size()); ++i) {
            if (g->scale[static_cast<std::size_t>(i)] == std::get<std::string>(t)) rt = i;
            if (g->scale[static_cast<std::size_t>(i)] == std::get<std::string>(s)) rs = i;
        }
        if (g->scale.size() == 1) return 1.0;
        return 1.0 - std::abs(rt - rs) / double(g->scale.size() - 1);
    }
    return std::visit([](const auto& a, const auto& b) -> double {
        if constexpr (std::is_same_v<decltype(a), decltype(b)>)
            return a == b ? 1.0 : 0.0;
        else
            return 0.0;
    }, t, s);
}

/// Brute-force sum f*w / sum w over attributes weighted and present on both
/// sides. Returns a negative value when nothing is comparable.
inline double oracle_global(const CaseSchema& schema, const Query& q, const Case& c) {
    std::vector<double> f, w;
    for (const auto& spec : schema.attributes()) {
        if (!(spec.weight > 0.0)) continue;
        const auto qt = q.values.find(spec.name);
        const auto cs = c.values.find(spec.name);
        if (qt == q.values.end() || cs == c.values.end()) continue;
        f.push_back(oracle_local(spec, qt->second, cs->second));
        w.push_back(spec.weight);
    }
    if (w.empty()) return -1.0;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        num += f[i] * w[i];
        den += w[i];
    }
    return num / den;
}

/// Score everything, full sort, take the prefix.
inline std::vector<RetrievalResult> oracle_retrieve(const std::vector<Case>& cases, const CaseSchema& schema,
                                                    const Query& q, std::size_t k) {
    std::vector<RetrievalResult> all;
    for (const auto& c : cases) {
        const double s = oracle_global(schema, q, c);
        if (s >= 0.0) all.push_back({c.id, s});
    }
    std::stable_sort(all.begin(), all.end(), [](const RetrievalResult& a, const RetrievalResult& b) {
        return a.score > b.score || (a.score == b.score && a.case_id < b.case_id);
    });
    if (all.size() > k) all.resize(k);
    return all;
}

}  // namespace cbr::test
