#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cbr/repository.hpp"
#include "cbr/similarity.hpp"

namespace cbr {

/// Lifecycle of one Retrieve-Reuse-Revise-Retain pass.
enum class SessionState { Created, Retrieved, Chosen, Revised, Retained, Closed };

enum class SessionOp { SubmitQuery, ChooseCase, Revise, Retain, Close };

std::string_view to_string(SessionState state);
std::string_view to_string(SessionOp op);

/// Legality table:
///
///   SubmitQuery  Created, Retrieved
///   ChooseCase   Retrieved
///   Revise       Chosen, Revised
///   Retain       Chosen, Revised
///   Close        every state except Closed
bool is_legal(SessionState state, SessionOp op);

/// State reached by a successful `op`.
SessionState next_state(SessionOp op);

/// Attribute edits for the Revise step; nullopt clears a value.
using Edits = std::map<std::string, std::optional<Value>>;

/// One pass through the 4R cycle against a named case base.
///
/// The session reads from the snapshot taken when it started, so its result
/// list is stable; retain writes to the live case base. Every operation is
/// atomic: on error the session is left exactly as it was. A session is
/// not internally synchronized; callers serialize operations on it.
class Session {
public:
    Session(std::string id, std::shared_ptr<LiveCaseBase> base);

    const std::string& id() const { return id_; }
    SessionState state() const { return state_; }
    const std::string& case_base_id() const { return live_->id(); }
    const CaseBase& snapshot() const { return *snapshot_; }
    const CaseSchema& schema() const { return snapshot_->schema(); }

    const std::optional<Query>& query() const { return query_; }
    const std::optional<std::vector<RetrievalResult>>& results() const { return results_; }
    std::size_t requested_k() const { return k_; }
    const std::optional<Case>& working_case() const { return working_; }
    const std::optional<std::string>& retained_id() const { return retained_id_; }
    /// Whether the retain replaced an existing case.
    bool retain_replaced() const { return replaced_; }

    /// Retrieve. Re-querying before a choice replaces the results.
    void submit_query(Query query, std::size_t k = kDefaultK);

    /// Reuse: copies the chosen case and overlays the query's values on it.
    void choose_case(const std::string& case_id);

    /// Revise: applies edits to the working case if the result validates.
    void revise(const Edits& edits);

    /// Retain: stores the working case under `new_id` in the live case base.
    void retain(const std::string& new_id);

    /// Postcycle: flushes the case base if this session retained a case.
    void close();

    /// Throws Error(IllegalState) unless `op` is legal in the current state.
    void require_legal(SessionOp op) const;

private:

    std::string id_;
    std::shared_ptr<LiveCaseBase> live_;
    std::shared_ptr<const CaseBase> snapshot_;
    SessionState state_ = SessionState::Created;
    std::optional<Query> query_;
    std::optional<std::vector<RetrievalResult>> results_;
    std::size_t k_ = 0;
    std::optional<Case> working_;
    std::optional<std::string> retained_id_;
    bool replaced_ = false;
};

/// Precycle: resolves and loads the case base, then opens a session on it.
/// Throws Error(NotFound) for an unknown case base.
Session start_session(CaseBaseStore& store, const std::string& case_base_id);

/// Random 128-bit hex token.
std::string make_session_id();

/// Owns concurrent sessions. Operations on one session are serialized by a
/// per-session lock; distinct sessions never block each other.
class SessionManager {
public:
    using Clock = std::chrono::steady_clock;

    explicit SessionManager(CaseBaseStore& store) : store_(store) {}

    /// Returns the new session's id.
    std::string start(const std::string& case_base_id);

    /// Runs `fn` under the session's lock. Throws Error(NotFound) for an
    /// unknown id.
    void with_session(const std::string& id, const std::function<void(Session&)>& fn);

    /// Closes a session, flushing retains. The closed session stays
    /// addressable (and rejects further operations) until reaped.
    void close(const std::string& id);

    /// Closes and forgets sessions idle for longer than `timeout`.
    /// Returns how many were reaped.
    std::size_t reap_idle(std::chrono::milliseconds timeout, Clock::time_point now = Clock::now());

    /// Closes every open session; used on shutdown.
    void close_all();

    std::size_t size() const;

private:
    struct Slot {
        std::mutex mutex;
        Session session;
        Clock::time_point last_used;

        explicit Slot(Session s) : session(std::move(s)), last_used(Clock::now()) {}
    };

    std::shared_ptr<Slot> slot(const std::string& id) const;

    CaseBaseStore& store_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
};

}  // namespace cbr
