#include "cbr/cycle_engine.hpp"

#include <algorithm>
#include <iostream>
#include <random>

#include "cbr/error.hpp"

namespace cbr {

std::string_view to_string(SessionState state) {
    switch (state) {
        case SessionState::Created: return "created";
        case SessionState::Retrieved: return "retrieved";
        case SessionState::Chosen: return "chosen";
        case SessionState::Revised: return "revised";
        case SessionState::Retained: return "retained";
        case SessionState::Closed: return "closed";
    }
    return "closed";
}

std::string_view to_string(SessionOp op) {
    switch (op) {
        case SessionOp::SubmitQuery: return "query";
        case SessionOp::ChooseCase: return "choose";
        case SessionOp::Revise: return "revise";
        case SessionOp::Retain: return "retain";
        case SessionOp::Close: return "close";
    }
    return "close";
}

bool is_legal(SessionState state, SessionOp op) {
    using S = SessionState;
    switch (op) {
        case SessionOp::SubmitQuery: return state == S::Created || state == S::Retrieved;
        case SessionOp::ChooseCase: return state == S::Retrieved;
        case SessionOp::Revise:
        case SessionOp::Retain: return state == S::Chosen || state == S::Revised;
        case SessionOp::Close: return state != S::Closed;
    }
    return false;
}

SessionState next_state(SessionOp op) {
    switch (op) {
        case SessionOp::SubmitQuery: return SessionState::Retrieved;
        case SessionOp::ChooseCase: return SessionState::Chosen;
        case SessionOp::Revise: return SessionState::Revised;
        case SessionOp::Retain: return SessionState::Retained;
        case SessionOp::Close: return SessionState::Closed;
    }
    return SessionState::Closed;
}

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

Session::Session(std::string id, std::shared_ptr<LiveCaseBase> base)
    : id_(std::move(id)), live_(std::move(base)), snapshot_(live_->snapshot()) {}

void Session::require_legal(SessionOp op) const {
    if (!is_legal(state_, op))
        throw illegal_state("cannot " + std::string(to_string(op)) + " in state " + std::string(to_string(state_)));
}

void Session::submit_query(Query query, std::size_t k) {
    require_legal(SessionOp::SubmitQuery);
    validate_query(schema(), query);
    auto results = retrieve_k(*snapshot_, query, k);

    query_ = std::move(query);
    results_ = std::move(results);
    k_ = k;
    state_ = SessionState::Retrieved;
}

void Session::choose_case(const std::string& case_id) {
    require_legal(SessionOp::ChooseCase);
    const bool listed = std::any_of(results_->begin(), results_->end(),
                                    [&](const RetrievalResult& r) { return r.case_id == case_id; });
    if (!listed) throw validation_error("case '" + case_id + "' is not among the retrieved results");

    Case working = get_case(*snapshot_, case_id);
    for (const auto& [name, value] : query_->values) working.values.insert_or_assign(name, value);
    require_valid(schema(), working);

    working_ = std::move(working);
    state_ = SessionState::Chosen;
}

void Session::revise(const Edits& edits) {
    require_legal(SessionOp::Revise);
    Case revised = *working_;
    for (const auto& [name, value] : edits) {
        if (!schema().find(name)) throw validation_error("attribute '" + name + "': unknown attribute");
        if (value)
            revised.values.insert_or_assign(name, *value);
        else
            revised.values.erase(name);
    }
    require_valid(schema(), revised);

    working_ = std::move(revised);
    state_ = SessionState::Revised;
}

void Session::retain(const std::string& new_id) {
    require_legal(SessionOp::Retain);
    if (new_id.empty()) throw validation_error("retain needs a non-empty case id");
    Case stored = *working_;
    stored.id = new_id;
    require_valid(schema(), stored);
    replaced_ = live_->retain(stored);

    working_ = std::move(stored);
    retained_id_ = new_id;
    state_ = SessionState::Retained;
}

void Session::close() {
    require_legal(SessionOp::Close);
    if (retained_id_) live_->flush();
    state_ = SessionState::Closed;
}

Session start_session(CaseBaseStore& store, const std::string& case_base_id) {
    return Session(make_session_id(), store.open(case_base_id));
}

std::string make_session_id() {
    static thread_local std::mt19937_64 rng{[] {
        std::random_device rd;
        std::seed_seq seq{rd(), rd(), rd(), rd()};
        return std::mt19937_64(seq);
    }()};
    static constexpr char hex[] = "0123456789abcdef";
    std::string id;
    for (int word = 0; word < 2; ++word) {
        auto bits = rng();
        for (int i = 0; i < 16; ++i, bits >>= 4) id += hex[bits & 0xF];
    }
    return id;
}

// ---------------------------------------------------------------------------
// SessionManager
// ---------------------------------------------------------------------------

std::string SessionManager::start(const std::string& case_base_id) {
    auto session = start_session(store_, case_base_id);
    auto id = session.id();
    std::lock_guard lock(mutex_);
    sessions_.emplace(id, std::make_shared<Slot>(std::move(session)));
    return id;
}

std::shared_ptr<SessionManager::Slot> SessionManager::slot(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw not_found("session '" + id + "' not found");
    return it->second;
}

void SessionManager::with_session(const std::string& id, const std::function<void(Session&)>& fn) {
    auto s = slot(id);
    std::lock_guard lock(s->mutex);
    s->last_used = Clock::now();
    fn(s->session);
}

void SessionManager::close(const std::string& id) {
    with_session(id, [](Session& s) { s.close(); });
}

std::size_t SessionManager::reap_idle(std::chrono::milliseconds timeout, Clock::time_point now) {
    std::vector<std::pair<std::string, std::shared_ptr<Slot>>> candidates;
    {
        std::lock_guard lock(mutex_);
        for (const auto& [id, s] : sessions_) candidates.emplace_back(id, s);
    }
    std::size_t reaped = 0;
    for (auto& [id, s] : candidates) {
        {
            std::unique_lock session_lock(s->mutex, std::try_to_lock);
            if (!session_lock.owns_lock()) continue;  // busy, so not idle
            if (now - s->last_used <= timeout) continue;
            if (s->session.state() != SessionState::Closed) {
                try {
                    s->session.close();
                } catch (const Error& e) {
                    std::cerr << "session " << id << ": close failed, keeping it: " << e.what() << '\n';
                    continue;
                }
            }
        }
        std::lock_guard lock(mutex_);
        sessions_.erase(id);
        ++reaped;
    }
    return reaped;
}

void SessionManager::close_all() {
    std::vector<std::shared_ptr<Slot>> all;
    {
        std::lock_guard lock(mutex_);
        for (const auto& [_, s] : sessions_) all.push_back(s);
    }
    for (auto& s : all) {
        std::lock_guard lock(s->mutex);
        if (s->session.state() == SessionState::Closed) continue;
        try {
            s->session.close();
        } catch (const Error& e) {
            std::cerr << "session " << s->session.id() << ": close failed: " << e.what() << '\n';
        }
    }
}

std::size_t SessionManager::size() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

}  // namespace cbr
