#ifndef MVSEARCH_SESSION_HPP
#define MVSEARCH_SESSION_HPP

#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvsearch/descriptor_io.hpp"
#include "mvsearch/index.hpp"
#include "mvsearch/thread_pool.hpp"

namespace mvs {

/// Query parameters fixed when a session is created.
struct SessionTemplate {
  SimilarityKind similarity = SimilarityKind::MinMax;
  FusionMode mode = SingleMode{};
  std::size_t k = 20;
  std::size_t list_depth = 100;

  /// {"similarity":"nhi","fusion":"set_weighted_average_max","k":20,"list_depth":100}
  static SessionTemplate from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::BadSpec, "session spec must be a JSON object");
    SessionTemplate t;
    try {
      const auto sim = j.at("similarity").get<std::string>();
      const auto fusion = j.at("fusion").get<std::string>();
      const auto s = parse_similarity(sim);
      if (!s) throw Error(ErrorCode::BadSpec, "unknown similarity " + sim);
      const auto f = parse_fusion(fusion);
      if (!f) throw Error(ErrorCode::BadSpec, "unknown fusion " + fusion);
      t.similarity = *s;
      t.mode = *f;
      if (j.contains("k")) t.k = j.at("k").get<std::size_t>();
      if (j.contains("list_depth")) t.list_depth = j.at("list_depth").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::BadSpec, e.what());
    }
    if (t.k == 0) throw Error(ErrorCode::BadSpec, "k must be >= 1");
    if (t.list_depth == 0) throw Error(ErrorCode::BadSpec, "list_depth must be >= 1");
    return t;
  }
};

enum class ViewState { Received, Extracted, Matched };

/// Incremental multi-view query sessions over a shared read-only store.
///
/// add_view decodes the payload on the caller's thread and hands extraction,
/// quantization and per-view matching to a worker pool, so later views can
/// arrive while earlier ones are still being processed. Finished views are
/// folded into the session in arrival order. finalize waits for every
/// accepted view and produces the same ResultList as a batch `query` with the
/// views in the same order.
class SessionManager {
 public:
  explicit SessionManager(std::shared_ptr<const IndexStore> store = nullptr, DetectorConfig detector = {},
                          std::size_t workers = 0)
      : store_(std::move(store)), detector_(detector), pool_(workers) {}

  ~SessionManager() {
    // Let in-flight views finish before the pool joins.
    std::vector<std::shared_ptr<Session>> all;
    {
      std::lock_guard lock(mu_);
      for (auto& [id, s] : sessions_) all.push_back(s);
    }
    for (auto& s : all) {
      std::unique_lock lock(s->mu);
      s->cv.wait(lock, [&] { return s->processed == s->received; });
    }
  }

  std::shared_ptr<const IndexStore> store() const {
    std::lock_guard lock(mu_);
    return store_;
  }

  void set_store(std::shared_ptr<const IndexStore> store) {
    std::lock_guard lock(mu_);
    store_ = std::move(store);
  }

  std::string create_session(const SessionTemplate& t) {
    auto store = this->store();
    if (!store) throw Error(ErrorCode::NoIndex, "no index loaded");
    if (t.k == 0 || t.list_depth == 0) throw Error(ErrorCode::BadSpec, "k and list_depth must be >= 1");
    auto s = std::make_shared<Session>(t, std::move(store));
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%08llu", static_cast<unsigned long long>(++next_id_));
    std::lock_guard lock(mu_);
    sessions_.emplace(buf, s);
    return buf;
  }

  /// Returns the 1-based arrival ordinal.
  std::size_t add_view(const std::string& session_id, std::span<const std::uint8_t> payload) {
    auto s = find(session_id);
    {
      std::lock_guard lock(s->mu);
      if (s->finalized) throw Error(ErrorCode::SessionFinalized, "session " + session_id + " is finalized");
    }
    auto pending = decode(payload);

    std::size_t ordinal = 0;
    {
      std::lock_guard lock(s->mu);
      if (s->finalized) throw Error(ErrorCode::SessionFinalized, "session " + session_id + " is finalized");
      ordinal = ++s->received;
      s->slots.emplace_back();
      s->states.push_back(ViewState::Received);
    }
    pool_.post([this, s, ordinal, pending = std::move(pending)]() mutable { process(s, ordinal, std::move(pending)); });
    return ordinal;
  }

  ResultList finalize(const std::string& session_id) {
    auto s = find(session_id);
    std::unique_lock lock(s->mu);
    if (s->result) return *s->result;
    if (s->received == 0) throw Error(ErrorCode::EmptySession, "session " + session_id + " has no views");
    s->finalized = true;
    s->cv.wait(lock, [&] { return s->folded == s->received; });
    if (s->failure) std::rethrow_exception(s->failure);

    const auto& store = *s->store;
    const auto& t = s->tmpl;
    ResultList out;
    if (std::holds_alternative<SingleMode>(t.mode)) {
      if (s->received != 1)
        throw Error(ErrorCode::BadSpec, "fusion none takes exactly one view, session has " + std::to_string(s->received));
      out = rank_by_best_view(store, s->view_scores.front(), t.k);
    } else if (std::holds_alternative<EarlyFusionKind>(t.mode)) {
      const auto fused = s->early->result();
      out = rank_by_best_view(store, score_views(store, std::span<const double>(fused), t.similarity), t.k);
    } else {
      out = rank_late(store, s->view_scores, std::get<LateFusionKind>(t.mode), t.list_depth, t.k);
    }
    s->result = out;
    return out;
  }

  std::vector<ViewState> view_states(const std::string& session_id) {
    auto s = find(session_id);
    std::lock_guard lock(s->mu);
    return s->states;
  }

  std::size_t session_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

 private:
  struct Pending {
    std::optional<DescriptorSet> descriptors;
    std::optional<GrayImage> image;
  };

  struct Slot {
    bool ready = false;
    BowHistogram histogram;
    std::vector<double> scores;
  };

  struct Session {
    Session(SessionTemplate t, std::shared_ptr<const IndexStore> st) : tmpl(t), store(std::move(st)) {
      if (const auto* e = std::get_if<EarlyFusionKind>(&tmpl.mode)) early.emplace(*e);
    }

    SessionTemplate tmpl;
    std::shared_ptr<const IndexStore> store;
    std::mutex mu;
    std::condition_variable cv;
    bool finalized = false;
    std::size_t received = 0;
    std::size_t processed = 0;
    std::size_t folded = 0;
    std::vector<Slot> slots;
    std::vector<ViewState> states;
    std::optional<EarlyFusionAccumulator> early;
    std::vector<std::vector<double>> view_scores;  // per folded view (single and late modes)
    std::exception_ptr failure;
    std::optional<ResultList> result;
  };

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session " + id);
    return it->second;
  }

  Pending decode(std::span<const std::uint8_t> payload) const {
    Pending p;
    if (is_descriptor_payload(payload)) {
      try {
        p.descriptors = decode_descriptors(payload);
      } catch (const Error& e) {
        throw Error(ErrorCode::MalformedPayload, e.what());
      }
    } else if (looks_like_image(payload)) {
      p.image = decode_image(payload);
      if (p.image->width() < kMinDetectSide || p.image->height() < kMinDetectSide)
        throw Error(ErrorCode::MalformedPayload, "image smaller than 16x16");
    } else {
      throw Error(ErrorCode::MalformedPayload, "payload is neither an image nor an MVDS descriptor file");
    }
    return p;
  }

  void process(const std::shared_ptr<Session>& s, std::size_t ordinal, Pending pending) {
    Slot slot;
    std::exception_ptr failure;
    try {
      DescriptorSet ds = pending.descriptors ? std::move(*pending.descriptors) : extract(*pending.image, detector_);
      set_state(*s, ordinal, ViewState::Extracted);
      slot.histogram = s->store->histogram(ds);
      if (!s->early) slot.scores = score_views(*s->store, slot.histogram, s->tmpl.similarity);
    } catch (...) {
      failure = std::current_exception();
    }

    std::lock_guard lock(s->mu);
    if (failure && !s->failure) s->failure = failure;
    slot.ready = true;
    s->slots[ordinal - 1] = std::move(slot);
    ++s->processed;
    while (s->folded < s->slots.size() && s->slots[s->folded].ready) {
      auto& next = s->slots[s->folded];
      if (s->early)
        s->early->add(next.histogram);
      else
        s->view_scores.push_back(std::move(next.scores));
      next.histogram.bins.clear();
      next.histogram.bins.shrink_to_fit();
      s->states[s->folded] = ViewState::Matched;
      ++s->folded;
    }
    s->cv.notify_all();
  }

  static void set_state(Session& s, std::size_t ordinal, ViewState state) {
    std::lock_guard lock(s.mu);
    s.states[ordinal - 1] = state;
  }

  mutable std::mutex mu_;
  std::shared_ptr<const IndexStore> store_;
  DetectorConfig detector_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::atomic<std::uint64_t> next_id_{0};
  ThreadPool pool_;  // last member: joins before the sessions map is destroyed
};

}  // namespace mvs

#endif  // MVSEARCH_SESSION_HPP
