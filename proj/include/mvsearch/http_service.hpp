#ifndef MVSEARCH_HTTP_SERVICE_HPP
#define MVSEARCH_HTTP_SERVICE_HPP

#include <cstdio>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mvsearch/session.hpp"

namespace mvs {

inline int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BadSpec:
    case ErrorCode::SpecInvalid:
    case ErrorCode::MalformedPayload:
    case ErrorCode::EmptySession:
    case ErrorCode::InvalidArgument:
      return 400;
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownObject:
      return 404;
    case ErrorCode::SessionFinalized:
      return 409;
    case ErrorCode::NoIndex:
      return 503;
    default:
      return 500;
  }
}

/// Scores are written with exactly six decimals.
inline std::string format_score(double score) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", score);
  return buf;
}

inline std::string results_json(const ResultList& results) {
  std::string out = "{\"results\":[";
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i) out += ',';
    out += "{\"object_id\":" + nlohmann::json(results[i].object_id).dump() +
           ",\"category\":" + nlohmann::json(results[i].category).dump() + ",\"score\":" +
           format_score(results[i].score) + "}";
  }
  out += "]}";
  return out;
}

namespace detail {

inline void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

inline void send_error(httplib::Response& res, const Error& e) {
  nlohmann::json body = {{"error", std::string(error_name(e.code()))}, {"message", e.what()}};
  send_json(res, http_status(e.code()), body.dump());
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    send_error(res, e);
  } catch (const std::exception& e) {
    send_json(res, 500, nlohmann::json({{"error", "internal"}, {"message", e.what()}}).dump());
  }
}

}  // namespace detail

/// Mounts the /v1 endpoints onto `server`. `sessions` must outlive it.
///
///   POST /v1/sessions                 {"similarity","fusion","k","list_depth"} -> {"session_id"}
///   POST /v1/sessions/{id}/views      image or MVDS bytes -> {"ordinal"}
///   POST /v1/sessions/{id}/finalize   -> {"results":[{"object_id","category","score"}]}
///   GET  /v1/objects/{id}             -> {"object_id","category","views":[{"view_id","image"}]}
///   GET  /v1/index/status             -> {"objects","views","vocab_bins"}
inline void register_routes(httplib::Server& server, SessionManager& sessions) {
  server.Post("/v1/sessions", [&sessions](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadSpec, e.what());
      }
      if (!sessions.store()) throw Error(ErrorCode::NoIndex, "no index loaded");
      const auto id = sessions.create_session(SessionTemplate::from_json(body));
      detail::send_json(res, 200, nlohmann::json({{"session_id", id}}).dump());
    });
  });

  server.Post(R"(/v1/sessions/([^/]+)/views)", [&sessions](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const std::span<const std::uint8_t> payload(reinterpret_cast<const std::uint8_t*>(req.body.data()),
                                                  req.body.size());
      const auto ordinal = sessions.add_view(req.matches[1].str(), payload);
      detail::send_json(res, 200, nlohmann::json({{"ordinal", ordinal}}).dump());
    });
  });

  server.Post(R"(/v1/sessions/([^/]+)/finalize)", [&sessions](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] { detail::send_json(res, 200, results_json(sessions.finalize(req.matches[1].str()))); });
  });

  server.Get(R"(/v1/objects/([^/]+))", [&sessions](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const auto store = sessions.store();
      if (!store) throw Error(ErrorCode::NoIndex, "no index loaded");
      const auto id = req.matches[1].str();
      const auto* obj = store->find(id);
      if (!obj) throw Error(ErrorCode::UnknownObject, "no object " + id);
      nlohmann::json views = nlohmann::json::array();
      for (const auto& v : obj->views) views.push_back({{"view_id", v.view_id}, {"image", v.source}});
      detail::send_json(res, 200,
                        nlohmann::json({{"object_id", obj->object_id}, {"category", obj->category}, {"views", views}})
                            .dump());
    });
  });

  server.Get("/v1/index/status", [&sessions](const httplib::Request&, httplib::Response& res) {
    detail::guarded(res, [&] {
      const auto store = sessions.store();
      if (!store) throw Error(ErrorCode::NoIndex, "no index loaded");
      detail::send_json(
          res, 200,
          nlohmann::json({{"objects", store->objects.size()}, {"views", store->view_count()}, {"vocab_bins", store->bins()}})
              .dump());
    });
  });
}

}  // namespace mvs

#endif  // MVSEARCH_HTTP_SERVICE_HPP
