#include "prosim/study_server.hpp"

#include "prosim/error.hpp"

#include "httplib.h"

namespace prosim {

using nlohmann::json;
using nlohmann::ordered_json;

int http_status(Errc code) {
  switch (code) {
    case Errc::NotFound:
    case Errc::UnknownTriad: return 404;
    case Errc::SessionMismatch: return 403;
    case Errc::DuplicateJudgment:
    case Errc::StudyComplete: return 409;
    case Errc::InvalidArgument:
    case Errc::ParseError: return 400;
    default: return 500;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, Errc code, const std::string& message) {
  send_json(res, http_status(code), {{"error", std::string(to_string(code))}, {"message", message}});
}

template <typename F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const json::exception& e) {
      send_error(res, Errc::ParseError, e.what());
    }
  };
}

ordered_json session_json(const Session& s, const StudyConfig& cfg) {
  ordered_json j = session_view(s);
  j["instructions"] = cfg.instructions;
  return j;
}

}  // namespace

struct StudyServer::Impl {
  explicit Impl(StudyStore& s) : store(s) {}
  StudyStore& store;
  httplib::Server http;
};

StudyServer::StudyServer(StudyStore& store, std::filesystem::path static_dir)
    : impl_(std::make_unique<Impl>(store)) {
  auto& http = impl_->http;
  StudyStore* st = &store;

  http.Post("/api/session", guarded([st](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body);
    const auto rater = body.at("rater_id").get<std::string>();
    send_json(res, 201, session_json(st->create_session(rater), st->config()));
  }));

  http.Get(R"(/api/session/([^/]+))", guarded([st](const httplib::Request& req, httplib::Response& res) {
    const auto s = st->session(req.matches[1]);
    if (!s) throw Error(Errc::NotFound, "session " + std::string(req.matches[1]));
    send_json(res, 200, session_json(*s, st->config()));
  }));

  http.Get(R"(/api/triad/([^/]+))", guarded([st](const httplib::Request& req, httplib::Response& res) {
    const TriadView v = st->triad_view(req.matches[1]);
    send_json(res, 200, {{"triad_id", v.triad_id}, {"lexical_form", v.lexical_form}, {"clips", v.clips}});
  }));

  http.Get(R"(/api/audio/([^/]+))", guarded([st](const httplib::Request& req, httplib::Response& res) {
    const auto bytes = st->serve_audio(req.matches[1]);
    res.set_content(std::string(bytes.begin(), bytes.end()), "audio/wav");
  }));

  http.Post("/api/judgment", guarded([st](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body);
    Judgment j;
    j.triad_id = body.at("triad_id").get<std::string>();
    j.rater_id = body.at("rater_id").get<std::string>();
    j.chosen_pair = pair_from_string(body.at("chosen_pair").get<std::string>());
    st->record_judgment(j);
    send_json(res, 201, {{"status", "recorded"}});
  }));

  http.Get("/api/export", guarded([st](const httplib::Request&, httplib::Response& res) {
    res.set_content(st->export_jsonl(), "application/x-ndjson");
  }));

  http.Get("/api/config", guarded([st](const httplib::Request&, httplib::Response& res) {
    const auto& cfg = st->config();
    send_json(res, 200, {{"instructions", cfg.instructions},
                         {"tasks_per_session", cfg.tasks_per_session + 1},
                         {"raters_per_triad", cfg.raters_per_triad}});
  }));

  if (!static_dir.empty() && std::filesystem::is_directory(static_dir)) {
    http.set_mount_point("/", static_dir.string());
  }
}

StudyServer::~StudyServer() { stop(); }

int StudyServer::bind(const std::string& host, int port) {
  auto& http = impl_->http;
  // httplib's default also sets SO_REUSEPORT, which would let a second
  // server share a port that is already taken.
  http.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  if (port == 0) {
    const int bound = http.bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::PortInUse, "no free port on " + host);
    return bound;
  }
  if (!http.bind_to_port(host, port)) throw Error(Errc::PortInUse, host + ":" + std::to_string(port));
  return port;
}

void StudyServer::run() { impl_->http.listen_after_bind(); }

void StudyServer::stop() {
  if (impl_) impl_->http.stop();
}

void StudyServer::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace prosim
