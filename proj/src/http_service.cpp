#include "ruka/service.hpp"

#include <atomic>
#include <thread>

// after the Eigen headers: httplib pulls in system headers that clash with them
#include "httplib.h"

namespace ruka {
namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::TimestampDisorder: return 409;
    case ErrorCode::MalformedFrame:
    case ErrorCode::InvalidArgument:
    case ErrorCode::ActuationLimit:
    case ErrorCode::LimitViolation: return 422;
    default: return 500;
  }
}

nlohmann::json error_json(ErrorCode code, const std::string& reason) {
  return {{"schema", 1}, {"type", "error"}, {"code", to_string(code)}, {"reason", reason}};
}

void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

nlohmann::json parse_body(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::MalformedFrame, "body is not valid JSON");
  return j;
}

}  // namespace

struct HttpService::Impl {
  ControlService& service;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};

  explicit Impl(ControlService& s) : service(s) { routes(); }

  template <typename F>
  void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      reply(res, status_for(e.code()), error_json(e.code(), e.what()));
    } catch (const std::exception& e) {
      reply(res, 500, error_json(ErrorCode::InvalidArgument, e.what()));
    }
  }

  void routes() {
    server.Get("/state", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::size_t n = req.has_param("n") ? std::stoul(req.get_param_value("n")) : 1;
        reply(res, 200, service.state_json(n));
      });
    });
    server.Get("/configs", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, service.configs_json()); });
    });
    server.Post("/configs", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = parse_body(req.body);
        if (!body.is_object() || !body.contains("controller") || !body["controller"].is_string()) {
          throw Error(ErrorCode::MalformedFrame, "expected {\"controller\": name}");
        }
        service.select_controller(kind_from_name(body["controller"].get<std::string>()));
        reply(res, 200, service.configs_json());
      });
    });
    server.Post("/target", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        nlohmann::json body;
        try {
          body = parse_body(req.body);
        } catch (const Error&) {
          service.count_rejection();
          throw;
        }
        service.submit_json(body);
        reply(res, 202, {{"schema", 1}, {"type", "accepted"}});
      });
    });
    server.Post("/calibrate", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        CalibrationOptions opts = service.calibration_options();
        if (!req.body.empty()) {
          const auto body = parse_body(req.body);
          opts.tolerance_deg = body.value("tolerance_deg", opts.tolerance_deg);
          opts.readings_per_probe = body.value("readings_per_probe", opts.readings_per_probe);
          opts.seed = body.value("seed", opts.seed);
        }
        const bool started = service.trigger_calibration(opts);
        reply(res, started ? 202 : 409, service.calibration_status());
      });
    });
    server.Get("/calibrate", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, service.calibration_status()); });
    });
    server.Get("/stream", [this](const httplib::Request& req, httplib::Response& res) {
      const std::size_t max = req.has_param("max") ? std::stoul(req.get_param_value("max")) : 0;
      auto seq = std::make_shared<std::uint64_t>(service.latest_seq());
      auto sent = std::make_shared<std::size_t>(0);
      res.set_chunked_content_provider("application/x-ndjson", [this, max, seq, sent](std::size_t,
                                                                                       httplib::DataSink& sink) {
        while (!stopping && service.running()) {
          const auto next = service.next_reading(*seq, std::chrono::milliseconds(200));
          if (!next) continue;
          *seq = next->first;
          const std::string line = next->second.dump() + "\n";
          if (!sink.write(line.data(), line.size())) return false;
          if (max > 0 && ++*sent >= max) sink.done();
          return true;
        }
        sink.done();
        return true;
      });
    });
    server.Post("/stream", [this](const httplib::Request&, httplib::Response& res,
                                  const httplib::ContentReader& reader) {
      std::string pending;
      std::size_t line_no = 0;
      std::size_t accepted = 0;
      nlohmann::json rejected = nlohmann::json::array();
      auto consume = [&](const std::string& line) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) return;
        try {
          nlohmann::json frame;
          try {
            frame = parse_body(line);
          } catch (const Error&) {
            service.count_rejection();
            throw;
          }
          service.submit_json(frame);
          ++accepted;
        } catch (const Error& e) {
          rejected.push_back({{"line", line_no}, {"code", to_string(e.code())}, {"reason", e.what()}});
        }
      };
      reader([&](const char* data, std::size_t len) {
        pending.append(data, len);
        for (std::size_t nl; (nl = pending.find('\n')) != std::string::npos;) {
          consume(pending.substr(0, nl));
          pending.erase(0, nl + 1);
        }
        return true;
      });
      if (!pending.empty()) consume(pending);
      reply(res, 200, {{"schema", 1}, {"type", "stream-summary"}, {"accepted", accepted}, {"rejected", rejected}});
    });
  }
};

HttpService::HttpService(ControlService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpService::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace ruka
