// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include "glimpse/faithfulness.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "glimpse/error.hpp"

namespace glimpse {

using json = nlohmann::json;

std::string_view to_string(PerturbationMode mode) noexcept {
  return mode == PerturbationMode::Deletion ? "delete" : "insert";
}

// ---------------------------------------------------------------------------
// Wire format

std::string encode_request(const OracleRequest& r) {
  json j = {{"id", r.id},
            {"trace_id", r.trace_id},
            {"mode", to_string(r.mode)},
            {"patch_indices", r.patch_indices}};
  return j.dump();
}

std::string encode_response(const OracleResponse& r) {
  json j = {{"id", r.id}};
  if (r.error) {
    j["error"] = *r.error;
  } else {
    j["mean_log_likelihood"] = r.mean_log_likelihood;
  }
  return j.dump();
}

OracleRequest decode_request(std::string_view line) {
  try {
    const json j = json::parse(line);
    OracleRequest r;
    r.id = j.at("id").get<std::string>();
    r.trace_id = j.at("trace_id").get<std::string>();
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "delete") {
      r.mode = PerturbationMode::Deletion;
    } else if (mode == "insert") {
      r.mode = PerturbationMode::Insertion;
    } else {
      throw Error(ErrorCode::OracleMalformed, fmt::format("unknown mode '{}'", mode));
    }
    const auto& patches = j.at("patch_indices");
    if (!patches.is_array()) throw Error(ErrorCode::OracleMalformed, "patch_indices must be a list");
    for (const auto& p : patches) {
      if (!p.is_number_unsigned()) {
        throw Error(ErrorCode::OracleMalformed, fmt::format("patch index {} is not a non-negative integer", p.dump()));
      }
      r.patch_indices.push_back(p.get<std::size_t>());
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::OracleMalformed, fmt::format("malformed oracle request: {}", e.what()));
  }
}

OracleResponse decode_response(std::string_view line) {
  try {
    const json j = json::parse(line);
    OracleResponse r;
    r.id = j.at("id").get<std::string>();
    if (j.contains("error")) {
      r.error = j["error"].is_string() ? j["error"].get<std::string>() : j["error"].dump();
      return r;
    }
    r.mean_log_likelihood = j.at("mean_log_likelihood").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::OracleMalformed, fmt::format("malformed oracle response: {}", e.what()));
  }
}

// ---------------------------------------------------------------------------
// Synthetic oracle

SyntheticOracle::SyntheticOracle(std::size_t visual_count, std::vector<std::size_t> planted,
                                 double epsilon)
    : visual_count_(visual_count), planted_(visual_count, false), planted_count_(0),
      epsilon_(epsilon) {
  for (auto p : planted) {
    if (p >= visual_count) throw Error(ErrorCode::InvalidArgument, "planted patch out of range");
    if (!planted_[p]) ++planted_count_;
    planted_[p] = true;
  }
}

double SyntheticOracle::mean_log_likelihood(const OracleRequest& request) {
  std::vector<bool> seen(visual_count_, false);
  std::size_t hit = 0;
  for (auto p : request.patch_indices) {
    if (p >= visual_count_) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("patch index {} out of range", p));
    }
    if (seen[p]) throw Error(ErrorCode::InvalidArgument, fmt::format("duplicate patch index {}", p));
    seen[p] = true;
    if (planted_[p]) ++hit;
  }
  double retained = 1.0;
  if (planted_count_ > 0) {
    const double frac = static_cast<double>(hit) / static_cast<double>(planted_count_);
    retained = request.mode == PerturbationMode::Deletion ? 1.0 - frac : frac;
  }
  return std::log(epsilon_ + (1.0 - epsilon_) * retained);
}

// ---------------------------------------------------------------------------
// Remote oracle transport

namespace {

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool write_all(int fd, std::string_view data, bool is_socket) {
  while (!data.empty()) {
    const ssize_t n = is_socket ? ::send(fd, data.data(), data.size(), MSG_NOSIGNAL)
                                : ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

// Reads up to the next '\n' within the deadline. Leftover bytes stay in `buffer`.
std::string read_line(int fd, std::string& buffer, std::chrono::steady_clock::time_point deadline) {
  for (;;) {
    const auto nl = buffer.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw TransportError("timed out waiting for oracle response");
    pollfd pfd{fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::strerror(errno));
    }
    if (ready == 0) continue;
    char chunk[4096];
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::strerror(errno));
    }
    if (n == 0) throw TransportError("oracle closed the connection");
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

int connect_tcp(const std::string& host, const std::string& port, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw TransportError(fmt::format("cannot resolve {}:{}", host, port));
  }
  int fd = -1;
  std::string last_error = "no address";
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc < 0 && errno == EINPROGRESS) {
      pollfd pfd{fd, POLLOUT, 0};
      rc = ::poll(&pfd, 1, static_cast<int>(timeout.count())) == 1 ? 0 : -1;
      int err = 0;
      socklen_t len = sizeof err;
      if (rc == 0 && (::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) < 0 || err != 0)) {
        errno = err;
        rc = -1;
      }
    }
    if (rc == 0) {
      ::fcntl(fd, F_SETFL, flags);
      break;
    }
    last_error = std::strerror(errno);
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError(fmt::format("cannot connect to {}:{}: {}", host, port, last_error));
  return fd;
}

}  // namespace

struct RemoteOracle::Transport {
  int read_fd = -1;
  int write_fd = -1;
  bool is_socket = false;
  pid_t child = -1;
  std::string buffer;

  ~Transport() {
    if (read_fd >= 0) ::close(read_fd);
    if (write_fd >= 0 && write_fd != read_fd) ::close(write_fd);
    if (child > 0) {
      ::kill(child, SIGTERM);
      ::waitpid(child, nullptr, 0);
    }
  }

  static std::unique_ptr<Transport> open(const std::string& endpoint,
                                         std::chrono::milliseconds timeout) {
    auto t = std::make_unique<Transport>();
    if (endpoint.starts_with("exec:")) {
      ::signal(SIGPIPE, SIG_IGN);
      int to_child[2], from_child[2];
      if (::pipe(to_child) != 0) throw TransportError("pipe failed");
      if (::pipe(from_child) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw TransportError("pipe failed");
      }
      const pid_t pid = ::fork();
      if (pid < 0) throw TransportError("fork failed");
      if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        const std::string cmd = endpoint.substr(5);
        ::execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
      }
      ::close(to_child[0]);
      ::close(from_child[1]);
      t->write_fd = to_child[1];
      t->read_fd = from_child[0];
      t->child = pid;
      return t;
    }
    std::string addr = endpoint;
    if (addr.starts_with("tcp://")) addr = addr.substr(6);
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("oracle endpoint '{}' lacks a port", endpoint));
    }
    std::string host = addr.substr(0, colon);
    if (host.empty()) host = "127.0.0.1";
    t->read_fd = t->write_fd = connect_tcp(host, addr.substr(colon + 1), timeout);
    t->is_socket = true;
    return t;
  }
};

RemoteOracle::RemoteOracle(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {}

RemoteOracle::~RemoteOracle() = default;

double RemoteOracle::mean_log_likelihood(const OracleRequest& request) {
  const std::string line = encode_request(request) + "\n";
  std::string last_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      if (!transport_) transport_ = Transport::open(endpoint_, timeout_);
      if (!write_all(transport_->write_fd, line, transport_->is_socket)) {
        throw TransportError("write to oracle failed");
      }
      const auto deadline = std::chrono::steady_clock::now() + timeout_;
      for (;;) {
        const auto response = decode_response(read_line(transport_->read_fd, transport_->buffer, deadline));
        if (response.id != request.id) {
          // A stale answer to an abandoned request; keep reading.
          spdlog::debug("oracle: skipping response for id {}", response.id);
          continue;
        }
        if (response.error) {
          throw Error(ErrorCode::OracleMalformed,
                      fmt::format("oracle rejected request {}: {}", request.id, *response.error));
        }
        return response.mean_log_likelihood;
      }
    } catch (const TransportError& e) {
      last_error = e.what();
      transport_.reset();
      spdlog::warn("oracle {} attempt {} failed: {}", endpoint_, attempt + 1, last_error);
    }
  }
  throw Error(ErrorCode::OracleUnavailable,
              fmt::format("oracle {} unavailable: {}", endpoint_, last_error));
}

// ---------------------------------------------------------------------------
// Server

std::string handle_oracle_line(const OracleHandler& handler, std::string_view line) {
  OracleResponse response;
  try {
    const json j = json::parse(line, nullptr, false);
    if (j.is_object() && j.contains("id") && j["id"].is_string()) response.id = j["id"].get<std::string>();
    const auto request = decode_request(line);
    response.mean_log_likelihood = handler(request);
  } catch (const std::exception& e) {
    response.error = e.what();
  }
  return encode_response(response);
}

struct OracleServer::State {
  OracleHandler handler;
  int listen_fd = -1;
  std::atomic<bool> stopping{false};
  std::thread acceptor;
  std::mutex mutex;
  std::vector<std::thread> workers;

  void serve_connection(int fd) {
    std::string buffer;
    char chunk[4096];
    while (!stopping) {
      pollfd pfd{fd, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, 100);
      if (ready <= 0) continue;
      const ssize_t n = ::read(fd, chunk, sizeof chunk);
      if (n <= 0) break;
      buffer.append(chunk, static_cast<std::size_t>(n));
      for (auto nl = buffer.find('\n'); nl != std::string::npos; nl = buffer.find('\n')) {
        const std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        if (line.empty()) continue;
        if (!write_all(fd, handle_oracle_line(handler, line) + "\n", true)) break;
      }
    }
    ::close(fd);
  }
};

OracleServer::OracleServer(OracleHandler handler, std::uint16_t port)
    : state_(std::make_unique<State>()) {
  state_->handler = std::move(handler);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error(ErrorCode::IoFailure, "oracle server: socket failed");
  const int yes = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 16) != 0) {
    ::close(fd);
    throw Error(ErrorCode::IoFailure, fmt::format("oracle server: cannot listen on port {}", port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  state_->listen_fd = fd;

  state_->acceptor = std::thread([s = state_.get()] {
    while (!s->stopping) {
      pollfd pfd{s->listen_fd, POLLIN, 0};
      if (::poll(&pfd, 1, 100) <= 0) continue;
      const int conn = ::accept(s->listen_fd, nullptr, nullptr);
      if (conn < 0) continue;
      std::lock_guard lock(s->mutex);
      s->workers.emplace_back([s, conn] { s->serve_connection(conn); });
    }
  });
}

OracleServer::~OracleServer() { stop(); }

void OracleServer::stop() {
  if (!state_ || state_->stopping.exchange(true)) return;
  if (state_->acceptor.joinable()) state_->acceptor.join();
  std::lock_guard lock(state_->mutex);
  for (auto& w : state_->workers) {
    if (w.joinable()) w.join();
  }
  ::close(state_->listen_fd);
}

// ---------------------------------------------------------------------------
// Curves

std::vector<std::size_t> perturbation_ranking(const Matrix& saliency) {
  const auto values = saliency.data();
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

double normalized_auc(std::span<const double> fractions, std::span<const double> scores) {
  if (fractions.size() != scores.size() || fractions.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "AUC needs at least two matching points");
  }
  double area = 0.0;
  for (std::size_t i = 1; i < fractions.size(); ++i) {
    area += 0.5 * (fractions[i] - fractions[i - 1]) * (scores[i] + scores[i - 1]);
  }
  const double span = fractions.back() - fractions.front();
  if (!(span > 0.0)) throw Error(ErrorCode::InvalidArgument, "AUC over an empty span");
  return area / span;
}

std::vector<std::size_t> curve_counts(std::size_t visual_count, double level,
                                      std::optional<std::size_t> step_patches) {
  if (!(level > 0.0 && level <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("perturbation level {} outside (0, 1]", level));
  }
  const double k = static_cast<double>(visual_count);
  const auto total = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(k * level)));
  const std::size_t step =
      step_patches.value_or(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(k * level / 20.0))));
  if (step == 0) throw Error(ErrorCode::InvalidArgument, "perturbation step must be >= 1 patch");
  std::vector<std::size_t> counts;
  for (std::size_t c = 0; c < total; c += step) counts.push_back(c);
  counts.push_back(std::min(total, visual_count));
  return counts;
}

std::vector<PerturbationCurve> run_curves(const std::string& trace_id, std::size_t visual_count,
                                          std::span<const std::size_t> ranking,
                                          PerturbationMode mode, ConfidenceOracle& oracle,
                                          const CurveOptions& options) {
  if (ranking.size() != visual_count) {
    throw Error(ErrorCode::ShapeMismatch, "ranking must list every visual patch once");
  }
  std::size_t next_id = 0;
  auto ask = [&](PerturbationMode m, std::span<const std::size_t> patches) {
    OracleRequest req;
    req.id = fmt::format("{}:{}:{}", trace_id, to_string(m), next_id++);
    req.trace_id = trace_id;
    req.mode = m;
    req.patch_indices.assign(patches.begin(), patches.end());
    const double ll = oracle.mean_log_likelihood(req);
    if (!std::isfinite(ll)) {
      throw Error(ErrorCode::OracleMalformed, fmt::format("oracle returned non-finite value for {}", req.id));
    }
    return ll;
  };

  const double unperturbed = ask(PerturbationMode::Deletion, {});
  const double blurred = ask(PerturbationMode::Insertion, {});
  const double span = unperturbed - blurred;
  if (!(std::abs(span) > 0.0)) {
    throw Error(ErrorCode::DegenerateInput,
                fmt::format("trace {}: blurred and unperturbed likelihoods coincide", trace_id));
  }

  std::map<std::size_t, double> cache;
  cache[0] = mode == PerturbationMode::Deletion ? unperturbed : blurred;

  std::vector<PerturbationCurve> curves;
  for (double level : options.levels) {
    PerturbationCurve curve;
    curve.mode = mode;
    curve.level = level;
    curve.counts = curve_counts(visual_count, level, options.step_patches);
    for (auto c : curve.counts) {
      auto it = cache.find(c);
      if (it == cache.end()) it = cache.emplace(c, ask(mode, ranking.first(c))).first;
      curve.fractions.push_back(static_cast<double>(c) / static_cast<double>(visual_count));
      curve.scores.push_back((it->second - blurred) / span);
    }
    curve.auc = normalized_auc(curve.fractions, curve.scores);
    curves.push_back(std::move(curve));
  }
  return curves;
}

}  // namespace glimpse
