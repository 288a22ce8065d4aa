// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "glimpse/matrix.hpp"
#include "glimpse/trace.hpp"

namespace glimpse {

enum class PerturbationMode { Deletion, Insertion };

/// Wire names "delete" / "insert".
std::string_view to_string(PerturbationMode mode) noexcept;

struct OracleRequest {
  std::string id;
  std::string trace_id;
  PerturbationMode mode = PerturbationMode::Deletion;
  std::vector<std::size_t> patch_indices;
};

struct OracleResponse {
  std::string id;
  double mean_log_likelihood = 0.0;
  std::optional<std::string> error;
};

// One JSON object per line, no trailing newline in the encoded string.
std::string encode_request(const OracleRequest& request);
std::string encode_response(const OracleResponse& response);
/// Throws OracleMalformed.
OracleRequest decode_request(std::string_view line);
/// Throws OracleMalformed.
OracleResponse decode_response(std::string_view line);

/// Answers "mean self-log-likelihood of the reference response under this
/// perturbation". Deletion with no patches is the unperturbed image; insertion
/// with no patches is the fully blurred image.
class ConfidenceOracle {
 public:
  virtual ~ConfidenceOracle() = default;
  virtual double mean_log_likelihood(const OracleRequest& request) = 0;
};

/// In-process stand-in for a model: log(eps + (1 - eps) * retained planted
/// fraction). Throws InvalidArgument on out-of-range or duplicate indices.
class SyntheticOracle final : public ConfidenceOracle {
 public:
  SyntheticOracle(std::size_t visual_count, std::vector<std::size_t> planted,
                  double epsilon = 1e-3);
  double mean_log_likelihood(const OracleRequest& request) override;

 private:
  std::size_t visual_count_;
  std::vector<bool> planted_;
  std::size_t planted_count_;
  double epsilon_;
};

/// Line-delimited JSON client. Endpoint forms: "host:port", "tcp://host:port",
/// or "exec:<shell command>" (talks to the command's stdin/stdout). Each
/// request gets one retry after a timeout or transport error, then
/// OracleUnavailable.
class RemoteOracle final : public ConfidenceOracle {
 public:
  explicit RemoteOracle(std::string endpoint,
                        std::chrono::milliseconds timeout = std::chrono::milliseconds(10000));
  ~RemoteOracle() override;
  RemoteOracle(const RemoteOracle&) = delete;
  RemoteOracle& operator=(const RemoteOracle&) = delete;

  double mean_log_likelihood(const OracleRequest& request) override;

 private:
  struct Transport;
  std::string endpoint_;
  std::chrono::milliseconds timeout_;
  std::unique_ptr<Transport> transport_;
};

using OracleHandler = std::function<double(const OracleRequest&)>;

/// Serves the wire protocol on 127.0.0.1. Connections are handled on their own
/// threads; malformed requests get an error response carrying the same id.
class OracleServer {
 public:
  explicit OracleServer(OracleHandler handler, std::uint16_t port = 0);
  ~OracleServer();
  OracleServer(const OracleServer&) = delete;
  OracleServer& operator=(const OracleServer&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  void stop();

 private:
  struct State;
  std::unique_ptr<State> state_;
  std::uint16_t port_ = 0;
};

/// Handles one request line and returns the response line. Never throws.
std::string handle_oracle_line(const OracleHandler& handler, std::string_view line);

/// Patch indices by descending saliency; ties by ascending index.
std::vector<std::size_t> perturbation_ranking(const Matrix& saliency);

struct CurveOptions {
  std::vector<double> levels{0.05, 0.15, 0.30};
  std::optional<std::size_t> step_patches;  // default max(1, round(K * level / 20))
};

struct PerturbationCurve {
  PerturbationMode mode = PerturbationMode::Deletion;
  double level = 0.0;
  std::vector<std::size_t> counts;
  std::vector<double> fractions;
  std::vector<double> scores;  // normalized: blurred -> 0, unperturbed -> 1
  double auc = 0.0;
};

/// Trapezoidal area divided by the span of `fractions`.
double normalized_auc(std::span<const double> fractions, std::span<const double> scores);

/// Cumulative perturbation counts for one level.
std::vector<std::size_t> curve_counts(std::size_t visual_count, double level,
                                      std::optional<std::size_t> step_patches);

/// One curve per level. Throws OracleUnavailable / OracleMalformed from the
/// oracle and DegenerateInput when the blurred and unperturbed references
/// coincide.
std::vector<PerturbationCurve> run_curves(const std::string& trace_id, std::size_t visual_count,
                                          std::span<const std::size_t> ranking,
                                          PerturbationMode mode, ConfidenceOracle& oracle,
                                          const CurveOptions& options = {});

}  // namespace glimpse
