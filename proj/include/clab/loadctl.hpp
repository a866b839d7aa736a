#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clab/ccpolicy.hpp"

// Admission and cancellation controllers gating txn entry into the engine.
// Controllers are deterministic state machines driven by engine events.
namespace clab::loadctl {

using TxnId = ccpolicy::TxnId;

enum class LoadControlKind : std::uint8_t {
  None,
  FixedMpl,
  ConflictRatio,
  HalfAndHalf,
  FeedbackIncremental,
  FeedbackParabola,
  CriticalBeta,
};

struct LoadControlConfig {
  LoadControlKind kind = LoadControlKind::None;
  long m_max = -1;                // FixedMpl bound; < 0 means unlimited
  double threshold = 1.3;         // ConflictRatio suspend level
  double hysteresis = 0.05;       // threshold controllers resume below T - h
  double maturity = 0.25;         // HalfAndHalf: progress making a txn mature
  double trigger = 0.5;           // HalfAndHalf: blocked-mature fraction
  long window = 50;               // committed txns per observation window
  long floor_mpl = 1;             // feedback lower bound (the min-MPL value)
  long ceiling_mpl = 1000;        // feedback upper bound
  long initial_mpl = 10;          // feedback starting bound
  std::size_t history = 20;       // parabola: samples kept
  double beta_limit = 0.3;        // CriticalBeta suspend level (peak-throughput point)
  double alpha_alarm = 0.226;     // CriticalBeta alarm level
  double normalized_wait = 1.0 / 3.0;  // A, for the alpha estimate

  std::string name() const;
};

/// Windowed observations handed to controllers at each window boundary.
struct WindowStats {
  double start = 0;
  double end = 0;
  long commits = 0;
  double throughput = 0;
  double beta = 0;
  double cr = 1;
  double p_c = 0;
  double mean_mpl = 0;
  double k1 = 0;  // lock requests per commit
};

/// Instantaneous view of one in-flight txn, for cancellation decisions.
struct TxnProgressView {
  TxnId id = -1;
  bool blocked = false;
  double progress = 0;  // locks acquired / k
};

class LoadController {
 public:
  virtual ~LoadController() = default;

  /// Admission gate, consulted every time a queued txn could start.
  virtual bool admit(long in_flight) const = 0;

  /// Observation-window boundary.
  virtual void on_window(const WindowStats&) {}

  /// Per-event cancellation hook; returns a txn to cancel, if any.
  /// Only called when wants_progress_views() is true.
  virtual std::optional<TxnId> on_event(std::span<const TxnProgressView>) {
    return std::nullopt;
  }
  virtual bool wants_progress_views() const { return false; }

  /// Contention-intensity alarm latched by CriticalBeta.
  virtual bool alpha_alarm() const { return false; }

  /// Current MPL bound, for reporting; -1 when not bound-based.
  virtual long current_bound() const { return -1; }

  static std::unique_ptr<LoadController> create(const LoadControlConfig& cfg);
};

struct ParabolaFit {
  double a0 = 0;
  double a1 = 0;
  double a2 = 0;

  double peak() const { return -a1 / (2.0 * a2); }
};

/// Least-squares quadratic fit of throughput-vs-MPL samples.
/// Requires >= 3 distinct abscissae; returns nullopt otherwise.
std::optional<ParabolaFit> fit_parabola(
    std::span<const std::pair<double, double>> samples);

LoadControlKind load_control_kind_from_name(const std::string& name);

}  // namespace clab::loadctl
