#include "clab/loadctl.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "clab/errors.hpp"

namespace clab::loadctl {

std::string LoadControlConfig::name() const {
  switch (kind) {
    case LoadControlKind::None: return "none";
    case LoadControlKind::FixedMpl: return "fixed_mpl";
    case LoadControlKind::ConflictRatio: return "conflict_ratio";
    case LoadControlKind::HalfAndHalf: return "half_and_half";
    case LoadControlKind::FeedbackIncremental: return "feedback_incremental";
    case LoadControlKind::FeedbackParabola: return "feedback_parabola";
    case LoadControlKind::CriticalBeta: return "critical_beta";
  }
  return "unknown";
}

std::optional<ParabolaFit> fit_parabola(
    std::span<const std::pair<double, double>> samples) {
  // Distinct abscissae.
  std::vector<double> xs;
  for (const auto& [x, y] : samples) {
    (void)y;
    bool seen = false;
    for (double v : xs)
      if (std::abs(v - x) < 1e-9) {
        seen = true;
        break;
      }
    if (!seen) xs.push_back(x);
  }
  if (xs.size() < 3) return std::nullopt;

  // Normal equations on the centered abscissa for conditioning.
  double mx = 0;
  for (const auto& [x, y] : samples) {
    (void)y;
    mx += x;
  }
  mx /= static_cast<double>(samples.size());

  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, t0 = 0, t1 = 0, t2 = 0;
  for (const auto& [x, y] : samples) {
    const double u = x - mx;
    const double u2 = u * u;
    s0 += 1;
    s1 += u;
    s2 += u2;
    s3 += u2 * u;
    s4 += u2 * u2;
    t0 += y;
    t1 += u * y;
    t2 += u2 * y;
  }
  // Solve the 3x3 system [s0 s1 s2; s1 s2 s3; s2 s3 s4] c = t by Cramer.
  const double det = s0 * (s2 * s4 - s3 * s3) - s1 * (s1 * s4 - s3 * s2) +
                     s2 * (s1 * s3 - s2 * s2);
  if (std::abs(det) < 1e-12) return std::nullopt;
  const double c0 = (t0 * (s2 * s4 - s3 * s3) - s1 * (t1 * s4 - s3 * t2) +
                     s2 * (t1 * s3 - s2 * t2)) /
                    det;
  const double c1 = (s0 * (t1 * s4 - t2 * s3) - t0 * (s1 * s4 - s3 * s2) +
                     s2 * (s1 * t2 - s2 * t1)) /
                    det;
  const double c2 = (s0 * (s2 * t2 - s3 * t1) - s1 * (s1 * t2 - s3 * t0) +
                     t0 * (s1 * s3 - s2 * s2)) /
                    det;
  // De-center: P(x) = c0 + c1 (x - mx) + c2 (x - mx)^2.
  ParabolaFit fit;
  fit.a2 = c2;
  fit.a1 = c1 - 2.0 * c2 * mx;
  fit.a0 = c0 - c1 * mx + c2 * mx * mx;
  return fit;
}

namespace {

class NoneController final : public LoadController {
 public:
  bool admit(long) const override { return true; }
};

class FixedMplController final : public LoadController {
 public:
  explicit FixedMplController(long m_max) : m_max_(m_max) {}
  bool admit(long in_flight) const override {
    return m_max_ < 0 || in_flight < m_max_;
  }
  long current_bound() const override { return m_max_; }

 private:
  long m_max_;
};

class ConflictRatioController final : public LoadController {
 public:
  explicit ConflictRatioController(const LoadControlConfig& cfg) : cfg_(cfg) {}
  bool admit(long) const override { return !suspended_; }
  void on_window(const WindowStats& w) override {
    if (w.cr >= cfg_.threshold)
      suspended_ = true;
    else if (w.cr < cfg_.threshold - cfg_.hysteresis)
      suspended_ = false;
  }

 private:
  LoadControlConfig cfg_;
  bool suspended_ = false;
};

class HalfAndHalfController final : public LoadController {
 public:
  explicit HalfAndHalfController(const LoadControlConfig& cfg) : cfg_(cfg) {}
  bool admit(long) const override { return !suspended_; }
  bool wants_progress_views() const override { return true; }

  std::optional<TxnId> on_event(std::span<const TxnProgressView> txns) override {
    long mature = 0, blocked_mature = 0;
    for (const auto& t : txns) {
      if (t.progress >= cfg_.maturity) {
        ++mature;
        if (t.blocked) ++blocked_mature;
      }
    }
    if (mature == 0 ||
        static_cast<double>(blocked_mature) <= cfg_.trigger * static_cast<double>(mature)) {
      suspended_ = false;
      return std::nullopt;
    }
    suspended_ = true;
    // Cancel the blocked txn with least progress.
    std::optional<TxnId> victim;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : txns) {
      if (!t.blocked) continue;
      if (t.progress < best || (t.progress == best && victim && t.id < *victim)) {
        best = t.progress;
        victim = t.id;
      }
    }
    return victim;
  }

 private:
  LoadControlConfig cfg_;
  bool suspended_ = false;
};

class FeedbackIncrementalController final : public LoadController {
 public:
  explicit FeedbackIncrementalController(const LoadControlConfig& cfg)
      : cfg_(cfg),
        bound_(std::clamp(cfg.initial_mpl, cfg.floor_mpl, cfg.ceiling_mpl)) {}

  bool admit(long in_flight) const override { return in_flight < bound_; }
  long current_bound() const override { return bound_; }

  void on_window(const WindowStats& w) override {
    if (!have_prev_) {
      have_prev_ = true;
    } else {
      bound_ += (w.throughput > prev_throughput_) ? 1 : -1;
      bound_ = std::clamp(bound_, cfg_.floor_mpl, cfg_.ceiling_mpl);
    }
    prev_throughput_ = w.throughput;
  }

 private:
  LoadControlConfig cfg_;
  long bound_;
  bool have_prev_ = false;
  double prev_throughput_ = 0;
};

class FeedbackParabolaController final : public LoadController {
 public:
  explicit FeedbackParabolaController(const LoadControlConfig& cfg)
      : cfg_(cfg),
        bound_(std::clamp(cfg.initial_mpl, cfg.floor_mpl, cfg.ceiling_mpl)) {}

  bool admit(long in_flight) const override { return in_flight < bound_; }
  long current_bound() const override { return bound_; }

  void on_window(const WindowStats& w) override {
    samples_.emplace_back(std::round(w.mean_mpl), w.throughput);
    while (samples_.size() > cfg_.history) samples_.pop_front();

    std::vector<std::pair<double, double>> buf(samples_.begin(), samples_.end());
    auto fit = fit_parabola(buf);
    if (fit && fit->a2 < 0) {
      bound_ = std::clamp(static_cast<long>(std::lround(fit->peak())),
                          cfg_.floor_mpl, cfg_.ceiling_mpl);
    } else {
      // Too few distinct MPLs or a convex fit: keep exploring with the
      // incremental walk so the sample set spreads out.
      if (have_prev_) {
        bound_ += (w.throughput > prev_throughput_) ? 1 : -1;
        bound_ = std::clamp(bound_, cfg_.floor_mpl, cfg_.ceiling_mpl);
      }
    }
    have_prev_ = true;
    prev_throughput_ = w.throughput;
  }

 private:
  LoadControlConfig cfg_;
  long bound_;
  std::deque<std::pair<double, double>> samples_;
  bool have_prev_ = false;
  double prev_throughput_ = 0;
};

class CriticalBetaController final : public LoadController {
 public:
  explicit CriticalBetaController(const LoadControlConfig& cfg) : cfg_(cfg) {}
  bool admit(long) const override { return !suspended_; }
  bool alpha_alarm() const override { return alarm_; }

  void on_window(const WindowStats& w) override {
    if (w.beta > cfg_.beta_limit)
      suspended_ = true;
    else if (w.beta < cfg_.beta_limit - cfg_.hysteresis)
      suspended_ = false;
    const double alpha_est = w.k1 * w.p_c * cfg_.normalized_wait;
    if (alpha_est > cfg_.alpha_alarm) alarm_ = true;
  }

 private:
  LoadControlConfig cfg_;
  bool suspended_ = false;
  bool alarm_ = false;
};

}  // namespace

std::unique_ptr<LoadController> LoadController::create(const LoadControlConfig& cfg) {
  switch (cfg.kind) {
    case LoadControlKind::None:
      return std::make_unique<NoneController>();
    case LoadControlKind::FixedMpl:
      return std::make_unique<FixedMplController>(cfg.m_max);
    case LoadControlKind::ConflictRatio:
      return std::make_unique<ConflictRatioController>(cfg);
    case LoadControlKind::HalfAndHalf:
      return std::make_unique<HalfAndHalfController>(cfg);
    case LoadControlKind::FeedbackIncremental:
      return std::make_unique<FeedbackIncrementalController>(cfg);
    case LoadControlKind::FeedbackParabola:
      return std::make_unique<FeedbackParabolaController>(cfg);
    case LoadControlKind::CriticalBeta:
      return std::make_unique<CriticalBetaController>(cfg);
  }
  throw ModelError("unknown load control kind");
}

LoadControlKind load_control_kind_from_name(const std::string& name) {
  if (name == "none") return LoadControlKind::None;
  if (name == "fixed_mpl") return LoadControlKind::FixedMpl;
  if (name == "conflict_ratio") return LoadControlKind::ConflictRatio;
  if (name == "half_and_half") return LoadControlKind::HalfAndHalf;
  if (name == "feedback_incremental") return LoadControlKind::FeedbackIncremental;
  if (name == "feedback_parabola") return LoadControlKind::FeedbackParabola;
  if (name == "critical_beta") return LoadControlKind::CriticalBeta;
  throw InputError("unknown load control '" + name + "'");
}

}  // namespace clab::loadctl
