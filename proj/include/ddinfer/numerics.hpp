#pragma once

// Log-domain reductions. All sums run in index order so results do not depend
// on how a caller chunks its data.

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace ddinfer {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Streaming log(sum exp(x_i)) and log(sum exp(2 x_i)), rescaled on each new maximum.
class LogSumExp {
 public:
  void add(double x) {
    if (x == kNegInf) return;
    if (x > max_) {
      const double r = std::exp(max_ - x);  // 0 when max_ is -inf
      sum_ = sum_ * r + 1.0;
      sum_sq_ = sum_sq_ * r * r + 1.0;
      max_ = x;
    } else {
      const double t = std::exp(x - max_);
      sum_ += t;
      sum_sq_ += t * t;
    }
  }

  [[nodiscard]] bool empty() const { return max_ == kNegInf; }
  [[nodiscard]] double max() const { return max_; }
  [[nodiscard]] double value() const { return empty() ? kNegInf : max_ + std::log(sum_); }
  /// (sum w)^2 / sum w^2; 0 when empty.
  [[nodiscard]] double effective_sample_size() const {
    return empty() ? 0.0 : sum_ * sum_ / sum_sq_;
  }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
};

inline double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& x) {
  LogSumExp acc;
  for (Eigen::Index i = 0; i < x.size(); ++i) acc.add(x[i]);
  return acc.value();
}

}  // namespace ddinfer
