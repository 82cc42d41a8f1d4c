#pragma once

// Discrete fractional-order differentiation of uniformly sampled signals.
//
// Three schemes are provided for orders 0 < alpha <= 1:
//   * Grünwald-Letnikov: binomial-weighted backward sum over the full history.
//   * Riemann-Liouville: d/dt of the order (1 - alpha) fractional integral.
//   * Caputo: order (1 - alpha) fractional integral of the first derivative (L1 type).
// At alpha = 1 all three collapse onto one shared two-point backward difference.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fdhw {

// Fractional order in (0, 1].
class Alpha {
 public:
  explicit Alpha(double value);
  double value() const noexcept { return value_; }
  bool is_integer() const noexcept { return value_ == 1.0; }
  friend bool operator==(Alpha, Alpha) = default;

 private:
  double value_;
};

enum class Approach { GrunwaldLetnikov, RiemannLiouville, Caputo };

inline constexpr Approach kAllApproaches[] = {Approach::GrunwaldLetnikov,
                                              Approach::RiemannLiouville, Approach::Caputo};

// Short tag used in file names and column headers: "GL", "RL", "C".
std::string_view approach_tag(Approach a) noexcept;
Approach parse_approach(std::string_view tag);

// Uniformly sampled, finite, real-valued sequence with step h seconds.
class SampledSignal {
 public:
  SampledSignal(std::vector<double> values, double h);

  std::span<const double> values() const noexcept { return values_; }
  double h() const noexcept { return h_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
  double h_;
};

struct FDOutput {
  std::vector<double> values;  // same length as the input, units U * s^-alpha
  Alpha alpha;
  Approach approach;
  std::size_t warmup;  // leading boundary-affected samples
};

// Number of leading samples flagged as boundary-affected: ceil(50 ms / h),
// clamped below the signal length.
std::size_t warmup_samples(double h, std::size_t length);

// w_0..w_n with w_v = (-1)^v binom(alpha, v).
std::vector<double> gl_weights(Alpha alpha, std::size_t n);

// Product-rectangle convolution quadrature for the Riemann-Liouville integral of
// order mu in (0, 1]. out[0] = 0.
SampledSignal frac_integral(const SampledSignal& signal, double mu);

// (y[k] - y[k-1]) / h with y[-1] = 0.
std::vector<double> backward_difference(const SampledSignal& signal);

FDOutput fd_gl(const SampledSignal& signal, Alpha alpha);
FDOutput fd_rl(const SampledSignal& signal, Alpha alpha);
FDOutput fd_caputo(const SampledSignal& signal, Alpha alpha);

FDOutput fd(const SampledSignal& signal, Alpha alpha, Approach approach);

}  // namespace fdhw
