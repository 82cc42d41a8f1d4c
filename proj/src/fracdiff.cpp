#include "fdhw/fracdiff.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include <fmt/format.h>

#include "fdhw/gamma.hpp"

namespace fdhw {

Alpha::Alpha(double value) : value_(value) {
  if (!(value > 0.0 && value <= 1.0)) {
    throw std::invalid_argument(fmt::format("fractional order must lie in (0, 1], got {}", value));
  }
}

std::string_view approach_tag(Approach a) noexcept {
  switch (a) {
    case Approach::GrunwaldLetnikov:
      return "GL";
    case Approach::RiemannLiouville:
      return "RL";
    case Approach::Caputo:
      return "C";
  }
  return "?";
}

Approach parse_approach(std::string_view tag) {
  if (tag == "GL") return Approach::GrunwaldLetnikov;
  if (tag == "RL") return Approach::RiemannLiouville;
  if (tag == "C") return Approach::Caputo;
  throw std::invalid_argument(fmt::format("unknown approach '{}' (expected GL, RL or C)", tag));
}

SampledSignal::SampledSignal(std::vector<double> values, double h)
    : values_(std::move(values)), h_(h) {
  if (values_.size() < 2) {
    throw std::invalid_argument("sampled signal needs at least 2 samples");
  }
  if (!(h_ > 0.0) || !std::isfinite(h_)) {
    throw std::invalid_argument(fmt::format("grid step must be positive, got {}", h_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw std::invalid_argument(fmt::format("non-finite sample at index {}", i));
    }
  }
}

std::size_t warmup_samples(double h, std::size_t length) {
  // The small slack keeps 0.05 / 0.001 from rounding up to 51.
  const auto n = static_cast<std::size_t>(std::ceil(0.05 / h - 1e-9));
  return length == 0 ? 0 : std::min(n, length - 1);
}

std::vector<double> gl_weights(Alpha alpha, std::size_t n) {
  std::vector<double> w(n + 1);
  w[0] = 1.0;
  const double a = alpha.value();
  for (std::size_t v = 1; v <= n; ++v) {
    const double vd = static_cast<double>(v);
    w[v] = w[v - 1] * (vd - 1.0 - a) / vd;
  }
  return w;
}

SampledSignal frac_integral(const SampledSignal& signal, double mu) {
  if (!(mu > 0.0 && mu <= 1.0)) {
    throw std::invalid_argument(fmt::format("integral order must lie in (0, 1], got {}", mu));
  }
  const std::size_t n = signal.size();
  const auto y = signal.values();

  // b[m] = m^mu - (m-1)^mu, m >= 1
  std::vector<double> b(n);
  double prev = 0.0;
  for (std::size_t m = 1; m < n; ++m) {
    const double cur = std::pow(static_cast<double>(m), mu);
    b[m] = cur - prev;
    prev = cur;
  }

  const double scale = std::pow(signal.h(), mu) / lanczos_gamma(mu + 1.0);
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      acc += b[k - j] * y[j + 1];
    }
    out[k] = scale * acc;
  }
  return SampledSignal(std::move(out), signal.h());
}

std::vector<double> backward_difference(const SampledSignal& signal) {
  const auto y = signal.values();
  const double inv_h = 1.0 / signal.h();
  std::vector<double> d(y.size());
  d[0] = y[0] * inv_h;
  for (std::size_t k = 1; k < y.size(); ++k) {
    d[k] = (y[k] - y[k - 1]) * inv_h;
  }
  return d;
}

namespace {

FDOutput make_output(std::vector<double> values, const SampledSignal& signal, Alpha alpha,
                     Approach approach) {
  const std::size_t warmup = warmup_samples(signal.h(), signal.size());
  return FDOutput{std::move(values), alpha, approach, warmup};
}

}  // namespace

FDOutput fd_gl(const SampledSignal& signal, Alpha alpha) {
  if (alpha.is_integer()) {
    return make_output(backward_difference(signal), signal, alpha, Approach::GrunwaldLetnikov);
  }
  const std::size_t n = signal.size();
  const auto y = signal.values();
  const auto w = gl_weights(alpha, n - 1);
  const double scale = std::pow(signal.h(), -alpha.value());

  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t v = 0; v <= k; ++v) {
      acc += w[v] * y[k - v];
    }
    out[k] = scale * acc;
  }
  return make_output(std::move(out), signal, alpha, Approach::GrunwaldLetnikov);
}

FDOutput fd_rl(const SampledSignal& signal, Alpha alpha) {
  if (alpha.is_integer()) {
    return make_output(backward_difference(signal), signal, alpha, Approach::RiemannLiouville);
  }
  const SampledSignal integral = frac_integral(signal, 1.0 - alpha.value());
  const auto in = integral.values();
  const double inv_h = 1.0 / signal.h();
  std::vector<double> out(in.size());
  out[0] = in[0] * inv_h;
  for (std::size_t k = 1; k < in.size(); ++k) {
    out[k] = (in[k] - in[k - 1]) * inv_h;
  }
  return make_output(std::move(out), signal, alpha, Approach::RiemannLiouville);
}

FDOutput fd_caputo(const SampledSignal& signal, Alpha alpha) {
  if (alpha.is_integer()) {
    return make_output(backward_difference(signal), signal, alpha, Approach::Caputo);
  }
  // The quadrature reads d[1..k] only, so the inner derivative's d[0] never enters.
  std::vector<double> d = backward_difference(signal);
  d[0] = 0.0;
  const SampledSignal integral =
      frac_integral(SampledSignal(std::move(d), signal.h()), 1.0 - alpha.value());
  auto v = integral.values();
  return make_output(std::vector<double>(v.begin(), v.end()), signal, alpha, Approach::Caputo);
}

FDOutput fd(const SampledSignal& signal, Alpha alpha, Approach approach) {
  switch (approach) {
    case Approach::GrunwaldLetnikov:
      return fd_gl(signal, alpha);
    case Approach::RiemannLiouville:
      return fd_rl(signal, alpha);
    case Approach::Caputo:
      return fd_caputo(signal, alpha);
  }
  throw std::invalid_argument("unknown approach");
}

}  // namespace fdhw
