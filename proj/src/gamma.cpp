#include "fdhw/gamma.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace fdhw {

namespace {

constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczosCoef = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

}  // namespace

double lanczos_gamma(double x) {
  if (x < 0.5) {
    // Γ(x)Γ(1−x) = π / sin(πx)
    return std::numbers::pi / (std::sin(std::numbers::pi * x) * lanczos_gamma(1.0 - x));
  }
  x -= 1.0;
  double a = kLanczosCoef[0];
  const double t = x + kLanczosG + 0.5;
  for (std::size_t i = 1; i < kLanczosCoef.size(); ++i) {
    a += kLanczosCoef[i] / (x + static_cast<double>(i));
  }
  return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

}  // namespace fdhw
