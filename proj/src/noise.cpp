#include "slowfast/noise.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "slowfast/stats.hpp"

namespace slowfast {

namespace {
constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;
constexpr std::uint64_t kNormalA = 0xA5A5A5A5A5A5A5A5ULL;
constexpr std::uint64_t kNormalB = 0x5A5A5A5A5A5A5A5AULL;
constexpr std::uint64_t kUniform = 0x3C3C3C3C3C3C3C3CULL;
}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

NoiseStream::NoiseStream(std::uint64_t seed, std::uint64_t replica_id, int mode_count,
                         std::uint64_t channel)
    : seed_(seed),
      replica_id_(replica_id),
      channel_(channel),
      mode_count_(mode_count),
      key_(mix64(mix64(mix64(seed) ^ replica_id) ^ channel)) {
  if (mode_count < 1) throw std::invalid_argument("noise stream needs at least one mode");
}

NoiseStream NoiseStream::for_replica(std::uint64_t replica_id) const {
  return NoiseStream(seed_, replica_id, mode_count_, channel_);
}

NoiseStream NoiseStream::for_channel(std::uint64_t channel) const {
  return NoiseStream(seed_, replica_id_, mode_count_, channel);
}

std::uint64_t NoiseStream::counter(int mode, std::uint64_t step) const {
  return mix64(mix64(key_ ^ static_cast<std::uint64_t>(mode)) ^ step);
}

double NoiseStream::normal(int mode, std::uint64_t step) const {
  const std::uint64_t c = counter(mode, step);
  const double u1 = (static_cast<double>(mix64(c ^ kNormalA) >> 11) + 1.0) * kTwoPow53Inv;
  const double u2 = static_cast<double>(mix64(c ^ kNormalB) >> 11) * kTwoPow53Inv;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double NoiseStream::uniform(int mode, std::uint64_t step) const {
  const std::uint64_t c = counter(mode, step);
  return (static_cast<double>(mix64(c ^ kUniform) >> 11) + 0.5) * kTwoPow53Inv;
}

// ---------------------------------------------------------------------------

OuPropagator::OuPropagator(std::span<const double> rates, double h, double eps) {
  if (!(h > 0.0)) throw std::invalid_argument("OU step size must be positive");
  if (!(eps > 0.0)) throw std::invalid_argument("scale separation eps must be positive");
  const std::size_t n = rates.size();
  decay_.resize(n);
  gain_.resize(n);
  noise_sd_.resize(n);
  const double tau = h / eps;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = rates[k];
    if (!(a > 0.0)) throw std::invalid_argument("OU rates must be positive");
    decay_[k] = std::exp(-a * tau);
    gain_[k] = -std::expm1(-a * tau) / a;
    noise_sd_[k] = std::sqrt(-std::expm1(-2.0 * a * tau) / (2.0 * a));
  }
}

OuPropagator::OuPropagator(const OperatorSpectrum& S, double h, double eps)
    : OuPropagator(S.eigenvalues(), h, eps) {}

void OuPropagator::step(std::span<double> v, std::span<const double> drift,
                        const NoiseStream& ns, std::uint64_t step_index, bool with_noise) const {
  const std::size_t n = decay_.size();
  for (std::size_t k = 0; k < n; ++k) {
    double next = decay_[k] * v[k];
    if (!drift.empty()) next += gain_[k] * drift[k];
    if (with_noise) next += noise_sd_[k] * ns.normal(static_cast<int>(k), step_index);
    v[k] = next;
  }
}

Field ou_exact_step(const OperatorSpectrum& S, const Field& v, const Field& drift, double h,
                    double eps, const NoiseStream& ns, std::uint64_t step_index) {
  require_same_basis(v, drift);
  if (!(v.basis() == S.basis())) throw std::invalid_argument("field does not conform to spectrum");
  const OuPropagator prop(S, h, eps);
  Field out = v;
  prop.step(out.coeffs(), drift.coeffs(), ns, step_index);
  return out;
}

std::vector<ConvolutionMoment> stochastic_convolution_moments(const OperatorSpectrum& S, double eps,
                                                              double T, double dt, int replicas,
                                                              const NoiseStream& ns,
                                                              int record_every) {
  if (!(T > 0.0) || !(dt > 0.0) || replicas < 2 || record_every < 1) {
    throw std::invalid_argument("convolution moments need T, dt > 0 and >= 2 replicas");
  }
  const OuPropagator prop(S, dt, eps);
  const auto n_steps = static_cast<std::uint64_t>(std::llround(T / dt));
  const int N = S.n_modes();
  const std::size_t n_rows = n_steps / record_every + 1;
  std::vector<std::vector<double>> sq(n_rows, std::vector<double>(replicas, 0.0));

  std::vector<double> w(N);
  for (int r = 0; r < replicas; ++r) {
    const NoiseStream stream = ns.for_replica(static_cast<std::uint64_t>(r));
    std::fill(w.begin(), w.end(), 0.0);
    for (std::uint64_t n = 0; n < n_steps; ++n) {
      prop.step(w, {}, stream, n);
      if ((n + 1) % record_every == 0) {
        double s = 0.0;
        for (double c : w) s += c * c;
        sq[(n + 1) / record_every][r] = s;
      }
    }
  }

  std::vector<ConvolutionMoment> rows;
  rows.reserve(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) {
    const double t = static_cast<double>(i * record_every) * dt;
    ConvolutionMoment row;
    row.t = t;
    const Estimate e = iid_mean(sq[i]);
    row.mean_sq = e.value;
    row.std_error = e.std_error;
    for (double a : S.eigenvalues()) row.analytic += -std::expm1(-2.0 * a * t / eps) / (2.0 * a);
    rows.push_back(row);
  }
  return rows;
}

double stationary_convolution_moment(const OperatorSpectrum& S) {
  double s = 0.0;
  for (double a : S.eigenvalues()) s += 1.0 / (2.0 * a);
  return s;
}

}  // namespace slowfast
