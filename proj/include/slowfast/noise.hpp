#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "slowfast/spectral.hpp"

namespace slowfast {

/// SplitMix64 finalizer; the mixing primitive of the stream derivation.
std::uint64_t mix64(std::uint64_t z);

/// Counter-based source of the mode-wise Brownian increments.
///
/// Every draw is a pure function of (seed, replica_id, channel, mode, step):
///
///   key     = mix(mix(mix(seed) ^ replica_id) ^ channel)
///   counter = mix(mix(key ^ mode) ^ step)
///   normal  = sqrt(-2 ln u1) cos(2 pi u2)   (Box-Muller, cosine branch)
///     u1 = ((mix(counter ^ 0xA5A5A5A5A5A5A5A5) >> 11) + 1) * 2^-53
///     u2 =  (mix(counter ^ 0x5A5A5A5A5A5A5A5A) >> 11)      * 2^-53
///   uniform = ((mix(counter ^ 0x3C3C3C3C3C3C3C3C) >> 11) + 0.5) * 2^-53
///
/// where mix is mix64. Channels separate independent uses inside one replica
/// (e.g. pCN proposals vs acceptance draws).
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t replica_id, int mode_count,
              std::uint64_t channel = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t replica_id() const { return replica_id_; }
  std::uint64_t channel() const { return channel_; }
  int mode_count() const { return mode_count_; }

  NoiseStream for_replica(std::uint64_t replica_id) const;
  NoiseStream for_channel(std::uint64_t channel) const;

  double normal(int mode, std::uint64_t step) const;
  double uniform(int mode, std::uint64_t step) const;

 private:
  std::uint64_t counter(int mode, std::uint64_t step) const;

  std::uint64_t seed_;
  std::uint64_t replica_id_;
  std::uint64_t channel_;
  int mode_count_;
  std::uint64_t key_;
};

/// Precomputed exact transition of dv = (1/eps)[-alpha v + drift] dt + eps^{-1/2} dw
/// over a physical step h, with the drift frozen over the step.
class OuPropagator {
 public:
  OuPropagator(std::span<const double> rates, double h, double eps);
  OuPropagator(const OperatorSpectrum& S, double h, double eps);

  /// In-place step; `drift` may be empty (treated as zero).
  void step(std::span<double> v, std::span<const double> drift, const NoiseStream& ns,
            std::uint64_t step_index, bool with_noise = true) const;

  std::span<const double> decay() const { return decay_; }
  std::span<const double> drift_gain() const { return gain_; }
  std::span<const double> noise_sd() const { return noise_sd_; }

 private:
  std::vector<double> decay_;
  std::vector<double> gain_;
  std::vector<double> noise_sd_;
};

/// One exact OU step: per mode
///   v'_k = e^{-a h/eps} v_k + (1 - e^{-a h/eps}) / a * drift_k + eta_k,
///   eta_k ~ N(0, (1 - e^{-2 a h/eps}) / (2 a)),  a = alpha_k.
Field ou_exact_step(const OperatorSpectrum& S, const Field& v, const Field& drift, double h,
                    double eps, const NoiseStream& ns, std::uint64_t step_index);

struct ConvolutionMoment {
  double t = 0.0;
  double mean_sq = 0.0;    // empirical E|w(t)|_H^2
  double std_error = 0.0;
  double analytic = 0.0;   // sum_k (1 - e^{-2 alpha_k t/eps}) / (2 alpha_k)
};

/// Second-moment profile of the pure stochastic convolution (zero drift,
/// zero initial datum), sampled every `record_every` steps.
std::vector<ConvolutionMoment> stochastic_convolution_moments(const OperatorSpectrum& S, double eps,
                                                              double T, double dt, int replicas,
                                                              const NoiseStream& ns,
                                                              int record_every = 1);

/// sum_k 1 / (2 alpha_k): the eps-independent stationary value.
double stationary_convolution_moment(const OperatorSpectrum& S);

}  // namespace slowfast
