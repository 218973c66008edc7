#pragma once
// Two-path channel with receiver phase noise and complex Gaussian noise:
//   y(k,l) = e^{j phi(k,l)} sqrt(P_u) (Gamma(k) + LambdaPhi(k) x(t)) + alpha(k,l)

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "zedbs/waveform.hpp"

namespace zedbs {

enum class PhaseModel {
  zero,         // phi = 0
  iid_uniform,  // uniform [0, 2 pi) per TTI, shared by all subcarriers
  random_walk,  // phi_{i+1} = phi_i + N(0, step^2) per TTI, uniform start
};

struct PhaseSpec {
  PhaseModel model = PhaseModel::iid_uniform;
  double walk_step = 0.3;  // radians, random_walk only
};

enum class ChannelMode {
  rayleigh,        // independent circular Gaussians with the given RMS gains
  exact_magnitude, // |Gamma| and |LambdaPhi| fixed, independent uniform phases
  aligned,         // exact magnitudes, ZED path collinear with Gamma: gamma = zed gain
};

struct ChannelParams {
  ChannelMode mode = ChannelMode::rayleigh;
  double direct_gain_scale = 1.0;
  double zed_gain_scale = 0.1;  // 0 disables the ZED path
  double noise_var = 0.0;       // sigma^2, total complex variance
  double separation_floor = 10.0;
  PhaseSpec phase;
  std::uint64_t seed = 1;
};

struct ChannelRealization {
  std::vector<std::complex<double>> gamma_direct;  // Gamma(k)
  std::vector<std::complex<double>> zed_path;      // Lambda(k) Phi(k)
  std::vector<double> gamma_proj;                  // Re(LambdaPhi e^{-j arg Gamma})
  double noise_var = 0.0;
  PhaseSpec phase;

  std::size_t subcarriers() const noexcept { return gamma_direct.size(); }
};

/// Projection of the ZED path onto the direct path's phase.
double project_zed_path(std::complex<double> gamma_direct, std::complex<double> zed_path) noexcept;

/// Throws ConfigError on invalid scales or when |Gamma|/|LambdaPhi| falls
/// below the separation floor. Rayleigh draws that violate the floor are
/// redrawn from the same seeded stream.
ChannelRealization sample_channel(int k_subcarriers, const ChannelParams& params);

struct RxSample {
  int k = 0;
  int l = 0;
  double t = 0.0;
  std::complex<double> y;
};

struct RxGridSamples {
  std::vector<RxSample> records;  // same order as the RsMap they came from
};

/// Receiver phase per TTI index [0, n_tti).
std::vector<double> draw_tti_phases(const PhaseSpec& spec, std::size_t n_tti, std::uint64_t seed);

/// e^{j phi} z, moved along the circle by a few ulps so that
/// kernels::envelope of the result equals kernels::envelope(z) bit for bit.
/// Falls back to the plain product if the search finds no such point.
std::complex<double> rotate_preserving_envelope(std::complex<double> z, double phi) noexcept;

RxGridSamples synthesize_rx(const RsMap& rs_map, const ChipConfig& chips, const SyncSequence& seq,
                            double t0, const ChannelRealization& chan, std::uint64_t seed);

struct MagnitudeResidual {
  double max_abs_transparent = 0.0;
  double mean_abs_transparent = 0.0;
  double max_abs_reflective = 0.0;
  double mean_abs_reflective = 0.0;
};

/// Error of the linearized envelopes sqrt(P_u)|Gamma| + alpha_r and
/// sqrt(P_u)(|Gamma| + gamma) + alpha_r against the exact |y|, over
/// n_samples noise draws per subcarrier. Diagnostic only.
MagnitudeResidual magnitude_approximation_residual(const ChannelRealization& chan,
                                                   double pilot_power, std::size_t n_samples,
                                                   std::uint64_t seed);

void write_rx_csv(std::ostream& os, const RxGridSamples& samples);
/// Parses k,l,t_seconds,re,im. Throws SchemaError naming the offending line.
RxGridSamples read_rx_csv(std::istream& is);

}  // namespace zedbs
