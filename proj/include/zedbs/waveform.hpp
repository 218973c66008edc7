#pragma once
// OFDM reference-signal layout and the ZED backscatter state signal.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace zedbs {

inline constexpr int kSymbolsPerTti = 14;

struct GridConfig {
  int n_rb = 2;
  double t_ofdm = 57.6e-6;  // seconds, cyclic prefix included
  /// OFDM symbols within a TTI carrying RS on even subcarriers.
  std::vector<int> rs_symbol_indices{0, 7};
  /// Odd subcarriers carry RS at (index + stagger) mod 14.
  int stagger = 3;
  double pilot_power = 1.0;  // P_u

  int subcarriers() const noexcept { return 4 * n_rb; }
  double tti() const noexcept { return kSymbolsPerTti * t_ofdm; }
  /// Sorted RS symbol indices within a TTI for subcarrier k.
  std::vector<int> rs_symbols_for(int k) const;
  /// Throws ConfigError on any invariant violation.
  void validate() const;
};

struct RsEntry {
  int k = 0;                // subcarrier
  int l = 0;                // RS index on this subcarrier, 0-based
  std::int64_t symbol = 0;  // absolute OFDM symbol index; t = symbol * t_ofdm
  double t = 0.0;           // seconds
};

/// Every RS resource element in an observation interval, grouped by
/// subcarrier and time-ordered within each subcarrier.
class RsMap {
 public:
  RsMap() = default;
  RsMap(GridConfig grid, std::vector<RsEntry> entries);

  const GridConfig& grid() const noexcept { return grid_; }
  std::span<const RsEntry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Keeps subcarriers [0, count).
  RsMap first_subcarriers(int count) const;
  /// Keeps entries for which keep(entry) is true. RS indices are unchanged.
  template <class Pred>
  RsMap filtered(Pred keep) const {
    std::vector<RsEntry> out;
    for (const auto& e : entries_)
      if (keep(e)) out.push_back(e);
    return RsMap(grid_, std::move(out));
  }

 private:
  GridConfig grid_;
  std::vector<RsEntry> entries_;
};

RsMap build_rs_map(const GridConfig& config, double duration);

void write_rs_map_csv(std::ostream& os, const RsMap& map);

struct ChipConfig {
  std::vector<std::uint8_t> c0;
  std::vector<std::uint8_t> c1;
  double t_chip = 1e-3;

  std::size_t n_chips() const noexcept { return c0.size(); }
  double t_bit() const noexcept { return static_cast<double>(c0.size()) * t_chip; }
  const std::vector<std::uint8_t>& pattern(int bit) const noexcept { return bit != 0 ? c1 : c0; }
};

/// Validates and builds a chip pair: equal non-empty binary sequences, each
/// balanced, orthogonal in the +/-1 domain.
ChipConfig make_chip_config(std::vector<std::uint8_t> c0, std::vector<std::uint8_t> c1,
                            double t_chip);

/// 125 Hz / 500 Hz square waves over an 8 ms bit with 1 ms chips.
ChipConfig fsk_chip_preset();

struct SyncSequence {
  std::vector<std::uint8_t> bits;
  std::size_t n_bits() const noexcept { return bits.size(); }
};

/// How the third Barker-7 block of the composite sequence is derived.
enum class BarkerFlip {
  complement,  // bit-wise complement (sign inversion)
  reversal,    // time reversal
};

/// [bc+(7), bc+(7), bc-(7)] with bc+(7) = 0001101.
SyncSequence barker_sync_sequence(BarkerFlip flip = BarkerFlip::complement);

/// Position of a time offset on a chip grid. Offsets within 1e-9 chips
/// below a boundary snap onto it, so RS times that are exact multiples of the
/// chip length land in the chip they start.
std::int64_t chip_index(double offset, double t_chip) noexcept;

/// Backscatter state x(t): 1 reflective, 0 transparent. Zero outside
/// [t0, t0 + N_b * t_bit).
int zed_state(double t, const ChipConfig& chips, const SyncSequence& seq, double t0) noexcept;

/// Aperiodic autocorrelation of the +/-1 sequence, normalized to rho(0) = 1.
/// Element m + N_b - 1 holds rho(m), m in [-(N_b-1), N_b-1].
std::vector<double> bit_autocorrelation(const SyncSequence& seq);

/// max_{m != 0} |rho(m)|.
double max_sidelobe(const SyncSequence& seq);

/// 20 log10(1 / max_sidelobe): main-peak to side-lobe gain at bit lags.
double peak_gain_db(const SyncSequence& seq);

}  // namespace zedbs
