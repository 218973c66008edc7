#include "zedbs/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>
#include <string>

#include "zedbs/error.hpp"

namespace zedbs {

std::vector<int> GridConfig::rs_symbols_for(int k) const {
  std::vector<int> out;
  out.reserve(rs_symbol_indices.size());
  for (int s : rs_symbol_indices) {
    out.push_back(k % 2 == 0 ? s : (s + stagger) % kSymbolsPerTti);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void GridConfig::validate() const {
  if (n_rb <= 0) throw ConfigError("grid: n_rb must be positive");
  if (!(t_ofdm > 0.0) || !std::isfinite(t_ofdm)) throw ConfigError("grid: t_ofdm must be positive");
  if (!(pilot_power > 0.0)) throw ConfigError("grid: pilot_power must be positive");
  if (rs_symbol_indices.empty()) throw ConfigError("grid: rs_symbol_indices is empty");
  if (stagger < 0) throw ConfigError("grid: stagger must be non-negative");
  std::set<int> seen;
  for (int s : rs_symbol_indices) {
    if (s < 0 || s >= kSymbolsPerTti) throw ConfigError("grid: RS symbol index outside [0, 13]");
    if (!seen.insert(s).second) throw ConfigError("grid: duplicate RS symbol index");
  }
  const auto odd = rs_symbols_for(1);
  if (std::adjacent_find(odd.begin(), odd.end()) != odd.end()) {
    throw ConfigError("grid: stagger maps two RS onto the same symbol");
  }
}

RsMap::RsMap(GridConfig grid, std::vector<RsEntry> entries)
    : grid_(std::move(grid)), entries_(std::move(entries)) {
  std::stable_sort(entries_.begin(), entries_.end(), [](const RsEntry& a, const RsEntry& b) {
    return a.k != b.k ? a.k < b.k : a.symbol < b.symbol;
  });
}

RsMap RsMap::first_subcarriers(int count) const {
  return filtered([count](const RsEntry& e) { return e.k < count; });
}

RsMap build_rs_map(const GridConfig& config, double duration) {
  config.validate();
  if (!(duration >= 0.0) || !std::isfinite(duration)) {
    throw ConfigError("rs map: duration must be a finite non-negative number");
  }
  std::vector<RsEntry> entries;
  const int K = config.subcarriers();
  for (int k = 0; k < K; ++k) {
    const auto symbols = config.rs_symbols_for(k);
    int l = 0;
    for (std::int64_t tti = 0;; ++tti) {
      const std::int64_t base = tti * kSymbolsPerTti;
      if (static_cast<double>(base) * config.t_ofdm >= duration) break;
      for (int s : symbols) {
        const std::int64_t symbol = base + s;
        const double t = static_cast<double>(symbol) * config.t_ofdm;
        if (t < duration) entries.push_back({k, l++, symbol, t});
      }
    }
  }
  return RsMap(config, std::move(entries));
}

void write_rs_map_csv(std::ostream& os, const RsMap& map) {
  os << "k,l,t_seconds\n";
  char buf[64];
  for (const auto& e : map.entries()) {
    std::snprintf(buf, sizeof buf, "%.17g", e.t);
    os << e.k << ',' << e.l << ',' << buf << '\n';
  }
}

ChipConfig make_chip_config(std::vector<std::uint8_t> c0, std::vector<std::uint8_t> c1,
                            double t_chip) {
  if (c0.empty() || c1.empty()) throw ConfigError("chips: sequences must be non-empty");
  if (c0.size() != c1.size()) throw ConfigError("chips: sequences differ in length");
  if (!(t_chip > 0.0) || !std::isfinite(t_chip)) throw ConfigError("chips: t_chip must be positive");
  long sum0 = 0, sum1 = 0, dot = 0;
  for (std::size_t i = 0; i < c0.size(); ++i) {
    if (c0[i] > 1 || c1[i] > 1) throw ConfigError("chips: values must be 0 or 1");
    const int s0 = 2 * c0[i] - 1;
    const int s1 = 2 * c1[i] - 1;
    sum0 += s0;
    sum1 += s1;
    dot += s0 * s1;
  }
  if (sum0 != 0 || sum1 != 0) throw ConfigError("sequence not balanced");
  if (dot != 0) throw ConfigError("sequences not orthogonal");
  return ChipConfig{std::move(c0), std::move(c1), t_chip};
}

ChipConfig fsk_chip_preset() {
  return make_chip_config({0, 0, 0, 0, 1, 1, 1, 1}, {0, 1, 0, 1, 0, 1, 0, 1}, 1e-3);
}

SyncSequence barker_sync_sequence(BarkerFlip flip) {
  const std::vector<std::uint8_t> plus{0, 0, 0, 1, 1, 0, 1};
  std::vector<std::uint8_t> minus = plus;
  if (flip == BarkerFlip::complement) {
    for (auto& b : minus) b = static_cast<std::uint8_t>(1 - b);
  } else {
    std::reverse(minus.begin(), minus.end());
  }
  SyncSequence seq;
  seq.bits.reserve(21);
  seq.bits.insert(seq.bits.end(), plus.begin(), plus.end());
  seq.bits.insert(seq.bits.end(), plus.begin(), plus.end());
  seq.bits.insert(seq.bits.end(), minus.begin(), minus.end());
  return seq;
}

std::int64_t chip_index(double offset, double t_chip) noexcept {
  return static_cast<std::int64_t>(std::floor(offset / t_chip + 1e-9));
}

int zed_state(double t, const ChipConfig& chips, const SyncSequence& seq, double t0) noexcept {
  if (t < t0 || chips.n_chips() == 0) return 0;
  const std::int64_t chip = chip_index(t - t0, chips.t_chip);
  const auto n_chips = static_cast<std::int64_t>(chips.n_chips());
  const std::int64_t bit = chip / n_chips;
  if (bit < 0 || bit >= static_cast<std::int64_t>(seq.n_bits())) return 0;
  return chips.pattern(seq.bits[static_cast<std::size_t>(bit)])[static_cast<std::size_t>(chip % n_chips)];
}

std::vector<double> bit_autocorrelation(const SyncSequence& seq) {
  const auto n = static_cast<std::ptrdiff_t>(seq.n_bits());
  if (n == 0) throw ConfigError("autocorrelation: empty sequence");
  std::vector<double> rho(static_cast<std::size_t>(2 * n - 1));
  for (std::ptrdiff_t m = -(n - 1); m <= n - 1; ++m) {
    long acc = 0;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const std::ptrdiff_t j = i + m;
      if (j < 0 || j >= n) continue;
      acc += (2 * seq.bits[static_cast<std::size_t>(i)] - 1) * (2 * seq.bits[static_cast<std::size_t>(j)] - 1);
    }
    rho[static_cast<std::size_t>(m + n - 1)] = static_cast<double>(acc) / static_cast<double>(n);
  }
  return rho;
}

double max_sidelobe(const SyncSequence& seq) {
  const auto rho = bit_autocorrelation(seq);
  const std::size_t zero = seq.n_bits() - 1;
  double best = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i)
    if (i != zero) best = std::max(best, std::abs(rho[i]));
  return best;
}

double peak_gain_db(const SyncSequence& seq) { return 20.0 * std::log10(1.0 / max_sidelobe(seq)); }

}  // namespace zedbs
