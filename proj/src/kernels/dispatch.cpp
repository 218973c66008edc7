#include <atomic>
#include <cstdlib>
#include <string>

#include "zedbs/error.hpp"
#include "zedbs/kernels.hpp"

namespace zedbs::kernels {
namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("ZEDBS_ISA"); env != nullptr && std::string(env) == "scalar") {
    return Isa::scalar;
  }
  return (avx2_table() != nullptr && cpu_has_avx2()) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

const KernelTable& active() noexcept {
  return current().load(std::memory_order_relaxed) == Isa::avx2 ? *avx2_table() : scalar_table();
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

void select(Isa isa) {
  if (isa == Isa::avx2 && (avx2_table() == nullptr || !cpu_has_avx2())) {
    throw ConfigError("AVX2 kernels are not available on this CPU");
  }
  current().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) noexcept { return isa == Isa::avx2 ? "avx2" : "scalar"; }

}  // namespace zedbs::kernels
