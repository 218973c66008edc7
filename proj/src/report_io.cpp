#include "zedbs/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace zedbs {

std::string_view to_string(Decision d) noexcept { return d == Decision::H1 ? "H1" : "H0"; }

std::string_view to_string(VarianceModel m) noexcept {
  return m == VarianceModel::exact ? "exact" : "count_based";
}

nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

nlohmann::json report_to_json(const DetectionReport& rep) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["decision"] = to_string(rep.decision);
  j["r_star"] = finite_or_null(rep.r_star);
  j["var"] = finite_or_null(rep.var);
  j["p_fa_target"] = rep.p_fa_target;
  j["variance_model"] = to_string(rep.variance_model);
  j["peak_index"] = rep.peak_index;
  j["peak_value"] = finite_or_null(rep.peak_value);
  j["side_lobe"] = finite_or_null(rep.side_lobe);
  j["peak_to_lobe_db"] = finite_or_null(rep.peak_to_lobe_db);
  j["warmup"] = rep.warmup;
  j["bit_stride"] = rep.bit_stride;
  j["reference_index"] = rep.reference_index;
  const auto ref = static_cast<std::size_t>(rep.reference_index);
  j["r_m_at_reference"] = ref < rep.r_m.size() ? finite_or_null(rep.r_m[ref]) : nullptr;
  j["subcarriers"] = rep.subcarriers;
  nlohmann::json lam = nlohmann::json::array();
  for (double l : rep.lambdas) lam.push_back(finite_or_null(l));
  j["lambdas"] = lam;
  j["statistic_length"] = rep.r_m.size();
  return j;
}

namespace {

void put_double(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace

void write_rm_csv(std::ostream& os, const DetectionReport& rep) {
  os << "n,r_m\n";
  for (std::size_t n = 0; n < rep.r_m.size(); ++n) {
    os << n << ',';
    put_double(os, rep.r_m[n]);
    os << '\n';
  }
}

void write_trace_csv(std::ostream& os, const DetectionReport& rep) {
  os << "n,k,e0,e1,a0,b0,a1,b1,epsilon,lambda,contrast,filtered,r\n";
  for (const auto& tr : rep.traces) {
    for (std::size_t n = 0; n < tr.e0.size(); ++n) {
      os << n << ',' << tr.k << ',';
      put_double(os, tr.e0[n]);
      os << ',';
      put_double(os, tr.e1[n]);
      os << ',' << tr.a0[n] << ',' << tr.b0[n] << ',' << tr.a1[n] << ',' << tr.b1[n] << ',';
      put_double(os, tr.epsilon[n]);
      os << ',';
      put_double(os, tr.lambda[n]);
      os << ',';
      put_double(os, tr.contrast[n]);
      os << ',';
      put_double(os, tr.filtered[n]);
      os << ',';
      if (n < tr.r.size()) put_double(os, tr.r[n]);
      os << '\n';
    }
  }
}

}  // namespace zedbs
