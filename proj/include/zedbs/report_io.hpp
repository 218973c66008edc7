#pragma once
// Serialization of detection reports.

#include <iosfwd>
#include <json.hpp>
#include <string_view>

#include "zedbs/detector.hpp"

namespace zedbs {

inline constexpr int kSchemaVersion = 1;

std::string_view to_string(Decision d) noexcept;
std::string_view to_string(VarianceModel m) noexcept;

/// Scalars and decision; NaN/inf become null.
nlohmann::json report_to_json(const DetectionReport& rep);

/// n,r_m
void write_rm_csv(std::ostream& os, const DetectionReport& rep);

/// n,k,e0,e1,a0,b0,a1,b1,epsilon,lambda,contrast,filtered,r
void write_trace_csv(std::ostream& os, const DetectionReport& rep);

/// Finite doubles pass through; anything else becomes null.
nlohmann::json finite_or_null(double v);

}  // namespace zedbs
