#include <json.hpp>

#include <cmath>
#include <limits>

#include "qdimer/io.hpp"

namespace qdimer::io {

ObservableReport compute_verdict(const SpectrumSeries<double>& analytic, const SpectrumSeries<double>& simulated,
                                 double sigmaLimit, double band) {
  const auto n = analytic.omega.size();
  if (simulated.omega.size() != n || analytic.values.size() != n || simulated.values.size() != n)
    throw InvalidArgument("analytic and simulated spectra must share one frequency grid");
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(analytic.omega(i) - simulated.omega(i)) > 1e-12 * std::max(1.0, std::abs(analytic.omega(i))))
      throw InvalidArgument("analytic and simulated spectra must share one frequency grid");

  ObservableReport r;
  r.observable = simulated.name();
  const bool haveErr = simulated.statErr.size() == n;
  Eigen::Index aMin = -1, sMin = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = analytic.omega(i);
    if (w < 0 || w > band) continue;
    ++r.pointsCompared;
    if (aMin < 0 || analytic.values(i) < analytic.values(aMin)) aMin = i;
    if (sMin < 0 || simulated.values(i) < simulated.values(sMin)) sMin = i;
    if (!haveErr) continue;
    const double dev = std::abs(simulated.values(i) - analytic.values(i));
    const double sigma = simulated.statErr(i);
    const double z = sigma > 0 ? dev / sigma : (dev > 0 ? std::numeric_limits<double>::infinity() : 0.0);
    r.maxDeviationSigma = std::max(r.maxDeviationSigma, z);
    if (z > sigmaLimit) ++r.pointsOutside;
  }
  if (r.pointsCompared == 0) throw InvalidArgument("no grid points inside the comparison band");

  r.analyticMin = analytic.values(aMin);
  r.analyticArgmin = analytic.omega(aMin);
  r.simulatedMin = simulated.values(sMin);
  r.simulatedMinErr = haveErr ? simulated.statErr(sMin) : 0.0;
  r.simulatedArgmin = simulated.omega(sMin);
  r.argminBinOffset = static_cast<int>(sMin - aMin);
  if (!haveErr) r.verdict = "undetermined";
  else r.verdict = r.pointsOutside == 0 && std::abs(r.argminBinOffset) <= 1 ? "agree" : "disagree";
  return r;
}

std::string ReportRecord::overall() const {
  if (observables.empty()) return "undetermined";
  for (const auto& o : observables)
    if (o.verdict != "agree") return o.verdict;
  return "agree";
}

std::string report_json(const ReportRecord& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["verdict"] = r.overall();
  j["observables"] = ordered_json::array();
  for (const auto& o : r.observables) {
    j["observables"].push_back({{"observable", o.observable},
                                {"verdict", o.verdict},
                                {"analytic_min", o.analyticMin},
                                {"analytic_argmin", o.analyticArgmin},
                                {"simulated_min", o.simulatedMin},
                                {"simulated_min_err", o.simulatedMinErr},
                                {"simulated_argmin", o.simulatedArgmin},
                                {"argmin_bin_offset", o.argminBinOffset},
                                {"points_compared", o.pointsCompared},
                                {"points_outside", o.pointsOutside},
                                {"max_deviation_sigma", o.maxDeviationSigma}});
  }
  j["metadata"] = r.metadata.empty() ? ordered_json::object() : ordered_json::parse(r.metadata);
  return j.dump(2) + "\n";
}

}  // namespace qdimer::io
