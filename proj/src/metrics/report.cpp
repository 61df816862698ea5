#include "mars/metrics/report.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "mars/error.hpp"

namespace mars::metrics {

namespace {

// Round-trippable decimal form.
std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void validate(const MetricReport& r) {
  for (double v : {r.ndb_over_k, r.pkid, r.ikid, r.pis, r.iis, r.mse, r.mae, r.fad})
    require(std::isfinite(v), "metric report: non-finite score", ErrorCategory::kNumeric);
  require(r.ndb_over_k >= 0 && r.ndb_over_k <= 1, "metric report: ndb_over_k outside [0, 1]", ErrorCategory::kNumeric);
}

std::string MetricReport::to_text() const {
  std::string s = "# MARS metric report\n"
                  "# Embeddings come from in-repo desk-scale providers; values are not comparable to published "
                  "VGGish/Inception-based numbers.\n";
  for (const auto& [k, v] : std::initializer_list<std::pair<const char*, double>>{
           {"ndb_over_k", ndb_over_k}, {"pkid", pkid}, {"ikid", ikid}, {"pis", pis}, {"iis", iis}, {"mse", mse},
           {"mae", mae}, {"fad", fad}})
    s += std::string(k) + ": " + number(v) + "\n";
  for (const auto& [k, v] : provenance) s += k + ": " + v + "\n";
  return s;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["ndb_over_k"] = ndb_over_k;
  j["pkid"] = pkid;
  j["ikid"] = ikid;
  j["pis"] = pis;
  j["iis"] = iis;
  j["mse"] = mse;
  j["mae"] = mae;
  j["fad"] = fad;
  j["provenance"] = provenance;
  return j.dump(2) + "\n";
}

MetricReport MetricReport::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MetricReport r;
    r.ndb_over_k = j.at("ndb_over_k").get<double>();
    r.pkid = j.at("pkid").get<double>();
    r.ikid = j.at("ikid").get<double>();
    r.pis = j.at("pis").get<double>();
    r.iis = j.at("iis").get<double>();
    r.mse = j.at("mse").get<double>();
    r.mae = j.at("mae").get<double>();
    r.fad = j.at("fad").get<double>();
    if (j.contains("provenance")) r.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::kInvalidInput, std::string("metric report: ") + e.what());
  }
}

}  // namespace mars::metrics
