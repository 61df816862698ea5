#pragma once

#include <map>
#include <string>

namespace mars::metrics {

/// The eight scores for one (reference, candidate) pair plus provenance
/// (sample counts, provider tags, seeds) as free-form key/value pairs.
struct MetricReport {
  double ndb_over_k = 0;
  double pkid = 0;
  double ikid = 0;
  double pis = 0;
  double iis = 0;
  double mse = 0;
  double mae = 0;
  double fad = 0;
  std::map<std::string, std::string> provenance;

  /// One "key: value" per line, preceded by a comment header.
  std::string to_text() const;
  std::string to_json() const;
  static MetricReport from_json(const std::string& text);
};

void validate(const MetricReport& r);

}  // namespace mars::metrics
