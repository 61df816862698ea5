#include "mars/ar/sequence.hpp"

namespace mars::ar {

std::vector<int> scale_offsets(const Schedule& s) {
  std::vector<int> off{0};
  for (int k : s) off.push_back(off.back() + k * k);
  return off;
}

ScaleSequence flatten_scales(const MultiScaleTokenMap& t) {
  require(t.grids.size() == t.schedule.size(), "flatten_scales: grid count does not match schedule",
          ErrorCategory::kConfigMismatch);
  ScaleSequence seq;
  seq.schedule = t.schedule;
  for (std::size_t s = 0; s < t.grids.size(); ++s) {
    require(t.grids[s].size() == static_cast<std::size_t>(t.schedule[s] * t.schedule[s]),
            "flatten_scales: grid " + std::to_string(s) + " does not match its side", ErrorCategory::kConfigMismatch);
    for (std::size_t i = 0; i < t.grids[s].size(); ++i) {
      seq.tokens.push_back(t.grids[s][i]);
      seq.scale_id.push_back(static_cast<int>(s));
      seq.position.push_back(static_cast<int>(i));
    }
  }
  return seq;
}

MultiScaleTokenMap unflatten_scales(const ScaleSequence& s) {
  const auto off = scale_offsets(s.schedule);
  require(s.tokens.size() == static_cast<std::size_t>(off.back()), "unflatten_scales: length does not match schedule",
          ErrorCategory::kConfigMismatch);
  MultiScaleTokenMap t;
  t.schedule = s.schedule;
  for (std::size_t k = 0; k + 1 < off.size(); ++k)
    t.grids.emplace_back(s.tokens.begin() + off[k], s.tokens.begin() + off[k + 1]);
  return t;
}

ad::AttentionMask block_causal_mask(const Schedule& s, std::size_t scales) {
  const auto off = scale_offsets(s);
  const std::size_t n_scales = std::min(scales, s.size());
  const int n = off[n_scales];
  ad::AttentionMask m = ad::AttentionMask::Zero(n, n);
  for (std::size_t k = 0; k < n_scales; ++k) m.block(off[k], 0, off[k + 1] - off[k], off[k + 1]).setOnes();
  return m;
}

}  // namespace mars::ar
