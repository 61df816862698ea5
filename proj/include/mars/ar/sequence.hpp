#pragma once

#include <vector>

#include "mars/ad/ops.hpp"
#include "mars/tokenizer/token_map.hpp"

namespace mars::ar {

using tokenizer::MultiScaleTokenMap;
using tokenizer::Schedule;

/// Tokens of every scale concatenated coarse to fine, each grid row-major.
struct ScaleSequence {
  Schedule schedule;
  std::vector<int> tokens;
  std::vector<int> scale_id;  // 0-based scale of each position
  std::vector<int> position;  // index within that scale's grid

  std::size_t size() const { return tokens.size(); }
};

/// First sequence position of each scale, plus the total length at the end.
std::vector<int> scale_offsets(const Schedule& s);

ScaleSequence flatten_scales(const MultiScaleTokenMap& t);
MultiScaleTokenMap unflatten_scales(const ScaleSequence& s);

/// Position i may attend to j iff scale(j) <= scale(i). Inputs at scale s
/// are built from coarser tokens only, so every scale is predicted jointly
/// from strictly coarser content. `scales` limits the mask to a prefix.
ad::AttentionMask block_causal_mask(const Schedule& s, std::size_t scales = static_cast<std::size_t>(-1));

}  // namespace mars::ar
