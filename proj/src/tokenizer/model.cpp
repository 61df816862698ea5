#include "mars/tokenizer/model.hpp"

namespace mars::tokenizer {

std::vector<int> patch_source_indices(int channels, int size, int patch) {
  require(patch > 0 && size % patch == 0, "patch_source_indices: size not divisible by patch");
  const int k = size / patch;
  const int dim = channels * patch * patch;
  std::vector<int> src(static_cast<std::size_t>(channels) * size * size);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const int p = (y / patch) * k + x / patch;
        const int col = (c * patch + y % patch) * patch + x % patch;
        src[(static_cast<std::size_t>(c) * size + y) * size + x] = p * dim + col;
      }
  return src;
}

}  // namespace mars::tokenizer
