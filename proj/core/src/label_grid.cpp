#include "alc/label_grid.hpp"

#include <algorithm>

namespace alc {

std::size_t LabelGrid::count_nonzero() const {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](std::uint8_t x) { return x != 0; }));
}

LabelGrid binarize(const LabelGrid& label, std::uint8_t cls) {
  LabelGrid out(label.h, label.w);
  for (std::size_t i = 0; i < label.v.size(); ++i) out.v[i] = label.v[i] == cls ? 1 : 0;
  return out;
}

}  // namespace alc
