#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace alc {

// H x W grid of small integer class ids. Also used for binary masks (0/1).
struct LabelGrid {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> v;

  LabelGrid() = default;
  LabelGrid(int h_, int w_, std::uint8_t fill = 0)
      : h(h_), w(w_), v(static_cast<std::size_t>(h_) * static_cast<std::size_t>(w_), fill) {}

  std::uint8_t& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }

  std::size_t numel() const { return v.size(); }
  std::size_t count_nonzero() const;
  bool same_shape(const LabelGrid& o) const { return h == o.h && w == o.w; }

  bool operator==(const LabelGrid&) const = default;
};

// Binary mask of the pixels equal to cls.
LabelGrid binarize(const LabelGrid& label, std::uint8_t cls);

}  // namespace alc
