#pragma once

#include <algorithm>
#include <limits>
#include <vector>

namespace mldetect {

template <typename At>
std::vector<double> pool_views(std::span<const MapExtent> extents, At&& at, std::size_t n_elements,
                               const PoolingScheme& scheme) {
  const std::size_t n_regions = scheme.size();
  std::vector<double> acc(n_regions * n_elements, -std::numeric_limits<double>::infinity());
  std::vector<bool> seen(n_regions, false);
  std::vector<std::size_t> members;
  members.reserve(n_regions);
  for (std::size_t v = 0; v < extents.size(); ++v) {
    const MapExtent ext = extents[v];
    for (int r = 0; r < ext.rows; ++r) {
      for (int c = 0; c < ext.cols; ++c) {
        members.clear();
        for (std::size_t k = 0; k < n_regions; ++k)
          if (scheme.regions[k].contains(r, c, ext.rows, ext.cols)) members.push_back(k);
        const double* x = at(v, r, c);
        for (std::size_t k : members) {
          seen[k] = true;
          double* a = acc.data() + k * n_elements;
          for (std::size_t e = 0; e < n_elements; ++e) a[e] = std::max(a[e], x[e]);
        }
      }
    }
  }
  std::vector<double> out(n_elements * n_regions);
  for (std::size_t e = 0; e < n_elements; ++e) {
    // Empty regions take the element's smallest non-empty pooled value.
    double fill = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n_regions; ++k)
      if (seen[k]) fill = std::min(fill, acc[k * n_elements + e]);
    for (std::size_t k = 0; k < n_regions; ++k)
      out[e * n_regions + k] = seen[k] ? acc[k * n_elements + e] : fill;
  }
  return out;
}

}  // namespace mldetect
