#ifndef SPF_SCANPATH_HPP_
#define SPF_SCANPATH_HPP_

#include <vector>

namespace spf {

// Normalized image position: x along the width, y along the height, both in [0,1].
struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

// Fixations in temporal order.
using Scanpath = std::vector<Point>;

// Throws DataError when the scanpath is empty or leaves the unit square.
void validate_scanpath(const Scanpath& scanpath);

}  // namespace spf

#endif  // SPF_SCANPATH_HPP_
