#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace corrsync {

using Point3 = Eigen::Vector3d;

// Static 3-d tree over a borrowed point array. Queries are const and may run
// concurrently. Ties in distance resolve to the lowest point index.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points);

  std::size_t nearest(const Point3& query) const;

  // k nearest neighbours sorted by (distance, index). Returns fewer than k if
  // the tree is smaller.
  std::vector<std::size_t> k_nearest(const Point3& query, std::size_t k) const;

  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::size_t point;
    int axis;
    int left = -1;
    int right = -1;
  };

  int build(std::vector<std::size_t>& order, std::size_t begin, std::size_t end, int depth);

  std::span<const Point3> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace corrsync
