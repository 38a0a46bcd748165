#include "corrsync/spatial.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <utility>

namespace corrsync {

namespace {

// (squared distance, index) ordered so that the worst candidate sits on top.
using Candidate = std::pair<double, std::size_t>;

}  // namespace

KdTree::KdTree(std::span<const Point3> points) : points_(points) {
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  nodes_.reserve(points.size());
  root_ = build(order, 0, order.size(), 0);
}

int KdTree::build(std::vector<std::size_t>& order, std::size_t begin, std::size_t end, int depth) {
  if (begin >= end) return -1;
  const int axis = depth % 3;
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order.begin() + static_cast<std::ptrdiff_t>(begin),
                   order.begin() + static_cast<std::ptrdiff_t>(mid),
                   order.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     const double pa = points_[a][axis];
                     const double pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{order[mid], axis});
  const int left = build(order, begin, mid, depth + 1);
  const int right = build(order, mid + 1, end, depth + 1);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

std::vector<std::size_t> KdTree::k_nearest(const Point3& query, std::size_t k) const {
  std::vector<std::size_t> result;
  if (k == 0 || root_ < 0) return result;

  std::priority_queue<Candidate> best;
  auto worst = [&]() {
    return best.size() < k ? std::numeric_limits<double>::infinity() : best.top().first;
  };

  // Iterative descent with an explicit stack of (node, lower bound on distance).
  std::vector<std::pair<int, double>> stack;
  stack.emplace_back(root_, 0.0);
  while (!stack.empty()) {
    auto [id, bound] = stack.back();
    stack.pop_back();
    if (id < 0 || bound > worst()) continue;
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    const double d2 = (points_[node.point] - query).squaredNorm();
    const Candidate cand{d2, node.point};
    if (best.size() < k) {
      best.push(cand);
    } else if (cand < best.top()) {
      best.pop();
      best.push(cand);
    }
    const double diff = query[node.axis] - points_[node.point][node.axis];
    const int near = diff <= 0.0 ? node.left : node.right;
    const int far = diff <= 0.0 ? node.right : node.left;
    // Push far first so the near side is explored first.
    stack.emplace_back(far, diff * diff);
    stack.emplace_back(near, 0.0);
  }

  std::vector<Candidate> sorted;
  sorted.reserve(best.size());
  while (!best.empty()) {
    sorted.push_back(best.top());
    best.pop();
  }
  std::sort(sorted.begin(), sorted.end());
  result.reserve(sorted.size());
  for (const auto& c : sorted) result.push_back(c.second);
  return result;
}

std::size_t KdTree::nearest(const Point3& query) const {
  const auto r = k_nearest(query, 1);
  return r.front();
}

}  // namespace corrsync
