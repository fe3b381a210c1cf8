#include "treescan/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace treescan {

namespace {

double coord(const Point3& p, int axis) {
  return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
}

}  // namespace

SpatialIndex::SpatialIndex(const PointCloud& cloud) : pts_(cloud.pts) {
  order_.resize(pts_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!pts_.empty()) {
    nodes_.reserve(2 * pts_.size() / kLeafSize + 8);
    root_ = build(0, static_cast<int>(pts_.size()), 0);
  }
}

int SpatialIndex::build(int begin, int end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  const int axis = depth % 3;
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) { return coord(pts_[a], axis) < coord(pts_[b], axis); });
  const double split = coord(pts_[order_[mid]], axis);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::vector<int> SpatialIndex::radius_search(const Point3& query, double radius) const {
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
  std::vector<int> result;
  if (pts_.empty()) return result;

  const double r2 = radius * radius;
  std::vector<int> stack{root_};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int id = order_[i];
        if (squared_distance(pts_[id], query) <= r2) result.push_back(id);
      }
      continue;
    }
    const double d = coord(query, node.axis) - node.split;
    if (d <= radius) stack.push_back(node.left);
    if (d >= -radius) stack.push_back(node.right);
  }
  std::sort(result.begin(), result.end());
  return result;
}

std::vector<int> SpatialIndex::nearest(const Point3& query, int k) const {
  std::vector<int> result;
  if (k <= 0 || pts_.empty()) return result;

  using Entry = std::pair<double, int>;  // (squared distance, id)
  std::priority_queue<Entry> heap;       // max-heap keeps the k best seen

  auto consider = [&](int id) {
    const double d2 = squared_distance(pts_[id], query);
    if (static_cast<int>(heap.size()) < k) {
      heap.emplace(d2, id);
    } else if (d2 < heap.top().first ||
               (d2 == heap.top().first && id < heap.top().second)) {
      heap.pop();
      heap.emplace(d2, id);
    }
  };

  // Depth-first with near-side preference; prune against current worst.
  struct Visit {
    int node;
  };
  std::vector<Visit> stack{{root_}};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back().node];
    stack.pop_back();
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) consider(order_[i]);
      continue;
    }
    const double d = coord(query, node.axis) - node.split;
    const bool full = static_cast<int>(heap.size()) == k;
    const double worst = full ? heap.top().first : std::numeric_limits<double>::infinity();
    const int near = d < 0.0 ? node.left : node.right;
    const int far = d < 0.0 ? node.right : node.left;
    if (!full || d * d <= worst) stack.push_back({far});
    stack.push_back({near});
  }

  std::vector<Entry> entries;
  entries.reserve(heap.size());
  while (!heap.empty()) {
    entries.push_back(heap.top());
    heap.pop();
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.first != b.first ? a.first < b.first : a.second < b.second;
  });
  result.reserve(entries.size());
  for (const auto& e : entries) result.push_back(e.second);
  return result;
}

}  // namespace treescan
