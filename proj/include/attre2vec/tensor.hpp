#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "attre2vec/common.hpp"

namespace attre2vec {

// Value plus gradient buffer of identical shape. Rank is 1 (vectors) or 2
// (row-major matrices); scalars are length-1 vectors.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;
  std::vector<double> g;

  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.v.assign(t.size(), 0.0);
    t.g.assign(t.v.size(), 0.0);
    return t;
  }

  std::size_t size() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

}  // namespace attre2vec
