#pragma once

#include <string>

#include "mixnet/tensor/ops.hpp"

namespace mixnet::ops::detail {

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

template <typename T>
void require_rank(const Var<T>& a, int rank, const char* op, const char* what) {
  if (a.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must be rank " + std::to_string(rank) + ", got " +
                     to_string(a.shape()));
  }
}

// Normalizes a possibly negative axis.
inline int resolve_axis(int axis, int rank, const char* op) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(rank));
  }
  return a;
}

}  // namespace mixnet::ops::detail
