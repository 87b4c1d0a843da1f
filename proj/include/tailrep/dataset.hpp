#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tailrep/matrix.hpp"

namespace tailrep {

/// n x d embeddings with labels in {-1, +1}.
struct LabeledDataset {
  Matrix x;
  std::vector<int> y;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t dimension() const noexcept { return x.cols(); }

  /// Throws DomainError on empty data, label/row count mismatch, labels
  /// outside {-1, +1} or non-finite entries.
  void validate() const;

  LabeledDataset subset(std::span<const std::size_t> indices) const;
};

/// Split into the first n_train rows and the remainder.
std::pair<LabeledDataset, LabeledDataset> split_head(const LabeledDataset& data, std::size_t n_train);

/// Maps a {-1,+1} label to {0,1}.
inline int to_binary(int label) { return label > 0 ? 1 : 0; }

}  // namespace tailrep
