#pragma once

#include <numeric>
#include <stdexcept>
#include <vector>

namespace polycd {

/// Partition of the ambient dimension m into n contiguous coordinate blocks.
class BlockStructure {
 public:
  BlockStructure() = default;

  explicit BlockStructure(std::vector<int> dims) : dims_(std::move(dims)) {
    offsets_.reserve(dims_.size());
    int off = 0;
    for (int d : dims_) {
      if (d <= 0) throw std::invalid_argument("block dimensions must be positive");
      offsets_.push_back(off);
      off += d;
    }
    total_ = off;
    if (dims_.empty()) throw std::invalid_argument("block structure needs at least one block");
  }

  static BlockStructure single(int m) { return BlockStructure(std::vector<int>{m}); }

  int n() const { return static_cast<int>(dims_.size()); }
  int total() const { return total_; }
  int dim(int i) const { return dims_.at(i); }
  int offset(int i) const { return offsets_.at(i); }
  const std::vector<int>& dims() const { return dims_; }

  /// Block that owns ambient coordinate j.
  int block_of(int j) const {
    for (int i = n() - 1; i >= 0; --i)
      if (j >= offsets_[i]) return i;
    throw std::out_of_range("coordinate out of range");
  }

  bool operator==(const BlockStructure& o) const { return dims_ == o.dims_; }

 private:
  std::vector<int> dims_;
  std::vector<int> offsets_;
  int total_ = 0;
};

}  // namespace polycd
