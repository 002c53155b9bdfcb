#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <vector>

namespace sihg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Partitioned vector delta = (delta_1, ..., delta_n). Storage is one flat
// vector plus offsets; block(i) is a view into it, so the flat and block
// pictures cannot drift apart.
class BlockVector {
 public:
  BlockVector() = default;

  explicit BlockVector(std::vector<Index> dims) : dims_(std::move(dims)) {
    offsets_.reserve(dims_.size() + 1);
    offsets_.push_back(0);
    for (Index d : dims_) {
      if (d <= 0) throw std::invalid_argument("BlockVector: block dims must be positive");
      offsets_.push_back(offsets_.back() + d);
    }
    flat_ = Vector::Zero(offsets_.back());
  }

  BlockVector(std::vector<Index> dims, const Vector& flat) : BlockVector(std::move(dims)) {
    if (flat.size() != flat_.size())
      throw std::invalid_argument("BlockVector: flat size does not match block dims");
    flat_ = flat;
  }

  int blocks() const { return static_cast<int>(dims_.size()); }
  Index dim() const { return flat_.size(); }
  Index block_dim(int i) const { return dims_.at(static_cast<std::size_t>(i)); }
  const std::vector<Index>& block_dims() const { return dims_; }

  Eigen::VectorBlock<Vector> block(int i) {
    return flat_.segment(offsets_.at(static_cast<std::size_t>(i)), dims_.at(static_cast<std::size_t>(i)));
  }
  Eigen::VectorBlock<const Vector> block(int i) const {
    return flat_.segment(offsets_.at(static_cast<std::size_t>(i)), dims_.at(static_cast<std::size_t>(i)));
  }

  Vector& flat() { return flat_; }
  const Vector& flat() const { return flat_; }

  bool same_shape(const BlockVector& other) const { return dims_ == other.dims_; }

 private:
  std::vector<Index> dims_;
  std::vector<Index> offsets_;
  Vector flat_;
};

}  // namespace sihg
