#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sihg/block_vector.hpp"
#include "sihg/rng.hpp"

namespace sihg {

// Fully connected tanh network with a linear last layer, parameters kept in
// one flat vector so the whole net can ride through the solvers as w.
// Per-layer layout inside the flat vector: W (column-major, dims[l+1] x
// dims[l]) followed by the bias.
struct MlpShape {
  std::vector<Index> dims{2, 16, 16, 2};

  Index layers() const { return static_cast<Index>(dims.size()) - 1; }
  Index param_count() const {
    Index total = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) total += dims[l + 1] * (dims[l] + 1);
    return total;
  }
  // Offset of layer l's weight block; the bias sits right after the weights.
  Index layer_offset(Index l) const {
    Index at = 0;
    for (Index j = 0; j < l; ++j)
      at += dims[static_cast<std::size_t>(j) + 1] * (dims[static_cast<std::size_t>(j)] + 1);
    return at;
  }
  bool operator==(const MlpShape& other) const { return dims == other.dims; }
};

// Weights drawn N(0, scale^2 / fan_in), biases zero.
Vector mlp_init(const MlpShape& shape, double scale, Rng& rng);

// Batch forward pass; x is dims.front() x B, result dims.back() x B.
// Throws std::invalid_argument on non-finite operands and std::runtime_error
// naming the layer if an activation goes non-finite mid-pass.
Matrix mlp_forward(const MlpShape& shape, const Vector& params, const Matrix& x);

// Argmax class per column; ties resolve to the lowest class index, so the
// all-zero net predicts class 0 everywhere.
std::vector<int> mlp_predict(const MlpShape& shape, const Vector& params, const Matrix& x);

struct LossGrads {
  double loss = 0.0;     // softmax cross-entropy averaged over the batch
  Vector grad_params;    // same layout as the flat parameter vector
  Matrix grad_inputs;    // dims.front() x B
};

// Reverse-mode gradients of the batch-mean loss with respect to both the
// parameters and the inputs.
LossGrads mlp_loss_and_grads(const MlpShape& shape, const Vector& params, const Matrix& x,
                             const std::vector<int>& y);

double mlp_loss(const MlpShape& shape, const Vector& params, const Matrix& x,
                const std::vector<int>& y);

// Two Gaussian blobs in the plane: label 0 around (1, 1), label 1 around
// (-1, -1). Columns interleave the classes so any contiguous even-sized
// batch stays balanced. Same spec, same bits.
struct ToyDataset {
  Matrix inputs;            // 2 x (2 * per_class)
  std::vector<int> labels;  // {0, 1}
  int per_class = 0;
  double stddev = 0.0;
  std::uint64_t seed = 0;

  Index size() const { return inputs.cols(); }
};

ToyDataset make_blobs(int per_class = 100, double stddev = 0.3, std::uint64_t seed = 1);

// Flat binary parameter dump: magic "MLPDUMP1", u32 layer-dim count, the dims
// as u32, then the parameters as f64, all little-endian.
void save_params(const std::string& path, const MlpShape& shape, const Vector& params);
std::pair<MlpShape, Vector> load_params(const std::string& path);

}  // namespace sihg
