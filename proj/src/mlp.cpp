#include "sihg/mlp.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sihg {

namespace {

using ConstMat = Eigen::Map<const Matrix>;
using ConstVec = Eigen::Map<const Vector>;

void check_shape(const MlpShape& shape) {
  if (shape.dims.size() < 2) throw std::invalid_argument("mlp: shape needs at least two dims");
  for (Index d : shape.dims)
    if (d <= 0) throw std::invalid_argument("mlp: layer dims must be positive");
}

void check_inputs(const MlpShape& shape, const Vector& params, const Matrix& x) {
  check_shape(shape);
  if (params.size() != shape.param_count())
    throw std::invalid_argument("mlp: parameter vector size does not match the shape");
  if (x.rows() != shape.dims.front())
    throw std::invalid_argument("mlp: input rows do not match the shape");
  if (!params.allFinite() || !x.allFinite())
    throw std::invalid_argument("mlp: non-finite operand");
}

ConstMat weight(const MlpShape& shape, const Vector& params, Index l) {
  const Index rows = shape.dims[static_cast<std::size_t>(l) + 1];
  const Index cols = shape.dims[static_cast<std::size_t>(l)];
  return ConstMat(params.data() + shape.layer_offset(l), rows, cols);
}

ConstVec bias(const MlpShape& shape, const Vector& params, Index l) {
  const Index rows = shape.dims[static_cast<std::size_t>(l) + 1];
  const Index cols = shape.dims[static_cast<std::size_t>(l)];
  return ConstVec(params.data() + shape.layer_offset(l) + rows * cols, rows);
}

// Activations a[0] = x, a[l] = tanh(z) for the hidden layers, a.back() = the
// raw logits. Kept around for the backward pass.
std::vector<Matrix> forward_pass(const MlpShape& shape, const Vector& params, const Matrix& x) {
  const Index layers = shape.layers();
  std::vector<Matrix> a;
  a.reserve(static_cast<std::size_t>(layers) + 1);
  a.push_back(x);
  for (Index l = 0; l < layers; ++l) {
    Matrix z = weight(shape, params, l) * a.back();
    z.colwise() += bias(shape, params, l);
    if (l + 1 < layers) z = z.array().tanh().matrix();
    if (!z.allFinite())
      throw std::runtime_error("mlp: non-finite activation at layer " + std::to_string(l));
    a.push_back(std::move(z));
  }
  return a;
}

void check_labels(const std::vector<int>& y, Index batch, Index classes) {
  if (static_cast<Index>(y.size()) != batch)
    throw std::invalid_argument("mlp: label count does not match the batch");
  for (int label : y)
    if (label < 0 || label >= classes) throw std::invalid_argument("mlp: label out of range");
}

// Mean cross-entropy from logits, and the logit gradient of that mean.
double cross_entropy(const Matrix& logits, const std::vector<int>& y, Matrix* grad_logits) {
  const Index batch = logits.cols();
  double loss = 0.0;
  if (grad_logits != nullptr) grad_logits->resize(logits.rows(), batch);
  for (Index b = 0; b < batch; ++b) {
    const Vector z = logits.col(b);
    const double top = z.maxCoeff();
    const Vector shifted = (z.array() - top).exp();
    const double total = shifted.sum();
    loss += top + std::log(total) - z[static_cast<Index>(y[static_cast<std::size_t>(b)])];
    if (grad_logits != nullptr) {
      Vector soft = shifted / total;
      soft[static_cast<Index>(y[static_cast<std::size_t>(b)])] -= 1.0;
      grad_logits->col(b) = soft / static_cast<double>(batch);
    }
  }
  return loss / static_cast<double>(batch);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char raw[4];
  for (int i = 0; i < 4; ++i) raw[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(raw, 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char raw[8];
  for (int i = 0; i < 8; ++i) raw[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(raw, 8);
}

std::uint32_t get_u32(std::istream& in) {
  char raw[4];
  in.read(raw, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[i]))
                                   << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  char raw[8];
  in.read(raw, 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[i]))
                                      << (8 * i);
  return std::bit_cast<double>(bits);
}

constexpr char kMagic[8] = {'M', 'L', 'P', 'D', 'U', 'M', 'P', '1'};

}  // namespace

Vector mlp_init(const MlpShape& shape, double scale, Rng& rng) {
  check_shape(shape);
  if (!(scale > 0.0)) throw std::invalid_argument("mlp_init: scale must be positive");
  Vector params = Vector::Zero(shape.param_count());
  for (Index l = 0; l < shape.layers(); ++l) {
    const Index rows = shape.dims[static_cast<std::size_t>(l) + 1];
    const Index cols = shape.dims[static_cast<std::size_t>(l)];
    const double sd = scale / std::sqrt(static_cast<double>(cols));
    double* w = params.data() + shape.layer_offset(l);
    for (Index j = 0; j < rows * cols; ++j) w[j] = sd * rng.next_normal();
  }
  return params;
}

Matrix mlp_forward(const MlpShape& shape, const Vector& params, const Matrix& x) {
  check_inputs(shape, params, x);
  return forward_pass(shape, params, x).back();
}

std::vector<int> mlp_predict(const MlpShape& shape, const Vector& params, const Matrix& x) {
  const Matrix logits = mlp_forward(shape, params, x);
  std::vector<int> out(static_cast<std::size_t>(logits.cols()));
  for (Index b = 0; b < logits.cols(); ++b) {
    int best = 0;
    for (Index r = 1; r < logits.rows(); ++r)
      if (logits(r, b) > logits(best, b)) best = static_cast<int>(r);
    out[static_cast<std::size_t>(b)] = best;
  }
  return out;
}

double mlp_loss(const MlpShape& shape, const Vector& params, const Matrix& x,
                const std::vector<int>& y) {
  check_inputs(shape, params, x);
  check_labels(y, x.cols(), shape.dims.back());
  return cross_entropy(forward_pass(shape, params, x).back(), y, nullptr);
}

LossGrads mlp_loss_and_grads(const MlpShape& shape, const Vector& params, const Matrix& x,
                             const std::vector<int>& y) {
  check_inputs(shape, params, x);
  check_labels(y, x.cols(), shape.dims.back());
  const std::vector<Matrix> a = forward_pass(shape, params, x);

  LossGrads out;
  Matrix g;
  out.loss = cross_entropy(a.back(), y, &g);
  out.grad_params = Vector::Zero(params.size());

  for (Index l = shape.layers() - 1; l >= 0; --l) {
    const Index rows = shape.dims[static_cast<std::size_t>(l) + 1];
    const Index cols = shape.dims[static_cast<std::size_t>(l)];
    const Matrix& below = a[static_cast<std::size_t>(l)];
    double* slot = out.grad_params.data() + shape.layer_offset(l);
    Eigen::Map<Matrix>(slot, rows, cols) = g * below.transpose();
    Eigen::Map<Vector>(slot + rows * cols, rows) = g.rowwise().sum();
    const Matrix pulled = weight(shape, params, l).transpose() * g;
    if (l == 0) {
      out.grad_inputs = pulled;
    } else {
      // Hidden activations are tanh outputs, so tanh' = 1 - a^2 reuses them.
      g = pulled.array() * (1.0 - below.array().square());
    }
  }
  return out;
}

ToyDataset make_blobs(int per_class, double stddev, std::uint64_t seed) {
  if (per_class <= 0) throw std::invalid_argument("make_blobs: per_class must be positive");
  if (!(stddev >= 0.0)) throw std::invalid_argument("make_blobs: stddev must be nonnegative");
  ToyDataset data;
  data.per_class = per_class;
  data.stddev = stddev;
  data.seed = seed;
  data.inputs.resize(2, 2 * static_cast<Index>(per_class));
  data.labels.resize(static_cast<std::size_t>(2 * per_class));
  Rng rng(seed);
  for (Index j = 0; j < per_class; ++j) {
    data.inputs(0, 2 * j) = 1.0 + stddev * rng.next_normal();
    data.inputs(1, 2 * j) = 1.0 + stddev * rng.next_normal();
    data.labels[static_cast<std::size_t>(2 * j)] = 0;
    data.inputs(0, 2 * j + 1) = -1.0 + stddev * rng.next_normal();
    data.inputs(1, 2 * j + 1) = -1.0 + stddev * rng.next_normal();
    data.labels[static_cast<std::size_t>(2 * j + 1)] = 1;
  }
  return data;
}

void save_params(const std::string& path, const MlpShape& shape, const Vector& params) {
  check_shape(shape);
  if (params.size() != shape.param_count())
    throw std::invalid_argument("save_params: parameter vector size does not match the shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_params: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, static_cast<std::uint32_t>(shape.dims.size()));
  for (Index d : shape.dims) put_u32(out, static_cast<std::uint32_t>(d));
  for (Index j = 0; j < params.size(); ++j) put_f64(out, params[j]);
  if (!out) throw std::runtime_error("save_params: write failed for " + path);
}

std::pair<MlpShape, Vector> load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_params: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_params: bad magic in " + path);
  const std::uint32_t count = get_u32(in);
  if (!in || count < 2 || count > 64)
    throw std::runtime_error("load_params: implausible layer count in " + path);
  MlpShape shape;
  shape.dims.clear();
  for (std::uint32_t j = 0; j < count; ++j)
    shape.dims.push_back(static_cast<Index>(get_u32(in)));
  if (!in) throw std::runtime_error("load_params: truncated header in " + path);
  check_shape(shape);
  Vector params(shape.param_count());
  for (Index j = 0; j < params.size(); ++j) params[j] = get_f64(in);
  if (!in) throw std::runtime_error("load_params: truncated payload in " + path);
  return {shape, params};
}

}  // namespace sihg
