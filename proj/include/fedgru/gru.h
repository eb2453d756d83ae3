#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fedgru::grunet {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Gate weights of one GRU layer. W* act on the layer input, U* on the previous
// hidden state; the candidate pair (Wc, Uc) is the plain W, U of the candidate
// memory. Gate biases are empty unless the model was built with them.
struct GruLayerParams {
  Eigen::MatrixXd Wz, Uz;
  Eigen::MatrixXd Wr, Ur;
  Eigen::MatrixXd Wc, Uc;
  Eigen::VectorXd bz, br, bc;

  std::size_t input_size() const { return static_cast<std::size_t>(Wz.cols()); }
  std::size_t hidden_size() const { return static_cast<std::size_t>(Wz.rows()); }
  bool has_bias() const { return bz.size() > 0; }
};

// One time step:
//   z  = sigmoid(Wz x + Uz h)
//   r  = sigmoid(Wr x + Ur h)
//   h' = tanh(Wc x + r .* (Uc h))
//   h  = z .* h + (1 - z) .* h'
// Throws StructuralError on a shape mismatch.
Eigen::VectorXd gru_cell_step(const Eigen::VectorXd& x,
                              const Eigen::VectorXd& h_prev,
                              const GruLayerParams& params);

struct ModelShape {
  std::size_t input = 1;
  std::vector<std::size_t> hidden{64, 128, 256};
  bool gate_bias = false;

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

struct ParamSlot {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  friend bool operator==(const ParamSlot&, const ParamSlot&) = default;
};

// Position of every parameter inside the flat vector. Per layer l the block is
//   gru{l}.W{z,r,c}  (hidden x input, row-major, stacked z|r|c)
//   gru{l}.U{z,r,c}  (hidden x hidden, row-major, stacked z|r|c)
//   gru{l}.b{z,r,c}  (hidden, only with gate biases)
// followed by dense.w (1 x last hidden) and dense.b (1 x 1).
class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(const ModelShape& shape);

  const std::vector<ParamSlot>& slots() const { return slots_; }
  const ParamSlot& at(const std::string& name) const;
  std::size_t size() const { return size_; }

  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;

 private:
  std::vector<ParamSlot> slots_;
  std::size_t size_ = 0;
};

std::size_t parameter_count(const ModelShape& shape);

// Complete parameter set of the stacked GRU plus dense head, stored flat.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(ModelShape shape);  // all zeros

  // Throws StructuralError if `flat` does not match the layout size.
  static ModelParams unflatten(const ModelShape& shape, std::vector<double> flat);

  const ModelShape& shape() const { return shape_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t num_layers() const { return shape_.hidden.size(); }

  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }
  const std::vector<double>& flatten() const { return values_; }

  // Stacked gate matrices of layer l: W is 3H x I, U is 3H x H.
  ConstMatrixMap stacked_w(std::size_t layer) const;
  ConstMatrixMap stacked_u(std::size_t layer) const;
  std::span<const double> stacked_bias(std::size_t layer) const;  // empty without biases
  ConstMatrixMap dense_w() const;
  double dense_b() const;
  void set_dense(const Eigen::RowVectorXd& w, double b);

  GruLayerParams layer(std::size_t l) const;
  void set_layer(std::size_t l, const GruLayerParams& p);

  std::span<double> slot(const std::string& name);
  std::span<const double> slot(const std::string& name) const;

  bool all_finite() const;

 private:
  ModelShape shape_;
  ParamLayout layout_;
  std::vector<double> values_;
};

// Each matrix uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; biases zero.
ModelParams init_params(const ModelShape& shape, std::uint64_t seed);

enum class Mode { train, eval };

// Activations kept for backpropagation, one entry per GRU layer.
struct LayerCache {
  Eigen::MatrixXd input;   // I x T (after dropout for layers > 0)
  Eigen::MatrixXd hidden;  // H x (T+1), column 0 is the zero initial state
  Eigen::MatrixXd z, r, c, uc;  // H x T
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  std::vector<Eigen::MatrixXd> masks;  // inverted-dropout masks on outputs of layers 0..L-2
  Eigen::VectorXd outputs;             // T
};

struct ForwardResult {
  std::vector<double> outputs;  // one prediction per input step; y_t estimates x_{t+1}
  ForwardCache cache;           // populated in train mode only
};

// Runs the stack over `inputs`. In train mode, inverted dropout with rate
// `dropout_p` is applied between GRU layers using masks drawn from `seed`.
ForwardResult forward_sequence(std::span<const double> inputs,
                               const ModelParams& params,
                               double dropout_p,
                               Mode mode,
                               std::uint64_t seed);

// (1 / 2S) * sum (pred - target)^2. Throws StructuralError on length mismatch
// or empty input.
double hmse_loss(std::span<const double> pred, std::span<const double> target);

// Gradient of hmse_loss(outputs, target) with respect to every parameter,
// in the flat layout, for a cache produced by a train-mode forward pass.
std::vector<double> backward(const ModelParams& params,
                             const ForwardCache& cache,
                             std::span<const double> target);

}  // namespace fedgru::grunet
