#include "fedgru/gru.h"

#include <algorithm>
#include <cmath>

#include "fedgru/errors.h"
#include "fedgru/rng.h"

namespace fedgru::grunet {

namespace {

std::string layer_name(std::size_t l, const char* what) { return "gru" + std::to_string(l) + "." + what; }

Eigen::VectorXd sigmoid(const Eigen::VectorXd& a) {
  return a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

struct LayerOffsets {
  std::size_t w = 0;
  std::size_t u = 0;
  std::size_t b = 0;
  std::size_t in = 0;
  std::size_t hid = 0;
};

LayerOffsets offsets_of(const ParamLayout& layout, const ModelShape& shape, std::size_t l) {
  if (l >= shape.hidden.size()) throw StructuralError("layer index out of range");
  LayerOffsets o;
  o.w = layout.at(layer_name(l, "Wz")).offset;
  o.u = layout.at(layer_name(l, "Uz")).offset;
  if (shape.gate_bias) o.b = layout.at(layer_name(l, "bz")).offset;
  o.in = l == 0 ? shape.input : shape.hidden[l - 1];
  o.hid = shape.hidden[l];
  return o;
}

}  // namespace

Eigen::VectorXd gru_cell_step(const Eigen::VectorXd& x,
                              const Eigen::VectorXd& h_prev,
                              const GruLayerParams& p) {
  const auto in = p.input_size();
  const auto hid = p.hidden_size();
  auto check = [](const Eigen::MatrixXd& m, std::size_t rows, std::size_t cols) {
    return static_cast<std::size_t>(m.rows()) == rows && static_cast<std::size_t>(m.cols()) == cols;
  };
  if (static_cast<std::size_t>(x.size()) != in || static_cast<std::size_t>(h_prev.size()) != hid ||
      !check(p.Wr, hid, in) || !check(p.Wc, hid, in) || !check(p.Uz, hid, hid) ||
      !check(p.Ur, hid, hid) || !check(p.Uc, hid, hid))
    throw StructuralError("gru_cell_step: shape mismatch");
  if (p.has_bias() && (static_cast<std::size_t>(p.br.size()) != hid ||
                       static_cast<std::size_t>(p.bc.size()) != hid ||
                       static_cast<std::size_t>(p.bz.size()) != hid))
    throw StructuralError("gru_cell_step: bias shape mismatch");

  Eigen::VectorXd az = p.Wz * x + p.Uz * h_prev;
  Eigen::VectorXd ar = p.Wr * x + p.Ur * h_prev;
  Eigen::VectorXd ac_in = p.Wc * x;
  if (p.has_bias()) {
    az += p.bz;
    ar += p.br;
    ac_in += p.bc;
  }
  const Eigen::VectorXd z = sigmoid(az);
  const Eigen::VectorXd r = sigmoid(ar);
  const Eigen::VectorXd cand = (ac_in + r.cwiseProduct(p.Uc * h_prev)).array().tanh().matrix();
  return z.cwiseProduct(h_prev) + (Eigen::VectorXd::Ones(hid) - z).cwiseProduct(cand);
}

ParamLayout::ParamLayout(const ModelShape& shape) {
  if (shape.input == 0 || shape.hidden.empty() ||
      std::any_of(shape.hidden.begin(), shape.hidden.end(), [](auto h) { return h == 0; }))
    throw StructuralError("model shape needs a positive input size and at least one non-empty layer");
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    slots_.push_back({std::move(name), offset, rows, cols});
    offset += rows * cols;
  };
  for (std::size_t l = 0; l < shape.hidden.size(); ++l) {
    const auto in = l == 0 ? shape.input : shape.hidden[l - 1];
    const auto hid = shape.hidden[l];
    for (const char* g : {"Wz", "Wr", "Wc"}) add(layer_name(l, g), hid, in);
    for (const char* g : {"Uz", "Ur", "Uc"}) add(layer_name(l, g), hid, hid);
    if (shape.gate_bias)
      for (const char* g : {"bz", "br", "bc"}) add(layer_name(l, g), hid, 1);
  }
  add("dense.w", 1, shape.hidden.back());
  add("dense.b", 1, 1);
  size_ = offset;
}

const ParamSlot& ParamLayout::at(const std::string& name) const {
  auto it = std::find_if(slots_.begin(), slots_.end(), [&](const ParamSlot& s) { return s.name == name; });
  if (it == slots_.end()) throw StructuralError("unknown parameter " + name);
  return *it;
}

std::size_t parameter_count(const ModelShape& shape) { return ParamLayout(shape).size(); }

ModelParams::ModelParams(ModelShape shape)
    : shape_(std::move(shape)), layout_(shape_), values_(layout_.size(), 0.0) {}

ModelParams ModelParams::unflatten(const ModelShape& shape, std::vector<double> flat) {
  ModelParams p(shape);
  if (flat.size() != p.values_.size())
    throw StructuralError("flat parameter vector has " + std::to_string(flat.size()) +
                          " values, layout needs " + std::to_string(p.values_.size()));
  p.values_ = std::move(flat);
  return p;
}

ConstMatrixMap ModelParams::stacked_w(std::size_t l) const {
  const auto o = offsets_of(layout_, shape_, l);
  return {values_.data() + o.w, static_cast<Eigen::Index>(3 * o.hid), static_cast<Eigen::Index>(o.in)};
}

ConstMatrixMap ModelParams::stacked_u(std::size_t l) const {
  const auto o = offsets_of(layout_, shape_, l);
  return {values_.data() + o.u, static_cast<Eigen::Index>(3 * o.hid), static_cast<Eigen::Index>(o.hid)};
}

std::span<const double> ModelParams::stacked_bias(std::size_t l) const {
  if (!shape_.gate_bias) return {};
  const auto o = offsets_of(layout_, shape_, l);
  return std::span<const double>(values_).subspan(o.b, 3 * o.hid);
}

ConstMatrixMap ModelParams::dense_w() const {
  const auto& s = layout_.at("dense.w");
  return {values_.data() + s.offset, 1, static_cast<Eigen::Index>(s.cols)};
}

double ModelParams::dense_b() const { return values_[layout_.at("dense.b").offset]; }

void ModelParams::set_dense(const Eigen::RowVectorXd& w, double b) {
  const auto& s = layout_.at("dense.w");
  if (static_cast<std::size_t>(w.size()) != s.cols) throw StructuralError("dense weight size mismatch");
  std::copy(w.data(), w.data() + w.size(), values_.begin() + static_cast<std::ptrdiff_t>(s.offset));
  values_[layout_.at("dense.b").offset] = b;
}

GruLayerParams ModelParams::layer(std::size_t l) const {
  const auto o = offsets_of(layout_, shape_, l);
  const auto h = static_cast<Eigen::Index>(o.hid);
  const auto W = stacked_w(l);
  const auto U = stacked_u(l);
  GruLayerParams p;
  p.Wz = W.topRows(h);
  p.Wr = W.middleRows(h, h);
  p.Wc = W.bottomRows(h);
  p.Uz = U.topRows(h);
  p.Ur = U.middleRows(h, h);
  p.Uc = U.bottomRows(h);
  if (shape_.gate_bias) {
    const auto b = stacked_bias(l);
    p.bz = Eigen::Map<const Eigen::VectorXd>(b.data(), h);
    p.br = Eigen::Map<const Eigen::VectorXd>(b.data() + h, h);
    p.bc = Eigen::Map<const Eigen::VectorXd>(b.data() + 2 * h, h);
  }
  return p;
}

void ModelParams::set_layer(std::size_t l, const GruLayerParams& p) {
  const auto o = offsets_of(layout_, shape_, l);
  if (p.input_size() != o.in || p.hidden_size() != o.hid || p.has_bias() != shape_.gate_bias)
    throw StructuralError("set_layer: layer shape does not match the model");
  const auto h = static_cast<Eigen::Index>(o.hid);
  const auto in = static_cast<Eigen::Index>(o.in);
  MatrixMap W(values_.data() + o.w, 3 * h, in);
  MatrixMap U(values_.data() + o.u, 3 * h, h);
  W.topRows(h) = p.Wz;
  W.middleRows(h, h) = p.Wr;
  W.bottomRows(h) = p.Wc;
  U.topRows(h) = p.Uz;
  U.middleRows(h, h) = p.Ur;
  U.bottomRows(h) = p.Uc;
  if (shape_.gate_bias) {
    Eigen::Map<Eigen::VectorXd> b(values_.data() + o.b, 3 * h);
    b.head(h) = p.bz;
    b.segment(h, h) = p.br;
    b.tail(h) = p.bc;
  }
}

std::span<double> ModelParams::slot(const std::string& name) {
  const auto& s = layout_.at(name);
  return std::span<double>(values_).subspan(s.offset, s.size());
}

std::span<const double> ModelParams::slot(const std::string& name) const {
  const auto& s = layout_.at(name);
  return std::span<const double>(values_).subspan(s.offset, s.size());
}

bool ModelParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ModelParams init_params(const ModelShape& shape, std::uint64_t seed) {
  ModelParams p(shape);
  auto rng = derive_rng(seed, {stream::kInit});
  for (const auto& s : p.layout().slots()) {
    const bool is_bias = s.name.find(".b") != std::string::npos;
    auto block = p.slot(s.name);
    if (is_bias) continue;
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.cols));
    for (auto& v : block) v = uniform(rng, -bound, bound);
  }
  return p;
}

ForwardResult forward_sequence(std::span<const double> inputs,
                               const ModelParams& params,
                               double dropout_p,
                               Mode mode,
                               std::uint64_t seed) {
  if (inputs.empty()) throw StructuralError("forward_sequence: empty input");
  if (params.shape().input != 1) throw StructuralError("forward_sequence: scalar input stream needs input size 1");
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw StructuralError("dropout probability must lie in [0,1)");

  const auto T = static_cast<Eigen::Index>(inputs.size());
  const bool train = mode == Mode::train;
  const bool drop = train && dropout_p > 0.0;
  const double keep_scale = 1.0 / (1.0 - dropout_p);
  auto rng = derive_rng(seed, {stream::kDropout});

  ForwardResult result;
  Eigen::MatrixXd x = Eigen::Map<const Eigen::RowVectorXd>(inputs.data(), T);
  const auto L = params.num_layers();
  if (train) result.cache.layers.resize(L);

  for (std::size_t l = 0; l < L; ++l) {
    const auto W = params.stacked_w(l);
    const auto U = params.stacked_u(l);
    const auto H = static_cast<Eigen::Index>(params.shape().hidden[l]);

    Eigen::MatrixXd wx = W * x;  // 3H x T
    const auto bias = params.stacked_bias(l);
    if (!bias.empty()) wx.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.data(), 3 * H);

    Eigen::MatrixXd hidden = Eigen::MatrixXd::Zero(H, T + 1);
    Eigen::MatrixXd z(H, T), r(H, T), c(H, T), uc(H, T);
    Eigen::VectorXd uh(3 * H);
    for (Eigen::Index t = 0; t < T; ++t) {
      uh.noalias() = U * hidden.col(t);
      const auto pre = wx.col(t);
      z.col(t) = sigmoid(pre.head(H) + uh.head(H));
      r.col(t) = sigmoid(pre.segment(H, H) + uh.segment(H, H));
      uc.col(t) = uh.tail(H);
      c.col(t) = (pre.tail(H).array() + r.col(t).array() * uc.col(t).array()).tanh();
      hidden.col(t + 1) = z.col(t).array() * hidden.col(t).array() + (1.0 - z.col(t).array()) * c.col(t).array();
    }

    Eigen::MatrixXd out = hidden.rightCols(T);
    if (train) {
      auto& lc = result.cache.layers[l];
      lc.input = std::move(x);
      lc.hidden = std::move(hidden);
      lc.z = std::move(z);
      lc.r = std::move(r);
      lc.c = std::move(c);
      lc.uc = std::move(uc);
    }
    if (drop && l + 1 < L) {
      Eigen::MatrixXd mask(H, T);
      for (Eigen::Index t = 0; t < T; ++t)
        for (Eigen::Index i = 0; i < H; ++i) mask(i, t) = uniform(rng, 0.0, 1.0) < dropout_p ? 0.0 : keep_scale;
      out = out.cwiseProduct(mask);
      result.cache.masks.push_back(std::move(mask));
    } else if (train && l + 1 < L) {
      result.cache.masks.push_back(Eigen::MatrixXd::Ones(H, T));
    }
    x = std::move(out);
  }

  Eigen::RowVectorXd y = params.dense_w() * x;
  y.array() += params.dense_b();
  result.outputs.assign(y.data(), y.data() + T);
  if (train) result.cache.outputs = y.transpose();
  return result;
}

double hmse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw StructuralError("hmse_loss: length mismatch");
  if (pred.empty()) throw StructuralError("hmse_loss: empty sequence");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s / (2.0 * static_cast<double>(pred.size()));
}

std::vector<double> backward(const ModelParams& params,
                             const ForwardCache& cache,
                             std::span<const double> target) {
  const auto L = params.num_layers();
  if (cache.layers.size() != L) throw StructuralError("backward: cache does not come from a train-mode pass");
  const auto T = cache.outputs.size();
  if (static_cast<std::size_t>(T) != target.size()) throw StructuralError("backward: target length mismatch");

  std::vector<double> grad(params.layout().size(), 0.0);
  const Eigen::RowVectorXd dy =
      (cache.outputs.transpose() - Eigen::Map<const Eigen::RowVectorXd>(target.data(), T)) /
      static_cast<double>(T);

  const auto& top = cache.layers.back();
  const Eigen::MatrixXd top_out = top.hidden.rightCols(T);
  {
    const auto& s = params.layout().at("dense.w");
    Eigen::Map<Eigen::RowVectorXd>(grad.data() + s.offset, static_cast<Eigen::Index>(s.cols)) =
        dy * top_out.transpose();
    grad[params.layout().at("dense.b").offset] = dy.sum();
  }
  Eigen::MatrixXd d_out = params.dense_w().transpose() * dy;  // H_top x T

  for (std::size_t li = L; li-- > 0;) {
    const auto& lc = cache.layers[li];
    const auto W = params.stacked_w(li);
    const auto U = params.stacked_u(li);
    const auto H = static_cast<Eigen::Index>(params.shape().hidden[li]);

    Eigen::MatrixXd d_w(3 * H, T), d_u(3 * H, T);
    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd dh(H), daz(H), dac(H), dar(H), du(H);
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      dh = d_out.col(t) + dh_next;
      const auto h_prev = lc.hidden.col(t).array();
      const auto z = lc.z.col(t).array();
      const auto r = lc.r.col(t).array();
      const auto c = lc.c.col(t).array();
      daz = (dh.array() * (h_prev - c) * z * (1.0 - z)).matrix();
      dac = (dh.array() * (1.0 - z) * (1.0 - c * c)).matrix();
      dar = (dac.array() * lc.uc.col(t).array() * r * (1.0 - r)).matrix();
      du = (dac.array() * r).matrix();
      d_w.col(t) << daz, dar, dac;
      d_u.col(t) << daz, dar, du;
      dh_next = (dh.array() * z).matrix();
      dh_next.noalias() += U.transpose() * d_u.col(t);
    }

    const auto in = static_cast<Eigen::Index>(li == 0 ? params.shape().input : params.shape().hidden[li - 1]);
    const auto& wslot = params.layout().at(layer_name(li, "Wz"));
    const auto& uslot = params.layout().at(layer_name(li, "Uz"));
    MatrixMap(grad.data() + wslot.offset, 3 * H, in).noalias() = d_w * lc.input.transpose();
    MatrixMap(grad.data() + uslot.offset, 3 * H, H).noalias() = d_u * lc.hidden.leftCols(T).transpose();
    if (params.shape().gate_bias) {
      const auto& bslot = params.layout().at(layer_name(li, "bz"));
      Eigen::Map<Eigen::VectorXd>(grad.data() + bslot.offset, 3 * H) = d_w.rowwise().sum();
    }
    if (li > 0) {
      Eigen::MatrixXd d_in = W.transpose() * d_w;  // I x T, gradient w.r.t. the (masked) input
      d_out = d_in.cwiseProduct(cache.masks[li - 1]);
    }
  }
  return grad;
}

}  // namespace fedgru::grunet
