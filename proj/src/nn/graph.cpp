#include "ddsd/nn/graph.hpp"

#include <algorithm>
#include <cmath>

#include "ddsd/error.hpp"
#include "eigen_map.hpp"

namespace ddsd::nn {

using detail::as_matrix;
using detail::as_row;
using detail::ConstMatrixMap;
using detail::MatrixMap;
using detail::RowMatrix;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr std::size_t kUnknownWidth = 0;

std::size_t declared_input_width(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const MaskLayer&) { return kUnknownWidth; },
                        [](const DenseLayer& l) { return l.in; },
                        [](const GruLayer& l) { return l.in; },
                        [](const LayerNormLayer& l) { return l.dim; },
                        [](const DropoutLayer&) { return kUnknownWidth; },
                        [](const BranchDenseLayer& l) {
                          std::size_t sum = 0;
                          for (auto d : l.in_dims) sum += d;
                          return sum;
                        },
                        [](const InverseSoftmaxLayer& l) { return l.dim; },
                    },
                    layer);
}

std::string layer_label(std::size_t index, const Layer& layer) {
  return "layer " + std::to_string(index) + " (" + layer_kind(layer) + ")";
}

void glorot_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : t.values()) v = dist(rng);
}

void apply_activation(Activation act, MatrixMap y) {
  switch (act) {
    case Activation::kLinear: break;
    case Activation::kSigmoid: y = (1.0 + (-y.array()).exp()).inverse().matrix(); break;
    case Activation::kTanh: y = y.array().tanh().matrix(); break;
    case Activation::kRelu: y = y.array().max(0.0).matrix(); break;
  }
}

// dL/d(pre-activation) from dL/d(output) and the activation output.
void activation_backward(Activation act, const ConstMatrixMap& y, MatrixMap grad) {
  switch (act) {
    case Activation::kLinear: break;
    case Activation::kSigmoid: grad.array() *= y.array() * (1.0 - y.array()); break;
    case Activation::kTanh: grad.array() *= 1.0 - y.array().square(); break;
    case Activation::kRelu: grad.array() *= (y.array() > 0.0).cast<double>(); break;
  }
}


}  // namespace

// ---------------------------------------------------------------------------
// ModelGraph

ModelGraph::ModelGraph(std::uint64_t seed) : seed_(seed), init_rng_(seed) {}

std::vector<Tensor> ModelGraph::make_params(std::size_t index, const Layer& layer, bool initialize) {
  std::vector<Tensor> out;
  std::visit(Overloaded{
                 [](const MaskLayer&) {},
                 [&](const DenseLayer& l) {
                   Tensor w({l.in, l.out});
                   if (initialize) glorot_fill(w, l.in, l.out, init_rng_);
                   out.push_back(std::move(w));
                   out.emplace_back(std::vector<std::size_t>{l.out});
                 },
                 [&](const GruLayer& l) {
                   const std::size_t h3 = 3 * l.hidden;
                   Tensor kernel({l.in, h3});
                   Tensor recurrent({l.hidden, h3});
                   if (initialize) {
                     glorot_fill(kernel, l.in, h3, init_rng_);
                     glorot_fill(recurrent, l.hidden, h3, init_rng_);
                   }
                   out.push_back(std::move(kernel));
                   out.push_back(std::move(recurrent));
                   out.emplace_back(std::vector<std::size_t>{h3});
                 },
                 [&](const LayerNormLayer& l) {
                   out.emplace_back(std::vector<std::size_t>{l.dim}, initialize ? 1.0 : 0.0);
                   out.emplace_back(std::vector<std::size_t>{l.dim});
                 },
                 [](const DropoutLayer&) {},
                 [&](const BranchDenseLayer& l) {
                   for (auto in : l.in_dims) {
                     Tensor w({in, l.out});
                     if (initialize) glorot_fill(w, in, l.out, init_rng_);
                     out.push_back(std::move(w));
                     out.emplace_back(std::vector<std::size_t>{l.out});
                   }
                 },
                 [](const InverseSoftmaxLayer&) {},
             },
             layer);
  (void)index;
  return out;
}

namespace {

std::vector<std::string> param_names(std::size_t index, const Layer& layer) {
  const std::string prefix = "l" + std::to_string(index) + "." + layer_kind(layer) + ".";
  std::vector<std::string> names;
  std::visit(Overloaded{
                 [](const MaskLayer&) {},
                 [&](const DenseLayer&) {
                   names = {prefix + "weight", prefix + "bias"};
                 },
                 [&](const GruLayer&) {
                   names = {prefix + "kernel", prefix + "recurrent", prefix + "bias"};
                 },
                 [&](const LayerNormLayer&) {
                   names = {prefix + "gain", prefix + "bias"};
                 },
                 [](const DropoutLayer&) {},
                 [&](const BranchDenseLayer& l) {
                   for (std::size_t b = 0; b < l.in_dims.size(); ++b) {
                     names.push_back(prefix + "b" + std::to_string(b) + ".weight");
                     names.push_back(prefix + "b" + std::to_string(b) + ".bias");
                   }
                 },
                 [](const InverseSoftmaxLayer&) {},
             },
             layer);
  return names;
}

void validate_layer(const Layer& layer, std::size_t index) {
  const bool ok = std::visit(
      Overloaded{
          [](const MaskLayer&) { return true; },
          [](const DenseLayer& l) { return l.in > 0 && l.out > 0; },
          [](const GruLayer& l) { return l.in > 0 && l.hidden > 0; },
          [](const LayerNormLayer& l) { return l.dim > 0 && l.epsilon > 0.0; },
          [](const DropoutLayer& l) { return l.rate >= 0.0 && l.rate < 1.0; },
          [](const BranchDenseLayer& l) {
            return l.out > 0 && !l.in_dims.empty() &&
                   std::all_of(l.in_dims.begin(), l.in_dims.end(), [](auto d) { return d > 0; });
          },
          [](const InverseSoftmaxLayer& l) { return l.dim > 0; },
      },
      layer);
  if (!ok) throw ShapeError(layer_label(index, layer) + ": invalid layer dimensions");
}

}  // namespace

ModelGraph& ModelGraph::add(Layer layer) {
  const std::size_t index = layers_.size();
  validate_layer(layer, index);
  const std::size_t declared = declared_input_width(layer);
  if (!layers_.empty() && declared != kUnknownWidth) {
    const std::size_t incoming = width_after(index - 1);
    if (incoming != kUnknownWidth && incoming != declared) {
      throw ShapeError(layer_label(index, layer) + ": expects width " + std::to_string(declared) +
                       " but previous layer produces " + std::to_string(incoming));
    }
  }
  if (std::holds_alternative<MaskLayer>(layer) && index != 0) {
    throw ShapeError(layer_label(index, layer) + ": mask must be the first layer");
  }
  if (std::holds_alternative<GruLayer>(layer)) {
    for (const auto& prev : layers_) {
      if (!std::holds_alternative<MaskLayer>(prev)) {
        throw ShapeError(layer_label(index, layer) + ": GRU must be the first layer after an optional mask");
      }
    }
  }
  auto tensors = make_params(index, layer, true);
  auto names = param_names(index, layer);
  param_begin_.push_back(params_.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    params_.push_back({names[i], std::move(tensors[i])});
  }
  layers_.push_back(std::move(layer));
  return *this;
}

ModelGraph ModelGraph::from_parts(std::uint64_t seed, std::vector<Layer> layers,
                                  std::vector<NamedTensor> params) {
  ModelGraph graph(seed);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    graph.add(layers[i]);
    const auto [begin, end] = graph.param_range(i);
    for (std::size_t p = begin; p < end; ++p, ++cursor) {
      if (cursor >= params.size()) throw DataError("model: missing parameter " + graph.params_[p].name);
      if (params[cursor].name != graph.params_[p].name ||
          params[cursor].tensor.shape() != graph.params_[p].tensor.shape()) {
        throw ShapeError("model: parameter " + params[cursor].name + " " +
                         shape_string(params[cursor].tensor.shape()) + " does not match expected " +
                         graph.params_[p].name + " " + shape_string(graph.params_[p].tensor.shape()));
      }
      graph.params_[p].tensor = std::move(params[cursor].tensor);
    }
  }
  if (cursor != params.size()) throw DataError("model: unexpected extra parameters");
  return graph;
}

std::pair<std::size_t, std::size_t> ModelGraph::param_range(std::size_t layer) const {
  const std::size_t begin = param_begin_.at(layer);
  const std::size_t end = layer + 1 < param_begin_.size() ? param_begin_[layer + 1] : params_.size();
  return {begin, end};
}

Tensor& ModelGraph::param(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw DataError("model: no parameter named " + name);
}

const Tensor& ModelGraph::param(const std::string& name) const {
  return const_cast<ModelGraph*>(this)->param(name);
}

std::size_t ModelGraph::parameter_count() const {
  std::size_t count = 0;
  for (const auto& p : params_) count += p.tensor.size();
  return count;
}

bool ModelGraph::has_mask() const {
  return !layers_.empty() && std::holds_alternative<MaskLayer>(layers_.front());
}

bool ModelGraph::is_sequence() const {
  for (const auto& layer : layers_) {
    if (std::holds_alternative<GruLayer>(layer)) return true;
  }
  return false;
}

std::size_t ModelGraph::input_width() const {
  for (const auto& layer : layers_) {
    const auto w = declared_input_width(layer);
    if (w != kUnknownWidth) return w;
  }
  return kUnknownWidth;
}

std::size_t ModelGraph::width_after(std::size_t index) const {
  std::size_t width = input_width();
  for (std::size_t i = 0; i <= index && i < layers_.size(); ++i) {
    width = output_width(layers_[i], width);
  }
  return width;
}

bool operator==(const ModelGraph& a, const ModelGraph& b) {
  if (a.seed_ != b.seed_ || a.layers_.size() != b.layers_.size() || a.params_ != b.params_) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    if (layer_kind(a.layers_[i]) != layer_kind(b.layers_[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Forward

const Tensor& ForwardPass::output() const {
  if (outputs.empty()) throw NumericError("forward pass is empty");
  return outputs.back();
}

const Tensor& ForwardPass::layer_output(std::size_t layer) const {
  if (layer < first_layer || layer >= end_layer()) {
    throw DataError("forward pass does not cover layer " + std::to_string(layer));
  }
  return outputs[layer - first_layer];
}

namespace {

struct LayerContext {
  const ModelGraph& graph;
  std::size_t index;
  const std::vector<std::size_t>& lengths;
};

Tensor dense_forward(const DenseLayer& l, const Tensor& w, const Tensor& b, const Tensor& x) {
  const std::size_t rows = x.dim(0);
  Tensor y({rows, l.out});
  auto Y = as_matrix(y);
  Y.noalias() = as_matrix(x) * as_matrix(w);
  Y.rowwise() += as_row(b);
  apply_activation(l.activation, Y);
  return y;
}

Tensor gru_forward(const GruLayer& l, const Tensor& kernel, const Tensor& recurrent, const Tensor& bias,
                   const Tensor& x, const std::vector<std::size_t>& lengths, LayerCache& cache) {
  const std::size_t batch = x.dim(0);
  const std::size_t steps = x.dim(1);
  const std::size_t H = l.hidden;
  const std::size_t H3 = 3 * H;
  const auto U = as_matrix(recurrent);
  const auto Uzr = U.leftCols(2 * H);
  const auto Uh = U.rightCols(H);

  RowMatrix xw = as_matrix(x, batch * steps, l.in) * as_matrix(kernel);
  xw.rowwise() += as_row(bias);

  Tensor z({steps, batch, H});
  Tensor r({steps, batch, H});
  Tensor cand({steps, batch, H});
  Tensor hprev({steps, batch, H});

  RowMatrix h = RowMatrix::Zero(batch, H);
  RowMatrix zr(batch, 2 * H);
  RowMatrix rh(batch, H);
  RowMatrix a(batch, H);
  for (std::size_t t = 0; t < steps; ++t) {
    using Strided = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;
    Strided xw_t(xw.data() + t * H3, batch, H3, Eigen::OuterStride<>(steps * H3));
    MatrixMap z_t(z.data() + t * batch * H, batch, H);
    MatrixMap r_t(r.data() + t * batch * H, batch, H);
    MatrixMap c_t(cand.data() + t * batch * H, batch, H);
    MatrixMap hp_t(hprev.data() + t * batch * H, batch, H);
    hp_t = h;

    zr = xw_t.leftCols(2 * H);
    zr.noalias() += h * Uzr;
    z_t = (1.0 + (-zr.leftCols(H).array()).exp()).inverse().matrix();
    r_t = (1.0 + (-zr.rightCols(H).array()).exp()).inverse().matrix();

    rh = r_t.cwiseProduct(h);
    a = xw_t.rightCols(H);
    a.noalias() += rh * Uh;
    c_t = a.array().tanh().matrix();

    for (std::size_t b = 0; b < batch; ++b) {
      if (t < lengths[b]) {
        h.row(b) = ((1.0 - z_t.row(b).array()) * h.row(b).array() + z_t.row(b).array() * c_t.row(b).array()).matrix();
      }
    }
  }
  cache.tensors = {std::move(z), std::move(r), std::move(cand), std::move(hprev)};
  Tensor out({batch, H});
  as_matrix(out) = h;
  return out;
}

Tensor layer_norm_forward(const LayerNormLayer& l, const Tensor& gain, const Tensor& beta, const Tensor& x,
                          LayerCache& cache) {
  const std::size_t rows = x.dim(0);
  const auto X = as_matrix(x);
  Tensor xhat({rows, l.dim});
  Tensor inv_std({rows});
  auto Xh = as_matrix(xhat);
  for (std::size_t i = 0; i < rows; ++i) {
    const double mean = X.row(i).mean();
    const double var = (X.row(i).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + l.epsilon);
    inv_std[i] = inv;
    Xh.row(i) = (X.row(i).array() - mean) * inv;
  }
  Tensor y({rows, l.dim});
  auto Y = as_matrix(y);
  Y = Xh.array().rowwise() * as_row(gain).array();
  Y.rowwise() += as_row(beta);
  cache.tensors = {std::move(xhat), std::move(inv_std)};
  return y;
}

Tensor dropout_forward(const DropoutLayer& l, const Tensor& x, bool train, std::mt19937_64* rng,
                       LayerCache& cache, const std::string& label) {
  if (!train || l.rate == 0.0) return x;
  if (rng == nullptr) throw UsageError(label + ": train-mode dropout needs a random generator");
  const double keep = 1.0 - l.rate;
  Tensor mask(x.shape());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& m : mask.values()) m = unit(*rng) < keep ? 1.0 / keep : 0.0;
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  cache.tensors = {std::move(mask)};
  return y;
}

Tensor branch_dense_forward(const BranchDenseLayer& l, const ModelGraph& g, std::size_t first_param,
                            const Tensor& x) {
  const std::size_t rows = x.dim(0);
  const std::size_t branches = l.in_dims.size();
  Tensor y({rows, l.out * branches});
  auto Y = as_matrix(y);
  const auto X = as_matrix(x);
  std::size_t offset = 0;
  for (std::size_t b = 0; b < branches; ++b) {
    const auto& w = g.params()[first_param + 2 * b].tensor;
    const auto& bias = g.params()[first_param + 2 * b + 1].tensor;
    auto Yb = Y.middleCols(b * l.out, l.out);
    Yb.noalias() = X.middleCols(offset, l.in_dims[b]) * as_matrix(w);
    Yb.rowwise() += as_row(bias);
    offset += l.in_dims[b];
  }
  apply_activation(l.activation, Y);
  return y;
}

Tensor inverse_softmax_forward(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.values()) {
    if (v < 0.0) continue;
    const double s = std::clamp(v, kInverseSoftmaxClamp, 1.0 - kInverseSoftmaxClamp);
    v = std::log(s / (1.0 - s));
  }
  return y;
}

void check_input(const ModelGraph& graph, std::size_t index, const Tensor& x) {
  const auto& layer = graph.layers()[index];
  const bool seq = std::holds_alternative<GruLayer>(layer) || std::holds_alternative<MaskLayer>(layer);
  const std::size_t want_rank = seq ? 3 : 2;
  if (x.rank() != want_rank) {
    throw ShapeError(layer_label(index, layer) + ": expected rank-" + std::to_string(want_rank) +
                     " input, got " + shape_string(x.shape()));
  }
  const std::size_t declared = declared_input_width(layer);
  if (declared != kUnknownWidth && x.shape().back() != declared) {
    throw ShapeError(layer_label(index, layer) + ": expected input width " + std::to_string(declared) +
                     ", got " + shape_string(x.shape()));
  }
}

}  // namespace

ForwardPass forward(const ModelGraph& graph, const Tensor& input, const ForwardOptions& options) {
  const std::size_t n_layers = graph.layers().size();
  const std::size_t end = std::min(options.end_layer, n_layers);
  if (options.first_layer >= end) throw UsageError("forward: empty layer range");
  if (!input.all_finite()) throw NumericError("forward: input contains non-finite values");

  ForwardPass pass;
  pass.first_layer = options.first_layer;

  const bool runs_sequence = [&] {
    for (std::size_t i = options.first_layer; i < end; ++i) {
      const auto& l = graph.layers()[i];
      if (std::holds_alternative<GruLayer>(l) || std::holds_alternative<MaskLayer>(l)) return true;
    }
    return false;
  }();
  if (runs_sequence) {
    if (input.rank() != 3) {
      throw ShapeError("forward: sequence input must be [batch, time, features], got " +
                       shape_string(input.shape()));
    }
    const std::size_t batch = input.dim(0);
    const std::size_t steps = input.dim(1);
    if (graph.has_mask()) {
      if (options.lengths.size() != batch) {
        throw ShapeError("forward: mask layer needs " + std::to_string(batch) + " sequence lengths, got " +
                         std::to_string(options.lengths.size()));
      }
      for (auto len : options.lengths) {
        if (len == 0 || len > steps) {
          throw ShapeError("forward: sequence length " + std::to_string(len) + " outside [1, " +
                           std::to_string(steps) + "]");
        }
      }
      pass.lengths.assign(options.lengths.begin(), options.lengths.end());
    } else {
      if (!options.lengths.empty()) throw ShapeError("forward: lengths given but graph has no mask layer");
      pass.lengths.assign(batch, steps);
    }
  } else if (!options.lengths.empty() && graph.has_mask() && options.first_layer == 0) {
    throw ShapeError("forward: lengths given for a non-sequence input");
  }

  const Tensor* current = &input;
  pass.inputs.reserve(end - options.first_layer);
  pass.outputs.reserve(end - options.first_layer);
  pass.caches.resize(end - options.first_layer);
  for (std::size_t i = options.first_layer; i < end; ++i) {
    const Layer& layer = graph.layers()[i];
    check_input(graph, i, *current);
    const auto [p0, p1] = graph.param_range(i);
    const auto& P = graph.params();
    LayerCache& cache = pass.caches[i - options.first_layer];
    Tensor out = std::visit(
        Overloaded{
            [&](const MaskLayer&) { return *current; },
            [&](const DenseLayer& l) { return dense_forward(l, P[p0].tensor, P[p0 + 1].tensor, *current); },
            [&](const GruLayer& l) {
              return gru_forward(l, P[p0].tensor, P[p0 + 1].tensor, P[p0 + 2].tensor, *current, pass.lengths,
                                 cache);
            },
            [&](const LayerNormLayer& l) {
              return layer_norm_forward(l, P[p0].tensor, P[p0 + 1].tensor, *current, cache);
            },
            [&](const DropoutLayer& l) {
              return dropout_forward(l, *current, options.train_mode, options.rng, cache, layer_label(i, layer));
            },
            [&](const BranchDenseLayer& l) { return branch_dense_forward(l, graph, p0, *current); },
            [&](const InverseSoftmaxLayer&) { return inverse_softmax_forward(*current); },
        },
        layer);
    (void)p1;
    pass.inputs.push_back(*current);
    pass.outputs.push_back(std::move(out));
    current = &pass.outputs.back();
  }
  return pass;
}

// ---------------------------------------------------------------------------
// Backward

namespace {

Tensor gru_backward(const GruLayer& l, const Tensor& kernel, const Tensor& recurrent, const Tensor& x,
                    const std::vector<std::size_t>& lengths, const LayerCache& cache, const Tensor& dout,
                    Tensor& dkernel, Tensor& drecurrent, Tensor& dbias) {
  const std::size_t batch = x.dim(0);
  const std::size_t steps = x.dim(1);
  const std::size_t H = l.hidden;
  const std::size_t H3 = 3 * H;
  const auto U = as_matrix(recurrent);
  const auto Uzr = U.leftCols(2 * H);
  const auto Uh = U.rightCols(H);
  const Tensor& z = cache.tensors[0];
  const Tensor& r = cache.tensors[1];
  const Tensor& cand = cache.tensors[2];
  const Tensor& hprev = cache.tensors[3];

  RowMatrix dpre = RowMatrix::Zero(batch * steps, H3);  // row b*T + t
  RowMatrix dU = RowMatrix::Zero(H, H3);
  RowMatrix dh = as_matrix(dout);
  RowMatrix dgates(batch, 2 * H);
  RowMatrix dcand(batch, H);
  RowMatrix dhp(batch, H);
  RowMatrix drh(batch, H);
  RowMatrix rh(batch, H);
  for (std::size_t tt = steps; tt-- > 0;) {
    const auto z_t = ConstMatrixMap(z.data() + tt * batch * H, batch, H);
    const auto r_t = ConstMatrixMap(r.data() + tt * batch * H, batch, H);
    const auto c_t = ConstMatrixMap(cand.data() + tt * batch * H, batch, H);
    const auto hp_t = ConstMatrixMap(hprev.data() + tt * batch * H, batch, H);

    dcand = (dh.array() * z_t.array() * (1.0 - c_t.array().square())).matrix();
    auto dz = dgates.leftCols(H);
    auto dr = dgates.rightCols(H);
    dz = (dh.array() * (c_t.array() - hp_t.array()) * z_t.array() * (1.0 - z_t.array())).matrix();
    dhp = (dh.array() * (1.0 - z_t.array())).matrix();
    for (std::size_t b = 0; b < batch; ++b) {
      if (tt >= lengths[b]) {
        dcand.row(b).setZero();
        dz.row(b).setZero();
      }
    }
    drh.noalias() = dcand * Uh.transpose();
    dr = (drh.array() * hp_t.array() * r_t.array() * (1.0 - r_t.array())).matrix();
    dhp.array() += drh.array() * r_t.array();
    dhp.noalias() += dgates * Uzr.transpose();
    dU.leftCols(2 * H).noalias() += hp_t.transpose() * dgates;
    rh = r_t.cwiseProduct(hp_t);
    dU.rightCols(H).noalias() += rh.transpose() * dcand;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t row = b * steps + tt;
      if (tt >= lengths[b]) {
        dhp.row(b) = dh.row(b);
      } else {
        dpre.row(row).leftCols(2 * H) = dgates.row(b);
        dpre.row(row).rightCols(H) = dcand.row(b);
      }
    }
    dh.swap(dhp);
  }
  const auto X = as_matrix(x, batch * steps, l.in);
  as_matrix(dkernel).noalias() += X.transpose() * dpre;
  as_matrix(drecurrent) += dU;
  as_row(dbias) += dpre.colwise().sum();
  Tensor dx(x.shape());
  as_matrix(dx, batch * steps, l.in).noalias() = dpre * as_matrix(kernel).transpose();
  return dx;
}

}  // namespace

Gradients backward(const ModelGraph& graph, const ForwardPass& pass, const Tensor& output_grad) {
  if (pass.empty()) throw UsageError("backward: no forward pass recorded");
  if (output_grad.shape() != pass.output().shape()) {
    throw ShapeError("backward: output gradient " + shape_string(output_grad.shape()) +
                     " does not match output " + shape_string(pass.output().shape()));
  }
  Gradients grads;
  grads.params.reserve(graph.params().size());
  for (const auto& p : graph.params()) grads.params.emplace_back(p.tensor.shape());

  Tensor grad = output_grad;
  const auto& P = graph.params();
  for (std::size_t i = pass.end_layer(); i-- > pass.first_layer;) {
    const std::size_t local = i - pass.first_layer;
    const Layer& layer = graph.layers()[i];
    const Tensor& x = pass.inputs[local];
    const Tensor& y = pass.outputs[local];
    const LayerCache& cache = pass.caches[local];
    const auto [p0, p1] = graph.param_range(i);
    (void)p1;
    grad = std::visit(
        Overloaded{
            [&](const MaskLayer&) { return grad; },
            [&](const DenseLayer& l) {
              Tensor dpre = grad;
              activation_backward(l.activation, as_matrix(y), as_matrix(dpre));
              as_matrix(grads.params[p0]).noalias() += as_matrix(x).transpose() * as_matrix(dpre);
              as_row(grads.params[p0 + 1]) += as_matrix(dpre).colwise().sum();
              Tensor dx(x.shape());
              as_matrix(dx).noalias() = as_matrix(dpre) * as_matrix(P[p0].tensor).transpose();
              return dx;
            },
            [&](const GruLayer& l) {
              return gru_backward(l, P[p0].tensor, P[p0 + 1].tensor, x, pass.lengths, cache, grad,
                                  grads.params[p0], grads.params[p0 + 1], grads.params[p0 + 2]);
            },
            [&](const LayerNormLayer& l) {
              const Tensor& xhat = cache.tensors[0];
              const Tensor& inv_std = cache.tensors[1];
              const std::size_t rows = x.dim(0);
              const auto G = as_matrix(grad);
              const auto Xh = as_matrix(xhat);
              as_row(grads.params[p0]) += (G.array() * Xh.array()).matrix().colwise().sum();
              as_row(grads.params[p0 + 1]) += G.colwise().sum();
              Tensor dx(x.shape());
              auto DX = as_matrix(dx);
              const auto gain = as_row(P[p0].tensor);
              const double n = static_cast<double>(l.dim);
              for (std::size_t rI = 0; rI < rows; ++rI) {
                const Eigen::RowVectorXd dxh = G.row(rI).cwiseProduct(gain);
                const double sum = dxh.sum();
                const double dot = dxh.dot(Xh.row(rI));
                DX.row(rI) = (inv_std[rI] / n) * (n * dxh.array() - sum - Xh.row(rI).array() * dot).matrix();
              }
              return dx;
            },
            [&](const DropoutLayer&) {
              if (cache.tensors.empty()) return grad;
              Tensor dx = grad;
              for (std::size_t k = 0; k < dx.size(); ++k) dx[k] *= cache.tensors[0][k];
              return dx;
            },
            [&](const BranchDenseLayer& l) {
              Tensor dpre = grad;
              activation_backward(l.activation, as_matrix(y), as_matrix(dpre));
              const auto D = as_matrix(dpre);
              const auto X = as_matrix(x);
              Tensor dx(x.shape());
              auto DX = as_matrix(dx);
              std::size_t offset = 0;
              for (std::size_t b = 0; b < l.in_dims.size(); ++b) {
                const auto Db = D.middleCols(b * l.out, l.out);
                as_matrix(grads.params[p0 + 2 * b]).noalias() +=
                    X.middleCols(offset, l.in_dims[b]).transpose() * Db;
                as_row(grads.params[p0 + 2 * b + 1]) += Db.colwise().sum();
                DX.middleCols(offset, l.in_dims[b]).noalias() = Db * as_matrix(P[p0 + 2 * b].tensor).transpose();
                offset += l.in_dims[b];
              }
              return dx;
            },
            [&](const InverseSoftmaxLayer&) {
              Tensor dx = grad;
              for (std::size_t k = 0; k < dx.size(); ++k) {
                const double v = x[k];
                if (v < 0.0) continue;
                if (v < kInverseSoftmaxClamp || v > 1.0 - kInverseSoftmaxClamp) {
                  dx[k] = 0.0;
                } else {
                  dx[k] *= 1.0 / (v * (1.0 - v));
                }
              }
              return dx;
            },
        },
        layer);
  }
  grads.input = std::move(grad);
  return grads;
}

// ---------------------------------------------------------------------------

std::vector<double> gru_cell(std::span<const double> x, std::span<const double> h_prev, const Tensor& kernel,
                             const Tensor& recurrent, const Tensor& bias) {
  const std::size_t in = x.size();
  const std::size_t H = h_prev.size();
  if (kernel.rank() != 2 || kernel.dim(0) != in || kernel.dim(1) != 3 * H || recurrent.rank() != 2 ||
      recurrent.dim(0) != H || recurrent.dim(1) != 3 * H || bias.size() != 3 * H) {
    throw ShapeError("gru_cell: input " + std::to_string(in) + " / hidden " + std::to_string(H) +
                     " do not match kernel " + shape_string(kernel.shape()) + ", recurrent " +
                     shape_string(recurrent.shape()));
  }
  Eigen::Map<const Eigen::RowVectorXd> xv(x.data(), static_cast<Eigen::Index>(in));
  Eigen::Map<const Eigen::RowVectorXd> hv(h_prev.data(), static_cast<Eigen::Index>(H));
  const auto W = as_matrix(kernel);
  const auto U = as_matrix(recurrent);
  Eigen::RowVectorXd xw = xv * W + as_row(bias);
  Eigen::RowVectorXd zr = xw.head(2 * H) + hv * U.leftCols(2 * H);
  zr = (1.0 + (-zr.array()).exp()).inverse().matrix();
  const Eigen::RowVectorXd rh = zr.tail(H).cwiseProduct(hv);
  const Eigen::RowVectorXd c = (xw.tail(H) + rh * U.rightCols(H)).array().tanh().matrix();
  const Eigen::RowVectorXd h = (1.0 - zr.head(H).array()) * hv.array() + zr.head(H).array() * c.array();
  return {h.data(), h.data() + H};
}

Tensor pad_sequences(std::span<const Tensor> sequences, std::vector<std::size_t>* lengths) {
  if (sequences.empty()) throw DataError("pad_sequences: no sequences");
  const std::size_t width = sequences.front().dim(1);
  std::size_t max_len = 0;
  for (const auto& s : sequences) {
    if (s.rank() != 2 || s.dim(1) != width) {
      throw ShapeError("pad_sequences: inconsistent sequence shape " + shape_string(s.shape()));
    }
    max_len = std::max(max_len, s.dim(0));
  }
  Tensor out({sequences.size(), max_len, width});
  if (lengths) lengths->clear();
  for (std::size_t b = 0; b < sequences.size(); ++b) {
    const auto& s = sequences[b];
    std::copy(s.values().begin(), s.values().end(), out.data() + b * max_len * width);
    if (lengths) lengths->push_back(s.dim(0));
  }
  return out;
}

}  // namespace ddsd::nn
