#include "tagopt/net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tagopt/kernels.hpp"

namespace tagopt {

namespace {

MatrixView weight_view(std::span<const double> params, const MultiHeadNet::Block& b) {
  return {params.data() + b.weight_offset, b.out, b.in};
}

std::span<const double> bias_view(std::span<const double> params, const MultiHeadNet::Block& b) {
  return params.subspan(b.bias_offset, b.out);
}

// Per-layer intermediates kept for the backward pass.
struct TrunkCache {
  std::vector<Matrix> inputs;       // input to each trunk layer
  std::vector<Matrix> preact;       // z = a W^T + b
  std::vector<Matrix> masks;        // scaled keep-masks; empty when dropout is off
  Matrix output;                    // input to the head
};

TrunkCache run_trunk(const MultiHeadNet& net, const Matrix& features, Rng* dropout_rng) {
  const auto params = net.params();
  const bool dropout = dropout_rng != nullptr && net.dropout_rate() > 0.0;
  const double keep = 1.0 - net.dropout_rate();

  TrunkCache cache;
  Matrix a = features;
  for (const auto& layer : net.trunk()) {
    Matrix z;
    kernels::matmul_bt(a, weight_view(params, layer), bias_view(params, layer), z);
    Matrix h = z;
    for (double& v : h.values()) v = v > 0.0 ? v : 0.0;
    Matrix mask;
    if (dropout) {
      mask = Matrix(h.rows(), h.cols());
      std::bernoulli_distribution keep_dist(keep);
      auto hv = h.values();
      auto mv = mask.values();
      for (std::size_t i = 0; i < hv.size(); ++i) {
        mv[i] = keep_dist(*dropout_rng) ? 1.0 / keep : 0.0;
        hv[i] *= mv[i];
      }
    }
    cache.inputs.push_back(std::move(a));
    cache.preact.push_back(std::move(z));
    cache.masks.push_back(std::move(mask));
    a = std::move(h);
  }
  cache.output = std::move(a);
  return cache;
}

// Softmax cross-entropy: returns mean loss and writes d(loss)/d(logits) into `dlogits`.
double softmax_xent(const Matrix& logits, std::span<const int> labels, Matrix* dlogits) {
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  if (dlogits) *dlogits = Matrix(n, c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = logits.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (double v : row) denom += std::exp(v - mx);
    const double lse = mx + std::log(denom);
    const auto y = static_cast<std::size_t>(labels[i]);
    total += lse - row[y];
    if (dlogits) {
      for (std::size_t j = 0; j < c; ++j) {
        const double p = std::exp(row[j] - lse);
        (*dlogits)(i, j) = (p - (j == y ? 1.0 : 0.0)) / static_cast<double>(n);
      }
    }
  }
  return total / static_cast<double>(n);
}

void write_block_grad(GradVector& grad, const MultiHeadNet::Block& b, const Matrix& dz,
                      const Matrix& input) {
  Matrix dw;
  kernels::matmul_at(dz, input, dw);  // (out x in)
  std::copy(dw.values().begin(), dw.values().end(),
            grad.begin() + static_cast<std::ptrdiff_t>(b.weight_offset));
  for (std::size_t j = 0; j < b.out; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < dz.rows(); ++i) s += dz(i, j);
    grad[b.bias_offset + j] = s;
  }
}

}  // namespace

MultiHeadNet::MultiHeadNet(NetShape shape, double dropout_rate, std::uint64_t init_seed)
    : shape_(std::move(shape)) {
  if (shape_.input_dim == 0) throw ConfigError("net: input_dim must be positive");
  if (shape_.classes_per_task < 2) throw ConfigError("net: classes_per_task must be at least 2");
  if (shape_.num_tasks == 0) throw ConfigError("net: num_tasks must be positive");
  for (auto w : shape_.hidden) {
    if (w == 0) throw ConfigError("net: hidden widths must be positive");
  }
  set_dropout_rate(dropout_rate);

  std::size_t offset = 0;
  auto make_block = [&offset](std::size_t out, std::size_t in) {
    Block b{offset, offset + out * in, out, in};
    offset += b.size();
    return b;
  };
  std::size_t in = shape_.input_dim;
  for (auto w : shape_.hidden) {
    trunk_.push_back(make_block(w, in));
    in = w;
  }
  for (std::size_t t = 0; t < shape_.num_tasks; ++t) {
    heads_.push_back(make_block(shape_.classes_per_task, in));
  }
  params_.assign(offset, 0.0);

  // Glorot-uniform weights, zero biases.
  Rng rng(init_seed);
  auto init = [&](const Block& b) {
    const double limit = std::sqrt(6.0 / static_cast<double>(b.in + b.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < b.out * b.in; ++i) params_[b.weight_offset + i] = dist(rng);
  };
  for (const auto& b : trunk_) init(b);
  for (const auto& b : heads_) init(b);
}

void MultiHeadNet::set_dropout_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("net: dropout rate must be in [0, 1)");
  dropout_rate_ = rate;
}

void MultiHeadNet::set_params(std::span<const double> values) {
  require_same_size(values.size(), params_.size(), "MultiHeadNet::set_params");
  std::copy(values.begin(), values.end(), params_.begin());
}

const MultiHeadNet::Block& MultiHeadNet::head(std::size_t task) const {
  if (task >= heads_.size()) {
    throw StateError("net: no head allocated for task " + std::to_string(task + 1));
  }
  return heads_[task];
}

void MultiHeadNet::check_input(const Matrix& features, std::size_t task) const {
  (void)head(task);
  if (features.cols() != shape_.input_dim) {
    throw ShapeError("net: feature width " + std::to_string(features.cols()) + " != input_dim " +
                     std::to_string(shape_.input_dim));
  }
}

void MultiHeadNet::check_batch(const TaskBatch& batch) const {
  if (batch.size() == 0) throw ShapeError("net: empty batch");
  check_input(batch.features, batch.task);
  require_same_size(batch.features.rows(), batch.labels.size(), "net: labels vs rows");
  for (int y : batch.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= shape_.classes_per_task) {
      throw DomainError("net: label " + std::to_string(y) + " outside [0, classes_per_task)");
    }
  }
}

Matrix MultiHeadNet::forward(const Matrix& features, std::size_t task, Rng* dropout_rng) const {
  check_input(features, task);
  const auto cache = run_trunk(*this, features, dropout_rng);
  const auto& h = heads_[task];
  Matrix logits;
  kernels::matmul_bt(cache.output, weight_view(params_, h), bias_view(params_, h), logits);
  return logits;
}

LossAndGrad MultiHeadNet::loss_and_grad(const TaskBatch& batch, Rng* dropout_rng) const {
  check_batch(batch);
  const auto cache = run_trunk(*this, batch.features, dropout_rng);
  const auto& hb = heads_[batch.task];

  Matrix logits;
  kernels::matmul_bt(cache.output, weight_view(params_, hb), bias_view(params_, hb), logits);
  Matrix dlogits;
  LossAndGrad out;
  out.loss = softmax_xent(logits, batch.labels, &dlogits);
  out.grad.assign(params_.size(), 0.0);

  write_block_grad(out.grad, hb, dlogits, cache.output);
  Matrix da;
  kernels::matmul(dlogits, weight_view(params_, hb), da);

  for (std::size_t l = trunk_.size(); l-- > 0;) {
    const auto& layer = trunk_[l];
    Matrix dz = da;
    auto dzv = dz.values();
    const auto zv = cache.preact[l].values();
    const auto& mask = cache.masks[l];
    for (std::size_t i = 0; i < dzv.size(); ++i) {
      if (!mask.empty()) dzv[i] *= mask.values()[i];
      if (zv[i] <= 0.0) dzv[i] = 0.0;
    }
    write_block_grad(out.grad, layer, dz, cache.inputs[l]);
    if (l > 0) kernels::matmul(dz, weight_view(params_, layer), da);
  }
  return out;
}

double MultiHeadNet::loss(const TaskBatch& batch) const {
  check_batch(batch);
  return softmax_xent(forward(batch.features, batch.task), batch.labels, nullptr);
}

std::size_t MultiHeadNet::count_correct(const Matrix& features, std::span<const int> labels,
                                        std::size_t task) const {
  require_same_size(features.rows(), labels.size(), "count_correct");
  if (labels.empty()) return 0;
  const Matrix logits = forward(features, task);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    const auto pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (pred == labels[i]) ++correct;
  }
  return correct;
}

GradVector finite_diff_grad(const MultiHeadNet& net, const TaskBatch& batch, double h) {
  if (!(h > 0.0)) throw DomainError("finite_diff_grad: step size must be positive");
  MultiHeadNet probe = net;
  auto theta = probe.params();
  GradVector grad(theta.size(), 0.0);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + h;
    const double up = probe.loss(batch);
    theta[i] = saved - h;
    const double down = probe.loss(batch);
    theta[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

LossAndGrad mixed_loss_and_grad(const MultiHeadNet& net, std::span<const TaskBatch> batches,
                                Rng* dropout_rng) {
  std::size_t total = 0;
  for (const auto& b : batches) total += b.size();
  if (total == 0) throw ShapeError("mixed_loss_and_grad: empty input");
  LossAndGrad out;
  out.grad.assign(net.param_count(), 0.0);
  for (const auto& b : batches) {
    if (b.size() == 0) continue;
    const double w = static_cast<double>(b.size()) / static_cast<double>(total);
    const auto part = net.loss_and_grad(b, dropout_rng);
    out.loss += w * part.loss;
    kernels::axpy(out.grad, w, part.grad);
  }
  return out;
}

}  // namespace tagopt
