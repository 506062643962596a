#include "smg/nn.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace smg {

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::kIdentity:
      return z;
    case Activation::kTanh:
      return z.array().tanh().matrix();
    case Activation::kElu:
      return z.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
  }
  return z;
}

Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::kIdentity:
      return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    case Activation::kTanh:
      return (1.0 - z.array().tanh().square()).matrix();
    case Activation::kElu:
      return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
  }
  return z;
}

constexpr char kMagic[8] = {'S', 'M', 'G', 'M', 'L', 'P', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int k = 0; k < 8; ++k) buf[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) {
    throw std::runtime_error("checkpoint truncated");
  }
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(buf[k]) << (8 * k);
  return v;
}

void write_f64(std::ostream& out, double d) {
  write_u64(out, std::bit_cast<std::uint64_t>(d));
}

double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

}  // namespace

std::vector<double> MlpGradients::flatten() const {
  std::vector<double> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (int r = 0; r < weights[l].rows(); ++r)
      for (int c = 0; c < weights[l].cols(); ++c) out.push_back(weights[l](r, c));
    for (int r = 0; r < bias[l].size(); ++r) out.push_back(bias[l](r));
  }
  return out;
}

Mlp::Mlp(std::vector<int> sizes, std::vector<Activation> activations)
    : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2 || activations.size() != sizes_.size() - 1) {
    throw std::invalid_argument("Mlp: inconsistent layer description");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) {
      throw std::invalid_argument("Mlp: layer sizes must be positive");
    }
    layers_.push_back(DenseLayer{Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]),
                                 Eigen::VectorXd::Zero(sizes_[l + 1]),
                                 activations[l]});
  }
}

Mlp::Mlp(std::vector<int> sizes, Activation hidden, Rng& rng)
    : Mlp(sizes, [&] {
        std::vector<Activation> acts(sizes.size() - 1, hidden);
        acts.back() = Activation::kIdentity;
        return acts;
      }()) {
  for (auto& layer : layers_) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (int r = 0; r < layer.weights.rows(); ++r)
      for (int c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = dist(rng);
  }
}

int Mlp::input_size() const { return sizes_.front(); }
int Mlp::output_size() const { return sizes_.back(); }

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
  if (input.size() != input_size()) {
    throw std::invalid_argument("Mlp::forward: input size mismatch");
  }
  Eigen::VectorXd a = input;
  for (const auto& layer : layers_) {
    Eigen::MatrixXd z = layer.weights * a + layer.bias;
    a = activate(z, layer.activation);
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& batch,
                             ForwardCache* cache) const {
  if (batch.rows() != input_size()) {
    throw std::invalid_argument("Mlp::forward: input size mismatch");
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Eigen::MatrixXd a = batch;
  for (const auto& layer : layers_) {
    Eigen::MatrixXd z = layer.weights * a;
    z.colwise() += layer.bias;
    if (cache) {
      cache->inputs.push_back(a);
      cache->pre.push_back(z);
    }
    a = activate(z, layer.activation);
  }
  return a;
}

MlpGradients Mlp::backward(const ForwardCache& cache,
                           const Eigen::MatrixXd& upstream) const {
  if (cache.pre.size() != layers_.size() ||
      upstream.rows() != output_size() ||
      upstream.cols() != cache.pre.back().cols()) {
    throw std::invalid_argument("Mlp::backward: shape mismatch");
  }
  MlpGradients g;
  g.weights.resize(layers_.size());
  g.bias.resize(layers_.size());
  Eigen::MatrixXd delta = upstream;
  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    delta = (delta.array() *
             activation_grad(cache.pre[l], layers_[l].activation).array())
                .matrix();
    g.weights[l] = delta * cache.inputs[l].transpose();
    g.bias[l] = delta.rowwise().sum();
    if (l > 0) delta = layers_[l].weights.transpose() * delta;
  }
  return g;
}

std::size_t Mlp::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> out;
  out.reserve(num_parameters());
  for (const auto& l : layers_) {
    for (int r = 0; r < l.weights.rows(); ++r)
      for (int c = 0; c < l.weights.cols(); ++c) out.push_back(l.weights(r, c));
    for (int r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
  }
  return out;
}

void Mlp::assign(std::span<const double> params) {
  if (params.size() != num_parameters()) {
    throw std::invalid_argument("Mlp::assign: parameter count mismatch");
  }
  std::size_t k = 0;
  for (auto& l : layers_) {
    for (int r = 0; r < l.weights.rows(); ++r)
      for (int c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = params[k++];
    for (int r = 0; r < l.bias.size(); ++r) l.bias(r) = params[k++];
  }
}

bool Mlp::operator==(const Mlp& other) const {
  if (sizes_ != other.sizes_) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].activation != other.layers_[l].activation) return false;
  }
  const auto a = flatten();
  const auto b = other.flatten();
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Adam::Adam(const Mlp& net, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& l : net.layers()) {
    m_.weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    m_.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  v_ = m_;
}

void Adam::step(Mlp& net, const MlpGradients& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto& layers = net.layers();
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights, grads.weights[l], m_.weights[l], v_.weights[l]);
    update(layers[l].bias, grads.bias[l], m_.bias[l], v_.bias[l]);
  }
}

void save_checkpoint(const Mlp& net, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  write_u64(out, net.layers().size());
  for (int s : net.sizes()) write_u64(out, static_cast<std::uint64_t>(s));
  for (const auto& l : net.layers()) {
    write_u64(out, static_cast<std::uint64_t>(l.activation));
  }
  for (double p : net.flatten()) write_f64(out, p);
}

Mlp load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  const auto n_layers = read_u64(in);
  if (n_layers == 0 || n_layers > 64) {
    throw std::runtime_error("checkpoint: bad layer count");
  }
  std::vector<int> sizes(n_layers + 1);
  for (auto& s : sizes) s = static_cast<int>(read_u64(in));
  std::vector<Activation> acts(n_layers);
  for (auto& a : acts) {
    const auto code = read_u64(in);
    if (code > 2) throw std::runtime_error("checkpoint: bad activation");
    a = static_cast<Activation>(code);
  }
  Mlp net(sizes, acts);
  std::vector<double> params(net.num_parameters());
  for (auto& p : params) p = read_f64(in);
  net.assign(params);
  return net;
}

}  // namespace smg
