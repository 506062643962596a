// Small dense networks for the DQN and PPO learners.
#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "smg/core.h"

namespace smg {

enum class Activation { kIdentity, kElu, kTanh };

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::kIdentity;
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;

  std::vector<double> flatten() const;
};

// Per-layer values kept from a batched forward pass for backpropagation.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;  // input of each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
};

/// Fully connected network. Samples are stored column-wise in batches.
class Mlp {
 public:
  Mlp() = default;
  // Zero-initialised network; `activations` has one entry per layer.
  Mlp(std::vector<int> sizes, std::vector<Activation> activations);
  // Glorot-uniform weights, zero biases; identity output layer.
  Mlp(std::vector<int> sizes, Activation hidden, Rng& rng);

  int input_size() const;
  int output_size() const;
  const std::vector<int>& sizes() const { return sizes_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  // Throws std::invalid_argument on dimension mismatch.
  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& batch, ForwardCache* cache) const;

  // Parameter gradients of sum_samples <upstream, output>, given the cache of
  // the forward pass that produced the output.
  MlpGradients backward(const ForwardCache& cache,
                        const Eigen::MatrixXd& upstream) const;

  std::size_t num_parameters() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> params);

  bool operator==(const Mlp& other) const;

 private:
  std::vector<int> sizes_;
  std::vector<DenseLayer> layers_;
};

/// Adaptive moment estimation (Adam) for one network.
class Adam {
 public:
  Adam(const Mlp& net, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step(Mlp& net, const MlpGradients& grads);
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  MlpGradients m_, v_;
};

// Flat little-endian layout: "SMGMLP01", u64 layer count, u64 sizes,
// u64 activation codes, then weights (row-major) and biases per layer.
void save_checkpoint(const Mlp& net, std::ostream& out);
Mlp load_checkpoint(std::istream& in);

}  // namespace smg
