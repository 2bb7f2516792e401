#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cmtssl/rng.hpp"
#include "cmtssl/tensor.hpp"

namespace cmtssl::nn {

// A trainable tensor plus its AdamW state. Moments and the step counter are
// per parameter so that parameters outside a step's graph keep their state
// (and value) bit-identical.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor m, v;
  std::int64_t steps = 0;
};

class ParamStore {
 public:
  int add(std::string name, std::vector<int> shape);
  Parameter& at(int id) { return params_[static_cast<std::size_t>(id)]; }
  const Parameter& at(int id) const { return params_[static_cast<std::size_t>(id)]; }
  int count() const { return static_cast<int>(params_.size()); }
  int find(const std::string& name) const;  // -1 when absent
  std::size_t total_elements() const;

 private:
  std::vector<Parameter> params_;
};

// Per-step gradient accumulator aligned with a ParamStore. Parameters that
// never appear in the step's graph stay untouched.
struct GradBuffer {
  std::vector<Tensor> grads;
  std::vector<char> touched;

  void resize_for(const ParamStore& store);
  void accumulate(int id, const Tensor& g);
  void add_scaled(const GradBuffer& other, double scale);
  void scale(double s);
  void reset();
  double l2_norm() const;
  double l2_norm_over(const std::vector<int>& param_ids) const;
};

// Decoupled-weight-decay Adam. Only parameters marked touched in the buffer
// are stepped; weight decay is likewise applied only to touched parameters so
// that heads outside the active task set remain bit-identical.
class AdamW {
 public:
  struct Config {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  explicit AdamW(Config cfg) : cfg_(cfg) {}
  void step(ParamStore& store, const GradBuffer& grads);
  const Config& config() const { return cfg_; }

 private:
  Config cfg_;
};

// Reverse-mode tape over small dense tensors. Activations are {C,H,W}; a
// forward pass appends nodes in topological order and backward() walks them
// in reverse. One backward per tape.
class Tape {
 public:
  struct Var {
    int id = -1;
  };

  explicit Tape(const ParamStore& store) : store_(&store) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(Tensor value);          // constant leaf
  Var param(int param_id);          // trainable leaf bound to the store

  Var conv2d(Var x, Var w, Var b);  // same zero padding, stride 1
  Var relu(Var x);
  Var maxpool2(Var x);
  Var upsample2(Var x);
  Var concat_c(Var a, Var b);
  Var gap(Var x);                   // {C,H,W} -> {C}
  Var linear(Var x, Var w, Var b);  // {n} x {m,n} + {m} -> {m}

  Var bce_with_logits(Var logits, std::vector<double> targets);
  Var masked_mae(Var prediction, Tensor original_chw, Tensor mask_chw);
  Var softmax_xent_pixels(Var logits, std::vector<int> labels, int ignore_id);
  Var weighted_sum(const std::vector<std::pair<Var, double>>& terms);

  const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  double scalar(Var v) const { return value(v)[0]; }

  void backward(Var loss);
  void export_grads(GradBuffer& buffer) const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    bool needs_grad = false;
    int param_id = -1;
    std::function<void(Tape&)> back;
  };

  int push(Node node);
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  Tensor& grad_of(int id);
  bool wants_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }

  const ParamStore* store_;
  std::vector<Node> nodes_;
  bool ran_backward_ = false;
  int find_self_ = -1;  // id of the node whose backward fn is running
};

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization used for all weights and
// biases.
void init_fan_in_uniform(Tensor& t, int fan_in, Rng& rng);

}  // namespace cmtssl::nn
