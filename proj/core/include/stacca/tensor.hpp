#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace stacca::ad {

// Dense double tensors (rank 1..3, row-major) recorded on a per-forward-pass
// tape for reverse-mode differentiation. Tensors are cheap value types: a
// shared buffer, a shape, and the tape node that produced them (-1 for
// constants). Every op validates shapes and rejects non-finite results.

class Tape;

class Tensor {
 public:
  Tensor() = default;

  bool defined() const { return data_ != nullptr; }
  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int numel() const;
  const std::vector<double>& data() const& { return *data_; }
  std::vector<double> data() && { return *data_; }  // keeps temporaries safe
  double scalar() const;
  int node() const { return node_; }

 private:
  friend class Tape;
  Tensor(std::shared_ptr<std::vector<double>> data, std::vector<int> shape, int node)
      : data_(std::move(data)), shape_(std::move(shape)), node_(node) {}

  std::shared_ptr<std::vector<double>> data_;
  std::vector<int> shape_;
  int node_ = -1;
};

/// A trainable parameter: value plus gradient and Adam moment accumulators.
/// Parameters live outside any tape and are watched into each forward pass.
struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<double> m, v;  // Adam first/second moments

  Parameter() = default;
  Parameter(std::string name, std::vector<int> shape);
  int numel() const { return static_cast<int>(value.size()); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update from p.grad; t is the 1-based step count.
void adam_step(Parameter& p, const AdamConfig& cfg, long t);

class Tape {
 public:
  /// recording=false skips node bookkeeping for gradient-free forwards.
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  // ---- tensor creation ----
  Tensor constant(std::vector<int> shape, std::vector<double> data);
  Tensor zeros(std::vector<int> shape);
  Tensor full(std::vector<int> shape, double value);
  Tensor scalar_const(double value) { return constant({1}, {value}); }
  /// Registers p on this tape (memoized); gradients flow back into p.grad.
  Tensor watch(Parameter& p);

  // ---- linear algebra ----
  Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false,
                bool trans_b = false);
  /// Batched matmul over the leading dimension of two rank-3 tensors.
  Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a = false,
             bool trans_b = false);

  // ---- elementwise (equal shape, or lower-rank operand broadcast over
  //      leading dims, or single-element operand) ----
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor minimum(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double c);
  Tensor add_scalar(const Tensor& a, double c);
  Tensor exp(const Tensor& a);
  Tensor log(const Tensor& a);
  Tensor tanh(const Tensor& a);
  Tensor leaky_relu(const Tensor& a, double slope = 0.2);
  Tensor elu(const Tensor& a);
  Tensor clip(const Tensor& a, double lo, double hi);
  Tensor huber(const Tensor& a, double delta);

  // ---- rows = last axis ----
  /// Row softmax over unmasked entries; masked entries get exactly 0. The
  /// mask is a constant 0/1 tensor whose shape matches a trailing slice of x.
  Tensor softmax_rows(const Tensor& x, const Tensor* mask = nullptr);
  Tensor log_softmax_rows(const Tensor& x);
  /// Per-row standardization (x - mean) / sqrt(pop_var + eps).
  Tensor standardize_rows(const Tensor& x, double eps);
  /// out[b,i,j] = u[b,i] + v[b,j] for rank-2 inputs B x n.
  Tensor pairwise_sum(const Tensor& u, const Tensor& v);

  // ---- reductions / indexing / shape ----
  Tensor sum_axis(const Tensor& x, int axis);   // rank 2
  Tensor mean_axis(const Tensor& x, int axis);  // rank 2
  Tensor max_axis(const Tensor& x, int axis);   // rank 2, grad to first argmax
  Tensor sum_all(const Tensor& x);
  Tensor mean_all(const Tensor& x);
  Tensor gather_rows(const Tensor& x, std::vector<int> indices);  // rank 2
  Tensor concat(const std::vector<Tensor>& parts, int axis);
  Tensor reshape(const Tensor& x, std::vector<int> shape);

  /// Reverse sweep from a scalar loss. Gradients of watched parameters are
  /// accumulated into Parameter::grad; others stay queryable via grad_of.
  void backward(const Tensor& loss);
  /// Gradient of the last backward() w.r.t. t (zeros if unreachable).
  std::vector<double> grad_of(const Tensor& t) const;

 private:
  struct Node {
    std::function<void(Tape&)> backward_fn;  // empty for leaves
    int numel = 0;
  };

  int push_node(int numel, std::function<void(Tape&)> fn);
  Tensor make(std::vector<int> shape, std::shared_ptr<std::vector<double>> data,
              std::function<void(Tape&)> fn, const char* op);
  void check_finite(const std::vector<double>& data, const char* op) const;
  double* grad_buffer(int node, int numel);
  const std::vector<double>* grad_read(int node) const;

  Tensor binary_op(const Tensor& a, const Tensor& b, const char* op,
                   double (*fwd)(double, double),
                   void (*bwd)(double a, double b, double g, double& da, double& db));

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  std::unordered_map<const Parameter*, int> watch_ids_;
  std::vector<std::pair<Parameter*, int>> watched_;
  bool recording_;
  bool ran_backward_ = false;
};

}  // namespace stacca::ad
