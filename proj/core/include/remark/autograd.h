#ifndef REMARK_AUTOGRAD_H_
#define REMARK_AUTOGRAD_H_

// Minimal tape-based reverse-mode differentiation over dense row-major
// matrices. Ops are free functions taking a nullable Tape*; passing nullptr
// runs in inference mode and records nothing.
//
// Instantiated for float (training, inference) and double (gradient checks).

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace remark::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

template <typename T>
struct Node {
  Matrix<T> value;
  Matrix<T> grad;
  bool requires_grad = false;

  Matrix<T>& grad_buffer() {
    if (grad.size() == 0) grad = Matrix<T>::Zero(value.rows(), value.cols());
    return grad;
  }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  bool defined() const { return node_ != nullptr; }
  const Matrix<T>& value() const { return node_->value; }
  Matrix<T>& mutable_value() { return node_->value; }
  const Matrix<T>& grad() const { return node_->grad; }
  Matrix<T>& grad_buffer() const { return node_->grad_buffer(); }
  void zero_grad() const { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  T scalar() const { return node_->value(0, 0); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
class Tape {
 public:
  void push(std::function<void()> backward) {
    ops_.push_back(std::move(backward));
  }
  // Seeds d(loss)/d(loss) = 1 and replays the recorded ops in reverse.
  void backward(const Tensor<T>& loss);
  void clear() { ops_.clear(); }
  std::size_t size() const { return ops_.size(); }

 private:
  std::vector<std::function<void()>> ops_;
};

// Contiguous row range belonging to one sequence of a packed batch.
struct Segment {
  Index offset = 0;
  Index length = 0;
};
using Segments = std::vector<Segment>;

Segments make_segments(const std::vector<Index>& lengths);
Index total_rows(const Segments& segments);

// y = x W (+ b). W is in_features x out_features; b is 1 x out_features.
template <typename T>
Tensor<T> linear(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w,
                 const Tensor<T>& b);

// y = x W^T.
template <typename T>
Tensor<T> matmul_transposed(Tape<T>* tape, const Tensor<T>& x,
                            const Tensor<T>& w);

// Rows of `table` selected by `ids`.
template <typename T>
Tensor<T> embedding(Tape<T>* tape, const Tensor<T>& table,
                    const std::vector<std::int32_t>& ids);

// Adds row `positions[i]` of `table` to row i of x.
template <typename T>
Tensor<T> add_position(Tape<T>* tape, const Tensor<T>& x,
                       const Tensor<T>& table,
                       const std::vector<std::int32_t>& positions);

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(Tape<T>* tape, const Tensor<T>& x, T factor);

// Adds row s of `v` to every row of segment s of `x`.
template <typename T>
Tensor<T> add_segment_rows(Tape<T>* tape, const Tensor<T>& x,
                           const Segments& segments, const Tensor<T>& v);

template <typename T>
Tensor<T> layer_norm(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias);

// tanh approximation.
template <typename T>
Tensor<T> gelu(Tape<T>* tape, const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid(Tape<T>* tape, const Tensor<T>& x);

// Multi-head scaled dot-product attention without masking; queries in
// segment s attend only to keys in kv_segments[s]. q, k, v are already
// projected (width = heads * head_dim).
template <typename T>
Tensor<T> attention(Tape<T>* tape, const Tensor<T>& q, const Tensor<T>& k,
                    const Tensor<T>& v, int heads, const Segments& q_segments,
                    const Segments& kv_segments);

template <typename T>
Tensor<T> log_softmax_rows(Tape<T>* tape, const Tensor<T>& x);

// softmax((max(logp, log_floor) + noise) / tau), row-wise.
template <typename T>
Tensor<T> gumbel_softmax(Tape<T>* tape, const Tensor<T>& log_probs,
                         const Matrix<T>& noise, T tau, T log_floor);

// Row i of the output is x.row(sources[i]) when sources[i] >= 0, otherwise
// the one-hot row for column onehot[i]. Used by the length-changing
// distribution transforms.
template <typename T>
Tensor<T> select_rows(Tape<T>* tape, const Tensor<T>& x,
                      const std::vector<Index>& sources,
                      const std::vector<std::int32_t>& onehot);

// Mean over rows of each segment; one output row per segment.
template <typename T>
Tensor<T> mean_pool(Tape<T>* tape, const Tensor<T>& x,
                    const Segments& segments);

// Mean over segments of the per-segment mean of -logp[r, targets[r]].
template <typename T>
Tensor<T> sequence_nll(Tape<T>* tape, const Tensor<T>& log_probs,
                       const std::vector<std::int32_t>& targets,
                       const Segments& segments);

// Mean over rows of sum_j |targets(r, j) - x(r, j)|.
template <typename T>
Tensor<T> l1_rows(Tape<T>* tape, const Tensor<T>& x, const Matrix<T>& targets);

// sum_i weights[i] * terms[i] for 1x1 terms.
template <typename T>
Tensor<T> weighted_sum(Tape<T>* tape, const std::vector<Tensor<T>>& terms,
                       const std::vector<T>& weights);

}  // namespace remark::nn

#endif  // REMARK_AUTOGRAD_H_
