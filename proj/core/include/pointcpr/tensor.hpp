#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pointcpr {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct Node;
}

/// Gradient buffers handed to a custom op's backward rule. `input_grads[i]`
/// is empty when input i does not require a gradient.
struct BackwardContext {
  std::span<const double> out_data;
  std::span<const double> out_grad;
  std::span<const std::span<double>> input_grads;

  bool needs(std::size_t i) const { return !input_grads[i].empty(); }
};

using BackwardFn = std::function<void(const BackwardContext&)>;

/// Dense row-major float64 tensor with optional reverse-mode gradient.
///
/// A Tensor is a cheap handle; copies alias the same buffer. Leaves are
/// created by the constructors; non-leaves come out of ops. When a
/// GradTape is active on the current thread and any input requires a
/// gradient, ops record a node on that tape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Mutating a tensor that already feeds a recorded graph invalidates that graph.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  /// Only leaves may toggle gradient tracking.
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  std::uint64_t node_id() const;
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  /// Fresh leaf holding a copy of the values; never requires grad.
  Tensor detach() const;

  /// Builds an op result. When recording, `backward` receives the output
  /// gradient and must accumulate (+=) into the provided input gradients.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> inputs, BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const detail::Node& node() const;
  detail::Node& node();

  std::shared_ptr<detail::Node> node_;

  friend class GradTape;
};

/// Explicit reverse-mode tape. Constructing a GradTape makes it the
/// active recorder for the current thread until it is destroyed
/// (tapes nest as a stack). Ops executed with no active tape record
/// nothing and are therefore cheap inference calls.
class GradTape {
 public:
  GradTape();
  ~GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  static GradTape* active();

  /// Seeds d(root)/d(root) = 1 and propagates in reverse recording order.
  /// The recorded graph is released afterwards; a tape supports one backward.
  void backward(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  std::uint64_t id() const { return id_; }

 private:
  friend class Tensor;
  void record(std::shared_ptr<detail::Node> node);
  void release();

  std::vector<std::shared_ptr<detail::Node>> nodes_;
  GradTape* previous_ = nullptr;
  std::uint64_t id_;
  bool consumed_ = false;
};

}  // namespace pointcpr
