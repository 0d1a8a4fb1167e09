#include "pointcpr/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

#include "pointcpr/errors.hpp"

namespace pointcpr {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::uint64_t id = 0;
  std::uint64_t tape_id = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};

}  // namespace detail

namespace {

std::atomic<std::uint64_t> g_next_node_id{1};
std::atomic<std::uint64_t> g_next_tape_id{1};
thread_local GradTape* t_active_tape = nullptr;

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<double> values) {
  for (std::size_t extent : shape) {
    if (extent == 0) {
      throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
    }
  }
  if (values.size() != shape_numel(shape)) {
    throw DimensionError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_to_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->id = g_next_node_id.fetch_add(1, std::memory_order_relaxed);
  return node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape) {
  const std::size_t n = shape_numel(shape);
  node_ = new_node(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : node_(new_node(std::move(shape), std::move(values))) {}

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

const detail::Node& Tensor::node() const {
  if (!node_) throw GraphError("use of an undefined tensor");
  return *node_;
}

detail::Node& Tensor::node() {
  if (!node_) throw GraphError("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return node().data.size(); }

std::span<const double> Tensor::data() const { return node().data; }

std::span<double> Tensor::mutable_data() { return node().data; }

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() requires a single-element tensor, got " +
                         shape_to_string(shape()));
  }
  return node().data[0];
}

bool Tensor::requires_grad() const { return node().requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!node().leaf) throw GraphError("requires_grad can only be toggled on leaf tensors");
  node().requires_grad = on;
  return *this;
}

bool Tensor::is_leaf() const { return node().leaf; }

bool Tensor::has_grad() const { return !node().grad.empty(); }

std::span<const double> Tensor::grad() const { return node().grad; }

std::span<double> Tensor::mutable_grad() {
  auto& n = node();
  if (n.grad.empty()) n.grad.assign(n.data.size(), 0.0);
  return n.grad;
}

void Tensor::zero_grad() {
  auto& n = node();
  std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

std::uint64_t Tensor::node_id() const { return node().id; }

Tensor Tensor::detach() const { return Tensor(shape(), node().data); }

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                           BackwardFn backward) {
  auto node = new_node(std::move(shape), std::move(values));
  node->leaf = false;

  GradTape* tape = t_active_tape;
  if (tape == nullptr) return Tensor(std::move(node));

  bool any_grad = false;
  for (const Tensor& in : inputs) {
    const auto& n = in.node();
    if (n.tape_id != 0 && n.tape_id != tape->id()) {
      throw GraphError("tensor " + std::to_string(n.id) +
                       " belongs to a different computation graph");
    }
    any_grad = any_grad || n.requires_grad;
  }
  if (!any_grad) return Tensor(std::move(node));

  node->requires_grad = true;
  node->tape_id = tape->id();
  node->inputs.reserve(inputs.size());
  for (Tensor& in : inputs) node->inputs.push_back(std::move(in.node_));
  node->backward = std::move(backward);
  tape->record(node);
  return Tensor(std::move(node));
}

GradTape::GradTape() : previous_(t_active_tape), id_(g_next_tape_id.fetch_add(1)) {
  t_active_tape = this;
}

GradTape::~GradTape() {
  release();
  t_active_tape = previous_;
}

GradTape* GradTape::active() { return t_active_tape; }

void GradTape::record(std::shared_ptr<detail::Node> node) { nodes_.push_back(std::move(node)); }

void GradTape::backward(const Tensor& root) {
  if (consumed_) throw GraphError("backward already ran on this tape");
  if (!root.defined()) throw GraphError("backward on an undefined tensor");
  detail::Node& r = *root.node_;
  if (r.data.size() != 1) {
    throw DimensionError("backward root must be a scalar, got " + shape_to_string(r.shape));
  }
  consumed_ = true;
  if (!r.requires_grad) {
    release();
    return;
  }
  if (r.grad.empty()) r.grad.assign(1, 0.0);
  r.grad[0] += 1.0;
  if (r.tape_id != id_) {
    if (r.leaf) {
      release();
      return;
    }
    throw GraphError("backward root was not recorded on this tape");
  }

  std::vector<std::span<double>> grads;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    detail::Node& n = **it;
    if (n.grad.empty() || !n.backward) continue;
    grads.assign(n.inputs.size(), std::span<double>{});
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      detail::Node& in = *n.inputs[i];
      if (!in.requires_grad) continue;
      if (in.grad.empty()) in.grad.assign(in.data.size(), 0.0);
      grads[i] = in.grad;
    }
    n.backward(BackwardContext{n.data, n.grad, grads});
  }
  release();
}

void GradTape::release() {
  for (auto& n : nodes_) {
    n->inputs.clear();
    n->backward = nullptr;
  }
  nodes_.clear();
}

}  // namespace pointcpr
