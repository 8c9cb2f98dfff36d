#include "mmvdn/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace mmvdn {

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one extent");
  std::size_t n = 1;
  for (int e : shape) {
    if (e < 1) throw std::invalid_argument("tensor extent must be >= 1, got shape " + shape_str(shape));
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                                shape_str(shape_));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw std::invalid_argument("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

Parameter& ParameterSet::add(std::string name, Tensor value) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter '" + name + "'");
  items_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
  return *items_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : items_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : items_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

Parameter& ParameterSet::get(const std::string& name) {
  if (Parameter* p = find(name)) return *p;
  throw std::out_of_range("no parameter named '" + name + "'");
}

const Parameter& ParameterSet::get(const std::string& name) const {
  if (const Parameter* p = find(name)) return *p;
  throw std::out_of_range("no parameter named '" + name + "'");
}

void ParameterSet::remove(const std::string& name) {
  std::erase_if(items_, [&](const auto& p) { return p->name == name; });
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) p->zero_grad();
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (const auto& p : items_) {
    Parameter& q = out.add(p->name, p->value);
    q.grad = p->grad;
    q.frozen = p->frozen;
  }
  return out;
}

const Tensor& Var::value() const { return tape_->value(id_); }
const Shape& Var::shape() const { return tape_->value(id_).shape(); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, nullptr, {}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(Parameter& p) {
  if (p.frozen) return constant(p.value);
  nodes_.push_back(Node{p.value, {}, true, &p, {}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (&v.tape() != this) throw std::invalid_argument("operation mixes values from different tapes");
    needs = needs || requires_grad(v.id());
  }
  nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(fn) : BackwardFn{}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor& Tape::grad_accumulator(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id())];
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw std::invalid_argument("backward: loss was recorded on a different tape");
  if (consumed_) throw std::logic_error("backward: tape already consumed; build a new tape per step");
  const Tensor& lv = value(loss.id());
  if (lv.size() != 1) throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(lv.shape()));
  consumed_ = true;
  if (!requires_grad(loss.id())) return;

  grad_accumulator(loss.id())[0] = 1.f;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
  for (Node& n : nodes_) {
    if (n.sink == nullptr || n.grad.empty()) continue;
    float* dst = n.sink->grad.ptr();
    const float* src = n.grad.ptr();
    for (std::size_t i = 0; i < n.grad.size(); ++i) dst[i] += src[i];
  }
}

}  // namespace mmvdn
