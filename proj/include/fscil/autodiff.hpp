#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fscil/tensor.hpp"

namespace fscil {

// Learning-rate group of a parameter. Composed heads train their all-class
// bank fast while the extractor and ensemble scalars move slowly; the base
// head is frozen after the base session.
enum class ParamGroup { fast, slow, frozen };

// Named trainable tensor. Gradients are accumulated here by Tape::backward
// and consumed/cleared by the optimizer.
struct Parameter {
  std::string id;
  Tensor value;
  Tensor grad;
  ParamGroup group = ParamGroup::slow;

  Parameter(std::string id_in, Tensor value_in, ParamGroup group_in = ParamGroup::slow)
      : id(std::move(id_in)),
        value(std::move(value_in)),
        grad(Tensor(std::vector<std::size_t>(value.shape()))),
        group(group_in) {}

  void zero_grad() {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = 0.0;
  }
};

using VarId = int;

// Reverse-mode tape over dense tensors. Ops record their inputs and a
// backward closure; backward() sweeps nodes in reverse creation order, which
// is a valid topological order by construction. One tape per training step.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  VarId constant(Tensor value);
  VarId leaf(Parameter& p);  // same parameter twice yields the same node

  // Elementwise and scalar ops.
  VarId add(VarId a, VarId b);
  VarId sub(VarId a, VarId b);
  VarId mul(VarId a, VarId b);
  VarId div(VarId a, VarId b);
  VarId add_bias(VarId m, VarId bias);  // [r,c] + [c], broadcast over rows
  VarId scale(VarId a, double c);
  VarId smul(VarId s, VarId a);  // scalar variable times tensor
  VarId relu(VarId a);
  VarId exp(VarId a);
  VarId log(VarId a);   // inputs must be positive
  VarId sqrt(VarId a);  // gradient defined as 0 at 0
  VarId softplus(VarId a);

  // Linear algebra and structure.
  VarId matmul(VarId a, VarId b);                          // [m,k]x[k,n]
  VarId conv2d(VarId x, VarId w, VarId bias);              // 3x3, stride 1, same padding
  VarId meanpool2(VarId x);                                // 2x2 average pool
  VarId l2_normalize_rows(VarId a);                        // unit rows
  VarId l2_normalize_cols(VarId a);                        // unit columns
  VarId softmax_rows(VarId a);
  VarId sum(VarId a);
  VarId mean(VarId a);
  VarId sqnorm_rows(VarId a);                              // [m,n] -> [m]; 1-D -> scalar
  VarId take_cols(VarId a, std::size_t c0, std::size_t c1);  // columns [c0,c1)
  VarId concat_cols(const std::vector<VarId>& parts);
  VarId reshape(VarId a, std::vector<std::size_t> shape);

  const Tensor& val(VarId id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  const Tensor& grad_of(VarId id) const { return nodes_.at(static_cast<std::size_t>(id)).grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1, sweeps the tape in reverse creation order and
  // accumulates leaf gradients into their Parameters (frozen leaves excluded).
  void backward(VarId loss);

 private:
  struct Node;
  using BackFn = std::function<void(Tape&, Node&)>;

  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<VarId> parents;
    BackFn back;
    Parameter* param = nullptr;
  };

  Node& node(VarId id) { return nodes_[static_cast<std::size_t>(id)]; }
  VarId push(Tensor value, std::vector<VarId> parents, BackFn back, Parameter* param = nullptr);

  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, VarId> leaves_;
};

// Central finite differences of a scalar-valued function of one parameter's
// entries. Used as the ground-truth oracle for gradient tests.
Tensor finite_diff_grad(const std::function<double()>& f, Parameter& p, double h = 1e-6);

// Stable softplus and its inverse (used for the nonnegative ensemble scalars).
double softplus_value(double x);
double inv_softplus(double y);  // y > 0

}  // namespace fscil
