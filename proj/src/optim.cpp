#include "fscil/optim.hpp"

namespace fscil {

void SgdOptimizer::step(const std::vector<Parameter*>& params, double lr_fast, double lr_slow,
                        double momentum) {
  if (lr_fast < 0.0 || lr_slow < 0.0) throw ConfigError("sgd: negative learning rate");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("sgd: momentum must be in [0,1)");
  for (Parameter* p : params) {
    if (p->group == ParamGroup::frozen) continue;
    double lr = p->group == ParamGroup::fast ? lr_fast : lr_slow;
    auto [it, inserted] = velocity_.try_emplace(p, Tensor(std::vector<std::size_t>(p->value.shape())));
    Tensor& v = it->second;
    if (!v.same_shape(p->value)) throw ContractViolation("sgd: parameter shape changed between steps");
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = momentum * v[i] + p->grad[i];
      p->value[i] -= lr * v[i];
    }
    p->zero_grad();
  }
}

}  // namespace fscil
