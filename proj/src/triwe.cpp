#include "fscil/triwe.hpp"

namespace fscil {

AlphaBarValues normalize_alphas(double alpha1, double alpha2) {
  if (alpha1 < 0.0 || alpha2 < 0.0) {
    throw ContractViolation("normalize_alphas: scalars must be nonnegative");
  }
  double d3 = alpha1 + alpha2 + 1.0;
  double d2 = alpha2 + 1.0;
  return {alpha1 / d3, alpha2 / d3, 1.0 / d3, alpha2 / d2, 1.0 / d2};
}

AlphaBars normalize_alphas(Tape& tape, VarId alpha1, VarId alpha2) {
  if (tape.val(alpha1).size() != 1 || tape.val(alpha2).size() != 1) {
    throw ContractViolation("normalize_alphas: scalars must have size 1");
  }
  if (tape.val(alpha1)[0] < 0.0 || tape.val(alpha2)[0] < 0.0) {
    throw ContractViolation("normalize_alphas: scalars must be nonnegative");
  }
  VarId one = tape.constant(Tensor::scalar(1.0));
  VarId d3 = tape.add(tape.add(alpha1, alpha2), one);
  VarId d2 = tape.add(alpha2, one);
  return {tape.div(alpha1, d3), tape.div(alpha2, d3), tape.div(one, d3), tape.div(alpha2, d2),
          tape.div(one, d2)};
}

namespace {

Parameter make_alpha_param(const char* id, const AlphaSpec& spec) {
  if (!(spec.value > 0.0)) {
    throw ConfigError("tri-we: learnable alpha init must be positive");
  }
  return Parameter(id, Tensor::scalar(inv_softplus(spec.value)), ParamGroup::slow);
}

}  // namespace

TriWeHead::TriWeHead(Tensor base_bank, Tensor old_bank, Tensor all_bank, AlphaSpec a1,
                     AlphaSpec a2)
    : base_bank_("head.base", std::move(base_bank), ParamGroup::frozen),
      old_bank_("head.old", std::move(old_bank), ParamGroup::slow),
      all_bank_("head.all", std::move(all_bank), ParamGroup::fast) {
  const Tensor& b = base_bank_.value;
  const Tensor& o = old_bank_.value;
  const Tensor& a = all_bank_.value;
  if (b.ndim() != 2 || o.ndim() != 2 || a.ndim() != 2) {
    throw ConfigError("tri-we: banks must be 2-D [d, classes]");
  }
  if (o.dim(0) != b.dim(0) || a.dim(0) != b.dim(0)) {
    throw ConfigError("tri-we: banks disagree on feature dim");
  }
  if (o.dim(1) < b.dim(1) || a.dim(1) < o.dim(1)) {
    throw ConfigError("tri-we: class counts must satisfy n_base <= n_prev <= n_total");
  }
  if (a1.learnable) {
    a1_raw_ = make_alpha_param("head.alpha1_raw", a1);
  } else {
    if (a1.value < 0.0) throw ConfigError("tri-we: fixed alpha must be nonnegative");
    a1_fixed_ = a1.value;
  }
  if (a2.learnable) {
    a2_raw_ = make_alpha_param("head.alpha2_raw", a2);
  } else {
    if (a2.value < 0.0) throw ConfigError("tri-we: fixed alpha must be nonnegative");
    a2_fixed_ = a2.value;
  }
}

std::vector<Parameter*> TriWeHead::params() {
  std::vector<Parameter*> out{&base_bank_, &old_bank_, &all_bank_};
  if (a1_raw_) out.push_back(&*a1_raw_);
  if (a2_raw_) out.push_back(&*a2_raw_);
  return out;
}

double TriWeHead::alpha1_value() const {
  return a1_raw_ ? softplus_value(a1_raw_->value[0]) : a1_fixed_;
}

double TriWeHead::alpha2_value() const {
  return a2_raw_ ? softplus_value(a2_raw_->value[0]) : a2_fixed_;
}

VarId TriWeHead::alpha_var(Tape& tape, bool first) {
  auto& raw = first ? a1_raw_ : a2_raw_;
  if (raw) return tape.softplus(tape.leaf(*raw));
  return tape.constant(Tensor::scalar(first ? a1_fixed_ : a2_fixed_));
}

VarId TriWeHead::compose_impl(Tape& tape, VarId a1, VarId a2, VarId base, VarId old,
                              VarId all) const {
  AlphaBars bars = normalize_alphas(tape, a1, a2);
  std::size_t nb = n_base(), np = n_prev(), nt = n_total();
  std::vector<VarId> blocks;
  VarId base_block = tape.add(tape.add(tape.smul(bars.a1, base), tape.smul(bars.a2, tape.take_cols(old, 0, nb))),
                              tape.smul(bars.a3, tape.take_cols(all, 0, nb)));
  blocks.push_back(base_block);
  if (np > nb) {
    blocks.push_back(tape.add(tape.smul(bars.a4, tape.take_cols(old, nb, np)),
                              tape.smul(bars.a5, tape.take_cols(all, nb, np))));
  }
  if (nt > np) {
    blocks.push_back(tape.take_cols(all, np, nt));
  }
  return blocks.size() == 1 ? blocks[0] : tape.concat_cols(blocks);
}

VarId TriWeHead::compose(Tape& tape) {
  return compose_impl(tape, alpha_var(tape, true), alpha_var(tape, false), tape.leaf(base_bank_),
                      tape.leaf(old_bank_), tape.leaf(all_bank_));
}

Tensor TriWeHead::compose_values() const {
  Tape tape;
  VarId a1 = tape.constant(Tensor::scalar(alpha1_value()));
  VarId a2 = tape.constant(Tensor::scalar(alpha2_value()));
  return tape.val(compose_impl(tape, a1, a2, tape.constant(base_bank_.value),
                               tape.constant(old_bank_.value), tape.constant(all_bank_.value)));
}

CosineHead TriWeHead::deploy(double scale) const { return CosineHead{compose_values(), scale}; }

TriWeHead init_session(const Tensor& prev_deployed, const Tensor& base_head,
                       const Tensor& new_class_features, int session_index, AlphaSpec a1,
                       AlphaSpec a2) {
  if (session_index < 1) throw ContractViolation("init_session: session index must be >= 1");
  if (prev_deployed.ndim() != 2 || base_head.ndim() != 2) {
    throw ConfigError("init_session: head weights must be 2-D [d, classes]");
  }
  std::size_t d = base_head.dim(0);
  if (prev_deployed.dim(0) != d) throw ConfigError("init_session: feature dim mismatch");
  if (prev_deployed.dim(1) < base_head.dim(1)) {
    throw ConfigError("init_session: previous head narrower than the base head");
  }
  std::size_t n_new = 0;
  if (new_class_features.size() > 0) {
    if (new_class_features.ndim() != 2 || new_class_features.dim(0) != d) {
      throw ConfigError("init_session: new class features must be [d, n_new]");
    }
    n_new = new_class_features.dim(1);
  }
  std::size_t np = prev_deployed.dim(1);
  Tensor all({d, np + n_new});
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < np; ++c) all(r, c) = prev_deployed(r, c);
    for (std::size_t c = 0; c < n_new; ++c) all(r, np + c) = new_class_features(r, c);
  }
  if (session_index == 1) a2 = AlphaSpec{false, 0.0};
  return TriWeHead(base_head, prev_deployed, std::move(all), a1, a2);
}

}  // namespace fscil
