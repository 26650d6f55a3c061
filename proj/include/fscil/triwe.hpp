#pragma once

#include <optional>

#include "fscil/model.hpp"

namespace fscil {

// Normalized interpolation coefficients derived from two nonnegative scalars:
//   three-way split  a1/(a1+a2+1), a2/(a1+a2+1), 1/(a1+a2+1)
//   two-way split    a2/(a2+1), 1/(a2+1)
struct AlphaBars {
  VarId a1, a2, a3;  // base-class range: base head / old head / all head
  VarId a4, a5;      // middle range: old head / all head
};

struct AlphaBarValues {
  double a1, a2, a3, a4, a5;
};

AlphaBarValues normalize_alphas(double alpha1, double alpha2);
AlphaBars normalize_alphas(Tape& tape, VarId alpha1, VarId alpha2);

// Per-scalar policy: a learnable scalar (kept nonnegative through softplus)
// initialized at `value`, or a constant fixed at `value`.
struct AlphaSpec {
  bool learnable = true;
  double value = 1.0;
};

// Classification head held as three weight banks during an incremental
// session. The base bank keeps the base-session head frozen, the old bank
// starts from the previous deployed head and moves slowly, the all bank
// extends the previous head with the new class columns and moves fast.
// compose() interpolates them column-range-wise into the working head.
class TriWeHead {
 public:
  TriWeHead(Tensor base_bank, Tensor old_bank, Tensor all_bank, AlphaSpec a1, AlphaSpec a2);

  TriWeHead(const TriWeHead&) = delete;
  TriWeHead& operator=(const TriWeHead&) = delete;
  TriWeHead(TriWeHead&&) = default;
  TriWeHead& operator=(TriWeHead&&) = default;

  // Caution: params() pointers are invalidated if the head object is moved.
  std::vector<Parameter*> params();

  VarId compose(Tape& tape);
  Tensor compose_values() const;
  CosineHead deploy(double scale) const;

  Parameter& base_bank() { return base_bank_; }
  Parameter& old_bank() { return old_bank_; }
  Parameter& all_bank() { return all_bank_; }

  double alpha1_value() const;
  double alpha2_value() const;
  bool alpha1_learnable() const { return a1_raw_.has_value(); }
  bool alpha2_learnable() const { return a2_raw_.has_value(); }

  std::size_t dim() const { return base_bank_.value.dim(0); }
  std::size_t n_base() const { return base_bank_.value.dim(1); }
  std::size_t n_prev() const { return old_bank_.value.dim(1); }
  std::size_t n_total() const { return all_bank_.value.dim(1); }

 private:
  VarId alpha_var(Tape& tape, bool first);
  VarId compose_impl(Tape& tape, VarId a1, VarId a2, VarId base, VarId old, VarId all) const;

  Parameter base_bank_;  // frozen, [d, n_base]
  Parameter old_bank_;   // slow,   [d, n_prev]
  Parameter all_bank_;   // fast,   [d, n_total]
  std::optional<Parameter> a1_raw_, a2_raw_;  // slow scalars, pre-softplus
  double a1_fixed_ = 0.0, a2_fixed_ = 0.0;
};

// Builds the session-t head from the previous deployed head, the frozen base
// head and the unit-normalized mean features of the new classes. At the first
// incremental session the old bank coincides with the base head, so alpha2 is
// fixed at zero regardless of policy.
TriWeHead init_session(const Tensor& prev_deployed, const Tensor& base_head,
                       const Tensor& new_class_features, int session_index, AlphaSpec a1,
                       AlphaSpec a2);

}  // namespace fscil
