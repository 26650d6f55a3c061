#include "fscil/autodiff.hpp"

#include <cmath>

namespace fscil {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ConfigError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                      b.shape_str());
  }
}

// Rows/cols view: 1-D tensors are treated as a single row where noted.
std::pair<std::size_t, std::size_t> as_rows(const Tensor& t, const char* op) {
  if (t.ndim() == 1) return {1, t.dim(0)};
  if (t.ndim() == 2) return {t.dim(0), t.dim(1)};
  throw ConfigError(std::string(op) + ": expected 1-D or 2-D tensor, got " + t.shape_str());
}

}  // namespace

VarId Tape::push(Tensor value, std::vector<VarId> parents, BackFn back, Parameter* param) {
  Node n;
  n.grad = Tensor(std::vector<std::size_t>(value.shape()));
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.back = std::move(back);
  n.param = param;
  nodes_.push_back(std::move(n));
  return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::constant(Tensor value) { return push(std::move(value), {}, nullptr); }

VarId Tape::leaf(Parameter& p) {
  auto it = leaves_.find(&p);
  if (it != leaves_.end()) return it->second;
  VarId id = push(p.value, {}, nullptr, &p);
  leaves_.emplace(&p, id);
  return id;
}

VarId Tape::add(VarId a, VarId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require_same_shape(A, B, "add");
  Tensor out(std::vector<std::size_t>(A.shape()));
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] + B[i];
  return push(std::move(out), {a, b}, [](Tape& t, Node& n) {
    Tensor& ga = t.node(n.parents[0]).grad;
    Tensor& gb = t.node(n.parents[1]).grad;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      ga[i] += n.grad[i];
      gb[i] += n.grad[i];
    }
  });
}

VarId Tape::sub(VarId a, VarId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require_same_shape(A, B, "sub");
  Tensor out(std::vector<std::size_t>(A.shape()));
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] - B[i];
  return push(std::move(out), {a, b}, [](Tape& t, Node& n) {
    Tensor& ga = t.node(n.parents[0]).grad;
    Tensor& gb = t.node(n.parents[1]).grad;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      ga[i] += n.grad[i];
      gb[i] -= n.grad[i];
    }
  });
}

VarId Tape::mul(VarId a, VarId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require_same_shape(A, B, "mul");
  Tensor out(std::vector<std::size_t>(A.shape()));
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * B[i];
  return push(std::move(out), {a, b}, [](Tape& t, Node& n) {
    Node& pa = t.node(n.parents[0]);
    Node& pb = t.node(n.parents[1]);
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      pa.grad[i] += n.grad[i] * pb.value[i];
      pb.grad[i] += n.grad[i] * pa.value[i];
    }
  });
}

VarId Tape::div(VarId a, VarId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require_same_shape(A, B, "div");
  Tensor out(std::vector<std::size_t>(A.shape()));
  for (std::size_t i = 0; i < A.size(); ++i) {
    if (B[i] == 0.0) throw DegenerateInputError("div: zero denominator");
    out[i] = A[i] / B[i];
  }
  return push(std::move(out), {a, b}, [](Tape& t, Node& n) {
    Node& pa = t.node(n.parents[0]);
    Node& pb = t.node(n.parents[1]);
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      double inv = 1.0 / pb.value[i];
      pa.grad[i] += n.grad[i] * inv;
      pb.grad[i] -= n.grad[i] * pa.value[i] * inv * inv;
    }
  });
}

VarId Tape::add_bias(VarId m, VarId bias) {
  const Tensor& A = val(m);
  const Tensor& B = val(bias);
  require(A.ndim() == 2 && B.ndim() == 1 && B.dim(0) == A.dim(1),
          "add_bias: expected [r,c] and [c], got " + A.shape_str() + " and " + B.shape_str());
  Tensor out(std::vector<std::size_t>(A.shape()));
  for (std::size_t r = 0; r < A.dim(0); ++r) {
    for (std::size_t c = 0; c < A.dim(1); ++c) out(r, c) = A(r, c) + B[c];
  }
  return push(std::move(out), {m, bias}, [](Tape& t, Node& n) {
    Tensor& ga = t.node(n.parents[0]).grad;
    Tensor& gb = t.node(n.parents[1]).grad;
    for (std::size_t r = 0; r < n.grad.dim(0); ++r) {
      for (std::size_t c = 0; c < n.grad.dim(1); ++c) {
        ga(r, c) += n.grad(r, c);
        gb[c] += n.grad(r, c);
      }
    }
  });
}

VarId Tape::scale(VarId a, double c) {
  const Tensor& A = val(a);
  Tensor out(std::vector<std::size_t>(A.shape()));
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = c * A[i];
  return push(std::move(out), {a}, [c](Tape& t, Node& n) {
    Tensor& ga = t.node(n.parents[0]).grad;
    for (std::size_t i = 0; i < n.grad.size(); ++i) ga[i] += c * n.grad[i];
  });
}

VarId Tape::smul(VarId s, VarId a) {
  const Tensor& S = val(s);
  const Tensor& A = val(a);
  require(S.size() == 1, "smul: scalar operand must have size 1, got " + S.shape_str());
  Tensor out(std::vector<std::size_t>(A.shape()));
  double sv = S[0];
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = sv * A[i];
  return push(std::move(out), {s, a}, [](Tape& t, Node& n) {
    Node& ps = t.node(n.parents[0]);
    Node& pa = t.node(n.parents[1]);
    double sv = ps.value[0];
    double acc = 0.0;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      acc += n.grad[i] * pa.value[i];
      pa.grad[i] += sv * n.grad[i];
    }
    ps.grad[0] += acc;
  });
}

VarId Tape::relu(VarId a) {
  const Tensor& A = val(a);
  Tensor out(std::vector<std::size_t>(A.shape()));
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] > 0.0 ? A[i] : 0.0;
  return push(std::move(out), {a}, [](Tape& t, Node& n) {
    Node& pa = t.node(n.parents[0]);
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (pa.value[i] > 0.0) pa.grad[i] += n.grad[i];
    }
  });
}

VarId Tape::exp(VarId a) {
  const Tensor& A = val(a);
  Tensor out(std::vector<std::size_t>(A.shape()));
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = std::exp(A[i]);
  return push(std::move(out), {a}, [](Tape& t, Node& n) {
    Tensor& ga = t.node(n.parents[0]).grad;
    for (std::size_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i] * n.value[i];
  });
}

VarId Tape::log(VarId a) {
  const Tensor& A = val(a);
  Tensor out(std::vector<std::size_t>(A.shape()));
  for (std::size_t i = 0; i < A.size(); ++i) {
    if (!(A[i] > 0.0)) throw DegenerateInputError("log: non-positive input");
    out[i] = std::log(A[i]);
  }
  return push(std::move(out), {a}, [](Tape& t, Node& n) {
    Node& pa = t.node(n.parents[0]);
    for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] / pa.value[i];
  });
}

VarId Tape::sqrt(VarId a) {
  const Tensor& A = val(a);
  Tensor out(std::vector<std::size_t>(A.shape()));
  for (std::size_t i = 0; i < A.size(); ++i) {
    if (A[i] < 0.0) throw DegenerateInputError("sqrt: negative input");
    out[i] = std::sqrt(A[i]);
  }
  // Subgradient 0 at exactly 0 keeps distillation losses finite when the
  // distilled quantities coincide.
  return push(std::move(out), {a}, [](Tape& t, Node& n) {
    Tensor& ga = t.node(n.parents[0]).grad;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (n.value[i] > 0.0) ga[i] += n.grad[i] * 0.5 / n.value[i];
    }
  });
}

VarId Tape::softplus(VarId a) {
  const Tensor& A = val(a);
  Tensor out(std::vector<std::size_t>(A.shape()));
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = softplus_value(A[i]);
  return push(std::move(out), {a}, [](Tape& t, Node& n) {
    Node& pa = t.node(n.parents[0]);
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      double x = pa.value[i];
      double sig = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      pa.grad[i] += n.grad[i] * sig;
    }
  });
}

VarId Tape::matmul(VarId a, VarId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require(A.ndim() == 2 && B.ndim() == 2 && A.dim(1) == B.dim(0),
          "matmul: incompatible shapes " + A.shape_str() + " and " + B.shape_str());
  std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double av = A(i, p);
      for (std::size_t j = 0; j < n; ++j) out(i, j) += av * B(p, j);
    }
  }
  return push(std::move(out), {a, b}, [m, k, n](Tape& t, Node& nd) {
    Node& pa = t.node(nd.parents[0]);
    Node& pb = t.node(nd.parents[1]);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += nd.grad(i, j) * pb.value(p, j);
        pa.grad(i, p) += acc;
      }
    }
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t i = 0; i < m; ++i) {
        double av = pa.value(i, p);
        for (std::size_t j = 0; j < n; ++j) pb.grad(p, j) += av * nd.grad(i, j);
      }
    }
  });
}

VarId Tape::conv2d(VarId x, VarId w, VarId bias) {
  const Tensor& X = val(x);
  const Tensor& W = val(w);
  const Tensor& B = val(bias);
  require(X.ndim() == 4, "conv2d: input must be [b,c,h,w], got " + X.shape_str());
  require(W.ndim() == 4 && W.dim(2) == 3 && W.dim(3) == 3,
          "conv2d: kernel must be [oc,ic,3,3], got " + W.shape_str());
  require(W.dim(1) == X.dim(1), "conv2d: channel mismatch " + X.shape_str() + " vs " + W.shape_str());
  require(B.ndim() == 1 && B.dim(0) == W.dim(0), "conv2d: bias must be [oc]");
  std::size_t bn = X.dim(0), ic = X.dim(1), h = X.dim(2), wd = X.dim(3), oc = W.dim(0);
  Tensor out({bn, oc, h, wd});
  for (std::size_t b = 0; b < bn; ++b) {
    for (std::size_t o = 0; o < oc; ++o) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t xx = 0; xx < wd; ++xx) {
          double acc = B[o];
          for (std::size_t c = 0; c < ic; ++c) {
            for (std::size_t dy = 0; dy < 3; ++dy) {
              std::size_t sy = y + dy;
              if (sy < 1 || sy > h) continue;  // zero padding of 1
              for (std::size_t dx = 0; dx < 3; ++dx) {
                std::size_t sx = xx + dx;
                if (sx < 1 || sx > wd) continue;
                acc += X(b, c, sy - 1, sx - 1) * W(o, c, dy, dx);
              }
            }
          }
          out(b, o, y, xx) = acc;
        }
      }
    }
  }
  return push(std::move(out), {x, w, bias}, [bn, ic, h, wd, oc](Tape& t, Node& nd) {
    Node& px = t.node(nd.parents[0]);
    Node& pw = t.node(nd.parents[1]);
    Node& pb = t.node(nd.parents[2]);
    for (std::size_t b = 0; b < bn; ++b) {
      for (std::size_t o = 0; o < oc; ++o) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t xx = 0; xx < wd; ++xx) {
            double g = nd.grad(b, o, y, xx);
            if (g == 0.0) continue;
            pb.grad[o] += g;
            for (std::size_t c = 0; c < ic; ++c) {
              for (std::size_t dy = 0; dy < 3; ++dy) {
                std::size_t sy = y + dy;
                if (sy < 1 || sy > h) continue;
                for (std::size_t dx = 0; dx < 3; ++dx) {
                  std::size_t sx = xx + dx;
                  if (sx < 1 || sx > wd) continue;
                  px.grad(b, c, sy - 1, sx - 1) += g * pw.value(o, c, dy, dx);
                  pw.grad(o, c, dy, dx) += g * px.value(b, c, sy - 1, sx - 1);
                }
              }
            }
          }
        }
      }
    }
  });
}

VarId Tape::meanpool2(VarId x) {
  const Tensor& X = val(x);
  require(X.ndim() == 4, "meanpool2: input must be [b,c,h,w], got " + X.shape_str());
  require(X.dim(2) % 2 == 0 && X.dim(3) % 2 == 0,
          "meanpool2: spatial dims must be even, got " + X.shape_str());
  std::size_t bn = X.dim(0), c = X.dim(1), oh = X.dim(2) / 2, ow = X.dim(3) / 2;
  Tensor out({bn, c, oh, ow});
  for (std::size_t b = 0; b < bn; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t xx = 0; xx < ow; ++xx) {
          out(b, ch, y, xx) = 0.25 * (X(b, ch, 2 * y, 2 * xx) + X(b, ch, 2 * y, 2 * xx + 1) +
                                      X(b, ch, 2 * y + 1, 2 * xx) + X(b, ch, 2 * y + 1, 2 * xx + 1));
        }
      }
    }
  }
  return push(std::move(out), {x}, [bn, c, oh, ow](Tape& t, Node& nd) {
    Tensor& gx = t.node(nd.parents[0]).grad;
    for (std::size_t b = 0; b < bn; ++b) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < oh; ++y) {
          for (std::size_t xx = 0; xx < ow; ++xx) {
            double g = 0.25 * nd.grad(b, ch, y, xx);
            gx(b, ch, 2 * y, 2 * xx) += g;
            gx(b, ch, 2 * y, 2 * xx + 1) += g;
            gx(b, ch, 2 * y + 1, 2 * xx) += g;
            gx(b, ch, 2 * y + 1, 2 * xx + 1) += g;
          }
        }
      }
    }
  });
}

VarId Tape::l2_normalize_rows(VarId a) {
  const Tensor& A = val(a);
  auto [rows, cols] = as_rows(A, "l2_normalize_rows");
  Tensor out(std::vector<std::size_t>(A.shape()));
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sq += A[r * cols + c] * A[r * cols + c];
    double norm = std::sqrt(sq);
    if (norm == 0.0) throw DegenerateInputError("l2_normalize_rows: zero-norm row");
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = A[r * cols + c] / norm;
  }
  return push(std::move(out), {a}, [rows, cols](Tape& t, Node& n) {
    Node& pa = t.node(n.parents[0]);
    for (std::size_t r = 0; r < rows; ++r) {
      double sq = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        double v = pa.value[r * cols + c];
        sq += v * v;
      }
      double norm = std::sqrt(sq);
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += n.grad[r * cols + c] * n.value[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        pa.grad[r * cols + c] += (n.grad[r * cols + c] - n.value[r * cols + c] * dot) / norm;
      }
    }
  });
}

VarId Tape::l2_normalize_cols(VarId a) {
  const Tensor& A = val(a);
  require(A.ndim() == 2, "l2_normalize_cols: expected 2-D tensor, got " + A.shape_str());
  std::size_t rows = A.dim(0), cols = A.dim(1);
  Tensor out(std::vector<std::size_t>(A.shape()));
  for (std::size_t c = 0; c < cols; ++c) {
    double sq = 0.0;
    for (std::size_t r = 0; r < rows; ++r) sq += A(r, c) * A(r, c);
    double norm = std::sqrt(sq);
    if (norm == 0.0) throw DegenerateInputError("l2_normalize_cols: zero-norm column");
    for (std::size_t r = 0; r < rows; ++r) out(r, c) = A(r, c) / norm;
  }
  return push(std::move(out), {a}, [rows, cols](Tape& t, Node& n) {
    Node& pa = t.node(n.parents[0]);
    for (std::size_t c = 0; c < cols; ++c) {
      double sq = 0.0;
      for (std::size_t r = 0; r < rows; ++r) sq += pa.value(r, c) * pa.value(r, c);
      double norm = std::sqrt(sq);
      double dot = 0.0;
      for (std::size_t r = 0; r < rows; ++r) dot += n.grad(r, c) * n.value(r, c);
      for (std::size_t r = 0; r < rows; ++r) {
        pa.grad(r, c) += (n.grad(r, c) - n.value(r, c) * dot) / norm;
      }
    }
  });
}

VarId Tape::softmax_rows(VarId a) {
  const Tensor& A = val(a);
  auto [rows, cols] = as_rows(A, "softmax_rows");
  require(cols > 0, "softmax_rows: empty rows");
  Tensor out(std::vector<std::size_t>(A.shape()));
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = A[r * cols];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, A[r * cols + c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      double e = std::exp(A[r * cols + c] - mx);
      out[r * cols + c] = e;
      denom += e;
    }
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= denom;
  }
  return push(std::move(out), {a}, [rows, cols](Tape& t, Node& n) {
    Tensor& ga = t.node(n.parents[0]).grad;
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += n.grad[r * cols + c] * n.value[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        ga[r * cols + c] += n.value[r * cols + c] * (n.grad[r * cols + c] - dot);
      }
    }
  });
}

VarId Tape::sum(VarId a) {
  const Tensor& A = val(a);
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) acc += A[i];
  return push(Tensor::scalar(acc), {a}, [](Tape& t, Node& n) {
    Tensor& ga = t.node(n.parents[0]).grad;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[0];
  });
}

VarId Tape::mean(VarId a) {
  const Tensor& A = val(a);
  require(A.size() > 0, "mean: empty tensor");
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) acc += A[i];
  double inv = 1.0 / static_cast<double>(A.size());
  return push(Tensor::scalar(acc * inv), {a}, [inv](Tape& t, Node& n) {
    Tensor& ga = t.node(n.parents[0]).grad;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[0] * inv;
  });
}

VarId Tape::sqnorm_rows(VarId a) {
  const Tensor& A = val(a);
  auto [rows, cols] = as_rows(A, "sqnorm_rows");
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += A[r * cols + c] * A[r * cols + c];
    out[r] = acc;
  }
  return push(std::move(out), {a}, [rows, cols](Tape& t, Node& n) {
    Node& pa = t.node(n.parents[0]);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        pa.grad[r * cols + c] += 2.0 * pa.value[r * cols + c] * n.grad[r];
      }
    }
  });
}

VarId Tape::take_cols(VarId a, std::size_t c0, std::size_t c1) {
  const Tensor& A = val(a);
  require(A.ndim() == 2, "take_cols: expected 2-D tensor, got " + A.shape_str());
  require(c0 <= c1 && c1 <= A.dim(1), "take_cols: range [" + std::to_string(c0) + "," +
                                          std::to_string(c1) + ") out of bounds for " +
                                          A.shape_str());
  std::size_t rows = A.dim(0), w = c1 - c0;
  Tensor out({rows, w});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < w; ++c) out(r, c) = A(r, c0 + c);
  }
  return push(std::move(out), {a}, [rows, w, c0](Tape& t, Node& n) {
    Tensor& ga = t.node(n.parents[0]).grad;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < w; ++c) ga(r, c0 + c) += n.grad(r, c);
    }
  });
}

VarId Tape::concat_cols(const std::vector<VarId>& parts) {
  require(!parts.empty(), "concat_cols: no parts");
  std::size_t rows = val(parts[0]).dim(0), total = 0;
  for (VarId p : parts) {
    const Tensor& T = val(p);
    require(T.ndim() == 2 && T.dim(0) == rows, "concat_cols: parts must be 2-D with equal rows");
    total += T.dim(1);
  }
  Tensor out({rows, total});
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (VarId p : parts) {
    const Tensor& T = val(p);
    offsets.push_back(off);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < T.dim(1); ++c) out(r, off + c) = T(r, c);
    }
    off += T.dim(1);
  }
  return push(std::move(out), std::vector<VarId>(parts), [rows, offsets](Tape& t, Node& n) {
    for (std::size_t k = 0; k < n.parents.size(); ++k) {
      Tensor& gp = t.node(n.parents[k]).grad;
      std::size_t w = gp.dim(1), off = offsets[k];
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < w; ++c) gp(r, c) += n.grad(r, off + c);
      }
    }
  });
}

VarId Tape::reshape(VarId a, std::vector<std::size_t> shape) {
  const Tensor& A = val(a);
  Tensor out(std::move(shape));
  require(out.size() == A.size(),
          "reshape: element count mismatch " + A.shape_str() + " -> " + out.shape_str());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i];
  return push(std::move(out), {a}, [](Tape& t, Node& n) {
    Tensor& ga = t.node(n.parents[0]).grad;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i];
  });
}

void Tape::backward(VarId loss) {
  Node& L = node(loss);
  if (L.value.size() != 1) {
    throw ContractViolation("backward: loss must be a scalar, got " + L.value.shape_str());
  }
  L.grad[0] += 1.0;
  for (VarId i = loss; i >= 0; --i) {
    Node& n = node(i);
    if (n.back) n.back(*this, n);
  }
  for (auto& [param, id] : leaves_) {
    if (param->group == ParamGroup::frozen) continue;
    const Tensor& g = node(id).grad;
    for (std::size_t i = 0; i < g.size(); ++i) param->grad[i] += g[i];
  }
}

Tensor finite_diff_grad(const std::function<double()>& f, Parameter& p, double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_grad: step must be positive");
  Tensor g(std::vector<std::size_t>(p.value.shape()));
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    double saved = p.value[i];
    p.value[i] = saved + h;
    double fp = f();
    p.value[i] = saved - h;
    double fm = f();
    p.value[i] = saved;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double softplus_value(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double inv_softplus(double y) {
  if (!(y > 0.0)) throw ConfigError("inv_softplus: argument must be positive");
  // x = y + log(1 - exp(-y)), stable for small and large y.
  return y + std::log(-std::expm1(-y));
}

}  // namespace fscil
