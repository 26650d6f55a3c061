#include "fscil/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "fscil/rng.hpp"
#include "fscil/snapshot.hpp"

namespace fscil {

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::naive: return "naive";
    case Mode::no_we: return "no-we";
    case Mode::dual_we_old: return "dual-we-old";
    case Mode::dual_we_base: return "dual-we-base";
    case Mode::tri_we: return "tri-we";
  }
  throw ConfigError("unknown mode");
}

Mode mode_from_name(const std::string& name) {
  if (name == "naive") return Mode::naive;
  if (name == "no-we") return Mode::no_we;
  if (name == "dual-we-old") return Mode::dual_we_old;
  if (name == "dual-we-base") return Mode::dual_we_base;
  if (name == "tri-we") return Mode::tri_we;
  throw ConfigError("mode: unknown value '" + name + "'");
}

void RunConfig::validate() const {
  model.validate();
  weights.validate();
  amplify.validate();
  base.validate();
  if (lr_fast < 0.0 || lr_slow < 0.0) throw ConfigError("run: negative learning rate");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("run: momentum must be in [0,1)");
  if (!(cosine_scale > 0.0)) throw ConfigError("run: cosine_scale must be positive");
  if (alpha.learnable && !(alpha.init > 0.0)) {
    throw ConfigError("run: alpha.init must be positive when learnable");
  }
  if (!alpha.learnable && (alpha.fixed1 < 0.0 || alpha.fixed2 < 0.0)) {
    throw ConfigError("run: fixed alphas must be nonnegative");
  }
}

namespace {

bool mode_uses_triwe(Mode m) {
  return m == Mode::tri_we || m == Mode::dual_we_old || m == Mode::dual_we_base;
}

bool mode_uses_old_loss(Mode m) { return m == Mode::tri_we || m == Mode::dual_we_old; }

bool mode_uses_distill(Mode m) { return m != Mode::naive; }

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
  std::size_t best = 0;
  double bv = logits(row, 0);
  for (std::size_t c = 1; c < logits.dim(1); ++c) {
    if (logits(row, c) > bv) {
      bv = logits(row, c);
      best = c;
    }
  }
  return best;
}

Tensor normal_head(std::size_t d, std::size_t n, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / static_cast<double>(d)));
  Tensor t({d, n});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

// Unit-normalized mean feature per new class, as head columns [d, n].
Tensor new_class_columns(const FeatureExtractor& extractor,
                         const std::map<int, std::vector<const Tensor*>>& class_examples,
                         std::size_t lo) {
  std::map<int, Tensor> means = compute_prototypes(extractor, class_examples);
  std::size_t n = means.size();
  std::size_t d = means.begin()->second.size();
  Tensor cols({d, n});
  std::size_t idx = 0;
  for (const auto& [cls, mean] : means) {
    if (static_cast<std::size_t>(cls) != lo + idx) {
      throw DataError("session classes must be contiguous from " + std::to_string(lo));
    }
    double sq = 0.0;
    for (std::size_t r = 0; r < d; ++r) sq += mean[r] * mean[r];
    double norm = std::sqrt(sq);
    if (norm == 0.0) {
      throw DegenerateInputError("new class " + std::to_string(cls) + " has a zero mean feature");
    }
    for (std::size_t r = 0; r < d; ++r) cols(r, idx) = mean[r] / norm;
    ++idx;
  }
  return cols;
}

std::map<int, std::vector<const Tensor*>> group_by_class(const std::vector<LabeledImage>& set) {
  std::map<int, std::vector<const Tensor*>> out;
  for (const LabeledImage& li : set) out[li.label].push_back(&li.image);
  return out;
}

std::vector<NamedTensor> teacher_snapshot(const FeatureExtractor& ext, const CosineHead& head) {
  std::vector<NamedTensor> records = snapshot_params(ext.params());
  records.push_back(NamedTensor{"head.deployed", head.weight});
  return records;
}

}  // namespace

SessionMetrics evaluate(const FeatureExtractor& extractor, const CosineHead& head,
                        const std::vector<std::vector<LabeledImage>>& query_sets,
                        std::size_t n_total, std::size_t n_base) {
  if (n_total == 0 || n_total > query_sets.size()) {
    throw DataError("evaluate: query sets do not cover the evaluated classes");
  }
  if (head.num_classes() != n_total) {
    throw ConfigError("evaluate: head covers " + std::to_string(head.num_classes()) +
                      " classes, expected " + std::to_string(n_total));
  }
  if (n_base > n_total) throw ContractViolation("evaluate: n_base exceeds n_total");
  std::size_t correct = 0, total = 0, base_correct = 0, base_total = 0;
  std::size_t new_correct = 0, new_total = 0;
  for (std::size_t c = 0; c < n_total; ++c) {
    if (query_sets[c].empty()) throw DataError("evaluate: class without queries");
    std::vector<const Tensor*> images;
    images.reserve(query_sets[c].size());
    for (const LabeledImage& li : query_sets[c]) images.push_back(&li.image);
    Tensor feats = extractor.forward_values(stack_images(images));
    Tensor logits = cosine_logits_values(feats, head.weight, head.scale);
    for (std::size_t r = 0; r < logits.dim(0); ++r) {
      bool hit = argmax_row(logits, r) == c;
      ++total;
      correct += hit;
      if (c < n_base) {
        ++base_total;
        base_correct += hit;
      } else {
        ++new_total;
        new_correct += hit;
      }
    }
  }
  SessionMetrics m;
  m.acc = static_cast<double>(correct) / static_cast<double>(total);
  m.base_acc = base_total ? static_cast<double>(base_correct) / static_cast<double>(base_total) : 0.0;
  m.new_acc = new_total ? static_cast<double>(new_correct) / static_cast<double>(new_total) : 0.0;
  m.hm = (m.base_acc > 0.0 && m.new_acc > 0.0)
             ? 2.0 * m.base_acc * m.new_acc / (m.base_acc + m.new_acc)
             : 0.0;
  return m;
}

BaseModel train_base_model(const Benchmark& bench, const RunConfig& cfg) {
  cfg.validate();
  std::size_t d = cfg.model.feature_dim;
  FeatureExtractor extractor(cfg.model, mix_seed(cfg.seed, 0xe0e0ULL));
  Parameter class_head("head.base", normal_head(d, bench.n_base, mix_seed(cfg.seed, 0x6eadULL)));
  Parameter geo_head("head.geo",
                     normal_head(d, cfg.base.geo_transforms, mix_seed(cfg.seed, 0x6e0ULL)));

  std::vector<Tensor> images;
  std::vector<int> labels;
  images.reserve(bench.base_train.size());
  for (const LabeledImage& li : bench.base_train) {
    images.push_back(li.image);
    labels.push_back(li.label);
  }
  BaseTrainConfig base_cfg = cfg.base;
  base_cfg.cosine_scale = cfg.cosine_scale;
  base_cfg.momentum = cfg.momentum;
  base_train(extractor, class_head, geo_head, images, labels, bench.n_base, base_cfg, cfg.seed);

  PrototypeBuffer buffer;
  std::map<int, std::vector<const Tensor*>> by_class;
  for (const LabeledImage& li : bench.base_train) by_class[li.label].push_back(&li.image);
  for (auto& [cls, proto] : compute_prototypes(extractor, by_class)) {
    buffer.insert(cls, std::move(proto));
  }

  SessionMetrics s0 = evaluate(extractor, CosineHead{class_head.value, cfg.cosine_scale},
                               bench.query_sets, bench.n_base, bench.n_base);
  s0.session = 0;
  return BaseModel{std::move(extractor), std::move(class_head.value), std::move(buffer), s0};
}

SessionOutcome run_incremental_session(SessionState& state,
                                       const std::vector<LabeledImage>& session_set,
                                       PrototypeBuffer& buffer, const RunConfig& cfg) {
  cfg.validate();
  int t_next = state.t + 1;
  std::size_t n_prev = state.n_total;

  // The session must bring exactly the next contiguous block of new classes.
  auto by_class = group_by_class(session_set);
  if (by_class.empty()) throw DataError("session: empty training set");
  std::size_t n_new = by_class.size();
  std::size_t expected_lo = n_prev;
  std::size_t k_shot = by_class.begin()->second.size();
  for (const auto& [cls, examples] : by_class) {
    if (cls < 0 || static_cast<std::size_t>(cls) < n_prev) {
      throw DataError("session: class " + std::to_string(cls) + " was already seen");
    }
    if (examples.size() != k_shot) {
      throw DataError("session: classes have unequal shot counts");
    }
  }
  if (by_class.rbegin()->first != static_cast<int>(expected_lo + n_new - 1)) {
    throw DataError("session: class range is not contiguous");
  }
  if (buffer.size() != n_prev) {
    throw ContractViolation("session: prototype buffer covers " + std::to_string(buffer.size()) +
                            " classes, expected " + std::to_string(n_prev));
  }
  std::size_t n_total = n_prev + n_new;

  // Teacher: the deployed model from the previous session, snapshotted.
  FeatureExtractor teacher = state.extractor.clone();
  CosineHead teacher_head = state.deployed;
  std::vector<std::uint8_t> teacher_bytes =
      serialize_snapshot(teacher_snapshot(teacher, teacher_head));

  // New-class columns from the pre-session extractor.
  Tensor new_cols = new_class_columns(state.extractor, by_class, n_prev);

  bool uses_triwe = mode_uses_triwe(cfg.mode);
  bool uses_distill = mode_uses_distill(cfg.mode);
  bool uses_old_loss = uses_triwe && mode_uses_old_loss(cfg.mode);

  // Amplified batch and teacher targets are fixed for the whole session.
  Tensor amp_batch;
  Tensor teacher_feats, teacher_probs;
  if (uses_distill) {
    std::vector<Tensor> session_images;
    session_images.reserve(session_set.size());
    for (const LabeledImage& li : session_set) session_images.push_back(li.image);
    AmplifyConfig amp_cfg = cfg.amplify;
    amp_cfg.seed = mix_seed(cfg.amplify.seed, cfg.seed, static_cast<std::uint64_t>(t_next));
    std::vector<Tensor> amplified = amplify(session_images, amp_cfg);
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(amplified.size());
    for (const Tensor& t : amplified) ptrs.push_back(&t);
    amp_batch = stack_images(ptrs);
    teacher_feats = teacher.forward_values(amp_batch);
    teacher_probs =
        softmax_values(cosine_logits_values(teacher_feats, teacher_head.weight, cfg.cosine_scale));
  }

  // Session batch: the raw N-way K-shot images.
  std::vector<const Tensor*> img_ptrs;
  std::vector<int> img_labels;
  for (const LabeledImage& li : session_set) {
    img_ptrs.push_back(&li.image);
    img_labels.push_back(li.label);
  }
  Tensor img_batch = stack_images(img_ptrs);

  state.extractor.set_group(cfg.mode == Mode::naive ? ParamGroup::fast : ParamGroup::slow);

  SessionOutcome outcome;
  CosineHead new_deployed;

  if (uses_triwe) {
    AlphaSpec a1, a2;
    if (cfg.mode == Mode::dual_we_old) {
      a1 = AlphaSpec{false, 0.0};
    } else {
      a1 = cfg.alpha.learnable ? AlphaSpec{true, cfg.alpha.init}
                               : AlphaSpec{false, cfg.alpha.fixed1};
    }
    if (cfg.mode == Mode::dual_we_base) {
      a2 = AlphaSpec{false, 0.0};
    } else {
      a2 = cfg.alpha.learnable ? AlphaSpec{true, cfg.alpha.init}
                               : AlphaSpec{false, cfg.alpha.fixed2};
    }
    TriWeHead head = init_session(state.deployed.weight, state.base_head, new_cols, t_next, a1, a2);

    std::vector<Parameter*> params = head.params();
    for (Parameter* p : state.extractor.params()) params.push_back(p);
    SgdOptimizer opt;
    for (std::size_t step = 0; step < cfg.incr_epochs; ++step) {
      Tape tape;
      VarId composed = head.compose(tape);
      VarId cls = loss_cls(tape, state.extractor, composed, cfg.cosine_scale, img_batch,
                           img_labels, buffer);
      std::optional<VarId> old_term;
      if (uses_old_loss) {
        old_term = loss_cls_old(tape, tape.leaf(head.old_bank()), cfg.cosine_scale, buffer);
      }
      std::optional<VarId> adkd;
      if (uses_distill) {
        VarId student_feats = state.extractor.forward(tape, amp_batch);
        VarId feat_term = loss_feat(tape, teacher_feats, student_feats);
        VarId student_logits = cosine_logits(tape, student_feats,
                                             tape.take_cols(composed, 0, n_prev),
                                             cfg.cosine_scale);
        VarId logit_term = loss_logit(tape, teacher_probs, student_logits);
        adkd = tape.add(feat_term, logit_term);
      }
      VarId total = loss_total(tape, cls, old_term, adkd, cfg.weights);
      if (!std::isfinite(tape.val(total)[0])) {
        throw TrainingDivergence("session " + std::to_string(t_next) + ": non-finite loss at step " +
                                 std::to_string(step));
      }
      tape.backward(total);
      opt.step(params, cfg.lr_fast, cfg.lr_slow, cfg.momentum);
    }
    new_deployed = head.deploy(cfg.cosine_scale);
    outcome.alpha1 = head.alpha1_value();
    outcome.alpha2 = head.alpha2_value();
  } else {
    // Plain single-bank head: previous deployed head extended with the new
    // class columns, trained directly.
    std::size_t d = state.deployed.weight.dim(0);
    Tensor all({d, n_total});
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < n_prev; ++c) all(r, c) = state.deployed.weight(r, c);
      for (std::size_t c = 0; c < n_new; ++c) all(r, n_prev + c) = new_cols(r, c);
    }
    Parameter head_param("head.all", std::move(all), ParamGroup::fast);

    std::vector<Parameter*> params{&head_param};
    for (Parameter* p : state.extractor.params()) params.push_back(p);
    SgdOptimizer opt;
    for (std::size_t step = 0; step < cfg.incr_epochs; ++step) {
      Tape tape;
      VarId head_var = tape.leaf(head_param);
      VarId cls = loss_cls(tape, state.extractor, head_var, cfg.cosine_scale, img_batch,
                           img_labels, buffer);
      std::optional<VarId> adkd;
      if (uses_distill) {
        VarId student_feats = state.extractor.forward(tape, amp_batch);
        VarId feat_term = loss_feat(tape, teacher_feats, student_feats);
        VarId student_logits = cosine_logits(tape, student_feats,
                                             tape.take_cols(head_var, 0, n_prev),
                                             cfg.cosine_scale);
        VarId logit_term = loss_logit(tape, teacher_probs, student_logits);
        adkd = tape.add(feat_term, logit_term);
      }
      VarId total = loss_total(tape, cls, std::nullopt, adkd, cfg.weights);
      if (!std::isfinite(tape.val(total)[0])) {
        throw TrainingDivergence("session " + std::to_string(t_next) + ": non-finite loss at step " +
                                 std::to_string(step));
      }
      tape.backward(total);
      opt.step(params, cfg.lr_fast, cfg.lr_slow, cfg.momentum);
    }
    new_deployed = CosineHead{head_param.value, cfg.cosine_scale};
  }

  // New prototypes under the updated extractor; entries are write-once.
  for (auto& [cls, proto] : compute_prototypes(state.extractor, by_class)) {
    buffer.insert(cls, std::move(proto));
  }
  if (buffer.size() != n_total) {
    throw ContractViolation("session: buffer size " + std::to_string(buffer.size()) +
                            " does not match seen classes " + std::to_string(n_total));
  }

  // The teacher must not have moved during the session.
  std::vector<std::uint8_t> teacher_after =
      serialize_snapshot(teacher_snapshot(teacher, teacher_head));
  if (teacher_after != teacher_bytes) {
    throw ContractViolation("session: teacher snapshot changed during training");
  }

  state.deployed = std::move(new_deployed);
  state.t = t_next;
  state.n_prev = n_prev;
  state.n_total = n_total;
  return outcome;
}

MetricsReport run_benchmark(const Benchmark& bench, const RunConfig& cfg,
                            const BaseModel* cached_base) {
  bench.validate();
  RunConfig run_cfg = cfg;
  run_cfg.model.input_c = bench.img_c;
  run_cfg.model.input_h = bench.img_h;
  run_cfg.model.input_w = bench.img_w;
  run_cfg.validate();

  std::optional<BaseModel> local;
  const BaseModel* base = cached_base;
  if (base == nullptr) {
    local.emplace(train_base_model(bench, run_cfg));
    base = &*local;
  }
  if (base->base_head.dim(1) != bench.n_base) {
    throw ConfigError("run: cached base model does not match the benchmark");
  }

  SessionState state{0,
                     bench.n_base,
                     bench.n_base,
                     bench.n_base,
                     base->extractor.clone(),
                     CosineHead{base->base_head, run_cfg.cosine_scale},
                     base->base_head};
  PrototypeBuffer buffer = base->buffer;
  if (buffer.size() != bench.n_base) {
    throw ContractViolation("run: base buffer must cover exactly the base classes");
  }

  auto write_snapshot = [&](std::size_t t) {
    if (run_cfg.snapshot_prefix.empty()) return;
    std::vector<NamedTensor> records = snapshot_params(
        static_cast<const FeatureExtractor&>(state.extractor).params());
    records.push_back(NamedTensor{"head.deployed", state.deployed.weight});
    save_snapshot(run_cfg.snapshot_prefix + "session" + std::to_string(t) + ".fsw", records);
  };

  MetricsReport report;
  report.sessions.push_back(base->session0);
  write_snapshot(0);
  for (std::size_t t = 1; t <= bench.sessions; ++t) {
    SessionOutcome outcome =
        run_incremental_session(state, bench.session_sets[t - 1], buffer, run_cfg);
    write_snapshot(t);
    SessionMetrics m =
        evaluate(state.extractor, state.deployed, bench.query_sets, state.n_total, state.n_base);
    m.session = static_cast<int>(t);
    m.alpha1 = outcome.alpha1;
    m.alpha2 = outcome.alpha2;
    report.sessions.push_back(m);
  }
  double acc_sum = 0.0;
  for (const SessionMetrics& m : report.sessions) acc_sum += m.acc;
  report.avg_acc = acc_sum / static_cast<double>(report.sessions.size());
  return report;
}

}  // namespace fscil
