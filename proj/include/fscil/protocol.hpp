#pragma once

#include <optional>
#include <string>

#include "fscil/amplify.hpp"
#include "fscil/datagen.hpp"
#include "fscil/losses.hpp"
#include "fscil/snapshot.hpp"
#include "fscil/triwe.hpp"

namespace fscil {

// Ablation modes of the incremental learner.
//   naive        plain head, uniform fast lr, classification loss only
//   no-we        plain head, grouped lrs, classification + distillation
//   dual-we-old  ensemble of old + all banks (base scalar fixed at zero)
//   dual-we-base ensemble of base + all banks (old scalar fixed at zero)
//   tri-we       full three-bank ensemble with both learnable scalars
enum class Mode { naive, no_we, dual_we_old, dual_we_base, tri_we };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);

// Policy for the two ensemble scalars. Learnable scalars start at `init`
// (kept positive through a softplus reparameterization); fixed scalars stay
// at the given constants. Mode and first-session rules still override
// individual scalars to fixed zero.
struct AlphaPolicy {
  bool learnable = true;
  double init = 1.0;
  double fixed1 = 0.0;
  double fixed2 = 0.0;
};

struct RunConfig {
  Mode mode = Mode::tri_we;
  std::uint64_t seed = 1;
  ExtractorConfig model;  // input dims are overwritten from the benchmark
  double cosine_scale = 16.0;
  AlphaPolicy alpha;
  LossWeights weights;
  AmplifyConfig amplify;
  double lr_fast = 0.1;
  double lr_slow = 0.001;
  double momentum = 0.9;
  BaseTrainConfig base;
  std::size_t incr_epochs = 20;
  std::string snapshot_prefix;  // when nonempty, per-session weight files are written here

  void validate() const;
};

struct SessionMetrics {
  int session = 0;
  double acc = 0.0;
  double base_acc = 0.0;
  double new_acc = 0.0;  // 0 when no incremental classes are seen yet
  double hm = 0.0;       // harmonic mean of base_acc and new_acc, 0 if either is 0
  std::optional<double> alpha1, alpha2;  // learned scalars, when the mode has them
};

struct MetricsReport {
  std::vector<SessionMetrics> sessions;  // [0..T]
  double avg_acc = 0.0;
};

// Learner state between sessions: t sessions completed, classes [0, n_total)
// seen so far, of which [0, n_prev) were seen before the latest session.
struct SessionState {
  int t = 0;
  std::size_t n_base = 0;
  std::size_t n_prev = 0;
  std::size_t n_total = 0;
  FeatureExtractor extractor;
  CosineHead deployed;
  Tensor base_head;  // frozen base-session head [d, n_base]
};

// Base session output, reusable across ablation modes of the same seed.
struct BaseModel {
  FeatureExtractor extractor;
  Tensor base_head;
  PrototypeBuffer buffer;  // base-class prototypes
  SessionMetrics session0;
};

// Top-1 accuracy over the query sets of the first n_total classes, split
// into base (< n_base) and new (>= n_base) classes. Argmax ties resolve to
// the lowest class index.
SessionMetrics evaluate(const FeatureExtractor& extractor, const CosineHead& head,
                        const std::vector<std::vector<LabeledImage>>& query_sets,
                        std::size_t n_total, std::size_t n_base);

BaseModel train_base_model(const Benchmark& bench, const RunConfig& cfg);

struct SessionOutcome {
  std::optional<double> alpha1, alpha2;
};

// Runs one incremental session in place: builds the session head, trains on
// the session data plus the prototype buffer (and the amplified batch when
// the mode distills), then deploys the composed head and extends the buffer.
SessionOutcome run_incremental_session(SessionState& state,
                                       const std::vector<LabeledImage>& session_set,
                                       PrototypeBuffer& buffer, const RunConfig& cfg);

// Full protocol: base session (or the provided cached one), then every
// incremental session with evaluation over all seen classes.
MetricsReport run_benchmark(const Benchmark& bench, const RunConfig& cfg,
                            const BaseModel* cached_base = nullptr);

}  // namespace fscil
