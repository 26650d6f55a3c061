#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "fscil/model.hpp"
#include "fscil/rng.hpp"

using namespace fscil;

namespace {

ExtractorConfig tiny_mlp() {
  ExtractorConfig cfg;
  cfg.kind = ExtractorKind::mlp;
  cfg.input_c = 1;
  cfg.input_h = 4;
  cfg.input_w = 4;
  cfg.hidden = {12};
  cfg.feature_dim = 6;
  return cfg;
}

// Three linearly separable classes on 4x4 images: class c lights row c.
void separable_data(std::vector<Tensor>& images, std::vector<int>& labels, std::size_t per_class) {
  auto rng = make_rng(77);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Tensor img({1, 4, 4});
      for (std::size_t p = 0; p < img.size(); ++p) img[p] = 0.1 + jitter(rng);
      for (std::size_t x = 0; x < 4; ++x) img[static_cast<std::size_t>(c) * 4 + x] = 1.0;
      images.push_back(std::move(img));
      labels.push_back(c);
    }
  }
}

double train_accuracy(const FeatureExtractor& ext, const Tensor& head, double scale,
                      const std::vector<Tensor>& images, const std::vector<int>& labels) {
  std::vector<const Tensor*> ptrs;
  for (const Tensor& t : images) ptrs.push_back(&t);
  Tensor logits = cosine_logits_values(ext.forward_values(stack_images(ptrs)), head, scale);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.dim(1); ++c) {
      if (logits(r, c) > logits(r, best)) best = c;
    }
    hits += best == static_cast<std::size_t>(labels[r]);
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace

TEST_CASE("extractor config validation") {
  ExtractorConfig cfg = tiny_mlp();
  cfg.hidden.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_mlp();
  cfg.feature_dim = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_mlp();
  cfg.kind = ExtractorKind::conv_small;
  cfg.input_h = 6;  // two pooling layers need divisibility by 4
  cfg.hidden = {4, 4};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("extractor init is seeded and clone is deep") {
  FeatureExtractor a(tiny_mlp(), 5);
  FeatureExtractor b(tiny_mlp(), 5);
  FeatureExtractor c(tiny_mlp(), 6);
  auto pa = a.params();
  auto pb = b.params();
  auto pc = c.params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->id == pb[i]->id);
    CHECK(bit_equal(pa[i]->value, pb[i]->value));
  }
  CHECK_FALSE(bit_equal(pa[0]->value, pc[0]->value));

  FeatureExtractor d = a.clone();
  d.params()[0]->value[0] += 1.0;
  CHECK(a.params()[0]->value[0] != d.params()[0]->value[0]);
}

TEST_CASE("forward and forward_values agree bitwise") {
  FeatureExtractor ext(tiny_mlp(), 11);
  Tensor batch({2, 1, 4, 4});
  auto rng = make_rng(3);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = uni(rng);
  Tape tape;
  CHECK(bit_equal(tape.val(ext.forward(tape, batch)), ext.forward_values(batch)));

  Tensor bad({2, 1, 3, 4});
  CHECK_THROWS_AS(ext.forward_values(bad), ConfigError);
}

TEST_CASE("conv extractor produces the configured feature width") {
  ExtractorConfig cfg;
  cfg.kind = ExtractorKind::conv_small;
  cfg.input_c = 1;
  cfg.input_h = 8;
  cfg.input_w = 8;
  cfg.hidden = {4, 6};
  cfg.feature_dim = 5;
  FeatureExtractor ext(cfg, 21);
  Tensor batch = Tensor::filled({3, 1, 8, 8}, 0.5);
  Tensor feats = ext.forward_values(batch);
  CHECK(feats.shape() == std::vector<std::size_t>{3, 5});
}

TEST_CASE("cosine logits geometry") {
  double s = 16.0;
  Tensor f({1, 2}, {2.0, 0.0});
  Tensor w({2, 2}, {5.0, 0.0, 0.0, -3.0});  // col0 parallel to f, col1 orthogonal
  Tensor logits = cosine_logits_values(f, w, s);
  CHECK(logits(0, 0) == s);
  CHECK(logits(0, 1) == 0.0);

  // Rescaling features or columns must not move the logits meaningfully.
  Tensor f2({1, 2}, {20.0, 0.0});
  Tensor w2({2, 2}, {0.5, 0.0, 0.0, -300.0});
  CHECK(max_abs_diff(cosine_logits_values(f2, w2, s), logits) <= 1e-12);

  // 1-D feature vectors are accepted as a single row.
  Tensor f1({2}, {2.0, 0.0});
  CHECK(bit_equal(cosine_logits_values(f1, w, s), logits));
}

TEST_CASE("softmax_values rows are distributions") {
  Tensor logits({2, 3}, {5.0, 1.0, -2.0, 0.0, 0.0, 0.0});
  Tensor p = softmax_values(logits);
  for (std::size_t r = 0; r < 2; ++r) {
    double sum = p(r, 0) + p(r, 1) + p(r, 2);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
  CHECK(p(1, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("mean cross-entropy oracle") {
  Tape tape;
  VarId logits = tape.constant(Tensor({1, 2}, {0.0, 0.0}));
  VarId ce = cross_entropy_mean(tape, logits, {0});
  CHECK(tape.val(ce)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(cross_entropy_mean(tape, logits, {2}), DataError);
  CHECK_THROWS_AS(cross_entropy_mean(tape, logits, {0, 1}), DataError);
}

TEST_CASE("geometric transforms are distinct rotations that preserve pixels") {
  Tensor img({1, 4, 4});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i);

  CHECK(bit_equal(geometric_transform(img, 0, 4), img));
  Tensor r1 = geometric_transform(img, 1, 4);
  Tensor r2 = geometric_transform(img, 2, 4);
  Tensor r3 = geometric_transform(img, 3, 4);
  CHECK_FALSE(bit_equal(r1, img));
  CHECK_FALSE(bit_equal(r2, r1));
  CHECK_FALSE(bit_equal(r3, r2));
  // Four quarter turns compose to the identity.
  Tensor round = geometric_transform(geometric_transform(r2, 1, 4), 1, 4);
  CHECK(bit_equal(round, img));
  // Rotations permute pixels: sorted multisets match.
  std::vector<double> a(img.data(), img.data() + img.size());
  std::vector<double> b(r1.data(), r1.data() + r1.size());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);

  // Corner tracking for the 90-degree counterclockwise turn: (0,3) -> (0,0).
  CHECK(r1[0] == img[3]);

  // Half-turn pair keeps non-square shapes.
  Tensor rect({1, 2, 4});
  for (std::size_t i = 0; i < rect.size(); ++i) rect[i] = static_cast<double>(i);
  Tensor h = geometric_transform(rect, 1, 2);
  CHECK(h.shape() == rect.shape());
  CHECK(bit_equal(geometric_transform(h, 1, 2), rect));

  CHECK_THROWS_AS(geometric_transform(img, 0, 3), ConfigError);
  CHECK_THROWS_AS(geometric_transform(img, 4, 4), ContractViolation);
}

TEST_CASE("base lr schedule decays at the two milestones") {
  BaseTrainConfig cfg;
  cfg.epochs = 80;
  cfg.lr0 = 0.01;
  cfg.decay = 0.1;
  CHECK(base_lr_at(cfg, 0) == 0.01);
  CHECK(base_lr_at(cfg, 59) == 0.01);
  CHECK(base_lr_at(cfg, 60) == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(base_lr_at(cfg, 69) == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(base_lr_at(cfg, 70) == doctest::Approx(0.0001).epsilon(1e-12));
}

TEST_CASE("base training separates easy classes and is reproducible") {
  std::vector<Tensor> images;
  std::vector<int> labels;
  separable_data(images, labels, 10);

  BaseTrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 10;
  cfg.lr0 = 0.05;
  cfg.geo_transforms = 4;

  auto run = [&]() {
    FeatureExtractor ext(tiny_mlp(), 1);
    auto rng = make_rng(2);
    std::normal_distribution<double> dist(0.0, 0.4);
    Tensor hw({6, 3});
    for (std::size_t i = 0; i < hw.size(); ++i) hw[i] = dist(rng);
    Parameter head("head.base", hw);
    Parameter geo("head.geo", Tensor::filled({6, 4}, 0.1));
    base_train(ext, head, geo, images, labels, 3, cfg, 9);
    return std::pair<FeatureExtractor, Tensor>(std::move(ext), head.value);
  };
  auto [ext1, head1] = run();
  CHECK(train_accuracy(ext1, head1, cfg.cosine_scale, images, labels) >= 0.95);

  auto [ext2, head2] = run();
  CHECK(bit_equal(head1, head2));
  CHECK(bit_equal(ext1.params()[0]->value, ext2.params()[0]->value));
}

TEST_CASE("zero-epoch base training changes nothing") {
  std::vector<Tensor> images;
  std::vector<int> labels;
  separable_data(images, labels, 2);
  FeatureExtractor ext(tiny_mlp(), 1);
  Tensor before = ext.params()[0]->value;
  Parameter head("head.base", Tensor::filled({6, 3}, 0.2));
  Parameter geo("head.geo", Tensor::filled({6, 4}, 0.2));
  BaseTrainConfig cfg;
  cfg.epochs = 0;
  base_train(ext, head, geo, images, labels, 3, cfg, 9);
  CHECK(bit_equal(ext.params()[0]->value, before));
  CHECK(head.value[0] == 0.2);
}

TEST_CASE("base training input validation") {
  std::vector<Tensor> images;
  std::vector<int> labels;
  separable_data(images, labels, 2);
  FeatureExtractor ext(tiny_mlp(), 1);
  Parameter head("head.base", Tensor::filled({6, 3}, 0.2));
  Parameter geo("head.geo", Tensor::filled({6, 4}, 0.2));
  BaseTrainConfig cfg;
  cfg.epochs = 1;

  // A base class without examples.
  std::vector<Tensor> img2(images.begin(), images.begin() + 4);
  std::vector<int> lab2(labels.begin(), labels.begin() + 4);
  CHECK_THROWS_AS(base_train(ext, head, geo, img2, lab2, 3, cfg, 9), DataError);

  // Quarter turns need square inputs.
  ExtractorConfig rect_cfg = tiny_mlp();
  rect_cfg.input_h = 2;
  rect_cfg.input_w = 8;
  FeatureExtractor rect(rect_cfg, 1);
  std::vector<Tensor> rect_imgs;
  std::vector<int> rect_labels;
  for (int c = 0; c < 3; ++c) {
    rect_imgs.push_back(Tensor::filled({1, 2, 8}, 0.1 * (c + 1)));
    rect_labels.push_back(c);
  }
  CHECK_THROWS_AS(base_train(rect, head, geo, rect_imgs, rect_labels, 3, cfg, 9), ConfigError);
  cfg.geo_transforms = 2;
  Parameter geo2("head.geo", Tensor::filled({6, 2}, 0.2));
  base_train(rect, head, geo2, rect_imgs, rect_labels, 3, cfg, 9);  // half turns are fine
}

TEST_CASE("stack_images preserves order and rejects mixed shapes") {
  Tensor a = Tensor::filled({1, 2, 2}, 1.0);
  Tensor b = Tensor::filled({1, 2, 2}, 2.0);
  Tensor s = stack_images({&a, &b});
  CHECK(s.shape() == std::vector<std::size_t>{2, 1, 2, 2});
  CHECK(s(1, 0, 1, 1) == 2.0);
  Tensor c = Tensor::filled({1, 2, 3}, 3.0);
  CHECK_THROWS_AS(stack_images({&a, &c}), ConfigError);
  CHECK_THROWS_AS(stack_images({}), DataError);
}
