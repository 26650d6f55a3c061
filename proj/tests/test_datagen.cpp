#include <cstdio>
#include <filesystem>
#include <string>

#include <doctest.h>

#include "fscil/datagen.hpp"

using namespace fscil;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.n_base = 4;
  spec.n_way = 2;
  spec.k_shot = 3;
  spec.sessions = 2;
  spec.img_h = 8;
  spec.img_w = 8;
  spec.img_c = 1;
  spec.grid = 3;
  spec.noise_sigma = 0.1;
  spec.queries_per_class = 10;
  spec.base_shots = 6;
  spec.seed = 21;
  return spec;
}

double sq_dist(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("spec validation") {
  SyntheticSpec spec = small_spec();
  CHECK_NOTHROW(spec.validate());
  spec.grid = 9;  // larger than the image
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = small_spec();
  spec.n_way = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = small_spec();
  spec.noise_sigma = -1.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = small_spec();
  spec.n_base = 70000;  // label would overflow the on-disk u16
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("generated benchmarks have the declared structure") {
  SyntheticSpec spec = small_spec();
  Benchmark bench = generate(spec);
  CHECK_NOTHROW(bench.validate());
  CHECK(bench.total_classes() == 8);
  CHECK(bench.base_train.size() == 4 * 6);
  REQUIRE(bench.session_sets.size() == 2);
  CHECK(bench.session_sets[0].size() == 2 * 3);
  CHECK(bench.session_sets[1].size() == 2 * 3);
  REQUIRE(bench.query_sets.size() == 8);
  for (const auto& q : bench.query_sets) CHECK(q.size() == 10);
  // Session 1 carries classes 4,5; session 2 carries 6,7.
  CHECK(bench.session_sets[0].front().label >= 4);
  CHECK(bench.session_sets[1].front().label >= 6);
}

TEST_CASE("zero noise collapses every sample onto the class texture") {
  SyntheticSpec spec = small_spec();
  spec.noise_sigma = 0.0;
  Benchmark bench = generate(spec);
  CHECK(bit_equal(bench.base_train[0].image, bench.base_train[1].image));
  CHECK(bit_equal(bench.base_train[0].image, bench.query_sets[0][3].image));
  // Different classes still see different textures.
  CHECK_FALSE(bit_equal(bench.base_train[0].image, bench.base_train[6].image));
}

TEST_CASE("generation is deterministic in the seed") {
  SyntheticSpec spec = small_spec();
  CHECK(serialize(generate(spec)) == serialize(generate(spec)));
  CHECK(serialize(generate(spec, 21)) == serialize(generate(spec)));
  CHECK(serialize(generate(spec, 22)) != serialize(generate(spec)));
}

TEST_CASE("classes stay separable at moderate noise") {
  SyntheticSpec spec = small_spec();
  Benchmark bench = generate(spec);
  // Per-class centroid of the training samples stands in for the texture.
  std::vector<Tensor> centroid;
  for (std::size_t c = 0; c < 4; ++c) {
    Tensor m({1, 8, 8});
    for (std::size_t i = 0; i < 6; ++i) {
      const Tensor& img = bench.base_train[c * 6 + i].image;
      for (std::size_t p = 0; p < m.size(); ++p) m[p] += img[p] / 6.0;
    }
    centroid.push_back(std::move(m));
  }
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t k = 0; k < 2; ++k) {
      Tensor m({1, 8, 8});
      for (std::size_t i = 0; i < 3; ++i) {
        const Tensor& img = bench.session_sets[t][k * 3 + i].image;
        for (std::size_t p = 0; p < m.size(); ++p) m[p] += img[p] / 3.0;
      }
      centroid.push_back(std::move(m));
    }
  }
  std::size_t hits = 0, total = 0;
  for (std::size_t c = 0; c < 8; ++c) {
    for (const LabeledImage& q : bench.query_sets[c]) {
      std::size_t best = 0;
      double bd = sq_dist(q.image, centroid[0]);
      for (std::size_t o = 1; o < 8; ++o) {
        double d = sq_dist(q.image, centroid[o]);
        if (d < bd) {
          bd = d;
          best = o;
        }
      }
      ++total;
      hits += best == c;
    }
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(total) >= 0.9);
}

TEST_CASE("serialization round trip is lossless") {
  Benchmark bench = generate(small_spec());
  std::vector<std::uint8_t> bytes = serialize(bench);

  std::size_t n_images = bench.base_train.size() + 2 * 6 + 8 * 10;
  CHECK(bytes.size() == 38 + n_images * (2 + 4 * 64));

  Benchmark back = deserialize(bytes);
  CHECK(back.n_base == bench.n_base);
  CHECK(back.k_shot == bench.k_shot);
  CHECK(back.sessions == bench.sessions);
  CHECK(serialize(back) == bytes);
  CHECK(bit_equal(back.base_train[5].image, bench.base_train[5].image));
  CHECK(back.session_sets[1][2].label == bench.session_sets[1][2].label);
}

TEST_CASE("malformed dataset bytes are rejected with offsets") {
  Benchmark bench = generate(small_spec());
  std::vector<std::uint8_t> bytes = serialize(bench);

  std::vector<std::uint8_t> bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_WITH_AS(deserialize(bad), doctest::Contains("bad magic"), FormatError);

  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + 100);
  CHECK_THROWS_WITH_AS(deserialize(truncated), doctest::Contains("truncated"), FormatError);

  std::vector<std::uint8_t> trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_WITH_AS(deserialize(trailing), doctest::Contains("trailing"), FormatError);

  // Corrupting the class count breaks the header arithmetic.
  std::vector<std::uint8_t> wrong = bytes;
  wrong[4] = 200;
  CHECK_THROWS_AS(deserialize(wrong), FormatError);
}

TEST_CASE("dataset file round trip") {
  Benchmark bench = generate(small_spec());
  std::string path = temp_path("fscil_test_dataset.fsd");
  save_benchmark(bench, path);
  Benchmark back = load_benchmark(path);
  CHECK(serialize(back) == serialize(bench));
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_benchmark(path), DataError);
}

TEST_CASE("content hash is stable and seed-sensitive") {
  SyntheticSpec spec = small_spec();
  std::string h1 = benchmark_hash(generate(spec));
  std::string h2 = benchmark_hash(generate(spec));
  CHECK(h1.size() == 16);
  CHECK(h1 == h2);
  CHECK(benchmark_hash(generate(spec, 99)) != h1);

  std::vector<std::uint8_t> empty;
  CHECK(fnv1a(empty) == 0xcbf29ce484222325ULL);
}
