#include "fscil/datagen.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "fscil/rng.hpp"

namespace fscil {

void SyntheticSpec::validate() const {
  if (n_base == 0) throw ConfigError("spec.n_base: must be positive");
  if (n_way == 0) throw ConfigError("spec.n_way: must be positive");
  if (k_shot == 0) throw ConfigError("spec.k_shot: must be positive");
  if (img_h == 0 || img_w == 0 || img_c == 0) throw ConfigError("spec.img: dims must be positive");
  if (grid == 0 || grid > img_h || grid > img_w) {
    throw ConfigError("spec.grid: must be in [1, min(img_h, img_w)]");
  }
  if (noise_sigma < 0.0) throw ConfigError("spec.noise_sigma: must be nonnegative");
  if (queries_per_class == 0) throw ConfigError("spec.queries_per_class: must be positive");
  if (base_shots == 0) throw ConfigError("spec.base_shots: must be positive");
  if (total_classes() > 0xffff) throw ConfigError("spec: class count exceeds the u16 label range");
}

void Benchmark::validate() const {
  if (n_base == 0 || img_h == 0 || img_w == 0 || img_c == 0) {
    throw DataError("benchmark: empty geometry");
  }
  std::vector<std::size_t> base_count(n_base, 0);
  for (const LabeledImage& li : base_train) {
    if (li.label < 0 || static_cast<std::size_t>(li.label) >= n_base) {
      throw DataError("benchmark: base label outside [0, n_base)");
    }
    ++base_count[static_cast<std::size_t>(li.label)];
  }
  for (std::size_t c = 0; c < n_base; ++c) {
    if (base_count[c] == 0) throw DataError("benchmark: base class without examples");
  }
  if (session_sets.size() != sessions) throw DataError("benchmark: session count mismatch");
  for (std::size_t t = 0; t < sessions; ++t) {
    std::size_t lo = n_base + t * n_way, hi = lo + n_way;
    if (session_sets[t].size() != n_way * k_shot) {
      throw DataError("benchmark: session " + std::to_string(t + 1) + " is not exactly N-way K-shot");
    }
    std::vector<std::size_t> counts(n_way, 0);
    for (const LabeledImage& li : session_sets[t]) {
      std::size_t l = static_cast<std::size_t>(li.label);
      if (li.label < 0 || l < lo || l >= hi) {
        throw DataError("benchmark: session " + std::to_string(t + 1) +
                        " label outside its disjoint class range");
      }
      ++counts[l - lo];
    }
    for (std::size_t c = 0; c < n_way; ++c) {
      if (counts[c] != k_shot) {
        throw DataError("benchmark: session " + std::to_string(t + 1) + " class " +
                        std::to_string(lo + c) + " does not have exactly k_shot examples");
      }
    }
  }
  if (query_sets.size() != total_classes()) throw DataError("benchmark: query set count mismatch");
  for (std::size_t c = 0; c < query_sets.size(); ++c) {
    if (query_sets[c].empty()) throw DataError("benchmark: class without queries");
    for (const LabeledImage& li : query_sets[c]) {
      if (li.label != static_cast<int>(c)) throw DataError("benchmark: query label mismatch");
    }
  }
}

namespace {

double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

// Smooth class texture: grid x grid uniform control points, bilinear upsample.
Tensor class_texture(const SyntheticSpec& spec, std::uint64_t seed, std::size_t cls) {
  auto rng = make_rng(mix_seed(seed, 0xc1a55ULL, cls));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::size_t g = spec.grid;
  std::vector<double> ctrl(spec.img_c * g * g);
  for (double& v : ctrl) v = uni(rng);
  Tensor out({spec.img_c, spec.img_h, spec.img_w});
  for (std::size_t ch = 0; ch < spec.img_c; ++ch) {
    for (std::size_t y = 0; y < spec.img_h; ++y) {
      double gy = (static_cast<double>(y) + 0.5) * static_cast<double>(g) /
                      static_cast<double>(spec.img_h) -
                  0.5;
      double fy = std::floor(gy);
      std::size_t y0 = gy <= 0.0 ? 0 : std::min<std::size_t>(static_cast<std::size_t>(fy), g - 1);
      std::size_t y1 = std::min(y0 + 1, g - 1);
      double wy = gy <= 0.0 ? 0.0 : std::min(1.0, gy - static_cast<double>(y0));
      for (std::size_t x = 0; x < spec.img_w; ++x) {
        double gx = (static_cast<double>(x) + 0.5) * static_cast<double>(g) /
                        static_cast<double>(spec.img_w) -
                    0.5;
        double fx = std::floor(gx);
        std::size_t x0 =
            gx <= 0.0 ? 0 : std::min<std::size_t>(static_cast<std::size_t>(fx), g - 1);
        std::size_t x1 = std::min(x0 + 1, g - 1);
        double wx = gx <= 0.0 ? 0.0 : std::min(1.0, gx - static_cast<double>(x0));
        double v00 = ctrl[(ch * g + y0) * g + x0];
        double v01 = ctrl[(ch * g + y0) * g + x1];
        double v10 = ctrl[(ch * g + y1) * g + x0];
        double v11 = ctrl[(ch * g + y1) * g + x1];
        double top = v00 + wx * (v01 - v00);
        double bot = v10 + wx * (v11 - v10);
        out[(ch * spec.img_h + y) * spec.img_w + x] = top + wy * (bot - top);
      }
    }
  }
  return out;
}

LabeledImage noisy_sample(const SyntheticSpec& spec, const Tensor& texture, int label,
                          std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  Tensor img(std::vector<std::size_t>(texture.shape()));
  for (std::size_t i = 0; i < texture.size(); ++i) {
    double v = texture[i] + spec.noise_sigma * noise(rng);
    img[i] = quantize(std::min(1.0, std::max(0.0, v)));
  }
  return LabeledImage{std::move(img), label};
}

}  // namespace

Benchmark generate(const SyntheticSpec& spec) { return generate(spec, spec.seed); }

Benchmark generate(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Benchmark bench;
  bench.img_h = spec.img_h;
  bench.img_w = spec.img_w;
  bench.img_c = spec.img_c;
  bench.n_base = spec.n_base;
  bench.n_way = spec.n_way;
  bench.k_shot = spec.k_shot;
  bench.sessions = spec.sessions;

  std::size_t classes = spec.total_classes();
  std::vector<Tensor> textures;
  textures.reserve(classes);
  for (std::size_t c = 0; c < classes; ++c) textures.push_back(class_texture(spec, seed, c));

  // Train and query draws come from disjoint substreams per class.
  auto train_rng = [&](std::size_t c) { return make_rng(mix_seed(seed, 0x7a11ULL, c)); };
  auto query_rng = [&](std::size_t c) { return make_rng(mix_seed(seed, 0x9e1dULL, c)); };

  for (std::size_t c = 0; c < spec.n_base; ++c) {
    auto rng = train_rng(c);
    for (std::size_t i = 0; i < spec.base_shots; ++i) {
      bench.base_train.push_back(noisy_sample(spec, textures[c], static_cast<int>(c), rng));
    }
  }
  for (std::size_t t = 0; t < spec.sessions; ++t) {
    std::vector<LabeledImage> set;
    for (std::size_t k = 0; k < spec.n_way; ++k) {
      std::size_t c = spec.n_base + t * spec.n_way + k;
      auto rng = train_rng(c);
      for (std::size_t i = 0; i < spec.k_shot; ++i) {
        set.push_back(noisy_sample(spec, textures[c], static_cast<int>(c), rng));
      }
    }
    bench.session_sets.push_back(std::move(set));
  }
  for (std::size_t c = 0; c < classes; ++c) {
    auto rng = query_rng(c);
    std::vector<LabeledImage> set;
    for (std::size_t i = 0; i < spec.queries_per_class; ++i) {
      set.push_back(noisy_sample(spec, textures[c], static_cast<int>(c), rng));
    }
    bench.query_sets.push_back(std::move(set));
  }
  bench.validate();
  return bench;
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t off = 0;

  void need(std::size_t n) const {
    if (off + n > bytes.size()) {
      throw FormatError("dataset: truncated at offset " + std::to_string(off));
    }
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes[off] | (bytes[off + 1] << 8));
    off += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[off + i]) << (8 * i);
    off += 4;
    return v;
  }
  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

void put_image(std::vector<std::uint8_t>& out, const LabeledImage& li) {
  put_u16(out, static_cast<std::uint16_t>(li.label));
  for (std::size_t i = 0; i < li.image.size(); ++i) {
    put_f32(out, static_cast<float>(li.image[i]));
  }
}

LabeledImage read_image(Reader& r, std::size_t c, std::size_t h, std::size_t w) {
  LabeledImage li;
  li.label = static_cast<int>(r.u16());
  li.image = Tensor({c, h, w});
  for (std::size_t i = 0; i < li.image.size(); ++i) li.image[i] = static_cast<double>(r.f32());
  return li;
}

}  // namespace

std::vector<std::uint8_t> serialize(const Benchmark& bench) {
  bench.validate();
  std::size_t n_images = bench.base_train.size();
  for (const auto& s : bench.session_sets) n_images += s.size();
  std::size_t queries = 0;
  for (const auto& q : bench.query_sets) queries += q.size();
  n_images += queries;
  if (queries % bench.total_classes() != 0) {
    throw FormatError("dataset: query count must be constant per class");
  }

  std::vector<std::uint8_t> out;
  out.reserve(38 + n_images * (2 + 4 * bench.img_c * bench.img_h * bench.img_w));
  out.insert(out.end(), {'F', 'S', 'D', '1'});
  put_u32(out, static_cast<std::uint32_t>(bench.total_classes()));
  put_u32(out, static_cast<std::uint32_t>(n_images));
  put_u16(out, static_cast<std::uint16_t>(bench.img_h));
  put_u16(out, static_cast<std::uint16_t>(bench.img_w));
  put_u16(out, static_cast<std::uint16_t>(bench.img_c));
  put_u32(out, static_cast<std::uint32_t>(bench.k_shot));
  put_u32(out, static_cast<std::uint32_t>(bench.n_way));
  put_u32(out, static_cast<std::uint32_t>(bench.sessions));
  put_u32(out, static_cast<std::uint32_t>(bench.n_base));
  put_u32(out, static_cast<std::uint32_t>(bench.base_train.size()));
  for (const LabeledImage& li : bench.base_train) put_image(out, li);
  for (const auto& s : bench.session_sets) {
    for (const LabeledImage& li : s) put_image(out, li);
  }
  for (const auto& q : bench.query_sets) {
    for (const LabeledImage& li : q) put_image(out, li);
  }
  return out;
}

Benchmark deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r{bytes};
  r.need(4);
  if (bytes[0] != 'F' || bytes[1] != 'S' || bytes[2] != 'D' || bytes[3] != '1') {
    throw FormatError("dataset: bad magic at offset 0");
  }
  r.off = 4;
  std::size_t classes = r.u32();
  std::size_t n_images = r.u32();
  std::size_t h = r.u16();
  std::size_t w = r.u16();
  std::size_t c = r.u16();
  Benchmark bench;
  bench.img_h = h;
  bench.img_w = w;
  bench.img_c = c;
  bench.k_shot = r.u32();
  bench.n_way = r.u32();
  bench.sessions = r.u32();
  bench.n_base = r.u32();
  std::size_t base_images = r.u32();

  if (bench.total_classes() != classes) {
    throw FormatError("dataset: class count disagrees with n_base + sessions * n_way");
  }
  std::size_t session_images = bench.sessions * bench.n_way * bench.k_shot;
  if (n_images < base_images + session_images) {
    throw FormatError("dataset: image count smaller than the train sections");
  }
  std::size_t queries = n_images - base_images - session_images;
  if (classes == 0 || queries % classes != 0) {
    throw FormatError("dataset: query section does not divide evenly across classes");
  }
  std::size_t per_class = queries / classes;
  if (per_class == 0) throw FormatError("dataset: no queries");

  for (std::size_t i = 0; i < base_images; ++i) {
    bench.base_train.push_back(read_image(r, c, h, w));
  }
  for (std::size_t t = 0; t < bench.sessions; ++t) {
    std::vector<LabeledImage> set;
    for (std::size_t i = 0; i < bench.n_way * bench.k_shot; ++i) {
      set.push_back(read_image(r, c, h, w));
    }
    bench.session_sets.push_back(std::move(set));
  }
  for (std::size_t cl = 0; cl < classes; ++cl) {
    std::vector<LabeledImage> set;
    for (std::size_t i = 0; i < per_class; ++i) set.push_back(read_image(r, c, h, w));
    bench.query_sets.push_back(std::move(set));
  }
  if (r.off != bytes.size()) {
    throw FormatError("dataset: trailing bytes at offset " + std::to_string(r.off));
  }
  try {
    bench.validate();
  } catch (const DataError& e) {
    throw FormatError(std::string("dataset: ") + e.what());
  }
  return bench;
}

void save_benchmark(const Benchmark& bench, const std::string& path) {
  std::vector<std::uint8_t> bytes = serialize(bench);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write failed: " + path);
}

Benchmark load_benchmark(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string benchmark_hash(const Benchmark& bench) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(serialize(bench))));
  return std::string(buf);
}

}  // namespace fscil
