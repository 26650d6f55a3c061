#include "fscil/snapshot.hpp"

#include <cstring>
#include <fstream>

namespace fscil {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t off = 0;

  void need(std::size_t n) const {
    if (off + n > bytes.size()) {
      throw FormatError("snapshot: truncated at offset " + std::to_string(off));
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[off + i]) << (8 * i);
    off += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[off + i]) << (8 * i);
    off += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + off), n);
    off += n;
    return s;
  }
};

}  // namespace

std::vector<std::uint8_t> serialize_snapshot(const std::vector<NamedTensor>& records) {
  std::vector<std::uint8_t> out{'F', 'S', 'W', '1'};
  put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const NamedTensor& r : records) {
    put_u32(out, static_cast<std::uint32_t>(r.id.size()));
    out.insert(out.end(), r.id.begin(), r.id.end());
    put_u32(out, static_cast<std::uint32_t>(r.value.ndim()));
    for (std::size_t i = 0; i < r.value.ndim(); ++i) {
      put_u32(out, static_cast<std::uint32_t>(r.value.dim(i)));
    }
    for (std::size_t i = 0; i < r.value.size(); ++i) put_f64(out, r.value[i]);
  }
  return out;
}

std::vector<NamedTensor> deserialize_snapshot(const std::vector<std::uint8_t>& bytes) {
  Reader r{bytes};
  r.need(4);
  if (bytes[0] != 'F' || bytes[1] != 'S' || bytes[2] != 'W' || bytes[3] != '1') {
    throw FormatError("snapshot: bad magic at offset 0");
  }
  r.off = 4;
  std::size_t count = r.u32();
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    NamedTensor rec;
    rec.id = r.str(r.u32());
    std::size_t ndim = r.u32();
    std::vector<std::size_t> shape;
    shape.reserve(ndim);
    std::size_t total = 1;
    for (std::size_t i = 0; i < ndim; ++i) {
      shape.push_back(r.u32());
      total *= shape.back();
    }
    if (ndim == 0) total = 0;
    std::vector<double> values(total);
    for (std::size_t i = 0; i < total; ++i) values[i] = r.f64();
    rec.value = Tensor(std::move(shape), std::move(values));
    out.push_back(std::move(rec));
  }
  if (r.off != bytes.size()) {
    throw FormatError("snapshot: trailing bytes at offset " + std::to_string(r.off));
  }
  return out;
}

void save_snapshot(const std::string& path, const std::vector<NamedTensor>& records) {
  std::vector<std::uint8_t> bytes = serialize_snapshot(records);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write failed: " + path);
}

std::vector<NamedTensor> load_snapshot(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return deserialize_snapshot(bytes);
}

std::vector<NamedTensor> snapshot_params(const std::vector<const Parameter*>& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back(NamedTensor{p->id, p->value});
  return out;
}

}  // namespace fscil
