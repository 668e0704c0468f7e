#include "ptdx/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ptdx {

namespace {

constexpr char kTensorMagic[4] = {'P', 'T', 'N', 'S'};
constexpr uint32_t kTensorVersion = 1;

void write_le(std::ostream& os, uint64_t v, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = char((v >> (8 * i)) & 0xff);
  os.write(buf, bytes);
}

uint64_t read_le(std::istream& is, int bytes) {
  char buf[8];
  is.read(buf, bytes);
  if (!is) throw std::runtime_error("unexpected end of file");
  uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= uint64_t(uint8_t(buf[i])) << (8 * i);
  return v;
}

}  // namespace

void write_u32(std::ostream& os, uint32_t v) { write_le(os, v, 4); }
void write_u64(std::ostream& os, uint64_t v) { write_le(os, v, 8); }
void write_i64(std::ostream& os, int64_t v) { write_le(os, uint64_t(v), 8); }
void write_f64(std::ostream& os, double v) { write_le(os, std::bit_cast<uint64_t>(v), 8); }

void write_f64v(std::ostream& os, const std::vector<double>& v) {
  for (double x : v) write_f64(os, x);
}

void write_str(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), std::streamsize(s.size()));
}

uint32_t read_u32(std::istream& is) { return uint32_t(read_le(is, 4)); }
uint64_t read_u64(std::istream& is) { return read_le(is, 8); }
int64_t read_i64(std::istream& is) { return int64_t(read_le(is, 8)); }
double read_f64(std::istream& is) { return std::bit_cast<double>(read_le(is, 8)); }

std::vector<double> read_f64v(std::istream& is, uint64_t count) {
  std::vector<double> v(count);
  for (auto& x : v) x = read_f64(is);
  return v;
}

std::string read_str(std::istream& is) {
  uint64_t n = read_u64(is);
  if (n > (1ULL << 32)) throw std::runtime_error("implausible string length in file");
  std::string s(n, '\0');
  is.read(s.data(), std::streamsize(n));
  if (!is) throw std::runtime_error("unexpected end of file");
  return s;
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(kTensorMagic, 4);
  write_u32(os, kTensorVersion);
  write_u32(os, uint32_t(t.ndim()));
  for (int64_t d : t.shape()) write_i64(os, d);
  write_f64v(os, t.data());
  if (!os) throw std::runtime_error("write failed for " + path);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || !std::equal(magic, magic + 4, kTensorMagic))
    throw std::runtime_error(path + " is not a tensor file");
  uint32_t version = read_u32(is);
  if (version != kTensorVersion)
    throw std::runtime_error("unsupported tensor file version " + std::to_string(version));
  uint32_t ndim = read_u32(is);
  if (ndim > 16) throw std::runtime_error("implausible tensor rank in " + path);
  Shape shape(ndim);
  for (auto& d : shape) {
    d = read_i64(is);
    if (d <= 0) throw std::runtime_error("invalid dimension in " + path);
  }
  Tensor t = Tensor::zeros(shape);
  t.mutable_data() = read_f64v(is, uint64_t(t.numel()));
  return t;
}

namespace {

std::vector<uint8_t> quantize_min_max(const std::vector<double>& v) {
  double lo = v[0], hi = v[0];
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  std::vector<uint8_t> out(v.size());
  const double span = hi - lo;
  for (size_t i = 0; i < v.size(); ++i)
    out[i] = span > 0.0 ? uint8_t(std::lround((v[i] - lo) / span * 255.0)) : 0;
  return out;
}

}  // namespace

void write_pgm(const std::string& path, const Tensor& image) {
  Shape s = image.shape();
  if (s.size() == 3 && s[0] == 1) s = {s[1], s[2]};
  if (s.size() != 2)
    throw std::invalid_argument("grayscale writer expects [H,W] or [1,H,W], got " +
                                shape_str(image.shape()));
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "P5\n" << s[1] << " " << s[0] << "\n255\n";
  auto q = quantize_min_max(image.data());
  os.write(reinterpret_cast<const char*>(q.data()), std::streamsize(q.size()));
  if (!os) throw std::runtime_error("write failed for " + path);
}

void write_ppm(const std::string& path, const Tensor& image) {
  const Shape& s = image.shape();
  if (s.size() != 3 || s[0] != 3)
    throw std::invalid_argument("color writer expects [3,H,W], got " + shape_str(s));
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  const int64_t h = s[1], w = s[2];
  os << "P6\n" << w << " " << h << "\n255\n";
  auto q = quantize_min_max(image.data());
  // Planar [3,H,W] to interleaved RGB rows.
  std::vector<uint8_t> row(size_t(w) * 3);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c)
        row[size_t(x * 3 + c)] = q[size_t((c * h + y) * w + x)];
    os.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

}  // namespace ptdx
