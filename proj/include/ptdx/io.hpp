#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ptdx/tensor.hpp"

namespace ptdx {

// Little-endian primitives shared by the tensor and checkpoint formats.
// Doubles travel as their IEEE-754 bit pattern, so round trips are bit-exact.
void write_u32(std::ostream& os, uint32_t v);
void write_u64(std::ostream& os, uint64_t v);
void write_i64(std::ostream& os, int64_t v);
void write_f64(std::ostream& os, double v);
void write_f64v(std::ostream& os, const std::vector<double>& v);
void write_str(std::ostream& os, const std::string& s);  // u64 length prefix

uint32_t read_u32(std::istream& is);
uint64_t read_u64(std::istream& is);
int64_t read_i64(std::istream& is);
double read_f64(std::istream& is);
std::vector<double> read_f64v(std::istream& is, uint64_t count);
std::string read_str(std::istream& is);

// Tensor container: magic, version, shape header, raw little-endian doubles.
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

// Min-max normalized 8-bit image writers. write_pgm takes [H, W] or
// [1, H, W]; write_ppm takes [3, H, W]. A constant image maps to black.
void write_pgm(const std::string& path, const Tensor& image);
void write_ppm(const std::string& path, const Tensor& image);

}  // namespace ptdx
