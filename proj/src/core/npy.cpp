#include "core/npy.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace xstab {

namespace {

constexpr char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

std::string header_dict(const std::string& descr, const std::vector<std::size_t>& shape) {
  std::ostringstream s;
  s << "{'descr': '" << descr << "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    s << shape[i];
    if (shape.size() == 1 || i + 1 < shape.size()) s << ",";
    if (i + 1 < shape.size()) s << " ";
  }
  s << "), }";
  return s.str();
}

void write_npy(const std::filesystem::path& path, const std::string& descr,
               const std::vector<std::size_t>& shape, const void* data, std::size_t nbytes) {
  if (shape.empty()) fail(Err::InvalidParameter, "save_npy: empty shape");
  std::string dict = header_dict(descr, shape);
  // total header (magic 6 + version 2 + len 2 + dict) padded to a 64-byte multiple,
  // dict terminated by '\n'.
  std::size_t unpadded = 10 + dict.size() + 1;
  std::size_t padded = (unpadded + 63) / 64 * 64;
  dict.append(padded - unpadded, ' ');
  dict.push_back('\n');
  if (dict.size() > 65535) fail(Err::Format, "save_npy: header too long");

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Err::Io, "cannot write " + path.string());
  out.write(kMagic, 6);
  out.put('\x01');
  out.put('\x00');
  const std::uint16_t hlen = static_cast<std::uint16_t>(dict.size());
  out.put(static_cast<char>(hlen & 0xff));
  out.put(static_cast<char>(hlen >> 8));
  out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(nbytes));
  if (!out) fail(Err::Io, "short write: " + path.string());
}

// Pulls the quoted value following `key` out of the header dict.
std::string dict_str(const std::string& dict, const std::string& key,
                     const std::filesystem::path& path) {
  std::size_t k = dict.find("'" + key + "'");
  if (k == std::string::npos) fail(Err::Format, "NPY header missing " + key + ": " + path.string());
  std::size_t colon = dict.find(':', k);
  if (colon == std::string::npos) fail(Err::Format, "bad NPY header: " + path.string());
  std::size_t i = colon + 1;
  while (i < dict.size() && (dict[i] == ' ' || dict[i] == '\t')) ++i;
  if (i >= dict.size()) fail(Err::Format, "bad NPY header: " + path.string());
  if (dict[i] == '\'' || dict[i] == '"') {
    const char q = dict[i];
    std::size_t end = dict.find(q, i + 1);
    if (end == std::string::npos) fail(Err::Format, "bad NPY header: " + path.string());
    return dict.substr(i + 1, end - i - 1);
  }
  std::size_t end = i;
  while (end < dict.size() && dict[end] != ',' && dict[end] != '}') {
    if (dict[end] == '(') {
      end = dict.find(')', end);
      if (end == std::string::npos) fail(Err::Format, "bad NPY header: " + path.string());
    }
    ++end;
  }
  return dict.substr(i, end - i);
}

}  // namespace

NpyArray load_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::Io, "cannot open " + path.string());
  char magic[6];
  unsigned char version[2];
  in.read(magic, 6);
  in.read(reinterpret_cast<char*>(version), 2);
  if (!in || std::memcmp(magic, kMagic, 6) != 0)
    fail(Err::Format, "not an NPY file: " + path.string());
  if (version[0] != 1 || version[1] != 0)
    fail(Err::Format, "unsupported NPY version: " + path.string());
  unsigned char lenb[2];
  in.read(reinterpret_cast<char*>(lenb), 2);
  if (!in) fail(Err::Format, "truncated NPY header: " + path.string());
  const std::size_t hlen = lenb[0] | (static_cast<std::size_t>(lenb[1]) << 8);
  std::string dict(hlen, '\0');
  in.read(dict.data(), static_cast<std::streamsize>(hlen));
  if (!in) fail(Err::Format, "truncated NPY header: " + path.string());

  NpyArray arr;
  arr.dtype = dict_str(dict, "descr", path);
  if (arr.dtype != "<f8" && arr.dtype != "|u1")
    fail(Err::Format, "unsupported NPY dtype '" + arr.dtype + "': " + path.string());
  const std::string order = dict_str(dict, "fortran_order", path);
  if (order.substr(0, 5) != "False")
    fail(Err::Format, "Fortran-order NPY not supported: " + path.string());

  std::string shape_s = dict_str(dict, "shape", path);
  std::size_t lp = shape_s.find('(');
  std::size_t rp = shape_s.find(')');
  if (lp == std::string::npos || rp == std::string::npos || rp < lp)
    fail(Err::Format, "bad NPY shape: " + path.string());
  std::string inner = shape_s.substr(lp + 1, rp - lp - 1);
  std::istringstream ss(inner);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t b = tok.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    arr.shape.push_back(static_cast<std::size_t>(std::stoull(tok.substr(b))));
  }
  if (arr.shape.empty()) fail(Err::Format, "scalar NPY not supported: " + path.string());

  const std::size_t n = arr.element_count();
  if (arr.dtype == "<f8") {
    arr.f64.resize(n);
    in.read(reinterpret_cast<char*>(arr.f64.data()), static_cast<std::streamsize>(n * 8));
  } else {
    arr.u8.resize(n);
    in.read(reinterpret_cast<char*>(arr.u8.data()), static_cast<std::streamsize>(n));
  }
  if (!in) fail(Err::Format, "truncated NPY data: " + path.string());
  return arr;
}

void save_npy(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
              const std::vector<double>& data) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != data.size()) fail(Err::ShapeMismatch, "save_npy: shape/data mismatch");
  write_npy(path, "<f8", shape, data.data(), data.size() * 8);
}

void save_npy(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
              const std::vector<std::uint8_t>& data) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != data.size()) fail(Err::ShapeMismatch, "save_npy: shape/data mismatch");
  write_npy(path, "|u1", shape, data.data(), data.size());
}

SaliencyMap load_map_npy(const std::filesystem::path& path) {
  NpyArray arr = load_npy(path);
  if (arr.dtype != "<f8" || arr.shape.size() != 2)
    fail(Err::Format, "expected 2-D float64 NPY: " + path.string());
  SaliencyMap m(arr.shape[0], arr.shape[1]);
  m.data = std::move(arr.f64);
  return m;
}

void save_map_npy(const SaliencyMap& m, const std::filesystem::path& path) {
  save_npy(path, {m.height, m.width}, m.data);
}

ActivationTensor load_tensor_npy(const std::filesystem::path& path) {
  NpyArray arr = load_npy(path);
  if (arr.dtype != "<f8" || arr.shape.size() != 3)
    fail(Err::Format, "expected 3-D float64 NPY: " + path.string());
  ActivationTensor t(arr.shape[0], arr.shape[1], arr.shape[2]);
  t.data = std::move(arr.f64);
  return t;
}

void save_tensor_npy(const ActivationTensor& t, const std::filesystem::path& path) {
  save_npy(path, {t.channels, t.height, t.width}, t.data);
}

}  // namespace xstab
