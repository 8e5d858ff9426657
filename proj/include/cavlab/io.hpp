#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "energy.hpp"
#include "field.hpp"

namespace cavlab {

namespace detail {

inline void write_f64_le(std::ostream& os, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char buf[8];
  std::memcpy(buf, &bits, 8);
  os.write(buf, 8);
}

inline double read_f64_le(std::istream& is) {
  char buf[8];
  is.read(buf, 8);
  if (!is) throw std::runtime_error("unexpected end of binary payload");
  std::uint64_t bits;
  std::memcpy(&bits, buf, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  double x;
  std::memcpy(&x, &bits, 8);
  return x;
}

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

} // namespace detail

/// CAVFIELD v1: one ASCII header line
///   CAVFIELD v1 dim shape lambda Lambda kind seed
/// followed by little-endian IEEE-754 doubles, cell entries in row-major
/// order with components interleaved (a11, a12, a22 in 2D; a11 in 1D).
inline void write_cavfield(std::ostream& os, const CoefficientField& f, double box_length_hint = 0.0) {
  (void)box_length_hint;
  os << "CAVFIELD v1 " << f.grid.dim << ' ' << f.grid.n << ' '
     << detail::format_double(f.lambda) << ' ' << detail::format_double(f.Lambda) << ' '
     << to_string(f.kind) << ' ' << f.seed << '\n';
  for (long c = 0; c < f.grid.cell_count(); ++c) {
    detail::write_f64_le(os, f.a11[c]);
    if (f.grid.dim == 2) {
      detail::write_f64_le(os, f.a12[c]);
      detail::write_f64_le(os, f.a22[c]);
    }
  }
}

inline CoefficientField read_cavfield(std::istream& is, double box_length = 1.0) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("CAVFIELD: missing header");
  std::istringstream hs(line);
  std::string magic, version, kind;
  int dim = 0, n = 0;
  double lambda = 0.0, Lambda = 0.0;
  std::uint64_t seed = 0;
  hs >> magic >> version >> dim >> n >> lambda >> Lambda >> kind >> seed;
  if (magic != "CAVFIELD" || version != "v1" || !hs)
    throw std::runtime_error("CAVFIELD: malformed header: " + line);

  CoefficientField f;
  f.grid = make_grid(dim, n, box_length);
  f.lambda = lambda;
  f.Lambda = Lambda;
  f.kind = field_kind_from_string(kind);
  f.seed = seed;
  const long nc = f.grid.cell_count();
  f.a11.resize(nc);
  if (dim == 2) {
    f.a12.resize(nc);
    f.a22.resize(nc);
  }
  for (long c = 0; c < nc; ++c) {
    f.a11[c] = detail::read_f64_le(is);
    if (dim == 2) {
      f.a12[c] = detail::read_f64_le(is);
      f.a22[c] = detail::read_f64_le(is);
    }
  }
  return f;
}

/// CAVGRID v1: header "CAVGRID v1 dim shape", then little-endian doubles,
/// nodal values row-major.
inline void write_cavgrid(std::ostream& os, const GridFunction& u) {
  os << "CAVGRID v1 " << u.grid.dim << ' ' << u.grid.n << '\n';
  for (long id = 0; id < u.grid.node_count(); ++id) detail::write_f64_le(os, u.v[id]);
}

inline GridFunction read_cavgrid(std::istream& is, double box_length = 1.0) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("CAVGRID: missing header");
  std::istringstream hs(line);
  std::string magic, version;
  int dim = 0, n = 0;
  hs >> magic >> version >> dim >> n;
  if (magic != "CAVGRID" || version != "v1" || !hs)
    throw std::runtime_error("CAVGRID: malformed header: " + line);
  GridFunction u(make_grid(dim, n, box_length));
  for (long id = 0; id < u.grid.node_count(); ++id) u.v[id] = detail::read_f64_le(is);
  return u;
}

inline void save_cavfield(const std::string& path, const CoefficientField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_cavfield(os, f);
}

inline CoefficientField load_cavfield(const std::string& path, double box_length = 1.0) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_cavfield(is, box_length);
}

inline void save_cavgrid(const std::string& path, const GridFunction& u) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_cavgrid(os, u);
}

inline GridFunction load_cavgrid(const std::string& path, double box_length = 1.0) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_cavgrid(is, box_length);
}

/// FNV-1a 64-bit, used for config hashes and artifact checksums.
inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

inline std::string hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (is) {
    is.read(buf, sizeof(buf));
    h = fnv1a64(buf, static_cast<std::size_t>(is.gcount()), h);
  }
  return hex64(h);
}

/// Grayscale dump of a nodal field (binary PGM), value range mapped to 0..255.
inline void save_pgm(const std::string& path, const GridFunction& u) {
  if (u.grid.dim != 2) throw std::invalid_argument("save_pgm: 2D fields only");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  const int n = u.grid.n;
  double lo = u.v[0], hi = u.v[0];
  for (double x : u.v) { lo = std::min(lo, x); hi = std::max(hi, x); }
  const double span = hi > lo ? hi - lo : 1.0;
  os << "P5\n" << n << ' ' << n << "\n255\n";
  for (int iy = n - 1; iy >= 0; --iy)
    for (int ix = 0; ix < n; ++ix) {
      const double t = (u.at(ix, iy) - lo) / span;
      os.put(static_cast<char>(static_cast<int>(t * 255.0 + 0.5)));
    }
}

/// Black-and-white dump of a cell mask (binary PBM).
inline void save_pbm(const std::string& path, const Grid& g, const std::vector<bool>& cells) {
  if (g.dim != 2) throw std::invalid_argument("save_pbm: 2D masks only");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  const int nc = g.cells_per_axis();
  os << "P4\n" << nc << ' ' << nc << '\n';
  for (int cy = nc - 1; cy >= 0; --cy) {
    int bit = 0;
    unsigned char byte = 0;
    for (int cx = 0; cx < nc; ++cx) {
      byte = static_cast<unsigned char>((byte << 1) | (cells[g.cell_id(cx, cy)] ? 1 : 0));
      if (++bit == 8) { os.put(static_cast<char>(byte)); bit = 0; byte = 0; }
    }
    if (bit > 0) os.put(static_cast<char>(byte << (8 - bit)));
  }
}

/// CSV with a header row and a provenance comment carrying the config hash.
struct CsvWriter {
  std::ofstream os;

  CsvWriter(const std::string& path, const std::string& config_hash, const std::string& header)
      : os(path) {
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "# config " << config_hash << '\n' << header << '\n';
  }

  template <typename... Args>
  void row(Args&&... args) {
    bool first = true;
    ((os << (first ? "" : ",") << format(args), first = false), ...);
    os << '\n';
  }

private:
  static std::string format(double x) { return detail::format_double(x); }
  static std::string format(long x) { return std::to_string(x); }
  static std::string format(int x) { return std::to_string(x); }
  static std::string format(std::size_t x) { return std::to_string(x); }
  static std::string format(const std::string& s) { return s; }
  static std::string format(const char* s) { return s; }
};

} // namespace cavlab
