#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "stredalab/spectral.hpp"

namespace stredalab {

namespace detail {

/// FNV-1a 64-bit over the cache key string.
inline std::string cache_hash(const std::string& key) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string eig_key(const EigOptions& o) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "mode=%d;cutoff=%d;until=%.17g;margin=%.17g;tol=%.17g",
                static_cast<int>(o.mode), o.dense_cutoff, o.lanczos_until, o.lanczos_margin,
                o.tol);
  return buf;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_pod(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return bool(in);
}

inline void write_block(std::ostream& out, const BlockSpectrum& b) {
  const std::int64_t dim = b.dim, n = b.evals.size();
  write_pod(out, dim);
  write_pod(out, n);
  const std::uint8_t full = b.full ? 1 : 0;
  write_pod(out, full);
  write_pod(out, b.converged_below);
  out.write(reinterpret_cast<const char*>(b.evals.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  out.write(reinterpret_cast<const char*>(b.evecs.data()),
            static_cast<std::streamsize>(b.evecs.size() * sizeof(Complex)));
}

inline bool read_block(std::istream& in, BlockSpectrum& b) {
  std::int64_t dim = 0, n = 0;
  std::uint8_t full = 0;
  if (!read_pod(in, dim) || !read_pod(in, n) || !read_pod(in, full) ||
      !read_pod(in, b.converged_below))
    return false;
  if (dim < 0 || n < 0 || n > dim) return false;
  b.dim = static_cast<int>(dim);
  b.full = full != 0;
  b.evals.resize(n);
  b.evecs.resize(dim, n);
  in.read(reinterpret_cast<char*>(b.evals.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  in.read(reinterpret_cast<char*>(b.evecs.data()),
          static_cast<std::streamsize>(b.evecs.size() * sizeof(Complex)));
  return bool(in);
}

}  // namespace detail

constexpr char kCacheMagic[8] = {'S', 'L', 'E', 'I', 'G', '0', '1', '\0'};

/// On-disk store for eigensolve results, keyed on the canonical model string
/// plus the eigensolver options, so any parameter change misses cleanly.
struct EigenCache {
  std::filesystem::path dir;

  explicit EigenCache(const std::filesystem::path& output_dir) : dir(output_dir / "cache") {}

  std::filesystem::path path_for(const std::string& key) const {
    return dir / (detail::cache_hash(key) + ".eig");
  }

  bool load(const std::string& key, Spectrum& s) const {
    std::ifstream in(path_for(key), std::ios::binary);
    if (!in) return false;
    char magic[8] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::string(magic, 8) != std::string(kCacheMagic, 8)) return false;
    return detail::read_block(in, s.up) && detail::read_block(in, s.down);
  }

  void store(const std::string& key, const Spectrum& s) const {
    std::filesystem::create_directories(dir);
    const std::filesystem::path final_path = path_for(key);
    const std::filesystem::path tmp = final_path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cache: cannot write " + tmp.string());
      out.write(kCacheMagic, sizeof(kCacheMagic));
      detail::write_block(out, s.up);
      detail::write_block(out, s.down);
      if (!out) throw std::runtime_error("cache: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, final_path);  // atomic publish
  }
};

/// Removes every cached eigensolve under <output_dir>/cache; returns the
/// number of entries removed.
inline int cache_clear(const std::filesystem::path& output_dir) {
  const std::filesystem::path dir = output_dir / "cache";
  int removed = 0;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".eig") {
      std::filesystem::remove(e.path(), ec);
      if (!ec) ++removed;
    }
  }
  return removed;
}

}  // namespace stredalab
