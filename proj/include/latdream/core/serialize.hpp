#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "latdream/core/mat.hpp"

namespace latdream {

// Versioned container of named float tensors plus named scalars; the
// checkpoint format. Writes are atomic (temp file + rename). Tensor bytes are
// stored exactly, so reload reproduces values bit for bit.
class TensorFile {
 public:
  std::map<std::string, Matf> tensors;
  std::map<std::string, double> scalars;

  static constexpr uint32_t kMagic = 0x4c44434bu;  // "LDCK"
  static constexpr uint32_t kVersion = 1;

  void save(const std::string& path) const {
    namespace fs = std::filesystem;
    fs::path tmp = fs::path(path).concat(".tmp");
    {
      FILE* f = std::fopen(tmp.string().c_str(), "wb");
      if (!f) throw std::runtime_error("TensorFile: cannot open " + tmp.string());
      write_u32(f, kMagic);
      write_u32(f, kVersion);
      write_u64(f, tensors.size());
      for (const auto& [name, m] : tensors) {
        write_str(f, name);
        write_u64(f, uint64_t(m.rows()));
        write_u64(f, uint64_t(m.cols()));
        if (m.size() > 0 &&
            std::fwrite(m.data(), sizeof(float), size_t(m.size()), f) !=
                size_t(m.size()))
          throw std::runtime_error("TensorFile: short write");
      }
      write_u64(f, scalars.size());
      for (const auto& [name, v] : scalars) {
        write_str(f, name);
        if (std::fwrite(&v, sizeof(double), 1, f) != 1)
          throw std::runtime_error("TensorFile: short write");
      }
      std::fclose(f);
    }
    fs::rename(tmp, path);
  }

  static TensorFile load(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("TensorFile: cannot open " + path);
    TensorFile out;
    try {
      if (read_u32(f) != kMagic)
        throw std::runtime_error("TensorFile: bad magic in " + path);
      uint32_t version = read_u32(f);
      if (version != kVersion)
        throw std::runtime_error("TensorFile: unsupported version");
      uint64_t nt = read_u64(f);
      for (uint64_t i = 0; i < nt; ++i) {
        std::string name = read_str(f);
        uint64_t rows = read_u64(f), cols = read_u64(f);
        Matf m(rows, cols);
        if (m.size() > 0 &&
            std::fread(m.data(), sizeof(float), size_t(m.size()), f) !=
                size_t(m.size()))
          throw std::runtime_error("TensorFile: short read");
        out.tensors.emplace(std::move(name), std::move(m));
      }
      uint64_t ns = read_u64(f);
      for (uint64_t i = 0; i < ns; ++i) {
        std::string name = read_str(f);
        double v;
        if (std::fread(&v, sizeof(double), 1, f) != 1)
          throw std::runtime_error("TensorFile: short read");
        out.scalars.emplace(std::move(name), v);
      }
    } catch (...) {
      std::fclose(f);
      throw;
    }
    std::fclose(f);
    return out;
  }

  const Matf& tensor(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw std::runtime_error("TensorFile: missing tensor " + name);
    return it->second;
  }

  double scalar(const std::string& name) const {
    auto it = scalars.find(name);
    if (it == scalars.end())
      throw std::runtime_error("TensorFile: missing scalar " + name);
    return it->second;
  }

 private:
  static void write_u32(FILE* f, uint32_t v) {
    if (std::fwrite(&v, 4, 1, f) != 1)
      throw std::runtime_error("TensorFile: short write");
  }
  static void write_u64(FILE* f, uint64_t v) {
    if (std::fwrite(&v, 8, 1, f) != 1)
      throw std::runtime_error("TensorFile: short write");
  }
  static void write_str(FILE* f, const std::string& s) {
    write_u64(f, s.size());
    if (!s.empty() && std::fwrite(s.data(), 1, s.size(), f) != s.size())
      throw std::runtime_error("TensorFile: short write");
  }
  static uint32_t read_u32(FILE* f) {
    uint32_t v;
    if (std::fread(&v, 4, 1, f) != 1)
      throw std::runtime_error("TensorFile: short read");
    return v;
  }
  static uint64_t read_u64(FILE* f) {
    uint64_t v;
    if (std::fread(&v, 8, 1, f) != 1)
      throw std::runtime_error("TensorFile: short read");
    return v;
  }
  static std::string read_str(FILE* f) {
    uint64_t n = read_u64(f);
    std::string s(n, '\0');
    if (n && std::fread(s.data(), 1, n, f) != n)
      throw std::runtime_error("TensorFile: short read");
    return s;
  }
};

}  // namespace latdream
