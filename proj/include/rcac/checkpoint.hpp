#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "rcac/params.hpp"
#include "rcac/tensor.hpp"

// Versioned binary container for parameter sets and raw byte arrays.
// Byte layout is documented in docs/checkpoint_format.md.

namespace rcac {

enum class CkptDtype : uint8_t { F32 = 0, F64 = 1, U8 = 2 };

struct CkptEntry {
  std::string name;
  CkptDtype dtype = CkptDtype::F32;
  Shape shape;
  int64_t step = 0;
  bool has_optimizer_state = false;
  std::vector<unsigned char> value;  // raw bytes, little endian
  std::vector<unsigned char> m;
  std::vector<unsigned char> v;
};

struct CkptSection {
  std::string name;
  std::string metadata;  // free-form tag, e.g. "task" vs "curious"
  std::vector<CkptEntry> entries;
};

namespace detail {

constexpr char kCkptMagic[8] = {'R', 'C', 'A', 'C', 'C', 'K', 'P', 'T'};
constexpr uint32_t kCkptVersion = 1;

inline void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<char*>(&v), 4); }
inline void put_i64(std::ostream& os, int64_t v) { os.write(reinterpret_cast<char*>(&v), 8); }
inline void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, uint32_t(s.size()));
  os.write(s.data(), std::streamsize(s.size()));
}
inline uint32_t get_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
inline int64_t get_i64(std::istream& is) {
  int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
inline std::string get_str(std::istream& is) {
  uint32_t n = get_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}

inline size_t dtype_size(CkptDtype d) {
  switch (d) {
    case CkptDtype::F32: return 4;
    case CkptDtype::F64: return 8;
    case CkptDtype::U8: return 1;
  }
  return 0;
}

}  // namespace detail

inline void write_checkpoint(const std::string& path, const std::vector<CkptSection>& sections) {
  using namespace detail;
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot open checkpoint for writing: " + path);
  os.write(kCkptMagic, 8);
  put_u32(os, kCkptVersion);
  put_u32(os, uint32_t(sections.size()));
  for (const CkptSection& sec : sections) {
    put_str(os, sec.name);
    put_str(os, sec.metadata);
    put_u32(os, uint32_t(sec.entries.size()));
    for (const CkptEntry& e : sec.entries) {
      put_str(os, e.name);
      os.put(char(e.dtype));
      os.put(char(e.has_optimizer_state ? 1 : 0));
      put_u32(os, uint32_t(e.shape.size()));
      for (int d : e.shape) put_u32(os, uint32_t(d));
      put_i64(os, e.step);
      const size_t bytes = size_t(shape_numel(e.shape)) * dtype_size(e.dtype);
      if (e.value.size() != bytes) throw InternalError("checkpoint entry byte size mismatch");
      os.write(reinterpret_cast<const char*>(e.value.data()), std::streamsize(bytes));
      if (e.has_optimizer_state) {
        if (e.m.size() != bytes || e.v.size() != bytes)
          throw InternalError("checkpoint optimizer state size mismatch");
        os.write(reinterpret_cast<const char*>(e.m.data()), std::streamsize(bytes));
        os.write(reinterpret_cast<const char*>(e.v.data()), std::streamsize(bytes));
      }
    }
  }
  if (!os) throw ConfigError("failed writing checkpoint: " + path);
}

inline std::vector<CkptSection> read_checkpoint(const std::string& path) {
  using namespace detail;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw ConfigError("not a checkpoint file: " + path);
  const uint32_t version = get_u32(is);
  if (version != kCkptVersion)
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  std::vector<CkptSection> sections(get_u32(is));
  for (CkptSection& sec : sections) {
    sec.name = get_str(is);
    sec.metadata = get_str(is);
    sec.entries.resize(get_u32(is));
    for (CkptEntry& e : sec.entries) {
      e.name = get_str(is);
      e.dtype = CkptDtype(is.get());
      e.has_optimizer_state = is.get() != 0;
      e.shape.resize(get_u32(is));
      for (int& d : e.shape) d = int(get_u32(is));
      e.step = get_i64(is);
      const size_t bytes = size_t(shape_numel(e.shape)) * dtype_size(e.dtype);
      e.value.resize(bytes);
      is.read(reinterpret_cast<char*>(e.value.data()), std::streamsize(bytes));
      if (e.has_optimizer_state) {
        e.m.resize(bytes);
        e.v.resize(bytes);
        is.read(reinterpret_cast<char*>(e.m.data()), std::streamsize(bytes));
        is.read(reinterpret_cast<char*>(e.v.data()), std::streamsize(bytes));
      }
    }
  }
  if (!is) throw ConfigError("truncated checkpoint: " + path);
  return sections;
}

// 32-bit on disk regardless of the training scalar type.
template <class T>
inline CkptSection to_section(const std::string& name, const std::string& metadata,
                              const ParameterSet<T>& ps) {
  CkptSection sec{name, metadata, {}};
  for (const auto& [pname, p] : ps) {
    CkptEntry e;
    e.name = pname;
    e.dtype = CkptDtype::F32;
    e.shape = p.value.shape;
    e.step = p.step;
    e.has_optimizer_state = true;
    auto pack = [](const Tensor<T>& t, std::vector<unsigned char>& out) {
      out.resize(size_t(t.numel()) * 4);
      float* f = reinterpret_cast<float*>(out.data());
      for (int64_t i = 0; i < t.numel(); ++i) f[i] = float(t.data[i]);
    };
    pack(p.value, e.value);
    pack(p.m, e.m);
    pack(p.v, e.v);
    sec.entries.push_back(std::move(e));
  }
  return sec;
}

template <class T>
inline void from_section(const CkptSection& sec, ParameterSet<T>& ps) {
  for (const CkptEntry& e : sec.entries) {
    if (e.dtype != CkptDtype::F32)
      throw ConfigError("parameter entry " + e.name + " is not f32");
    Param<T>& p = ps.at(e.name);
    if (p.value.shape != e.shape)
      throw ConfigError("checkpoint shape mismatch for " + e.name + ": file " +
                        shape_str(e.shape) + " vs model " + shape_str(p.value.shape));
    const float* f = reinterpret_cast<const float*>(e.value.data());
    for (int64_t i = 0; i < p.value.numel(); ++i) p.value.data[i] = T(f[i]);
    if (e.has_optimizer_state) {
      const float* fm = reinterpret_cast<const float*>(e.m.data());
      const float* fv = reinterpret_cast<const float*>(e.v.data());
      for (int64_t i = 0; i < p.value.numel(); ++i) {
        p.m.data[i] = T(fm[i]);
        p.v.data[i] = T(fv[i]);
      }
      p.step = e.step;
    }
  }
}

inline const CkptSection& find_section(const std::vector<CkptSection>& sections,
                                       const std::string& name) {
  for (const CkptSection& s : sections)
    if (s.name == name) return s;
  throw ConfigError("checkpoint has no section named " + name);
}

}  // namespace rcac
