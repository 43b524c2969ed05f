#pragma once

// Versioned plain-text parameter documents.
//
//   dalmp-params 1
//   kind forecaster
//   meta <key> <value>
//   tensor <name> <rank> <dims...>
//   <row-major values, shortest round-trip decimal, space separated>
//   ...
//   checksum <fnv1a-64 of every preceding byte, 16 hex digits>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "dalmp/error.hpp"
#include "dalmp/grad_check.hpp"
#include "dalmp/tensor.hpp"

namespace dalmp {

inline constexpr int param_format_version = 1;

struct ParamDocument {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<NamedTensor> tensors;

  const std::string& meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta) {
      if (k == key) return v;
    }
    throw Error(ErrorCode::parse, "missing meta field '" + key + "'");
  }
  const Tensor& tensor(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return t.value;
    }
    throw Error(ErrorCode::shape_audit, "missing tensor '" + name + "'");
  }
};

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::parse, "bad number '" + std::string(s) + "'");
  }
  return v;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string serialize(const ParamDocument& doc) {
  std::string body;
  body += "dalmp-params " + std::to_string(param_format_version) + "\n";
  body += "kind " + doc.kind + "\n";
  for (const auto& [k, v] : doc.meta) body += "meta " + k + " " + v + "\n";
  for (const auto& t : doc.tensors) {
    const Shape& s = t.value.shape();
    body += "tensor " + t.name + " " + std::to_string(s.rank());
    for (std::size_t d : s.dims()) body += " " + std::to_string(d);
    body += "\n";
    bool first = true;
    for (double v : t.value.data()) {
      if (!first) body += ' ';
      body += format_double(v);
      first = false;
    }
    body += "\n";
  }
  return body + "checksum " + hex64(fnv1a64(body)) + "\n";
}

inline ParamDocument deserialize(const std::string& text) {
  const auto tail = text.rfind("checksum ");
  if (tail == std::string::npos) throw Error(ErrorCode::parse, "missing checksum line");
  std::string body = text.substr(0, tail);

  std::istringstream is(body);
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "dalmp-params") throw Error(ErrorCode::parse, "not a parameter document");
  if (version != param_format_version) {
    throw Error(ErrorCode::version_mismatch,
                "file version " + std::to_string(version) + ", supported " + std::to_string(param_format_version));
  }
  std::string claimed = text.substr(tail + 9);
  while (!claimed.empty() && (claimed.back() == '\n' || claimed.back() == '\r')) claimed.pop_back();
  if (claimed != hex64(fnv1a64(body))) throw Error(ErrorCode::checksum_mismatch, "content does not match checksum");

  ParamDocument doc;
  std::string word;
  while (is >> word) {
    if (word == "kind") {
      is >> doc.kind;
    } else if (word == "meta") {
      std::string k, v;
      is >> k >> v;
      doc.meta.emplace_back(k, v);
    } else if (word == "tensor") {
      std::string name;
      std::size_t rank = 0;
      is >> name >> rank;
      if (rank == 0 || rank > Shape::max_rank) throw Error(ErrorCode::parse, "bad rank for " + name);
      std::vector<std::size_t> dims(rank);
      for (auto& d : dims) is >> d;
      const Shape shape = Shape::of(dims);
      std::vector<double> values(shape.size());
      std::string tok;
      for (auto& v : values) {
        if (!(is >> tok)) throw Error(ErrorCode::parse, "truncated values for " + name);
        v = parse_double(tok);
      }
      doc.tensors.push_back({name, Tensor(shape, std::move(values))});
    } else {
      throw Error(ErrorCode::parse, "unexpected token '" + word + "'");
    }
  }
  return doc;
}

inline void write_document(const std::string& path, const ParamDocument& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  out << serialize(doc);
  if (!out) throw Error(ErrorCode::io, "write failed for " + path);
}

inline ParamDocument read_document(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace dalmp
