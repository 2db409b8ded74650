#pragma once

// File formats:
//  - trajectory files: a header of "key: value" lines followed by one line
//    per (interval, node) record carrying full-precision decimal strings.
//    The record stream is append-only so interrupted runs can resume from
//    the last complete interval.
//  - flat "key = value" experiment configs with a canonical serialization
//    whose FNV-1a hash stamps every output for provenance.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgode/cg_solver.hpp"

namespace cgode {

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// trajectory files

struct TrajectoryHeader {
  std::string problem;
  int q = 1;
  int digits = 0;
  std::string backend;
  std::string family = "lobatto";
  int dim = 0;
  long intervals = 0;
  std::string T;   // decimal string
  std::string config_hash;
};

class TrajectoryWriter {
 public:
  // Opens fresh (truncating) unless resume finds a matching header.
  TrajectoryWriter(const std::string& path, const TrajectoryHeader& h, bool resume = false)
      : path_(path), header_(h) {
    long have = -1;
    if (resume) have = complete_intervals_on_disk();
    if (have >= 0) {
      resumed_from_ = have;
      os_.open(path_, std::ios::app);
    } else {
      os_.open(path_, std::ios::trunc);
      os_ << "# cgode trajectory v1\n";
      os_ << "problem: " << h.problem << "\n";
      os_ << "q: " << h.q << "\n";
      os_ << "digits: " << h.digits << "\n";
      os_ << "backend: " << h.backend << "\n";
      os_ << "family: " << h.family << "\n";
      os_ << "dim: " << h.dim << "\n";
      os_ << "intervals: " << h.intervals << "\n";
      os_ << "T: " << h.T << "\n";
      os_ << "config_hash: " << h.config_hash << "\n";
      os_ << "end_header\n";
      os_.flush();
    }
    if (!os_) throw std::runtime_error("cannot open trajectory file " + path_);
  }

  long resumed_from() const { return resumed_from_; }

  template <class R>
  void write_interval(long m, const PiecewisePoly<R>& poly) {
    for (int k = 0; k <= header_.q; ++k) {
      auto vals = poly.node_values(m, k);
      os_ << m << ' ' << k;
      for (int c = 0; c < header_.dim; ++c) os_ << ' ' << to_string(vals[c]);
      os_ << '\n';
    }
    os_.flush();
  }

 private:
  long complete_intervals_on_disk() const;

  std::string path_;
  TrajectoryHeader header_;
  std::ofstream os_;
  long resumed_from_ = -1;
};

inline std::optional<TrajectoryHeader> read_trajectory_header(std::istream& is) {
  TrajectoryHeader h;
  std::string line;
  if (!std::getline(is, line) || line != "# cgode trajectory v1") return std::nullopt;
  while (std::getline(is, line)) {
    if (line == "end_header") return h;
    auto pos = line.find(": ");
    if (pos == std::string::npos) return std::nullopt;
    std::string key = line.substr(0, pos), value = line.substr(pos + 2);
    if (key == "problem") h.problem = value;
    else if (key == "q") h.q = std::stoi(value);
    else if (key == "digits") h.digits = std::stoi(value);
    else if (key == "backend") h.backend = value;
    else if (key == "family") h.family = value;
    else if (key == "dim") h.dim = std::stoi(value);
    else if (key == "intervals") h.intervals = std::stol(value);
    else if (key == "T") h.T = value;
    else if (key == "config_hash") h.config_hash = value;
  }
  return std::nullopt;
}

inline long TrajectoryWriter::complete_intervals_on_disk() const {
  std::ifstream is(path_);
  if (!is) return -1;
  auto h = read_trajectory_header(is);
  if (!h) return -1;
  if (h->problem != header_.problem || h->q != header_.q || h->digits != header_.digits ||
      h->backend != header_.backend || h->dim != header_.dim ||
      h->intervals != header_.intervals || h->T != header_.T ||
      h->config_hash != header_.config_hash)
    return -1;
  long complete = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    long m;
    int k;
    if (!(ls >> m >> k)) break;
    std::string tok;
    int count = 0;
    while (ls >> tok) ++count;
    if (count != header_.dim) break;  // truncated record
    if (m == complete && k == header_.q) ++complete;
  }
  return complete;
}

// Loads a persisted trajectory. The context must match the stored digits
// and backend; values are parsed at full precision.
template <class Ctx>
Trajectory<real_of<Ctx>> read_trajectory(const std::string& path, const Ctx& ctx,
                                         long* complete_intervals = nullptr) {
  using R = real_of<Ctx>;
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open trajectory file " + path);
  auto hdr = read_trajectory_header(is);
  if (!hdr) throw std::runtime_error("bad trajectory header in " + path);
  if (hdr->backend != Ctx::backend_name())
    throw std::runtime_error("trajectory backend " + hdr->backend + " does not match context");
  if (hdr->digits != ctx.digits())
    throw std::runtime_error("trajectory digits " + std::to_string(hdr->digits) +
                             " do not match context " + std::to_string(ctx.digits()));

  R T = ctx.make(hdr->T);
  auto part = Partition<R>::uniform(T, hdr->intervals, ctx);
  auto basis = lagrange_basis(hdr->q, node_family_from_string(hdr->family), ctx);

  Trajectory<R> traj;
  traj.problem_label = hdr->problem;
  traj.q = hdr->q;
  traj.digits = hdr->digits;
  traj.backend = hdr->backend;
  traj.poly = PiecewisePoly<R>(part, basis, hdr->dim);

  long complete = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    long m;
    int k;
    if (!(ls >> m >> k)) break;
    if (m < 0 || m >= hdr->intervals || k < 0 || k > hdr->q) break;
    auto dst = traj.poly.node_values(m, k);
    std::string tok;
    int c = 0;
    for (; c < hdr->dim && (ls >> tok); ++c) dst[c] = ctx.make(tok);
    if (c != hdr->dim) break;
    if (m == complete && k == hdr->q) ++complete;
  }
  if (complete_intervals) *complete_intervals = complete;
  else if (complete != hdr->intervals)
    throw std::runtime_error("trajectory file " + path + " is incomplete (" +
                             std::to_string(complete) + "/" + std::to_string(hdr->intervals) +
                             " intervals)");
  return traj;
}

// ---------------------------------------------------------------------------
// flat key = value configs

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config " + path);
    return from_stream(is);
  }

  static KeyValueConfig from_stream(std::istream& is) {
    KeyValueConfig cfg;
    std::string line;
    while (std::getline(is, line)) {
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        size_t b = s.find_first_not_of(" \t");
        size_t e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (!key.empty()) cfg.set(key, value);
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }
  std::string require(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw std::runtime_error("config key '" + key + "' is required");
    return it->second;
  }
  long get_long(const std::string& key, long fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : std::stol(it->second);
  }
  double get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : std::stod(it->second);
  }
  bool get_bool(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    return it->second == "1" || it->second == "true" || it->second == "yes";
  }

  // canonical text: sorted keys, one per line
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : kv_) {
      out += k;
      out += " = ";
      out += v;
      out += "\n";
    }
    return out;
  }
  std::string hash() const { return hex64(fnv1a64(canonical())); }

  const std::map<std::string, std::string>& entries() const { return kv_; }

  void write(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write config " + path);
    os << canonical();
  }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace cgode
