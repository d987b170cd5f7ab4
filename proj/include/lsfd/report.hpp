// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lsfd/common.hpp"

namespace lsfd {

// Deterministic float formatting for CSV/JSON output, so re-running a
// command reproduces byte-identical files.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

struct SeUserEntry {
  int cell = 0;
  int user = 0;
  double power_mw = 0.0;
  double sinr = 0.0;
  double se = 0.0;  // bits/s/Hz
  VecC lsfd;
};

/// Per-user decoding outcome of one network instance.
struct SeReport {
  int L = 0, K = 0, tau_c = 0;
  double prelog = 0.0;
  std::vector<SeUserEntry> users;

  double sum_se() const {
    double acc = 0.0;
    for (const auto& u : users) acc += u.se;
    return acc;
  }
  double sum_se_per_cell() const { return L > 0 ? sum_se() / L : 0.0; }

  std::vector<double> per_cell_se() const {
    std::vector<double> acc(static_cast<size_t>(L), 0.0);
    for (const auto& u : users) acc[static_cast<size_t>(u.cell)] += u.se;
    return acc;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["L"] = L;
    j["K"] = K;
    j["tau_c"] = tau_c;
    j["prelog"] = prelog;
    j["sum_se_per_cell"] = sum_se_per_cell();
    j["users"] = nlohmann::json::array();
    for (const auto& u : users) {
      nlohmann::json e;
      e["cell"] = u.cell;
      e["user"] = u.user;
      e["power_mw"] = u.power_mw;
      e["sinr"] = u.sinr;
      e["se_bits_per_hz"] = u.se;
      nlohmann::json a = nlohmann::json::array();
      for (Eigen::Index i = 0; i < u.lsfd.size(); ++i) {
        a.push_back(u.lsfd[i].real());
        a.push_back(u.lsfd[i].imag());
      }
      e["lsfd"] = a;
      j["users"].push_back(e);
    }
    return j;
  }

  /// One row per user; the LSFD vector is flattened as interleaved
  /// re/im columns.
  void write_csv(std::ostream& os) const {
    os << "cell,user,power_mw,sinr,se_bits_per_hz";
    for (int i = 0; i < L; ++i) os << ",lsfd_re" << i << ",lsfd_im" << i;
    os << "\n";
    for (const auto& u : users) {
      os << u.cell << ',' << u.user << ',' << format_double(u.power_mw) << ','
         << format_double(u.sinr) << ',' << format_double(u.se);
      for (Eigen::Index i = 0; i < u.lsfd.size(); ++i)
        os << ',' << format_double(u.lsfd[i].real()) << ',' << format_double(u.lsfd[i].imag());
      os << "\n";
    }
  }
};

inline void write_csv_file(const std::string& path, const std::string& header,
                           const std::vector<std::vector<std::string>>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open output file: " + path);
  os << header << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << row[i];
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace lsfd
