/*
 * Copyright 2026 The riosim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "riosim/config.hpp"
#include "riosim/sim.hpp"

namespace riosim {

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

// One axis per line, key=v1,v2,... Commas inside parentheses stay in the
// value, e.g. workload=batch(4),journal3.
inline std::vector<GridAxis> parse_grid(const std::string& text) {
  std::vector<GridAxis> axes;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected key=v1,v2,...");
    GridAxis a{trim(line.substr(0, eq)), {}};
    std::string cur;
    int depth = 0;
    for (char ch : line.substr(eq + 1)) {
      if (ch == '(') ++depth;
      if (ch == ')') --depth;
      if (ch == ',' && depth == 0) {
        a.values.push_back(trim(cur));
        cur.clear();
      } else {
        cur += ch;
      }
    }
    if (!trim(cur).empty()) a.values.push_back(trim(cur));
    if (a.values.empty()) throw ConfigError(a.key, "no values");
    axes.push_back(std::move(a));
  }
  return axes;
}

inline std::vector<GridAxis> load_grid(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("grid", "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_grid(ss.str());
}

struct SweepRow {
  std::vector<std::string> cell;  // one value per axis
  MetricsReport report;
};

struct SweepTable {
  std::vector<GridAxis> axes;
  std::vector<SweepRow> rows;

  std::string value(const SweepRow& r, const std::string& key) const {
    for (std::size_t i = 0; i < axes.size(); ++i)
      if (axes[i].key == key) return r.cell[i];
    return "";
  }
};

// Cartesian product of the axes, each cell a private simulation, spread over
// `jobs` OS threads. Row order is independent of `jobs`.
inline SweepTable run_sweep(const SimConfig& base, const std::vector<GridAxis>& axes, unsigned jobs = 1) {
  SweepTable t;
  t.axes = axes;
  std::vector<std::vector<std::string>> cells{{}};
  for (const auto& a : axes) {
    std::vector<std::vector<std::string>> next;
    for (const auto& c : cells)
      for (const auto& v : a.values) {
        auto d = c;
        d.push_back(v);
        next.push_back(std::move(d));
      }
    cells = std::move(next);
  }
  std::vector<SimConfig> configs;
  for (const auto& c : cells) {
    SimConfig sc = base;
    for (std::size_t i = 0; i < axes.size(); ++i) apply_config(sc, axes[i].key, c[i]);
    configs.push_back(sc);
  }
  t.rows.resize(cells.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < std::max(1u, jobs); ++j)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < configs.size();) t.rows[i] = {cells[i], Simulation(configs[i]).run()};
    });
  for (auto& th : pool) th.join();
  return t;
}

namespace detail {

inline std::string csv_row(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    const bool quote = cells[i].find_first_of(",\"") != std::string::npos;
    if (quote) s += '"';
    for (char c : cells[i]) {
      if (c == '"') s += '"';
      s += c;
    }
    if (quote) s += '"';
  }
  return s + "\n";
}

inline std::string fmt(double x) {
  std::ostringstream o;
  o.precision(6);
  o << x;
  return o.str();
}

}  // namespace detail

inline std::string to_csv(const SweepTable& t) {
  std::vector<std::string> header;
  for (const auto& a : t.axes) header.push_back(a.key);
  for (const char* h : {"throughput_ops", "throughput_groups", "initiator_cpu_util", "cpu_efficiency",
                        "target_cpu_util", "commands", "p50_latency_us", "p99_latency_us", "finished"})
    header.push_back(h);
  std::string csv = detail::csv_row(header);
  for (const auto& row : t.rows) {
    auto cells = row.cell;
    const auto& r = row.report;
    using detail::fmt;
    cells.insert(cells.end(), {fmt(r.throughput_ops), fmt(r.throughput_groups), fmt(r.initiator_cpu_util),
                               fmt(r.cpu_efficiency), fmt(r.target_cpu_util), std::to_string(r.commands),
                               fmt(r.p50_latency_us), fmt(r.p99_latency_us), r.finished ? "1" : "0"});
    csv += detail::csv_row(cells);
  }
  return csv;
}

}  // namespace riosim
