#include "gtsynth/io.hpp"

#include "gtsynth/errors.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace gtsynth::io {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string blocks_csv(const SynthesisRun& run) {
  std::string s = "block,t";
  for (const auto& id : run.observed_ids) s += "," + id;
  s += "\n";
  for (std::uint64_t b = 0; b < run.blocks; ++b) {
    for (std::uint64_t t = 0; t < run.N; ++t) {
      s += std::to_string(b) + "," + std::to_string(t);
      const auto row = static_cast<Eigen::Index>(b * run.N + t);
      for (Eigen::Index j = 0; j < run.data.cols(); ++j) s += "," + format_double(run.data(row, j));
      s += "\n";
    }
  }
  return s;
}

Json lineage_json(const SynthesisRun& run) {
  Json j;
  j["blocks"] = run.blocks;
  j["layers"] = run.codebooks.size();
  Json lin = Json::object();
  for (std::uint64_t b = 0; b < run.lineage.size(); ++b) {
    Json per = Json::object();
    const Lineage& l = run.lineage[b];
    for (std::size_t m = 0; m < l.y.size(); ++m) per[std::to_string(m + 1)] = Json::array({l.y[m], l.b[m]});
    lin[std::to_string(b)] = std::move(per);
  }
  j["lineage"] = std::move(lin);
  return j;
}

Json codebooks_json(const std::vector<CodebookShape>& books) {
  Json arr = Json::array();
  for (const auto& c : books)
    arr.push_back({{"layer", c.layer}, {"r_y", c.r_y}, {"r_b", c.r_b}, {"m_y", c.m_y},
                   {"m_b", c.m_b}, {"dim", c.dim}, {"signs", c.signs}, {"branches", c.branches}});
  return arr;
}

SynthesisRun read_run(const std::string& text, const Json& lineage, const Json& codebooks) {
  SynthesisRun run;
  try {
    for (const auto& c : codebooks) {
      CodebookShape s;
      s.layer = c.at("layer").get<int>();
      s.r_y = c.at("r_y").get<double>();
      s.r_b = c.at("r_b").get<double>();
      s.m_y = c.at("m_y").get<std::uint64_t>();
      s.m_b = c.at("m_b").get<std::uint64_t>();
      s.dim = c.at("dim").get<int>();
      s.signs = c.at("signs").get<int>();
      s.branches = c.at("branches").get<std::uint64_t>();
      run.codebooks.push_back(s);
    }
    run.blocks = lineage.at("blocks").get<std::uint64_t>();
    const auto layers = lineage.at("layers").get<std::size_t>();
    const Json& lin = lineage.at("lineage");
    for (std::uint64_t b = 0; b < run.blocks; ++b) {
      const Json& per = lin.at(std::to_string(b));
      Lineage l;
      for (std::size_t m = 1; m <= layers; ++m) {
        const Json& pair = per.at(std::to_string(m));
        l.y.push_back(pair.at(0).get<std::uint64_t>());
        l.b.push_back(pair.at(1).get<std::uint64_t>());
      }
      run.lineage.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed run metadata: ") + e.what());
  }

  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("empty blocks file");
  {
    std::istringstream hs(line);
    std::string cell;
    int col = 0;
    while (std::getline(hs, cell, ',')) {
      if (col++ >= 2) run.observed_ids.push_back(cell);
    }
    if (col < 3) throw Error("blocks file header lacks observed columns");
  }
  std::vector<double> values;
  std::uint64_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    int col = 0;
    while (std::getline(ls, cell, ',')) {
      if (col++ >= 2) values.push_back(std::stod(cell));
    }
    if (static_cast<std::size_t>(col - 2) != run.observed_ids.size()) throw Error("ragged row in blocks file");
    ++rows;
  }
  if (run.blocks == 0 || rows % run.blocks != 0) throw Error("row count is not a multiple of the block count");
  run.N = rows / run.blocks;
  run.data = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(run.observed_ids.size()));
  return run;
}

std::string rates_csv(const std::vector<RateBounds>& rows, const std::vector<std::string>& pi_ids, bool bits) {
  const double scale = bits ? 1.0 / std::log(2.0) : 1.0;
  std::string s = "layer";
  for (const auto& id : pi_ids) s += ",pi_" + id;
  s += ",sum_rate_lb,y_rate_lb,ci\n";
  for (const auto& r : rows) {
    s += std::to_string(r.layer);
    for (std::size_t j = 0; j < pi_ids.size(); ++j) s += "," + (j < r.pi.size() && !std::isnan(r.pi[j]) ? format_double(r.pi[j]) : "");
    s += "," + format_double(r.sum_rate_lb * scale) + "," + format_double(r.y_rate_lb * scale) + "," +
         format_double(r.y_rate_ci * scale) + "\n";
  }
  return s;
}

Json fidelity_json(const FidelityReport& r) {
  Json tv = Json::object();
  for (std::size_t j = 0; j < r.labels.size(); ++j) tv[r.labels[j]] = r.marginal_tv[j];
  return {{"pooled_slots", r.pooled_slots},
          {"bins", r.bins},
          {"max_cov_error", r.max_cov_error},
          {"frobenius_error", r.frobenius_error},
          {"marginal_tv", tv},
          {"max_marginal_tv", r.max_marginal_tv},
          {"gaussian_kl", r.kl},
          {"pinsker_tv_bound", r.pinsker_tv_bound}};
}

Json verdict_json(const TestVerdict& v) {
  return {{"name", v.name}, {"statistic", v.statistic}, {"p_value", v.p_value}, {"alpha", v.alpha}, {"reject", v.reject}};
}

Json independence_json(const IndependenceReport& r) {
  double min_p = 1.0;
  for (const auto& t : r.sign_group) min_p = std::min(min_p, t.p_value);
  return {{"layer", r.layer},
          {"groups", r.groups},
          {"family_alpha", r.family_alpha},
          {"per_test_alpha", r.per_test_alpha},
          {"tests", r.sign_group.size()},
          {"min_p_value", min_p},
          {"sign_groups_pass", r.sign_groups_pass},
          {"cross_block", verdict_json(r.cross_block)}};
}

}  // namespace gtsynth::io
