// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "xmodal/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace xmodal {

namespace {

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  return std::stoull(s, nullptr, 16);
}

std::string fixed6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string results_csv(const std::vector<RunRecord>& records) {
  std::string out = "setting,task,train_mask,test_mask,metric,value,ci,seed,config_hash\n";
  for (const RunRecord& r : records) {
    for (const EvalRow& row : r.rows) {
      out += r.setting;
      out += ',';
      out += r.task;
      out += ',';
      out += row.train_mask.str();
      out += ',';
      out += row.test_mask.str();
      out += ',';
      out += row.metric;
      out += ',';
      out += fixed6(row.value);
      out += ',';
      out += fixed6(row.ci);
      out += ',';
      out += std::to_string(r.seed);
      out += ',';
      out += hex64(r.config_hash);
      out += '\n';
    }
  }
  return out;
}

std::string results_json_text(const std::vector<RunRecord>& records) {
  ordered_json arr = ordered_json::array();
  for (const RunRecord& r : records) {
    ordered_json j;
    j["setting"] = r.setting;
    j["task"] = r.task;
    j["stages"] = r.stages;
    j["config_hash"] = hex64(r.config_hash);
    j["seed"] = r.seed;
    j["stage_logs"] = ordered_json::array();
    for (const StageLog& log : r.stage_logs)
      j["stage_logs"].push_back({{"stage", log.stage},
                                 {"steps", log.steps},
                                 {"initial_loss", log.initial_loss},
                                 {"final_loss", log.final_loss}});
    j["rows"] = ordered_json::array();
    for (const EvalRow& row : r.rows)
      j["rows"].push_back({{"train_mask", row.train_mask.str()},
                           {"test_mask", row.test_mask.str()},
                           {"metric", row.metric},
                           {"value", row.value},
                           {"ci", row.ci}});
    j["wall_time_sec"] = r.wall_time_sec;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

std::vector<RunRecord> results_from_json_text(const std::string& text) {
  ordered_json arr;
  try {
    arr = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw DataError(std::string("results: parse error: ") + e.what());
  }
  std::vector<RunRecord> records;
  try {
    for (const auto& j : arr) {
      RunRecord r;
      r.setting = j.at("setting").get<std::string>();
      r.task = j.at("task").get<std::string>();
      r.stages = j.at("stages").get<std::vector<std::string>>();
      r.config_hash = parse_hex64(j.at("config_hash").get<std::string>());
      r.seed = j.at("seed").get<std::uint64_t>();
      for (const auto& log : j.at("stage_logs"))
        r.stage_logs.push_back({log.at("stage").get<std::string>(), log.at("steps").get<int>(),
                                log.at("initial_loss").get<double>(),
                                log.at("final_loss").get<double>()});
      for (const auto& row : j.at("rows"))
        r.rows.push_back({ModalityMask::parse(row.at("train_mask").get<std::string>()),
                          ModalityMask::parse(row.at("test_mask").get<std::string>()),
                          row.at("metric").get<std::string>(), row.at("value").get<double>(),
                          row.at("ci").get<double>()});
      r.wall_time_sec = j.at("wall_time_sec").get<double>();
      records.push_back(std::move(r));
    }
  } catch (const ordered_json::exception& e) {
    throw DataError(std::string("results: malformed record: ") + e.what());
  }
  return records;
}

void write_results(const std::vector<RunRecord>& records, const std::string& out_dir) {
  if (records.empty()) throw DataError("write_results: no records");
  fs::create_directories(out_dir);
  {
    std::ofstream os(fs::path(out_dir) / "results.json", std::ios::trunc);
    if (!os) throw DataError("write_results: cannot write results.json");
    os << results_json_text(records) << '\n';
  }
  {
    std::ofstream os(fs::path(out_dir) / "results.csv", std::ios::trunc | std::ios::binary);
    if (!os) throw DataError("write_results: cannot write results.csv");
    const std::string csv = results_csv(records);
    os.write(csv.data(), static_cast<std::streamsize>(csv.size()));
  }
}

std::vector<RunRecord> read_results_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("results: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return results_from_json_text(text);
}

std::vector<RunRecord> merge_results(const std::string& in_dir, const std::string& out_dir) {
  std::vector<std::string> paths;
  if (!fs::exists(in_dir)) throw DataError("report: input directory '" + in_dir + "' not found");
  for (const auto& entry : fs::recursive_directory_iterator(in_dir))
    if (entry.is_regular_file() && entry.path().filename() == "results.json")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw DataError("report: no results.json under '" + in_dir + "'");
  std::vector<RunRecord> merged;
  for (const std::string& p : paths) {
    std::vector<RunRecord> records = read_results_json(p);
    merged.insert(merged.end(), records.begin(), records.end());
  }
  write_results(merged, out_dir);
  return merged;
}

bool operator==(const StageLog& a, const StageLog& b) {
  return a.stage == b.stage && a.steps == b.steps && a.initial_loss == b.initial_loss &&
         a.final_loss == b.final_loss;
}

bool operator==(const EvalRow& a, const EvalRow& b) {
  return a.train_mask == b.train_mask && a.test_mask == b.test_mask && a.metric == b.metric &&
         a.value == b.value && a.ci == b.ci;
}

bool operator==(const RunRecord& a, const RunRecord& b) {
  return a.setting == b.setting && a.task == b.task && a.stages == b.stages &&
         a.config_hash == b.config_hash && a.seed == b.seed && a.stage_logs == b.stage_logs &&
         a.rows == b.rows && a.wall_time_sec == b.wall_time_sec;
}

}  // namespace xmodal
