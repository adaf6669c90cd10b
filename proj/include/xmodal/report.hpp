// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "xmodal/pipeline.hpp"

namespace xmodal {

// results.csv: one line per evaluation row,
//   setting,task,train_mask,test_mask,metric,value,ci,seed,config_hash
// with %.6f values and a 16-digit hex hash. Byte-stable for identical inputs.
std::string results_csv(const std::vector<RunRecord>& records);

std::string results_json_text(const std::vector<RunRecord>& records);
std::vector<RunRecord> results_from_json_text(const std::string& text);

// Writes results.json and results.csv into out_dir.
void write_results(const std::vector<RunRecord>& records, const std::string& out_dir);

std::vector<RunRecord> read_results_json(const std::string& path);

// Merges every results.json found under `in_dir` (sorted paths) and writes the
// combined results files into out_dir.
std::vector<RunRecord> merge_results(const std::string& in_dir, const std::string& out_dir);

bool operator==(const StageLog& a, const StageLog& b);
bool operator==(const EvalRow& a, const EvalRow& b);
bool operator==(const RunRecord& a, const RunRecord& b);

}  // namespace xmodal
