#pragma once

// Benchmark question files and prediction files.

#include <istream>
#include <string>
#include <vector>

namespace graph_anchor {

/// One line of a dataset file: {"id","question","answers":[...]}.
struct DatasetItem {
  std::string id;
  std::string question;
  std::vector<std::string> answers;
};

/// One line of a predictions file: {"id","answer"}.
struct Prediction {
  std::string id;
  std::string answer;
};

/// Throws Error(MalformedRecord) with the line, Error(DuplicateDocId) for a
/// repeated question id, Error(Io) when the file is missing.
std::vector<DatasetItem> load_dataset(std::istream& in);
std::vector<DatasetItem> load_dataset_file(const std::string& path);

std::vector<Prediction> load_predictions(std::istream& in);
std::vector<Prediction> load_predictions_file(const std::string& path);

/// JSONL, one {"id","answer"} per line, in the given order.
std::string predictions_to_jsonl(const std::vector<Prediction>& predictions);

}  // namespace graph_anchor
