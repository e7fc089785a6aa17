#include "graph_anchor/dataset.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "graph_anchor/error.hpp"
#include "graph_anchor/json_fwd.hpp"
#include "text_util.hpp"

namespace graph_anchor {

namespace {

template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw Error(ErrorCode::MalformedRecord, "record is not an object", line_no);
    try {
      fn(j, line_no);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, e.what(), line_no);
    }
  }
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "file not found: " + path);
  return in;
}

}  // namespace

std::vector<DatasetItem> load_dataset(std::istream& in) {
  std::vector<DatasetItem> items;
  std::unordered_set<std::string> ids;
  for_each_record(in, [&](const Json& j, std::size_t line) {
    DatasetItem item;
    item.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    item.question = j.at("question").get<std::string>();
    const auto& answers = j.at("answers");
    if (answers.is_string()) {
      item.answers.push_back(answers.get<std::string>());
    } else {
      item.answers = answers.get<std::vector<std::string>>();
    }
    if (item.answers.empty()) throw Error(ErrorCode::MalformedRecord, "no gold answers", line);
    if (!ids.insert(item.id).second) {
      throw Error(ErrorCode::DuplicateDocId, "duplicate question id '" + item.id + "'", line);
    }
    items.push_back(std::move(item));
  });
  return items;
}

std::vector<DatasetItem> load_dataset_file(const std::string& path) {
  auto in = open_or_throw(path);
  return load_dataset(in);
}

std::vector<Prediction> load_predictions(std::istream& in) {
  std::vector<Prediction> out;
  for_each_record(in, [&](const Json& j, std::size_t) {
    Prediction p;
    p.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    p.answer = j.at("answer").get<std::string>();
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<Prediction> load_predictions_file(const std::string& path) {
  auto in = open_or_throw(path);
  return load_predictions(in);
}

std::string predictions_to_jsonl(const std::vector<Prediction>& predictions) {
  std::string out;
  for (const auto& p : predictions) {
    out += Json{{"id", p.id}, {"answer", p.answer}}.dump(-1, ' ', false, Json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

}  // namespace graph_anchor
