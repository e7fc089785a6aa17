#include "graph_anchor/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "graph_anchor/error.hpp"
#include "text_util.hpp"

namespace graph_anchor {

namespace {

bool is_word_byte(unsigned char c) noexcept {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         c >= 0x80;
}

constexpr std::string_view kIndexFormat = "graph_anchor.bm25_index";
constexpr int kIndexVersion = 1;

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> terms;
  std::string current;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      terms.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) terms.push_back(std::move(current));
  return terms;
}

// --- CorpusIndex -----------------------------------------------------------

void CorpusIndex::add(Document doc, std::size_t line) {
  if (by_id_.contains(doc.id)) {
    throw Error(ErrorCode::DuplicateDocId, "duplicate document id '" + doc.id + "'", line);
  }
  const auto doc_index = static_cast<std::uint32_t>(documents_.size());
  auto terms = tokenize(doc.title + " " + doc.text);
  std::unordered_map<std::string, std::uint32_t> tf;
  std::vector<std::string> first_seen;
  for (auto& term : terms) {
    auto [it, inserted] = tf.try_emplace(term, 0);
    if (inserted) first_seen.push_back(term);
    ++it->second;
  }
  for (const auto& term : first_seen) postings_[term].push_back({doc_index, tf[term]});
  doc_lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
  by_id_.emplace(doc.id, doc_index);
  documents_.push_back(std::move(doc));
}

void CorpusIndex::finalize() {
  double total = 0.0;
  for (auto len : doc_lengths_) total += len;
  average_doc_length_ = documents_.empty() ? 0.0 : total / static_cast<double>(documents_.size());
}

CorpusIndex CorpusIndex::ingest(std::istream& records) {
  CorpusIndex index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(records, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw Error(ErrorCode::MalformedRecord, "record is not an object", line_no);
    auto str_field = [&](const char* name, bool required) -> std::string {
      auto it = j.find(name);
      if (it == j.end()) {
        if (required) {
          throw Error(ErrorCode::MalformedRecord, std::string("missing \"") + name + "\"", line_no);
        }
        return {};
      }
      if (!it->is_string()) {
        throw Error(ErrorCode::MalformedRecord, std::string("\"") + name + "\" is not a string",
                    line_no);
      }
      return it->get<std::string>();
    };
    Document doc{str_field("id", true), str_field("title", false), str_field("text", true)};
    if (doc.id.empty()) throw Error(ErrorCode::MalformedRecord, "empty \"id\"", line_no);
    if (doc.text.empty()) throw Error(ErrorCode::MalformedRecord, "empty \"text\"", line_no);
    index.add(std::move(doc), line_no);
  }
  index.finalize();
  return index;
}

CorpusIndex CorpusIndex::ingest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "file not found: " + path);
  return ingest(in);
}

CorpusIndex CorpusIndex::from_documents(std::vector<Document> documents) {
  CorpusIndex index;
  std::size_t n = 0;
  for (auto& doc : documents) {
    ++n;
    if (doc.text.empty()) throw Error(ErrorCode::MalformedRecord, "empty \"text\"", n);
    index.add(std::move(doc), n);
  }
  index.finalize();
  return index;
}

const Document* CorpusIndex::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &documents_[it->second];
}

const std::vector<CorpusIndex::Posting>* CorpusIndex::postings(std::string_view term) const {
  auto it = postings_.find(std::string(term));
  return it == postings_.end() ? nullptr : &it->second;
}

std::vector<ScoredDoc> CorpusIndex::score(std::string_view query, std::size_t k,
                                          Bm25Params params) const {
  auto terms = tokenize(query);
  if (terms.empty()) throw Error(ErrorCode::EmptyQuery, "query has no terms");

  const double n = static_cast<double>(documents_.size());
  const double avgdl = average_doc_length_ > 0.0 ? average_doc_length_ : 1.0;
  std::vector<double> acc(documents_.size(), 0.0);
  std::vector<bool> matched(documents_.size(), false);

  // Term-at-a-time; each document's sum is accumulated in query-term order.
  for (const auto& term : terms) {
    const auto* plist = postings(term);
    if (!plist) continue;
    const double df = static_cast<double>(plist->size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (const auto& p : *plist) {
      const double tf = p.tf;
      const double dl = doc_lengths_[p.doc];
      const double norm = params.k1 * (1.0 - params.b + params.b * dl / avgdl);
      acc[p.doc] += idf * (tf * (params.k1 + 1.0)) / (tf + norm);
      matched[p.doc] = true;
    }
  }

  std::vector<ScoredDoc> hits;
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    if (matched[i] && acc[i] > 0.0) hits.push_back({documents_[i].id, acc[i]});
  }
  auto better = [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  };
  const auto take = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take), hits.end(),
                    better);
  hits.resize(take);
  return hits;
}

Json CorpusIndex::to_json() const {
  Json docs = Json::array();
  for (const auto& d : documents_) docs.push_back(document_to_json(d));
  // Terms sorted so the file is byte-stable.
  std::vector<const std::string*> terms;
  terms.reserve(postings_.size());
  for (const auto& [term, _] : postings_) terms.push_back(&term);
  std::sort(terms.begin(), terms.end(), [](auto* a, auto* b) { return *a < *b; });
  Json postings = Json::object();
  for (const auto* term : terms) {
    Json list = Json::array();
    for (const auto& p : postings_.at(*term)) list.push_back(Json::array({p.doc, p.tf}));
    postings[*term] = std::move(list);
  }
  return Json{{"format", kIndexFormat},
              {"version", kIndexVersion},
              {"documents", std::move(docs)},
              {"doc_lengths", doc_lengths_},
              {"average_doc_length", average_doc_length_},
              {"postings", std::move(postings)}};
}

CorpusIndex CorpusIndex::from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != kIndexFormat ||
        j.at("version").get<int>() != kIndexVersion) {
      throw Error(ErrorCode::MalformedRecord, "not a graph_anchor index file");
    }
    CorpusIndex index;
    for (const auto& d : j.at("documents")) {
      auto doc = document_from_json(d);
      const auto pos = static_cast<std::uint32_t>(index.documents_.size());
      if (!index.by_id_.emplace(doc.id, pos).second) {
        throw Error(ErrorCode::DuplicateDocId, "duplicate document id '" + doc.id + "'");
      }
      index.documents_.push_back(std::move(doc));
    }
    index.doc_lengths_ = j.at("doc_lengths").get<std::vector<std::uint32_t>>();
    if (index.doc_lengths_.size() != index.documents_.size()) {
      throw Error(ErrorCode::MalformedRecord, "doc_lengths size mismatch");
    }
    for (const auto& [term, list] : j.at("postings").items()) {
      auto& out = index.postings_[term];
      for (const auto& p : list) {
        Posting posting{p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()};
        if (posting.doc >= index.documents_.size()) {
          throw Error(ErrorCode::MalformedRecord, "posting refers to unknown document");
        }
        out.push_back(posting);
      }
    }
    index.finalize();
    return index;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("bad index JSON: ") + e.what());
  }
}

void CorpusIndex::save(const std::string& path) const {
  detail::write_file(path, to_json().dump() + "\n");
}

CorpusIndex CorpusIndex::load(const std::string& path) {
  auto text = detail::read_file(path);
  try {
    return from_json(Json::parse(text));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("bad index JSON: ") + e.what());
  }
}

// --- Bm25Retriever ---------------------------------------------------------

Bm25Retriever::Bm25Retriever(std::shared_ptr<const CorpusIndex> index, Bm25Params params)
    : index_(std::move(index)), params_(params) {}

std::vector<Document> Bm25Retriever::retrieve(std::string_view query, std::size_t k) const {
  std::vector<Document> out;
  for (const auto& hit : index_->score(query, k, params_)) out.push_back(*index_->find(hit.doc_id));
  return out;
}

// --- aggregation -----------------------------------------------------------

std::vector<Document> aggregate(const std::vector<std::vector<Document>>& step_docs) {
  std::vector<Document> out;
  std::unordered_set<std::string> seen;
  for (const auto& step : step_docs) {
    for (const auto& doc : step) {
      if (seen.insert(doc.id).second) out.push_back(doc);
    }
  }
  return out;
}

Json document_to_json(const Document& doc) {
  return Json{{"id", doc.id}, {"title", doc.title}, {"text", doc.text}};
}

Document document_from_json(const Json& j) {
  return Document{j.at("id").get<std::string>(), j.value("title", std::string{}),
                  j.at("text").get<std::string>()};
}

}  // namespace graph_anchor
