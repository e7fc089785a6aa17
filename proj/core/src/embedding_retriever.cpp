#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <nlohmann/json.hpp>

#include "graph_anchor/error.hpp"
#include "graph_anchor/retrieval.hpp"
#include "http_util.hpp"
#include "text_util.hpp"

namespace graph_anchor {

namespace {

double norm(const std::vector<float>& v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * x;
  return std::sqrt(sum);
}

}  // namespace

HttpEmbedder::HttpEmbedder(std::string endpoint, std::string model, std::string api_key)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), api_key_(std::move(api_key)) {}

std::vector<float> HttpEmbedder::embed(std::string_view text) const {
  auto ep = detail::parse_endpoint(endpoint_);
  Json body{{"model", model_}, {"input", std::string(text)}};
  auto reply = detail::post_json(ep, "/embeddings", body.dump(), api_key_,
                                 std::chrono::seconds(60));
  if (reply.status < 200 || reply.status >= 300) {
    throw Error(ErrorCode::RemoteStatus, "embedding endpoint returned HTTP " +
                                             std::to_string(reply.status) + ": " +
                                             reply.body.substr(0, 200));
  }
  try {
    return Json::parse(reply.body).at("data").at(0).at("embedding").get<std::vector<float>>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::RemoteStatus, std::string("unexpected embedding response: ") + e.what());
  }
}

EmbeddingRetriever::EmbeddingRetriever(std::shared_ptr<const CorpusIndex> corpus,
                                       std::shared_ptr<const Embedder> embedder,
                                       std::unordered_map<std::string, std::vector<float>> vectors)
    : corpus_(std::move(corpus)), embedder_(std::move(embedder)) {
  const auto& docs = corpus_->documents();
  for (std::uint32_t i = 0; i < docs.size(); ++i) {
    auto it = vectors.find(docs[i].id);
    if (it == vectors.end()) {
      throw Error(ErrorCode::MalformedRecord, "no vector for document '" + docs[i].id + "'");
    }
    auto v = std::move(it->second);
    const double n = norm(v);
    if (n > 0.0) {
      for (auto& x : v) x = static_cast<float>(x / n);
    }
    vectors_.emplace_back(i, std::move(v));
  }
}

std::unordered_map<std::string, std::vector<float>> EmbeddingRetriever::load_vectors(
    std::istream& sidecar) {
  std::unordered_map<std::string, std::vector<float>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(sidecar, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      auto j = Json::parse(line);
      auto id = j.at("id").get<std::string>();
      if (!out.emplace(id, j.at("vector").get<std::vector<float>>()).second) {
        throw Error(ErrorCode::DuplicateDocId, "duplicate vector id '" + id + "'", line_no);
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, e.what(), line_no);
    }
  }
  return out;
}

std::vector<Document> EmbeddingRetriever::retrieve(std::string_view query, std::size_t k) const {
  if (tokenize(query).empty()) throw Error(ErrorCode::EmptyQuery, "query has no terms");
  auto q = embedder_->embed(query);
  const double qn = norm(q);
  std::vector<ScoredDoc> hits;
  if (qn > 0.0) {
    for (const auto& [doc, v] : vectors_) {
      if (v.size() != q.size()) {
        throw Error(ErrorCode::MalformedRecord, "embedding dimension mismatch");
      }
      double dot = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) dot += static_cast<double>(q[i]) * v[i];
      const double cosine = dot / qn;
      if (cosine > 0.0) hits.push_back({corpus_->documents()[doc].id, cosine});
    }
  }
  std::sort(hits.begin(), hits.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  if (hits.size() > k) hits.resize(k);
  std::vector<Document> out;
  for (const auto& h : hits) out.push_back(*corpus_->find(h.doc_id));
  return out;
}

}  // namespace graph_anchor
