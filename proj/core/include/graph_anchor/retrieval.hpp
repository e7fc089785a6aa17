#pragma once

// Corpus ingestion, lexical BM25 retrieval, an optional dense backend served
// over HTTP, and cross-step document aggregation.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "graph_anchor/json_fwd.hpp"

namespace graph_anchor {

struct Document {
  std::string id;
  std::string title;
  std::string text;

  friend bool operator==(const Document&, const Document&) = default;
};

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;
};

/// Lowercase and split on runs of non-alphanumeric ASCII. Bytes >= 0x80 are
/// treated as word characters so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// Immutable inverted index over a set of documents. The scored field of a
/// document is `title + " " + text`.
class CorpusIndex {
 public:
  struct Posting {
    std::uint32_t doc;  // position in documents()
    std::uint32_t tf;
  };

  /// Reads JSONL `{"id","title","text"}` records. Blank lines are skipped.
  /// Throws Error(MalformedRecord) or Error(DuplicateDocId) with the line.
  static CorpusIndex ingest(std::istream& records);
  static CorpusIndex ingest_file(const std::string& path);
  static CorpusIndex from_documents(std::vector<Document> documents);

  [[nodiscard]] std::vector<ScoredDoc> score(std::string_view query, std::size_t k,
                                             Bm25Params params = {}) const;

  [[nodiscard]] const std::vector<Document>& documents() const noexcept { return documents_; }
  [[nodiscard]] const Document* find(std::string_view id) const;
  [[nodiscard]] const std::vector<Posting>* postings(std::string_view term) const;
  [[nodiscard]] const std::vector<std::uint32_t>& doc_lengths() const noexcept {
    return doc_lengths_;
  }
  [[nodiscard]] double average_doc_length() const noexcept { return average_doc_length_; }
  [[nodiscard]] std::size_t size() const noexcept { return documents_.size(); }

  /// Persisted form (documents plus postings) written by `ingest`.
  [[nodiscard]] Json to_json() const;
  static CorpusIndex from_json(const Json& j);
  void save(const std::string& path) const;
  static CorpusIndex load(const std::string& path);

 private:
  void add(Document doc, std::size_t line);
  void finalize();

  std::vector<Document> documents_;
  std::unordered_map<std::string, std::uint32_t> by_id_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::vector<std::uint32_t> doc_lengths_;
  double average_doc_length_ = 0.0;
};

/// Top-k retrieval contract shared by all backends. Results are sorted by
/// descending score, ties by ascending id; zero-score documents are excluded.
class Retriever {
 public:
  virtual ~Retriever() = default;
  /// Throws Error(EmptyQuery) when the query has no tokens.
  [[nodiscard]] virtual std::vector<Document> retrieve(std::string_view query,
                                                       std::size_t k) const = 0;
};

class Bm25Retriever final : public Retriever {
 public:
  explicit Bm25Retriever(std::shared_ptr<const CorpusIndex> index, Bm25Params params = {});
  [[nodiscard]] std::vector<Document> retrieve(std::string_view query,
                                               std::size_t k) const override;
  [[nodiscard]] const CorpusIndex& index() const noexcept { return *index_; }

 private:
  std::shared_ptr<const CorpusIndex> index_;
  Bm25Params params_;
};

/// Embeds `text` into a dense vector.
class Embedder {
 public:
  virtual ~Embedder() = default;
  [[nodiscard]] virtual std::vector<float> embed(std::string_view text) const = 0;
};

/// POST {endpoint}/embeddings `{"model","input"}` and read data[0].embedding.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(std::string endpoint, std::string model, std::string api_key = {});
  [[nodiscard]] std::vector<float> embed(std::string_view text) const override;

 private:
  std::string endpoint_;
  std::string model_;
  std::string api_key_;
};

/// Cosine similarity between the embedded query and precomputed document
/// vectors from a JSONL sidecar `{"id","vector":[...]}`.
class EmbeddingRetriever final : public Retriever {
 public:
  EmbeddingRetriever(std::shared_ptr<const CorpusIndex> corpus,
                     std::shared_ptr<const Embedder> embedder,
                     std::unordered_map<std::string, std::vector<float>> vectors);

  static std::unordered_map<std::string, std::vector<float>> load_vectors(
      std::istream& sidecar);

  [[nodiscard]] std::vector<Document> retrieve(std::string_view query,
                                               std::size_t k) const override;

 private:
  std::shared_ptr<const CorpusIndex> corpus_;
  std::shared_ptr<const Embedder> embedder_;
  std::vector<std::pair<std::uint32_t, std::vector<float>>> vectors_;  // (doc, unit vector)
};

/// Union of per-step results in first-occurrence order, deduplicated by id.
std::vector<Document> aggregate(const std::vector<std::vector<Document>>& step_docs);

Json document_to_json(const Document& doc);
Document document_from_json(const Json& j);

}  // namespace graph_anchor
