#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aerocue/flight_state.hpp"

namespace aerocue {

struct TaskSpec;

enum class KnowledgeTier : std::uint8_t { basic, aircraft_type, mission_specific };
std::string_view to_string(KnowledgeTier t) noexcept;
std::optional<KnowledgeTier> tier_from(std::string_view s) noexcept;

struct KnowledgeDoc {
  std::string doc_id;
  KnowledgeTier tier = KnowledgeTier::basic;
  std::string title;
  std::string body;
  std::vector<std::string> tags;  // aircraft model, task ids, instrument names
};

// Markdown with a front-matter block:
//   ---
//   tier: mission_specific
//   title: Steep turns
//   tags: steep_turn, altimeter
//   ---
// `doc_id` in the front matter overrides `fallback_id`. Throws ConfigInvalid
// for a missing or unknown tier, EmptyDocument for an empty body.
KnowledgeDoc parse_knowledge_doc(std::string_view text, std::string_view fallback_id);
// Every *.md / *.txt under `dir`, sorted by path.
std::vector<KnowledgeDoc> load_corpus_dir(const std::filesystem::path& dir);
// The corpus shipped under resources/corpus.
std::vector<KnowledgeDoc> load_builtin_corpus();

struct ChunkingParams {
  std::size_t max_chunk_chars = 700;
  std::size_t max_paragraphs = 0;  // per chunk; 0 = no limit
};

struct Chunk {
  std::string chunk_id;  // "<doc_id>#<position>"
  std::string doc_id;
  KnowledgeTier tier = KnowledgeTier::basic;
  std::vector<std::string> tags;
  std::string title;
  std::string text;
  std::size_t position = 0;
  std::size_t offset = 0;  // of `text` inside the doc body

  bool operator==(const Chunk&) const = default;
};

// Splits on blank lines, packing whole paragraphs while they fit. Paragraphs
// longer than max_chunk_chars split at a sentence end, else at whitespace.
// Chunks are ordered, disjoint, and only whitespace lies between them.
// Throws EmptyDocument.
std::vector<Chunk> ingest(const KnowledgeDoc& doc, const ChunkingParams& params = {});

using EmbeddingVector = std::vector<float>;

// Scales to unit L2 norm. Throws DimensionMismatch on a zero or non-finite vector.
void normalize_embedding(EmbeddingVector& v);

class Embedder {
 public:
  virtual ~Embedder() = default;
  // Unit-norm vector. Throws ProviderUnavailable or DimensionMismatch.
  virtual EmbeddingVector embed(std::string_view text) = 0;
  // 0 until known (a remote provider learns it from its first response).
  virtual std::size_t dimension() const noexcept = 0;
  virtual std::string name() const = 0;
};

// Lowercased alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

// Offline embedder: each token hashed with 64-bit FNV-1a into one of d buckets
// with a hash-derived sign, then normalized.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dimension = 256);
  EmbeddingVector embed(std::string_view text) override;
  std::size_t dimension() const noexcept override { return dimension_; }
  std::string name() const override;

 private:
  std::size_t dimension_;
};

std::uint64_t fnv1a64(std::string_view s) noexcept;

// OpenAI-compatible POST {base_url}/v1/embeddings.
class RemoteEmbedder final : public Embedder {
 public:
  struct Options {
    std::string base_url = "http://127.0.0.1:8000";
    std::string model = "text-embedding-3-small";
    std::string api_key;
    std::chrono::milliseconds timeout{5000};
    std::size_t expected_dimension = 0;  // 0: take it from the first response
  };
  explicit RemoteEmbedder(Options options);
  EmbeddingVector embed(std::string_view text) override;
  std::size_t dimension() const noexcept override { return dimension_; }
  std::string name() const override;

 private:
  Options options_;
  std::size_t dimension_ = 0;
};

struct RetrievalHit {
  Chunk chunk;
  double score = 0.0;  // cosine, [-1, 1]
  std::size_t rank = 0;  // from 1
};

struct SearchFilter {
  std::optional<KnowledgeTier> tier;
  std::vector<std::string> tags;  // a chunk must carry every one

  bool matches(const Chunk& c) const;
};

// Exact flat cosine index. Vectors are stored unit-normalized.
class VectorIndex {
 public:
  explicit VectorIndex(std::size_t dimension = 0, std::string embedder_name = {});

  // Throws DimensionMismatch. The first add fixes the dimension if it was 0.
  void add(Chunk chunk, EmbeddingVector vector);
  // Top k by cosine among chunks passing the filter; equal scores order by
  // chunk_id. Throws EmptyIndex, DimensionMismatch.
  std::vector<RetrievalHit> search(const EmbeddingVector& query, std::size_t k,
                                   const SearchFilter& filter = {}) const;

  std::size_t size() const noexcept { return chunks_.size(); }
  bool empty() const noexcept { return chunks_.empty(); }
  std::size_t dimension() const noexcept { return dimension_; }
  const std::string& embedder_name() const noexcept { return embedder_name_; }
  const Chunk& chunk(std::size_t i) const { return chunks_.at(i); }
  const EmbeddingVector& vector(std::size_t i) const { return vectors_.at(i); }

  // Single binary file: magic, version, dimension, count, embedder name, then
  // chunk records with their vectors. Throws Io / InvalidIndexFile.
  void save(const std::filesystem::path& path) const;
  static VectorIndex load(const std::filesystem::path& path);

 private:
  std::size_t dimension_;
  std::string embedder_name_;
  std::vector<Chunk> chunks_;
  std::vector<EmbeddingVector> vectors_;
};

// Cosine of two unit vectors as the index computes it.
double cosine_unit(const EmbeddingVector& a, const EmbeddingVector& b) noexcept;

// Ingests and embeds every doc.
VectorIndex build_index(const std::vector<KnowledgeDoc>& docs, Embedder& embedder,
                        const ChunkingParams& params = {});

struct AlignedContext {
  std::string text;
  std::vector<std::string> provenance;  // chunk ids, in rank order
  bool degraded = false;                // no knowledge was available
};

inline constexpr std::string_view kContextSeparator = "\n\n";

// Hit texts in rank order joined by kContextSeparator, stopping before the
// first hit that would push the text past `char_budget`.
AlignedContext build_context(const std::vector<RetrievalHit>& hits, std::size_t char_budget);

// "<task> <phase> <metric>" in plain words, e.g. "steep turn hold 45 bank angle".
std::string retrieval_query(const TaskSpec& spec, std::string_view phase_name, std::optional<Metric> worst);
std::string_view metric_words(Metric m) noexcept;

}  // namespace aerocue
