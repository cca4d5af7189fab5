#include "aerocue/knowledge_base.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>

#include "aerocue/error.hpp"
#include "aerocue/http_client.hpp"
#include "aerocue/resources.hpp"
#include "aerocue/task_standards.hpp"

namespace aerocue {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_tags(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string_view::npos ? s.size() : comma;
    std::string tag = trim(s.substr(start, end - start));
    if (!tag.empty()) out.push_back(std::move(tag));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

struct Span {
  std::size_t begin;
  std::size_t end;
};

// Non-blank paragraphs of `body`, trimmed, in order.
std::vector<Span> paragraphs(const std::string& body) {
  std::vector<Span> out;
  std::size_t pos = 0;
  std::optional<std::size_t> start;
  std::size_t last_text_end = 0;
  while (pos <= body.size()) {
    const auto nl = body.find('\n', pos);
    const std::size_t line_end = nl == std::string::npos ? body.size() : nl;
    bool blank = true;
    for (std::size_t i = pos; i < line_end; ++i) blank = blank && is_space(body[i]);
    if (blank) {
      if (start) out.push_back({*start, last_text_end});
      start.reset();
    } else {
      std::size_t b = pos;
      while (is_space(body[b])) ++b;
      std::size_t e = line_end;
      while (is_space(body[e - 1])) --e;
      if (!start) start = b;
      last_text_end = e;
    }
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  if (start) out.push_back({*start, last_text_end});
  return out;
}

// Cuts one over-long paragraph into pieces no longer than `max`.
void split_long(const std::string& body, Span p, std::size_t max, std::vector<Span>& out) {
  std::size_t pos = p.begin;
  while (p.end - pos > max) {
    const std::size_t limit = pos + max;
    std::size_t cut = 0;
    for (std::size_t i = limit; i > pos + 1; --i) {
      const char c = body[i - 1];
      if ((c == '.' || c == '!' || c == '?') && i < p.end && is_space(body[i])) {
        cut = i;
        break;
      }
    }
    if (cut == 0) {
      for (std::size_t i = limit; i > pos; --i) {
        if (is_space(body[i])) {
          cut = i;
          break;
        }
      }
    }
    if (cut == 0) cut = limit;
    std::size_t piece_end = cut;
    while (piece_end > pos && is_space(body[piece_end - 1])) --piece_end;
    out.push_back({pos, piece_end});
    pos = cut;
    while (pos < p.end && is_space(body[pos])) ++pos;
  }
  if (pos < p.end) out.push_back({pos, p.end});
}

void put_u32(std::ostream& o, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) o.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::ostream& o, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) o.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_str(std::ostream& o, const std::string& s) {
  put_u32(o, static_cast<std::uint32_t>(s.size()));
  o.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  std::uint64_t u(int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      const int c = in_.get();
      if (c == EOF) throw Error(Errc::InvalidIndexFile, "unexpected end of file");
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
  }
  std::string str() {
    const auto n = u(4);
    if (n > (1u << 26)) throw Error(Errc::InvalidIndexFile, "string length out of range");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::uint64_t>(in_.gcount()) != n) throw Error(Errc::InvalidIndexFile, "unexpected end of file");
    return s;
  }

 private:
  std::istream& in_;
};

constexpr char kIndexMagic[4] = {'A', 'Q', 'K', 'B'};
constexpr std::uint32_t kIndexVersion = 1;

}  // namespace

std::string_view to_string(KnowledgeTier t) noexcept {
  switch (t) {
    case KnowledgeTier::basic: return "basic";
    case KnowledgeTier::aircraft_type: return "aircraft_type";
    case KnowledgeTier::mission_specific: return "mission_specific";
  }
  return "basic";
}

std::optional<KnowledgeTier> tier_from(std::string_view s) noexcept {
  if (s == "basic") return KnowledgeTier::basic;
  if (s == "aircraft_type") return KnowledgeTier::aircraft_type;
  if (s == "mission_specific") return KnowledgeTier::mission_specific;
  return std::nullopt;
}

KnowledgeDoc parse_knowledge_doc(std::string_view text, std::string_view fallback_id) {
  KnowledgeDoc doc;
  doc.doc_id = std::string(fallback_id);
  std::string_view body = text;
  bool have_tier = false;

  std::string_view rest = text;
  while (!rest.empty() && (rest.front() == '\n' || rest.front() == '\r')) rest.remove_prefix(1);
  if (rest.starts_with("---")) {
    const auto first_nl = rest.find('\n');
    const auto close = rest.find("\n---", first_nl);
    if (first_nl == std::string_view::npos || close == std::string_view::npos)
      throw Error(Errc::ConfigInvalid, doc.doc_id + ": unterminated front matter");
    std::string_view header = rest.substr(first_nl + 1, close - first_nl - 1);
    auto after = rest.find('\n', close + 1);
    body = after == std::string_view::npos ? std::string_view{} : rest.substr(after + 1);
    std::size_t pos = 0;
    while (pos < header.size()) {
      auto nl = header.find('\n', pos);
      if (nl == std::string_view::npos) nl = header.size();
      std::string_view line = header.substr(pos, nl - pos);
      pos = nl + 1;
      const auto colon = line.find(':');
      if (colon == std::string_view::npos) continue;
      const std::string key = trim(line.substr(0, colon));
      const std::string value = trim(line.substr(colon + 1));
      if (key == "tier") {
        auto t = tier_from(value);
        if (!t) throw Error(Errc::ConfigInvalid, doc.doc_id + ": unknown tier " + value);
        doc.tier = *t;
        have_tier = true;
      } else if (key == "title") {
        doc.title = value;
      } else if (key == "tags") {
        doc.tags = split_tags(value);
      } else if (key == "doc_id" && !value.empty()) {
        doc.doc_id = value;
      }
    }
  }
  if (!have_tier) throw Error(Errc::ConfigInvalid, doc.doc_id + ": missing tier");
  doc.body = trim(body);
  if (doc.body.empty()) throw Error(Errc::EmptyDocument, doc.doc_id);
  if (doc.title.empty()) doc.title = doc.doc_id;
  return doc;
}

std::vector<KnowledgeDoc> load_corpus_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw Error(Errc::Io, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".md" || ext == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<KnowledgeDoc> docs;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot read " + f.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    docs.push_back(parse_knowledge_doc(text, f.stem().string()));
  }
  return docs;
}

std::vector<KnowledgeDoc> load_builtin_corpus() {
  std::vector<KnowledgeDoc> docs;
  for (const auto& path : list_resources("corpus/")) {
    docs.push_back(parse_knowledge_doc(load_resource(path), std::filesystem::path(path).stem().string()));
  }
  return docs;
}

std::vector<Chunk> ingest(const KnowledgeDoc& doc, const ChunkingParams& params) {
  if (doc.body.find_first_not_of(" \t\r\n") == std::string::npos) throw Error(Errc::EmptyDocument, doc.doc_id);
  const std::size_t max = std::max<std::size_t>(params.max_chunk_chars, 1);

  std::vector<Span> pieces;
  for (const Span& p : paragraphs(doc.body)) split_long(doc.body, p, max, pieces);

  std::vector<Chunk> chunks;
  std::size_t i = 0;
  while (i < pieces.size()) {
    std::size_t j = i + 1;
    while (j < pieces.size() && pieces[j].end - pieces[i].begin <= max &&
           (params.max_paragraphs == 0 || j - i < params.max_paragraphs)) {
      ++j;
    }
    Chunk c;
    c.doc_id = doc.doc_id;
    c.tier = doc.tier;
    c.tags = doc.tags;
    c.title = doc.title;
    c.position = chunks.size();
    c.chunk_id = doc.doc_id + "#" + std::to_string(c.position);
    c.offset = pieces[i].begin;
    c.text = doc.body.substr(pieces[i].begin, pieces[j - 1].end - pieces[i].begin);
    chunks.push_back(std::move(c));
    i = j;
  }
  return chunks;
}

void normalize_embedding(EmbeddingVector& v) {
  double sum = 0.0;
  for (float x : v) {
    if (!std::isfinite(x)) throw Error(Errc::DimensionMismatch, "non-finite embedding entry");
    sum += static_cast<double>(x) * x;
  }
  if (!(sum > 0.0)) throw Error(Errc::DimensionMismatch, "zero embedding");
  const double inv = 1.0 / std::sqrt(sum);
  for (float& x : v) x = static_cast<float>(x * inv);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

HashEmbedder::HashEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw Error(Errc::DimensionMismatch, "dimension must be positive");
}

EmbeddingVector HashEmbedder::embed(std::string_view text) {
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw Error(Errc::EmptyDocument, "nothing to embed");
  std::vector<double> acc(dimension_, 0.0);
  for (const auto& t : tokens) {
    const std::uint64_t h = fnv1a64(t);
    acc[h % dimension_] += ((h >> 63) & 1u) != 0 ? -1.0 : 1.0;
  }
  double sum = 0.0;
  for (double x : acc) sum += x * x;
  EmbeddingVector v(dimension_, 0.0f);
  if (sum == 0.0) {
    // Every token cancelled out; fall back to the unsigned bag.
    for (const auto& t : tokens) acc[fnv1a64(t) % dimension_] += 1.0;
    sum = std::accumulate(acc.begin(), acc.end(), 0.0, [](double a, double x) { return a + x * x; });
  }
  const double inv = 1.0 / std::sqrt(sum);
  for (std::size_t i = 0; i < dimension_; ++i) v[i] = static_cast<float>(acc[i] * inv);
  return v;
}

std::string HashEmbedder::name() const { return "hash-fnv1a-" + std::to_string(dimension_); }

RemoteEmbedder::RemoteEmbedder(Options options)
    : options_(std::move(options)), dimension_(options_.expected_dimension) {}

std::string RemoteEmbedder::name() const { return "remote:" + options_.model; }

EmbeddingVector RemoteEmbedder::embed(std::string_view text) {
  const Json body = {{"model", options_.model}, {"input", std::string(text)}};
  HttpHeaders headers;
  if (!options_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + options_.api_key);
  HttpResult r = http_post_json(options_.base_url, "/v1/embeddings", body.dump(), headers, options_.timeout);
  if (r.failure != HttpResult::Failure::none)
    throw Error(Errc::ProviderUnavailable, options_.base_url + ": " + r.error);
  if (!r.ok()) throw Error(Errc::ProviderUnavailable, "embeddings endpoint returned " + std::to_string(r.status));

  EmbeddingVector v;
  try {
    const Json j = Json::parse(r.body);
    for (const auto& x : j.at("data").at(0).at("embedding")) v.push_back(x.get<float>());
  } catch (const Json::exception& e) {
    throw Error(Errc::ProviderUnavailable, std::string("malformed embeddings response: ") + e.what());
  }
  if (v.empty()) throw Error(Errc::ProviderUnavailable, "empty embedding");
  if (dimension_ == 0) dimension_ = v.size();
  if (v.size() != dimension_)
    throw Error(Errc::DimensionMismatch,
                "expected " + std::to_string(dimension_) + ", got " + std::to_string(v.size()));
  normalize_embedding(v);
  return v;
}

bool SearchFilter::matches(const Chunk& c) const {
  if (tier && c.tier != *tier) return false;
  for (const auto& t : tags) {
    if (std::find(c.tags.begin(), c.tags.end(), t) == c.tags.end()) return false;
  }
  return true;
}

VectorIndex::VectorIndex(std::size_t dimension, std::string embedder_name)
    : dimension_(dimension), embedder_name_(std::move(embedder_name)) {}

void VectorIndex::add(Chunk chunk, EmbeddingVector vector) {
  if (dimension_ == 0) dimension_ = vector.size();
  if (vector.size() != dimension_)
    throw Error(Errc::DimensionMismatch,
                "index has " + std::to_string(dimension_) + ", vector has " + std::to_string(vector.size()));
  normalize_embedding(vector);
  chunks_.push_back(std::move(chunk));
  vectors_.push_back(std::move(vector));
}

double cosine_unit(const EmbeddingVector& a, const EmbeddingVector& b) noexcept {
  double dot = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) dot += static_cast<double>(a[i]) * b[i];
  return std::clamp(dot, -1.0, 1.0);
}

std::vector<RetrievalHit> VectorIndex::search(const EmbeddingVector& query, std::size_t k,
                                              const SearchFilter& filter) const {
  if (chunks_.empty()) throw Error(Errc::EmptyIndex, "index is empty");
  if (query.size() != dimension_)
    throw Error(Errc::DimensionMismatch,
                "index has " + std::to_string(dimension_) + ", query has " + std::to_string(query.size()));
  EmbeddingVector q = query;
  normalize_embedding(q);

  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(chunks_.size());
  for (std::size_t i = 0; i < chunks_.size(); ++i) {
    if (!filter.matches(chunks_[i])) continue;
    scored.emplace_back(cosine_unit(q, vectors_[i]), i);
  }
  const auto better = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    if (chunks_[a.second].chunk_id != chunks_[b.second].chunk_id)
      return chunks_[a.second].chunk_id < chunks_[b.second].chunk_id;
    return a.second < b.second;
  };
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);

  std::vector<RetrievalHit> hits;
  hits.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    hits.push_back({chunks_[scored[r].second], scored[r].first, r + 1});
  }
  return hits;
}

void VectorIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(kIndexMagic, 4);
  put_u32(out, kIndexVersion);
  put_u32(out, static_cast<std::uint32_t>(dimension_));
  put_u64(out, chunks_.size());
  put_str(out, embedder_name_);
  for (std::size_t i = 0; i < chunks_.size(); ++i) {
    const Chunk& c = chunks_[i];
    put_str(out, c.chunk_id);
    put_str(out, c.doc_id);
    out.put(static_cast<char>(c.tier));
    put_u32(out, static_cast<std::uint32_t>(c.tags.size()));
    for (const auto& t : c.tags) put_str(out, t);
    put_str(out, c.title);
    put_str(out, c.text);
    put_u64(out, c.position);
    put_u64(out, c.offset);
    for (float x : vectors_[i]) put_u32(out, std::bit_cast<std::uint32_t>(x));
  }
  if (!out) throw Error(Errc::Io, "write failed: " + path.string());
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || !std::equal(magic, magic + 4, kIndexMagic))
    throw Error(Errc::InvalidIndexFile, path.string() + ": not an index file");
  Reader r(in);
  const auto version = r.u(4);
  if (version != kIndexVersion)
    throw Error(Errc::InvalidIndexFile, "unsupported index version " + std::to_string(version));
  const auto dim = r.u(4);
  const auto count = r.u(8);
  if (dim == 0 && count > 0) throw Error(Errc::InvalidIndexFile, "zero dimension");
  VectorIndex idx(dim, r.str());
  for (std::uint64_t i = 0; i < count; ++i) {
    Chunk c;
    c.chunk_id = r.str();
    c.doc_id = r.str();
    const auto tier = r.u(1);
    if (tier > 2) throw Error(Errc::InvalidIndexFile, "bad tier");
    c.tier = static_cast<KnowledgeTier>(tier);
    const auto ntags = r.u(4);
    if (ntags > 4096) throw Error(Errc::InvalidIndexFile, "tag count out of range");
    for (std::uint64_t t = 0; t < ntags; ++t) c.tags.push_back(r.str());
    c.title = r.str();
    c.text = r.str();
    c.position = r.u(8);
    c.offset = r.u(8);
    EmbeddingVector v(dim);
    for (auto& x : v) x = std::bit_cast<float>(static_cast<std::uint32_t>(r.u(4)));
    idx.chunks_.push_back(std::move(c));
    idx.vectors_.push_back(std::move(v));
  }
  if (in.peek() != EOF) throw Error(Errc::InvalidIndexFile, "trailing bytes");
  return idx;
}

VectorIndex build_index(const std::vector<KnowledgeDoc>& docs, Embedder& embedder, const ChunkingParams& params) {
  VectorIndex index(embedder.dimension(), embedder.name());
  for (const auto& doc : docs) {
    for (auto& chunk : ingest(doc, params)) {
      EmbeddingVector v = embedder.embed(chunk.title + "\n" + chunk.text);
      index.add(std::move(chunk), std::move(v));
    }
  }
  return index;
}

AlignedContext build_context(const std::vector<RetrievalHit>& hits, std::size_t char_budget) {
  AlignedContext ctx;
  for (const auto& h : hits) {
    const std::size_t extra = (ctx.text.empty() ? 0 : kContextSeparator.size()) + h.chunk.text.size();
    if (ctx.text.size() + extra > char_budget) break;
    if (!ctx.text.empty()) ctx.text += kContextSeparator;
    ctx.text += h.chunk.text;
    ctx.provenance.push_back(h.chunk.chunk_id);
  }
  return ctx;
}

std::string_view metric_words(Metric m) noexcept {
  switch (m) {
    case Metric::altitude_ft: return "altitude";
    case Metric::pitch_deg: return "pitch attitude";
    case Metric::bank_deg: return "bank angle";
    case Metric::heading_deg: return "heading";
    case Metric::ias_kt: return "airspeed";
    case Metric::gs_kt: return "ground speed";
    case Metric::vs_fpm: return "vertical speed";
    case Metric::accel_lon_g: return "longitudinal acceleration";
    case Metric::accel_lat_g: return "coordination";
    case Metric::accel_vert_g: return "load factor";
  }
  return "";
}

std::string retrieval_query(const TaskSpec& spec, std::string_view phase_name, std::optional<Metric> worst) {
  std::string q = spec.display_name.empty() ? spec.task_id : spec.display_name;
  std::string phase(phase_name);
  std::replace(phase.begin(), phase.end(), '_', ' ');
  q += " " + phase;
  if (worst) q += " " + std::string(metric_words(*worst));
  std::replace(q.begin(), q.end(), '_', ' ');
  return q;
}

}  // namespace aerocue
