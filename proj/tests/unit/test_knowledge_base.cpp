#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "aerocue/knowledge_base.hpp"
#include "aerocue/task_standards.hpp"
#include "test_support.hpp"

using namespace aerocue;

namespace {

KnowledgeDoc make_doc(std::string id, std::string body, KnowledgeTier tier = KnowledgeTier::basic,
                      std::vector<std::string> tags = {}) {
  KnowledgeDoc d;
  d.doc_id = std::move(id);
  d.tier = tier;
  d.title = d.doc_id;
  d.body = std::move(body);
  d.tags = std::move(tags);
  return d;
}

std::string strip_ws(std::string_view s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  return out;
}

EmbeddingVector random_unit(std::mt19937& rng, std::size_t d) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  EmbeddingVector v(d);
  for (auto& x : v) x = n(rng);
  normalize_embedding(v);
  return v;
}

// Scores every passing chunk and sorts by (score desc, chunk_id asc).
std::vector<std::pair<std::string, double>> scan_oracle(const VectorIndex& idx, const EmbeddingVector& q,
                                                        std::size_t k, const SearchFilter& f = {}) {
  double qn = 0.0;
  for (float x : q) qn += double(x) * x;
  qn = std::sqrt(qn);
  std::vector<std::pair<std::string, double>> all;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (!f.matches(idx.chunk(i))) continue;
    double dot = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) dot += double(float(q[j] / qn)) * idx.vector(i)[j];
    all.emplace_back(idx.chunk(i).chunk_id, std::clamp(dot, -1.0, 1.0));
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

}  // namespace

TEST_CASE("front matter parsing") {
  const auto doc = parse_knowledge_doc("---\ntier: aircraft_type\ntitle: Trainer\ntags: trainer, altimeter\n---\n\nBody text.\n",
                                       "fallback");
  CHECK(doc.doc_id == "fallback");
  CHECK(doc.tier == KnowledgeTier::aircraft_type);
  CHECK(doc.title == "Trainer");
  CHECK(doc.tags == std::vector<std::string>{"trainer", "altimeter"});
  CHECK(doc.body == "Body text.");

  CHECK(parse_knowledge_doc("---\ntier: basic\ndoc_id: custom\n---\nx", "f").doc_id == "custom");
  CHECK_ERRC(parse_knowledge_doc("no front matter", "f"), Errc::ConfigInvalid);
  CHECK_ERRC(parse_knowledge_doc("---\ntier: expert\n---\nx", "f"), Errc::ConfigInvalid);
  CHECK_ERRC(parse_knowledge_doc("---\ntier: basic\n---\n  \n\n", "f"), Errc::EmptyDocument);
}

TEST_CASE("builtin corpus spans all tiers") {
  const auto docs = load_builtin_corpus();
  REQUIRE(docs.size() >= 10);
  std::set<KnowledgeTier> tiers;
  for (const auto& d : docs) tiers.insert(d.tier);
  CHECK(tiers.size() == 3);
}

TEST_CASE("ingest: paragraph boundaries") {
  const auto doc = make_doc("d", "First paragraph.\n\nSecond paragraph.\n\nThird paragraph.");
  ChunkingParams p;
  p.max_paragraphs = 1;
  const auto chunks = ingest(doc, p);
  REQUIRE(chunks.size() == 3);
  CHECK(chunks[0].text == "First paragraph.");
  CHECK(chunks[1].text == "Second paragraph.");
  CHECK(chunks[2].text == "Third paragraph.");
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(chunks[i].position == i);
    CHECK(chunks[i].chunk_id == "d#" + std::to_string(i));
  }

  const auto single = ingest(doc);
  REQUIRE(single.size() == 1);
  CHECK(single[0].text == doc.body);

  CHECK_ERRC(ingest(make_doc("e", " \n\n ")), Errc::EmptyDocument);
}

TEST_CASE("ingest: coverage, order and size over the corpus") {
  for (std::size_t max : {40u, 120u, 300u, 700u}) {
    ChunkingParams p;
    p.max_chunk_chars = max;
    for (const auto& doc : load_builtin_corpus()) {
      const auto chunks = ingest(doc, p);
      REQUIRE(!chunks.empty());
      std::string joined;
      std::size_t prev_end = 0;
      for (std::size_t i = 0; i < chunks.size(); ++i) {
        const auto& c = chunks[i];
        CHECK(c.text.size() <= max);
        CHECK(c.doc_id == doc.doc_id);
        CHECK(c.tier == doc.tier);
        CHECK(c.tags == doc.tags);
        CHECK(c.position == i);
        CHECK(doc.body.compare(c.offset, c.text.size(), c.text) == 0);
        CHECK(c.offset >= prev_end);
        CHECK(strip_ws(doc.body.substr(prev_end, c.offset - prev_end)).empty());
        prev_end = c.offset + c.text.size();
        joined += c.text;
      }
      CHECK(strip_ws(doc.body.substr(prev_end)).empty());
      CHECK(strip_ws(joined) == strip_ws(doc.body));
    }
  }
}

TEST_CASE("ingest: long paragraph splits at sentence ends") {
  const auto doc = make_doc("s", "Alpha beta gamma. Delta epsilon zeta. Eta theta iota.");
  ChunkingParams p;
  p.max_chunk_chars = 38;
  const auto chunks = ingest(doc, p);
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[0].text == "Alpha beta gamma. Delta epsilon zeta.");
  CHECK(chunks[1].text == "Eta theta iota.");
}

TEST_CASE("hash embedder") {
  HashEmbedder e;
  CHECK(e.dimension() == 256);
  CHECK(e.embed("steep turn bank angle") == e.embed("steep turn bank angle"));
  for (const auto* t : {"a", "steep turn bank angle", "The landing gear is fixed.", "x y z x y z"}) {
    const auto v = e.embed(t);
    REQUIRE(v.size() == 256);
    double n = 0.0;
    for (float x : v) n += double(x) * x;
    CHECK(std::abs(std::sqrt(n) - 1.0) <= 1e-6);
  }
  CHECK(tokenize("Hold_45, Bank-Angle!") == std::vector<std::string>{"hold", "45", "bank", "angle"});
  CHECK_ERRC(e.embed(" ,. "), Errc::EmptyDocument);
}

TEST_CASE("steep turn query prefers the steep turn chunk over landing gear") {
  HashEmbedder e;
  const auto q = e.embed("steep turn bank angle");
  const auto steep = e.embed("Hold the steep turn at 45 degrees of bank angle with back pressure.");
  const auto gear = e.embed("The landing gear is fixed and needs no action from the pilot.");
  CHECK(cosine_unit(q, steep) > cosine_unit(q, gear));
}

TEST_CASE("pipeline query retrieves steep turn knowledge first") {
  HashEmbedder e;
  const auto idx = build_index(load_builtin_corpus(), e);
  const auto spec = load_task_spec("steep_turn");
  const auto query = retrieval_query(spec, "hold_45", Metric::bank_deg);
  CHECK(query == "steep turn hold 45 bank angle");
  const auto hits = idx.search(e.embed(query), 3);
  REQUIRE(!hits.empty());
  CHECK(hits[0].chunk.doc_id == "mission_steep_turn");
  CHECK(retrieval_query(spec, "roll_in", std::nullopt) == "steep turn roll in");
}

TEST_CASE("search: self similarity, orthogonality, errors") {
  VectorIndex idx(4, "unit");
  CHECK_ERRC(idx.search({1, 0, 0, 0}, 1), Errc::EmptyIndex);
  Chunk a;
  a.chunk_id = "a#0";
  Chunk b;
  b.chunk_id = "b#0";
  idx.add(a, {1, 0, 0, 0});
  idx.add(b, {0, 1, 0, 0});
  auto hits = idx.search({1, 0, 0, 0}, 1);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].chunk.chunk_id == "a#0");
  CHECK(hits[0].score == doctest::Approx(1.0));
  CHECK(hits[0].rank == 1);

  hits = idx.search({0, 0, 1, 0}, 2);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].score == 0.0);
  CHECK(hits[1].score == 0.0);
  CHECK(hits[0].chunk.chunk_id == "a#0");  // tie broken by chunk_id

  CHECK_ERRC(idx.search({1, 0, 0}, 1), Errc::DimensionMismatch);
  CHECK_ERRC(idx.add(a, {1, 0}), Errc::DimensionMismatch);
  CHECK_ERRC(idx.add(a, {0, 0, 0, 0}), Errc::DimensionMismatch);
}

TEST_CASE("search equals a linear scan oracle") {
  std::mt19937 rng(7);
  const std::size_t d = 16;
  VectorIndex idx(d, "random");
  const char* tags[] = {"steep_turn", "altimeter", "trainer"};
  for (int i = 0; i < 1000; ++i) {
    Chunk c;
    c.chunk_id = "doc" + std::to_string(i % 37) + "#" + std::to_string(i);
    c.tier = static_cast<KnowledgeTier>(i % 3);
    c.tags = {tags[i % 3]};
    if (i % 5 == 0) c.tags.push_back(tags[(i + 1) % 3]);
    // Every 10th chunk repeats an earlier vector so ties occur.
    EmbeddingVector v = (i % 10 == 9) ? idx.vector(i - 9) : random_unit(rng, d);
    idx.add(c, v);
  }
  SearchFilter tier_filter;
  tier_filter.tier = KnowledgeTier::aircraft_type;
  SearchFilter tag_filter;
  tag_filter.tags = {"steep_turn", "altimeter"};

  for (int q = 0; q < 100; ++q) {
    EmbeddingVector query = (q % 4 == 0) ? idx.vector(q * 9) : random_unit(rng, d);
    for (float& x : query) x *= 3.0f;  // search normalizes the query
    const std::size_t k = 1 + q % 20;
    for (const SearchFilter& filter : {SearchFilter{}, tier_filter, tag_filter}) {
      const auto hits = idx.search(query, k, filter);
      const auto oracle = scan_oracle(idx, query, k, filter);
      REQUIRE(hits.size() == oracle.size());
      for (std::size_t i = 0; i < hits.size(); ++i) {
        CHECK(hits[i].chunk.chunk_id == oracle[i].first);
        CHECK(hits[i].score == doctest::Approx(oracle[i].second).epsilon(1e-9));
        CHECK(hits[i].rank == i + 1);
        CHECK(filter.matches(hits[i].chunk));
        CHECK(hits[i].score >= -1.0);
        CHECK(hits[i].score <= 1.0);
        if (i > 0) CHECK(hits[i - 1].score >= hits[i].score);
      }
    }
  }
}

TEST_CASE("search(k) is a prefix of search(k+1)") {
  HashEmbedder e;
  const auto idx = build_index(load_builtin_corpus(), e, ChunkingParams{200, 0});
  for (const auto* text : {"airspeed low lower the nose", "steep turn", "heading indicator", "flare"}) {
    const auto q = e.embed(text);
    auto prev = idx.search(q, 1);
    for (std::size_t k = 2; k <= idx.size() + 1; ++k) {
      const auto next = idx.search(q, k);
      REQUIRE(next.size() >= prev.size());
      for (std::size_t i = 0; i < prev.size(); ++i) CHECK(next[i].chunk.chunk_id == prev[i].chunk.chunk_id);
      prev = next;
    }
    CHECK(prev.size() == idx.size());
  }
}

TEST_CASE("index persistence round trip") {
  HashEmbedder e;
  const auto idx = build_index(load_builtin_corpus(), e);
  const auto path = std::filesystem::temp_directory_path() / "aerocue_kb_roundtrip.idx";
  idx.save(path);
  const auto loaded = VectorIndex::load(path);
  CHECK(loaded.size() == idx.size());
  CHECK(loaded.dimension() == idx.dimension());
  CHECK(loaded.embedder_name() == idx.embedder_name());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    CHECK(loaded.chunk(i) == idx.chunk(i));
    CHECK(loaded.vector(i) == idx.vector(i));
  }
  for (const auto* text : {"steep turn bank angle", "best glide speed", "rotation"}) {
    const auto a = idx.search(e.embed(text), 5);
    const auto b = loaded.search(e.embed(text), 5);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].chunk == b[i].chunk);
      CHECK(a[i].score == b[i].score);
    }
  }

  {
    std::ofstream bad(path, std::ios::binary | std::ios::trunc);
    bad << "not an index";
  }
  CHECK_ERRC(VectorIndex::load(path), Errc::InvalidIndexFile);
  idx.save(path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  CHECK_ERRC(VectorIndex::load(path), Errc::InvalidIndexFile);
  std::filesystem::remove(path);
  CHECK_ERRC(VectorIndex::load(path), Errc::Io);
}

TEST_CASE("build_context") {
  auto hit = [](std::string id, std::size_t len, std::size_t rank) {
    RetrievalHit h;
    h.chunk.chunk_id = std::move(id);
    h.chunk.text = std::string(len, 'x');
    h.rank = rank;
    return h;
  };
  const std::vector<RetrievalHit> hits = {hit("a#0", 100, 1), hit("b#0", 100, 2)};

  auto ctx = build_context(hits, 150);
  CHECK(ctx.text == std::string(100, 'x'));
  CHECK(ctx.provenance == std::vector<std::string>{"a#0"});

  ctx = build_context(hits, 10000);
  CHECK(ctx.text == std::string(100, 'x') + std::string(kContextSeparator) + std::string(100, 'x'));
  CHECK(ctx.provenance == std::vector<std::string>{"a#0", "b#0"});

  ctx = build_context({}, 100);
  CHECK(ctx.text.empty());
  CHECK(ctx.provenance.empty());

  ctx = build_context(hits, 50);
  CHECK(ctx.text.empty());
  CHECK(ctx.provenance.empty());
}

TEST_CASE("remote embedder reports an unreachable provider") {
  RemoteEmbedder::Options o;
  o.base_url = "http://127.0.0.1:1";
  o.timeout = std::chrono::milliseconds(500);
  RemoteEmbedder r(o);
  CHECK_ERRC(r.embed("hello"), Errc::ProviderUnavailable);
}
