#include <gtest/gtest.h>

#include <sstream>

#include "userprof/embedding.hpp"
#include "userprof/error.hpp"
#include "userprof/knowledge_base.hpp"
#include "userprof/text.hpp"

using namespace userprof;

namespace {

KgSnapshot football() {
  // Clubs (Q18756, Q9448) linked to players by P54 (member of team) and to
  // coaches by P286 (head coach), plus edges of other types that must not be followed.
  std::vector<KgNode> nodes;
  for (const char* id : {"Q18756", "Q9448", "P1", "P2", "P3", "C1", "C2", "L1", "N1", "X1"}) {
    nodes.push_back({id, id, std::string("# ") + id + "\n\nabout " + id});
  }
  nodes[9].document.reset();
  std::vector<KgEdge> edges = {
      {"P1", "P54", "Q18756"},  {"P2", "P54", "Q18756"}, {"P2", "P54", "Q9448"}, {"Q9448", "P286", "C1"},
      {"C1", "P54", "C2"},      {"P3", "P54", "N1"},     {"Q18756", "P131", "L1"}, {"L1", "P54", "X1"},
      {"C2", "P54", "X1"},
  };
  return KgSnapshot::from_records(nodes, edges);
}

std::set<std::string> hand_walk_depth2() {
  // depth 1: Q18756 -> P1, P2; Q9448 -> P2, C1.  depth 2: P2 -> (both clubs), C1 -> C2.
  return {"Q18756", "Q9448", "P1", "P2", "C1", "C2"};
}

}  // namespace

TEST(Expand, DepthZeroIsSeeds) {
  auto kg = football();
  EXPECT_EQ(expand_entities(kg, {"Q18756", "Q9448"}, {"P54"}, 0), (std::set<std::string>{"Q18756", "Q9448"}));
}

TEST(Expand, OneHopChain) {
  auto kg = KgSnapshot::from_records({{"A", "", {}}, {"B", "", {}}, {"C", "", {}}},
                                     {{"A", "r", "B"}, {"B", "r", "C"}});
  EXPECT_EQ(expand_entities(kg, {"A"}, {"r"}, 1), (std::set<std::string>{"A", "B"}));
}

TEST(Expand, FootballFixtureDepthTwo) {
  auto kg = football();
  EXPECT_EQ(expand_entities(kg, {"Q18756", "Q9448"}, {"P54", "P286"}, 2), hand_walk_depth2());
}

TEST(Expand, UnknownSeedAndEmptyTypes) {
  auto kg = football();
  EXPECT_THROW(expand_entities(kg, {"Q0"}, {"P54"}, 1), NotFound);
  EXPECT_THROW(expand_entities(kg, {"Q18756"}, {}, 1), InvalidArgument);
}

TEST(Documents, MissingDocumentIsReported) {
  auto kg = football();
  auto docs = extract_documents(kg, {"P1", "P2", "X1"});
  EXPECT_EQ(docs.documents.size(), 2u);
  EXPECT_EQ(docs.missing, (std::vector<std::string>{"X1"}));
  auto stats = kb_stats(kg, {"P1", "P2", "X1"}, docs);
  EXPECT_EQ(stats.line(), "3 nodes, 0 edges, and 2 documents");
}

TEST(Documents, StatsOverInducedSubgraph) {
  auto kg = football();
  auto ents = hand_walk_depth2();
  auto docs = extract_documents(kg, ents);
  auto stats = kb_stats(kg, ents, docs);
  EXPECT_EQ(stats.nodes, 6u);
  EXPECT_EQ(stats.edges, 5u);  // P1-Q18756, P2-Q18756, P2-Q9448, Q9448-C1, C1-C2
  EXPECT_EQ(stats.documents, 6u);
}

TEST(Chunking, ShortDocIsOneChunk) {
  std::string doc = "A short paragraph of text.";
  auto chunks = chunk_markdown(doc, 256, 32);
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].text, doc);
}

TEST(Chunking, SplitsAtHeadings) {
  std::string doc = "## First\n\nalpha beta gamma\n\n## Second\n\ndelta epsilon\n";
  auto chunks = chunk_markdown(doc, 256, 32);
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].text.rfind("## First", 0), 0u);
  EXPECT_EQ(chunks[1].text.rfind("## Second", 0), 0u);
}

TEST(Chunking, HeadingInsideFenceDoesNotSplit) {
  std::string doc = "## Only\n\n```\n# not a heading\n```\n\ntext after\n";
  EXPECT_EQ(chunk_markdown(doc, 256, 32).size(), 1u);
}

TEST(Chunking, ThousandTokensWithOverlap) {
  // 125 paragraphs of 8 tokens each, one section.
  std::ostringstream doc;
  std::vector<std::string> words;
  for (int p = 0; p < 125; ++p) {
    for (int t = 0; t < 8; ++t) {
      std::string w = "w" + std::to_string(p * 8 + t);
      words.push_back(w);
      doc << w << (t < 7 ? " " : "");
    }
    doc << "\n\n";
  }
  const std::string s = doc.str();
  auto chunks = chunk_markdown(s, 256, 32);

  // Oracle: greedy packing of whole paragraphs, each later chunk prefixed by
  // the previous chunk's last 32 tokens.
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // token ranges
  std::size_t start = 0, end = 0;
  bool open = false;
  for (std::size_t p = 0; p < 125; ++p) {
    std::size_t a = p * 8, b = a + 8;
    if (open && b - start <= 256) {
      end = b;
      continue;
    }
    if (open) spans.emplace_back(start, end);
    start = open ? a - 32 : a;
    end = b;
    open = true;
  }
  spans.emplace_back(start, end);
  ASSERT_EQ(spans.size(), 5u);
  ASSERT_EQ(chunks.size(), spans.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    auto toks = text::whitespace_spans(chunks[i].text);
    ASSERT_EQ(toks.size(), spans[i].second - spans[i].first);
    EXPECT_EQ(chunks[i].text.substr(toks[0].begin, toks[0].end - toks[0].begin), words[spans[i].first]);
    EXPECT_EQ(s.substr(chunks[i].offset, chunks[i].text.size()), chunks[i].text);
    if (i > 0) {
      EXPECT_EQ(spans[i - 1].second - spans[i].first, 32u);
    }
  }
}

TEST(Chunking, OversizedParagraphKeptWhole) {
  std::string para;
  for (int i = 0; i < 300; ++i) para += "t" + std::to_string(i) + " ";
  auto chunks = chunk_markdown(para, 256, 32);
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_TRUE(chunks[0].oversized);
}

TEST(Chunking, RejectsBadParameters) {
  EXPECT_THROW(chunk_markdown("x", 32, 32), InvalidArgument);
  EXPECT_THROW(chunk_markdown("  \n", 256, 32), InvalidArgument);
}

TEST(Chunking, BuildChunksEmbedsEveryPiece) {
  HashingEmbedder e(64);
  DocumentSet docs{{{"E1", "## a\n\none two\n\n## b\n\nthree"}, {"E2", "four"}}, {}};
  auto chunks = build_chunks(docs, e, 256, 32);
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[0].chunk_id, "E1#0");
  EXPECT_EQ(chunks[2].chunk_id, "E2#0");
  for (const auto& c : chunks) EXPECT_NEAR(l2_norm(c.embedding), 1.0, 1e-9);
}
