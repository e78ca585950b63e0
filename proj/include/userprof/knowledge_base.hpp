#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "userprof/embedding.hpp"

namespace userprof {

struct KgNode {
  std::string entity_id;
  std::string label;
  std::optional<std::string> document;
};

struct KgEdge {
  std::string source;
  std::string edge_type;
  std::string target;
};

/// Local knowledge-graph snapshot. Node records carry `entity_id`; edge records
/// carry `source`, `edge_type`, `target`.
class KgSnapshot {
 public:
  static KgSnapshot from_records(std::vector<KgNode> nodes, std::vector<KgEdge> edges);
  static KgSnapshot load(const std::filesystem::path& path);

  const std::vector<KgNode>& nodes() const noexcept { return nodes_; }
  const std::vector<KgEdge>& edges() const noexcept { return edges_; }
  const KgNode* find(std::string_view id) const;

 private:
  std::vector<KgNode> nodes_;
  std::vector<KgEdge> edges_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

/// Breadth-first closure from `seeds` over edges whose type is allowed,
/// followed in both directions, up to `depth` hops. Seeds are included.
std::set<std::string> expand_entities(const KgSnapshot& kg, const std::vector<std::string>& seeds,
                                      const std::set<std::string>& edge_types, unsigned depth);

struct DocumentSet {
  std::vector<std::pair<std::string, std::string>> documents;  // (entity_id, markdown)
  std::vector<std::string> missing;                              // entities without a document
};

DocumentSet extract_documents(const KgSnapshot& kg, const std::set<std::string>& entities);

struct KbStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t documents = 0;

  /// "N nodes, M edges, and D documents"
  std::string line() const;
};

/// Counts over the sub-graph induced by `entities`.
KbStats kb_stats(const KgSnapshot& kg, const std::set<std::string>& entities, const DocumentSet& docs);

struct TextChunk {
  std::string text;
  std::size_t offset = 0;  // byte offset in the source document
  std::size_t tokens = 0;
  bool oversized = false;  // a single paragraph longer than the target
};

/// Markdown-aware chunking. Sections split at ATX headings (outside code
/// fences); inside a section whole paragraphs are packed greedily up to
/// `target_tokens` whitespace tokens, and each chunk after the first in a
/// section starts with the last `overlap_tokens` tokens of its predecessor.
/// Every chunk is a contiguous substring of `doc`.
std::vector<TextChunk> chunk_markdown(std::string_view doc, std::size_t target_tokens = 256,
                                      std::size_t overlap_tokens = 32);

struct KnowledgeChunk {
  std::string chunk_id;
  std::string entity_id;
  std::string text;
  Vector embedding;
};

/// Chunks every document and embeds the chunks. Chunk ids are "<entity>#<n>".
std::vector<KnowledgeChunk> build_chunks(const DocumentSet& docs, const Embedder& embedder,
                                         std::size_t target_tokens, std::size_t overlap_tokens);

void write_chunks_jsonl(const std::filesystem::path& path, const std::vector<KnowledgeChunk>& chunks);
std::vector<KnowledgeChunk> read_chunks_jsonl(const std::filesystem::path& path);

}  // namespace userprof
