#include "userprof/knowledge_base.hpp"

#include <deque>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "userprof/error.hpp"
#include "userprof/text.hpp"

namespace userprof {

using json = nlohmann::json;

KgSnapshot KgSnapshot::from_records(std::vector<KgNode> nodes, std::vector<KgEdge> edges) {
  KgSnapshot kg;
  kg.nodes_ = std::move(nodes);
  for (std::size_t i = 0; i < kg.nodes_.size(); ++i) {
    if (kg.nodes_[i].entity_id.empty()) throw InvalidArgument("node with empty entity_id");
    if (!kg.by_id_.emplace(kg.nodes_[i].entity_id, i).second) {
      throw InvalidArgument("duplicate entity_id: " + kg.nodes_[i].entity_id);
    }
  }
  for (const auto& e : edges) {
    if (!kg.by_id_.count(e.source) || !kg.by_id_.count(e.target)) {
      throw InvalidArgument("edge " + e.source + " -" + e.edge_type + "-> " + e.target + " has an unknown endpoint");
    }
  }
  kg.edges_ = std::move(edges);
  return kg;
}

KgSnapshot KgSnapshot::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("knowledge-graph snapshot not found: " + path.string());
  std::vector<KgNode> nodes;
  std::vector<KgEdge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      json obj = json::parse(line);
      if (obj.contains("entity_id")) {
        KgNode n{obj["entity_id"].get<std::string>(), obj.value("label", std::string{}), std::nullopt};
        if (obj.contains("document") && obj["document"].is_string()) n.document = obj["document"].get<std::string>();
        nodes.push_back(std::move(n));
      } else if (obj.contains("source")) {
        edges.push_back({obj.at("source").get<std::string>(), obj.at("edge_type").get<std::string>(),
                         obj.at("target").get<std::string>()});
      } else {
        throw ParseError("record is neither a node nor an edge", lineno);
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid snapshot record: ") + e.what(), lineno);
    }
  }
  return from_records(std::move(nodes), std::move(edges));
}

const KgNode* KgSnapshot::find(std::string_view id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &nodes_[it->second];
}

std::set<std::string> expand_entities(const KgSnapshot& kg, const std::vector<std::string>& seeds,
                                      const std::set<std::string>& edge_types, unsigned depth) {
  if (depth > 0 && edge_types.empty()) throw InvalidArgument("edge type set is empty but depth > 0");
  std::map<std::string, std::vector<std::string>, std::less<>> adj;
  for (const auto& e : kg.edges()) {
    if (!edge_types.count(e.edge_type)) continue;
    adj[e.source].push_back(e.target);
    adj[e.target].push_back(e.source);
  }
  std::set<std::string> seen;
  std::vector<std::string> frontier;
  for (const auto& s : seeds) {
    if (!kg.find(s)) throw NotFound("unknown seed entity: " + s);
    if (seen.insert(s).second) frontier.push_back(s);
  }
  for (unsigned hop = 0; hop < depth && !frontier.empty(); ++hop) {
    std::vector<std::string> next;
    for (const auto& u : frontier) {
      auto it = adj.find(u);
      if (it == adj.end()) continue;
      for (const auto& v : it->second) {
        if (seen.insert(v).second) next.push_back(v);
      }
    }
    frontier = std::move(next);
  }
  return seen;
}

DocumentSet extract_documents(const KgSnapshot& kg, const std::set<std::string>& entities) {
  DocumentSet out;
  for (const auto& id : entities) {
    const KgNode* n = kg.find(id);
    if (n && n->document && !text::trim(*n->document).empty()) {
      out.documents.emplace_back(id, *n->document);
    } else {
      out.missing.push_back(id);
    }
  }
  return out;
}

std::string KbStats::line() const {
  return std::to_string(nodes) + " nodes, " + std::to_string(edges) + " edges, and " + std::to_string(documents) +
         " documents";
}

KbStats kb_stats(const KgSnapshot& kg, const std::set<std::string>& entities, const DocumentSet& docs) {
  KbStats s;
  s.nodes = entities.size();
  for (const auto& e : kg.edges()) {
    if (entities.count(e.source) && entities.count(e.target)) ++s.edges;
  }
  s.documents = docs.documents.size();
  return s;
}

namespace {

struct Line {
  std::size_t begin;
  std::size_t end;  // excludes the newline
};

bool is_blank(std::string_view s) { return text::trim(s).empty(); }

bool is_fence(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && i < 3 && s[i] == ' ') ++i;
  return s.substr(i).starts_with("```") || s.substr(i).starts_with("~~~");
}

bool is_heading(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && i < 3 && s[i] == ' ') ++i;
  std::size_t hashes = 0;
  while (i < s.size() && s[i] == '#') ++i, ++hashes;
  return hashes >= 1 && hashes <= 6 && (i == s.size() || s[i] == ' ' || s[i] == '\t');
}

struct Paragraph {
  std::size_t begin;
  std::size_t end;
};

// Sections are lists of paragraphs (byte ranges); headings open a new section.
std::vector<std::vector<Paragraph>> sections_of(std::string_view doc) {
  std::vector<Line> lines;
  for (std::size_t pos = 0; pos <= doc.size();) {
    auto nl = doc.find('\n', pos);
    std::size_t end = nl == std::string_view::npos ? doc.size() : nl;
    std::size_t content_end = end;
    if (content_end > pos && doc[content_end - 1] == '\r') --content_end;
    lines.push_back({pos, content_end});
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  std::vector<std::vector<Paragraph>> sections(1);
  std::optional<Paragraph> open;
  bool in_fence = false;
  auto close = [&] {
    if (open) sections.back().push_back(*open);
    open.reset();
  };
  for (const auto& l : lines) {
    std::string_view s = doc.substr(l.begin, l.end - l.begin);
    if (in_fence) {
      open->end = l.end;
      if (is_fence(s)) in_fence = false;
      continue;
    }
    if (is_heading(s)) {
      close();
      if (!sections.back().empty()) sections.emplace_back();
      sections.back().push_back({l.begin, l.end});
      continue;
    }
    if (is_blank(s)) {
      close();
      continue;
    }
    if (is_fence(s)) in_fence = true;
    if (open) {
      open->end = l.end;
    } else {
      open = Paragraph{l.begin, l.end};
    }
  }
  close();
  return sections;
}

}  // namespace

std::vector<TextChunk> chunk_markdown(std::string_view doc, std::size_t target_tokens, std::size_t overlap_tokens) {
  if (target_tokens == 0) throw InvalidArgument("target_tokens must be positive");
  if (overlap_tokens >= target_tokens) throw InvalidArgument("overlap_tokens must be smaller than target_tokens");
  if (is_blank(doc)) throw InvalidArgument("cannot chunk an empty document");

  std::vector<TextChunk> chunks;
  for (const auto& section : sections_of(doc)) {
    // Token spans for the whole section in document order, with paragraph boundaries.
    std::vector<text::TokenSpan> toks;
    std::vector<std::pair<std::size_t, std::size_t>> paras;  // token index ranges
    for (const auto& p : section) {
      std::size_t first = toks.size();
      for (auto span : text::whitespace_spans(doc.substr(p.begin, p.end - p.begin))) {
        toks.push_back({span.begin + p.begin, span.end + p.begin});
      }
      if (toks.size() > first) paras.emplace_back(first, toks.size());
    }
    auto emit = [&](std::size_t first, std::size_t last, bool oversized) {
      std::size_t b = toks[first].begin, e = toks[last - 1].end;
      chunks.push_back({std::string(doc.substr(b, e - b)), b, last - first, oversized});
    };

    bool have_prev = false;
    std::size_t prev_first = 0;
    std::size_t cur_first = 0, cur_end = 0;
    bool open = false;
    auto start_with_overlap = [&](std::size_t para_begin, std::size_t para_len) {
      std::size_t ov = 0;
      if (have_prev) ov = std::min({overlap_tokens, target_tokens - para_len, para_begin - prev_first});
      return para_begin - ov;
    };
    for (auto [a, b] : paras) {
      std::size_t n = b - a;
      if (n > target_tokens) {
        if (open) {
          emit(cur_first, cur_end, false);
          prev_first = cur_first;
          have_prev = true;
          open = false;
        }
        emit(a, b, true);
        prev_first = a;
        have_prev = true;
        continue;
      }
      if (open && b - cur_first <= target_tokens) {
        cur_end = b;
        continue;
      }
      if (open) {
        emit(cur_first, cur_end, false);
        prev_first = cur_first;
        have_prev = true;
      }
      cur_first = start_with_overlap(a, n);
      cur_end = b;
      open = true;
    }
    if (open) emit(cur_first, cur_end, false);
  }
  return chunks;
}

std::vector<KnowledgeChunk> build_chunks(const DocumentSet& docs, const Embedder& embedder, std::size_t target_tokens,
                                         std::size_t overlap_tokens) {
  std::vector<KnowledgeChunk> out;
  for (const auto& [entity, doc] : docs.documents) {
    auto pieces = chunk_markdown(doc, target_tokens, overlap_tokens);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      out.push_back({entity + "#" + std::to_string(i), entity, std::move(pieces[i].text), {}});
    }
  }
  std::vector<std::string> texts;
  texts.reserve(out.size());
  for (const auto& c : out) texts.push_back(c.text);
  Matrix m = embedder.embed_batch(texts);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto r = m.row(i);
    out[i].embedding.assign(r.begin(), r.end());
  }
  return out;
}

void write_chunks_jsonl(const std::filesystem::path& path, const std::vector<KnowledgeChunk>& chunks) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& c : chunks) {
    out << json{{"chunk_id", c.chunk_id}, {"entity_id", c.entity_id}, {"text", c.text}, {"embedding", c.embedding}}.dump()
        << '\n';
  }
}

std::vector<KnowledgeChunk> read_chunks_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("chunk file not found: " + path.string());
  std::vector<KnowledgeChunk> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      json obj = json::parse(line);
      out.push_back({obj.at("chunk_id").get<std::string>(), obj.at("entity_id").get<std::string>(),
                     obj.at("text").get<std::string>(), obj.at("embedding").get<Vector>()});
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid chunk record: ") + e.what(), lineno);
    }
  }
  return out;
}

}  // namespace userprof
