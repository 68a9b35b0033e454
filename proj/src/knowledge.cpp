// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "nadkit/knowledge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>

#include <httplib.h>
#include <json.hpp>

#include "nadkit/prompts.hpp"
#include "protocol.hpp"
#include "util.hpp"

namespace nadkit::knowledge {

using nlohmann::ordered_json;
using prompts::TemplateId;

// ---------------------------------------------------------------------------
// Embeddings

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::vector<float> HashingEmbedder::embed(std::string_view text) {
  std::vector<double> acc(dim_, 0.0);
  auto w = words(text);
  auto bump = [&](std::string_view feature) {
    std::uint64_t h = fnv1a(feature);
    acc[h % dim_] += (h >> 63) ? -1.0 : 1.0;
  };
  for (std::size_t i = 0; i < w.size(); ++i) {
    bump(w[i]);
    if (i + 1 < w.size()) bump(w[i] + " " + w[i + 1]);
  }
  double norm = 0.0;
  for (double x : acc) norm += x * x;
  norm = std::sqrt(norm);
  std::vector<float> out(dim_, 0.0f);
  if (norm > 0) {
    for (std::size_t i = 0; i < dim_; ++i) out[i] = static_cast<float>(acc[i] / norm);
  }
  return out;
}

std::vector<float> RemoteEmbedder::embed(std::string_view text) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (!key || !*key) throw ProviderError("environment variable " + config_.api_key_env + " is not set");
  ordered_json body{{"model", config_.model}, {"input", std::string(text)}};
  httplib::Client cli(config_.endpoint);
  cli.set_read_timeout(60, 0);
  httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
  auto res = cli.Post(config_.path, headers, body.dump(), "application/json");
  if (!res) throw ProviderError("embedding request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw ProviderError("embedding endpoint returned HTTP " + std::to_string(res->status));
  try {
    auto j = ordered_json::parse(res->body);
    auto v = j.at("data").at(0).at("embedding").get<std::vector<float>>();
    if (v.size() != config_.dimension) {
      throw ProviderError("embedding has dimension " + std::to_string(v.size()) + ", expected " +
                          std::to_string(config_.dimension));
    }
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("unexpected embedding response: ") + e.what());
  }
}

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw Error("cosine of vectors with different dimensions");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Store

std::size_t VectorStore::add(std::vector<float> vector, std::string payload, Metadata metadata) {
  if (vector.size() != dim_) {
    throw Error("vector of dimension " + std::to_string(vector.size()) + " added to a store of dimension " +
                std::to_string(dim_));
  }
  if (payload.empty()) throw Error("store payloads must be non-empty");
  entries_.push_back({std::move(vector), std::move(payload), std::move(metadata)});
  return entries_.size() - 1;
}

std::vector<Scored> VectorStore::rank(std::span<const float> query) const {
  std::vector<Scored> out;
  out.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) out.push_back({i, cosine(query, entries_[i].vector)});
  std::stable_sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) { return a.similarity > b.similarity; });
  return out;
}

bool VectorStore::contains_meta(const std::string& key, const std::string& value) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const StoreEntry& e) {
    auto it = e.metadata.find(key);
    return it != e.metadata.end() && it->second == value;
  });
}

void VectorStore::truncate(std::size_t n) {
  if (n < entries_.size()) entries_.resize(n);
}

namespace {
constexpr std::string_view kStoreSchema = "nadkit-store-v1";
}

std::string VectorStore::to_jsonl() const {
  std::string out = ordered_json{{"schema", kStoreSchema}, {"dimension", dim_}}.dump() + "\n";
  for (const auto& e : entries_) {
    std::string bytes(e.vector.size() * sizeof(float), '\0');
    std::memcpy(bytes.data(), e.vector.data(), bytes.size());
    ordered_json j;
    j["vector"] = util::base64_encode(bytes);
    j["payload"] = e.payload;
    j["metadata"] = e.metadata;
    out += j.dump() + "\n";
  }
  return out;
}

VectorStore VectorStore::from_jsonl(std::string_view text) {
  auto lines = util::split_lines(text);
  std::size_t i = 0;
  while (i < lines.size() && util::trim(lines[i]).empty()) ++i;
  if (i == lines.size()) throw ConfigError("vector store file has no header");
  try {
    auto head = ordered_json::parse(lines[i]);
    if (head.at("schema").get<std::string>() != kStoreSchema) throw ConfigError("unknown vector store schema");
    VectorStore store(head.at("dimension").get<std::size_t>());
    for (++i; i < lines.size(); ++i) {
      if (util::trim(lines[i]).empty()) continue;
      auto j = ordered_json::parse(lines[i]);
      auto bytes = util::base64_decode(j.at("vector").get<std::string>());
      if (!bytes || bytes->size() != store.dim_ * sizeof(float)) {
        throw ConfigError("vector store line " + std::to_string(i + 1) + ": bad vector encoding");
      }
      std::vector<float> v(store.dim_);
      std::memcpy(v.data(), bytes->data(), bytes->size());
      store.add(std::move(v), j.at("payload").get<std::string>(), j.at("metadata").get<Metadata>());
    }
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("vector store: ") + e.what());
  }
}

void VectorStore::save(const std::filesystem::path& path) const { util::write_file_atomic(path, to_jsonl()); }

VectorStore VectorStore::load(const std::filesystem::path& path) { return from_jsonl(util::read_file(path)); }

// ---------------------------------------------------------------------------
// Reader

std::vector<Band> default_bands() { return {{0.75, 1.0}, {0.5, 0.75}, {0.0, 0.5}}; }

std::optional<bool> parse_relevance(std::string_view reply) {
  constexpr std::string_view kMarker = "##response##";
  auto pos = reply.rfind(kMarker);
  if (pos == std::string_view::npos) return std::nullopt;
  auto w = words(reply.substr(pos + kMarker.size()));
  if (w.empty()) return std::nullopt;
  if (w.front() == "yes") return true;
  if (w.front() == "no") return false;
  return std::nullopt;
}

bool assess_relevance(std::string_view title, std::string_view abstract, llm::LLMClient& llm) {
  auto msgs = prompts::render(TemplateId::kReaderRelevance,
                              {{"title", std::string(title)}, {"abstract", std::string(abstract)}});
  return protocol::ask<bool>(llm, TemplateId::kReaderRelevance, std::move(msgs), parse_relevance);
}

std::vector<std::string> extract_inspirations(std::string_view body, llm::LLMClient& llm) {
  auto msgs = prompts::render(TemplateId::kReaderExtract, {{"paper", std::string(body)}});
  return protocol::ask<std::vector<std::string>>(
      llm, TemplateId::kReaderExtract, std::move(msgs),
      [](std::string_view reply) -> std::optional<std::vector<std::string>> {
        auto spans = protocol::tagged_spans(reply, "inspiration");
        std::erase_if(spans, [](const std::string& s) { return s.empty(); });
        if (spans.empty()) return std::nullopt;
        return spans;
      });
}

std::vector<KnowledgeItem> ingest_paper(std::string_view title, std::string_view abstract, std::string_view body,
                                        std::string_view paper_id, llm::LLMClient& llm,
                                        EmbeddingProvider& embedder, VectorStore& store) {
  if (util::trim(title).empty() || util::trim(abstract).empty()) {
    throw Error("paper " + std::string(paper_id) + " needs a title and an abstract");
  }
  if (!assess_relevance(title, abstract, llm)) return {};
  std::vector<KnowledgeItem> out;
  for (auto& text : extract_inspirations(body.empty() ? abstract : body, llm)) {
    KnowledgeItem item;
    item.embedding = embedder.embed(text);
    std::size_t idx = store.size();
    item.id = "k" + std::to_string(idx);
    item.text = text;
    item.source_paper = std::string(paper_id);
    store.add(item.embedding, text, {{"kind", "inspiration"}, {"paper", item.source_paper}, {"item", item.id}});
    out.push_back(std::move(item));
  }
  return out;
}

CorpusStats ingest_corpus(const std::filesystem::path& dir, llm::LLMClient& llm, EmbeddingProvider& embedder,
                          VectorStore& store, std::set<std::string>& seen) {
  constexpr std::string_view kMetaSuffix = ".meta.json";
  std::vector<std::string> ids;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::string name = e.path().filename().string();
    if (name.size() > kMetaSuffix.size() && name.ends_with(kMetaSuffix)) {
      ids.push_back(name.substr(0, name.size() - kMetaSuffix.size()));
    }
  }
  std::sort(ids.begin(), ids.end());

  CorpusStats stats;
  for (const auto& id : ids) {
    if (seen.contains(id)) {
      ++stats.skipped;
      continue;
    }
    ++stats.papers;
    try {
      auto meta = ordered_json::parse(util::read_file(dir / (id + std::string(kMetaSuffix))));
      std::string body;
      auto body_path = dir / (id + ".body.txt");
      if (std::filesystem::exists(body_path)) body = util::read_file(body_path);
      auto items = ingest_paper(meta.at("title").get<std::string>(), meta.at("abstract").get<std::string>(), body, id,
                                llm, embedder, store);
      if (!items.empty()) ++stats.relevant;
      stats.items += static_cast<int>(items.size());
      seen.insert(id);
    } catch (const MalformedResponse& e) {
      stats.errors.push_back(id + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      stats.errors.push_back(id + ": bad metadata: " + e.what());
    }
  }
  return stats;
}

std::vector<KnowledgeItem> retrieve_inspirations(const VectorStore& store, EmbeddingProvider& embedder,
                                                 std::string_view query, std::size_t per_band,
                                                 std::span<const Band> bands) {
  if (store.empty()) throw EmptyStore();
  for (const auto& b : bands) {
    if (!(b.lo < b.hi) || b.lo < -1.0 || b.hi > 1.0) {
      throw ConfigError("similarity band must satisfy -1 <= lo < hi <= 1");
    }
  }
  auto q = embedder.embed(query);
  auto ranked = store.rank(q);
  std::vector<KnowledgeItem> out;
  for (const auto& band : bands) {
    std::size_t taken = 0;
    for (const auto& s : ranked) {
      if (taken == per_band) break;
      bool inside = s.similarity >= band.lo && (s.similarity < band.hi || (band.hi >= 1.0 && s.similarity <= 1.0));
      if (!inside) continue;
      const auto& e = store.entry(s.index);
      KnowledgeItem item;
      auto it = e.metadata.find("item");
      item.id = it != e.metadata.end() ? it->second : "k" + std::to_string(s.index);
      it = e.metadata.find("paper");
      if (it != e.metadata.end()) item.source_paper = it->second;
      item.text = e.payload;
      item.embedding = e.vector;
      item.similarity = s.similarity;
      out.push_back(std::move(item));
      ++taken;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reflector

std::string_view category_name(Category c) noexcept {
  switch (c) {
    case Category::kFailure: return "failure";
    case Category::kFailureToSuccess: return "failure-to-success";
    case Category::kSuccess: return "success";
  }
  return "success";
}

Category category_from_name(std::string_view name) {
  if (name == "failure") return Category::kFailure;
  if (name == "failure-to-success") return Category::kFailureToSuccess;
  if (name == "success") return Category::kSuccess;
  throw ConfigError("unknown experience category '" + std::string(name) + "'");
}

Advice limit_words(std::string_view text, std::size_t max_words) {
  std::string t = util::trim(text);
  if (static_cast<std::size_t>(llm::count_words(t)) <= max_words) return {t, false};

  // Sentence ends: '.', '!' or '?' followed by whitespace or the end.
  std::vector<std::size_t> ends;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if ((t[i] == '.' || t[i] == '!' || t[i] == '?') && (i + 1 == t.size() || std::isspace(static_cast<unsigned char>(t[i + 1])))) {
      ends.push_back(i + 1);
    }
  }
  std::string kept;
  for (auto end : ends) {
    std::string_view prefix(t.data(), end);
    if (static_cast<std::size_t>(llm::count_words(prefix)) > max_words) break;
    kept = std::string(prefix);
  }
  if (kept.empty()) {
    std::size_t n = 0;
    bool in_word = false;
    std::size_t i = 0;
    for (; i < t.size(); ++i) {
      bool sp = std::isspace(static_cast<unsigned char>(t[i]));
      if (!sp && !in_word && ++n > max_words) break;
      in_word = !sp;
    }
    kept = util::trim(std::string_view(t).substr(0, i));
  }
  return {util::trim(kept), true};
}

std::string reflect_error(std::string_view block_text, std::string_view finding, llm::LLMClient& llm) {
  if (util::trim(finding).empty()) throw Error("reflect_error needs a non-empty finding");
  auto msgs = prompts::render(TemplateId::kReflectorError, {{"block_definition", std::string(prompts::block_definition())},
                                                            {"block", std::string(block_text)},
                                                            {"error", std::string(finding)}});
  return protocol::ask<std::string>(llm, TemplateId::kReflectorError, std::move(msgs),
                                    [](std::string_view reply) -> std::optional<std::string> {
                                      auto spans = protocol::tagged_spans(reply, "tip");
                                      if (spans.empty() || spans.front().empty()) return std::nullopt;
                                      return spans.front();
                                    });
}

std::string reflect_error(const dsl::Block& block, std::string_view finding, llm::LLMClient& llm) {
  return reflect_error(dsl::print_block(block), finding, llm);
}

namespace {

std::string percent(double acc) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * acc);
  return buf;
}

}  // namespace

Advice reflect_performance(const dsl::Block& old_block, double old_acc, const dsl::Block& new_block, double new_acc,
                           llm::LLMClient& llm) {
  if (!(new_acc < old_acc)) throw Error("reflect_performance expects an accuracy drop");
  auto msgs = prompts::render(TemplateId::kReflectorPerf, {{"block_definition", std::string(prompts::block_definition())},
                                                           {"raw_block", dsl::print_block(old_block)},
                                                           {"raw_accuracy", percent(old_acc)},
                                                           {"new_block", dsl::print_block(new_block)},
                                                           {"new_accuracy", percent(new_acc)}});
  auto text = protocol::ask<std::string>(llm, TemplateId::kReflectorPerf, std::move(msgs),
                                         [](std::string_view reply) -> std::optional<std::string> {
                                           auto spans = protocol::tagged_spans(reply, "suggestion");
                                           if (spans.empty() || spans.front().empty()) return std::nullopt;
                                           return spans.front();
                                         });
  return limit_words(text);
}

std::optional<Classification> classify(const history::Entry& entry) {
  using Basis = Classification::Basis;
  bool any_invalid = std::any_of(entry.attempts.begin(), entry.attempts.end(), [](const auto& a) { return !a.valid; });
  if (any_invalid) {
    bool fixed = entry.attempts.back().valid;
    return Classification{fixed ? Category::kFailureToSuccess : Category::kFailure, Basis::kValidationError};
  }
  if (entry.accuracy && entry.parent_accuracy) {
    if (*entry.accuracy < *entry.parent_accuracy) return Classification{Category::kFailure, Basis::kAccuracyDrop};
    return Classification{Category::kSuccess, Basis::kAccuracyKept};
  }
  return std::nullopt;
}

namespace {

std::string feedback_context(std::string_view feedback_json) {
  try {
    auto j = ordered_json::parse(feedback_json);
    if (j.contains("context")) return j["context"].get<std::string>();
  } catch (const nlohmann::json::exception&) {
  }
  return std::string(feedback_json);
}

}  // namespace

ReflectStats reflect_history(const history::HistoryLog& history, const tree::ModTree& tree, llm::LLMClient& llm,
                             EmbeddingProvider& embedder, VectorStore& store) {
  using Basis = Classification::Basis;
  ReflectStats stats;
  for (const auto& entry : history) {
    if (store.contains_meta("source_entry", entry.id)) continue;
    auto cls = classify(entry);
    if (!cls) {
      ++stats.skipped;
      continue;
    }
    try {
      std::string advice;
      std::string kind;
      if (cls->basis == Basis::kValidationError) {
        // The first rejected attempt carries the error the dialogue had to
        // fix (or never fixed).
        auto bad = std::find_if(entry.attempts.begin(), entry.attempts.end(), [](const auto& a) { return !a.valid; });
        if (cls->category == Category::kFailure) bad = std::prev(entry.attempts.end());
        advice = reflect_error(bad->block, feedback_context(bad->feedback), llm);
        kind = "tip";
      } else if (cls->basis == Basis::kAccuracyDrop) {
        if (!entry.node_id) throw Error("entry has an accuracy but no tree node");
        const auto& child = tree.node(*entry.node_id);
        const auto& parent = tree.node(entry.parent_id);
        advice = reflect_performance(parent.arch.cell, *entry.parent_accuracy, child.arch.cell, *entry.accuracy, llm).text;
        kind = "suggestion";
      } else {
        advice = entry.proposal;
        kind = "suggestion";
      }
      store.add(embedder.embed(entry.proposal), advice,
                {{"category", std::string(category_name(cls->category))},
                 {"kind", kind},
                 {"role", entry.role},
                 {"proposal", entry.proposal},
                 {"source_entry", entry.id}});
      ++stats.added;
    } catch (const MalformedResponse& e) {
      stats.errors.push_back(entry.id + ": " + e.what());
    } catch (const UnknownParent& e) {
      stats.errors.push_back(entry.id + ": " + e.what());
    }
  }
  return stats;
}

ExperienceRecord record_from_entry(const StoreEntry& e) {
  auto get = [&](const char* key) {
    auto it = e.metadata.find(key);
    return it == e.metadata.end() ? std::string() : it->second;
  };
  ExperienceRecord r;
  r.category = category_from_name(get("category"));
  r.kind = get("kind");
  r.advice = e.payload;
  r.role = get("role");
  r.proposal = get("proposal");
  r.source_entry = get("source_entry");
  return r;
}

std::vector<ExperienceRecord> retrieve_experience(const VectorStore& store, EmbeddingProvider& embedder,
                                                  std::string_view proposal, const std::optional<std::string>& role,
                                                  std::size_t k) {
  if (store.empty()) return {};
  std::vector<ExperienceRecord> out;
  for (const auto& s : store.rank(embedder.embed(proposal))) {
    if (out.size() == k) break;
    const auto& e = store.entry(s.index);
    if (role) {
      auto it = e.metadata.find("role");
      if (it == e.metadata.end() || it->second != *role) continue;
    }
    auto r = record_from_entry(e);
    r.similarity = s.similarity;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace nadkit::knowledge
