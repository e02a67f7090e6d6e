#pragma once

// Embedding providers, the persisted dense index and exact inner-product
// search.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "odqa/corpus.hpp"
#include "odqa/errors.hpp"
#include "odqa/hash.hpp"
#include "odqa/ranked_list.hpp"
#include "odqa/stopwords.hpp"
#include "odqa/text.hpp"

namespace odqa {

using Embedding = std::vector<float>;

inline double inner_product(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

/// Cosine similarity; 0 when either vector is zero.
inline double cosine(std::span<const float> a, std::span<const float> b) {
  const double na = std::sqrt(inner_product(a, a));
  const double nb = std::sqrt(inner_product(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return inner_product(a, b) / (na * nb);
}

/// One encoder serves both questions and passages. Implementations must be
/// deterministic: the same text always maps to the same vector.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::size_t dimension() const = 0;

  /// Identifies the encoder; stored in the index and checked at search time.
  virtual std::string fingerprint() const = 0;

  virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) const = 0;

  /// Passage embedding. Defaults to embedding the chunk text; providers
  /// backed by precomputed vectors look chunks up by id instead.
  virtual std::vector<Embedding> embed_chunks(std::span<const PassageChunk> chunks) const {
    std::vector<std::string> texts;
    texts.reserve(chunks.size());
    for (const auto& c : chunks) texts.push_back(c.text);
    return embed(texts);
  }

  Embedding embed_one(const std::string& text) const {
    auto v = embed(std::vector<std::string>{text});
    if (v.size() != 1) throw ProviderError("provider returned " + std::to_string(v.size()) + " vectors for 1 text");
    return std::move(v.front());
  }

  virtual bool reachable() const { return true; }
};

/// Signed feature hashing of lowercased unigrams and bigrams (after stopword
/// removal) into `dimension` buckets, L2-normalized.
class BaselineEmbedder final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDimension = 256;

  explicit BaselineEmbedder(std::size_t dimension = kDefaultDimension,
                            const Stoplist& stoplist = Stoplist::english())
      : dimension_(dimension), stoplist_(stoplist) {
    if (dimension < 16) throw std::invalid_argument("baseline embedder: dimension must be >= 16");
  }

  std::size_t dimension() const override { return dimension_; }

  std::string fingerprint() const override {
    char buf[96];
    std::snprintf(buf, sizeof buf, "baseline-hash-v1/d=%zu/stop=%016llx", dimension_,
                  static_cast<unsigned long long>(stoplist_.fingerprint()));
    return buf;
  }

  std::vector<Embedding> embed(const std::vector<std::string>& texts) const override {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_text(t));
    return out;
  }

  Embedding embed_text(std::string_view text) const {
    const auto tokens = remove_stopwords(tokenize(text), stoplist_);
    std::vector<double> acc(dimension_, 0.0);
    auto add = [&](std::string_view feature) {
      const std::uint64_t h = mix64(fnv1a(feature));
      const double sign = (h >> 63) ? -1.0 : 1.0;
      acc[(h & 0x7fffffffffffffffULL) % dimension_] += sign;
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      add(tokens[i]);
      if (i + 1 < tokens.size()) add(tokens[i] + ' ' + tokens[i + 1]);
    }
    double norm = 0.0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(norm);
    Embedding out(dimension_, 0.0f);
    if (norm > 0.0) {
      for (std::size_t i = 0; i < dimension_; ++i) out[i] = static_cast<float>(acc[i] / norm);
    }
    return out;
  }

 private:
  std::size_t dimension_;
  Stoplist stoplist_;
};

// ---------------------------------------------------------------------------
// HTTP-backed providers

struct HttpEndpoint {
  std::string origin;       // scheme://host[:port]
  std::string path_prefix;  // "" or "/v1"

  static HttpEndpoint parse(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) throw std::invalid_argument("endpoint url needs a scheme: " + std::string(url));
    if (url.substr(0, scheme_end) != "http")
      throw std::invalid_argument("only http:// endpoints are supported: " + std::string(url));
    const auto path_start = url.find('/', scheme_end + 3);
    HttpEndpoint ep;
    ep.origin = std::string(url.substr(0, path_start));
    if (path_start != std::string_view::npos) {
      ep.path_prefix = std::string(url.substr(path_start));
      while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
    }
    return ep;
  }
};

struct HttpOptions {
  std::chrono::milliseconds timeout{30000};
  std::size_t batch_size = 32;
};

/// POSTs JSON to `endpoint.path_prefix + path`; throws ProviderError on any
/// transport failure or non-200 reply.
inline nlohmann::json post_json(const HttpEndpoint& endpoint, const std::string& path, const nlohmann::json& body,
                                std::chrono::milliseconds timeout) {
  httplib::Client client(endpoint.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  auto res = client.Post(endpoint.path_prefix + path, body.dump(), "application/json");
  if (!res) throw ProviderError(endpoint.origin + path + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw ProviderError(endpoint.origin + path + ": HTTP " + std::to_string(res->status));
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(endpoint.origin + path + ": malformed JSON reply: " + e.what());
  }
}

/// External encoder: POST /embed {"texts": [...]} -> {"vectors": [[...], ...]}.
class EndpointEmbedder final : public EmbeddingProvider {
 public:
  EndpointEmbedder(std::string url, std::size_t dimension, HttpOptions options = {})
      : url_(std::move(url)), endpoint_(HttpEndpoint::parse(url_)), dimension_(dimension), options_(options) {
    if (options_.batch_size == 0) throw std::invalid_argument("endpoint embedder: batch_size must be positive");
  }

  std::size_t dimension() const override { return dimension_; }
  std::string fingerprint() const override { return "endpoint:" + url_ + "/d=" + std::to_string(dimension_); }

  std::vector<Embedding> embed(const std::vector<std::string>& texts) const override {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); i += options_.batch_size) {
      const auto end = std::min(texts.size(), i + options_.batch_size);
      nlohmann::json body;
      body["texts"] = std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(i),
                                               texts.begin() + static_cast<std::ptrdiff_t>(end));
      const auto reply = post_json(endpoint_, "/embed", body, options_.timeout);
      if (!reply.contains("vectors") || !reply["vectors"].is_array() || reply["vectors"].size() != end - i)
        throw ProviderError("embed endpoint returned the wrong number of vectors");
      for (const auto& v : reply["vectors"]) {
        Embedding e = v.get<Embedding>();
        if (e.size() != dimension_)
          throw ProviderError("embed endpoint returned dimension " + std::to_string(e.size()) + ", expected " +
                              std::to_string(dimension_));
        out.push_back(std::move(e));
      }
    }
    return out;
  }

  bool reachable() const override {
    try {
      embed({"health probe"});
      return true;
    } catch (const ProviderError&) {
      return false;
    }
  }

 private:
  std::string url_;
  HttpEndpoint endpoint_;
  std::size_t dimension_;
  HttpOptions options_;
};

/// Vectors read from JSONL lines {"chunk_id": ..., "vector": [...]}. Lines may
/// carry "text" instead of "chunk_id" to supply query vectors.
class PrecomputedEmbedder final : public EmbeddingProvider {
 public:
  explicit PrecomputedEmbedder(const std::filesystem::path& path) : name_(path.filename().string()) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open precomputed vectors: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      Embedding v = j.at("vector").get<Embedding>();
      if (dimension_ == 0) dimension_ = v.size();
      if (v.size() != dimension_ || v.empty())
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": inconsistent vector dimension");
      if (j.contains("chunk_id")) by_chunk_[j["chunk_id"].get<std::string>()] = v;
      if (j.contains("text")) by_text_[j["text"].get<std::string>()] = std::move(v);
    }
  }

  std::size_t dimension() const override { return dimension_; }
  std::string fingerprint() const override { return "precomputed:" + name_ + "/d=" + std::to_string(dimension_); }

  std::vector<Embedding> embed(const std::vector<std::string>& texts) const override {
    std::vector<Embedding> out;
    for (const auto& t : texts) {
      auto it = by_text_.find(t);
      if (it == by_text_.end()) throw ProviderError("no precomputed vector for text", t);
      out.push_back(it->second);
    }
    return out;
  }

  std::vector<Embedding> embed_chunks(std::span<const PassageChunk> chunks) const override {
    std::vector<Embedding> out;
    for (const auto& c : chunks) {
      auto it = by_chunk_.find(c.chunk_id);
      if (it == by_chunk_.end()) throw ProviderError("no precomputed vector for chunk", c.chunk_id);
      out.push_back(it->second);
    }
    return out;
  }

 private:
  std::string name_;
  std::size_t dimension_ = 0;
  std::unordered_map<std::string, Embedding> by_chunk_;
  std::unordered_map<std::string, Embedding> by_text_;
};

/// "baseline", "endpoint:<url>" or "file:<path>".
inline std::unique_ptr<EmbeddingProvider> make_embedding_provider(std::string_view spec,
                                                                  std::size_t dimension = BaselineEmbedder::kDefaultDimension,
                                                                  const Stoplist& stoplist = Stoplist::english(),
                                                                  HttpOptions http = {}) {
  if (spec == "baseline") return std::make_unique<BaselineEmbedder>(dimension, stoplist);
  if (spec.starts_with("endpoint:"))
    return std::make_unique<EndpointEmbedder>(std::string(spec.substr(9)), dimension, http);
  if (spec.starts_with("file:")) return std::make_unique<PrecomputedEmbedder>(std::string(spec.substr(5)));
  throw std::invalid_argument("unknown embedding provider: " + std::string(spec));
}

// ---------------------------------------------------------------------------
// Index

/// Row-major float32 matrix of chunk embeddings plus the fingerprint of the
/// provider that produced them.
class DenseIndex {
 public:
  static constexpr char kMagic[8] = {'O', 'D', 'Q', 'A', 'I', 'D', 'X', '\0'};
  static constexpr std::uint32_t kVersion = 1;

  DenseIndex(std::size_t dimension, std::string fingerprint)
      : dimension_(dimension), fingerprint_(std::move(fingerprint)) {
    if (dimension_ == 0) throw std::invalid_argument("dense index: dimension must be positive");
  }

  void add(std::string chunk_id, std::span<const float> values) {
    if (values.size() != dimension_)
      throw ProviderError("embedding has dimension " + std::to_string(values.size()) + ", index expects " +
                              std::to_string(dimension_),
                          chunk_id);
    if (!std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); }))
      throw ProviderError("embedding has non-finite entries", chunk_id);
    if (!slots_.emplace(chunk_id, ids_.size()).second)
      throw std::invalid_argument("dense index: duplicate chunk id " + chunk_id);
    ids_.push_back(std::move(chunk_id));
    matrix_.insert(matrix_.end(), values.begin(), values.end());
  }

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dimension() const noexcept { return dimension_; }
  const std::string& fingerprint() const noexcept { return fingerprint_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  std::span<const float> row(std::size_t i) const {
    return {matrix_.data() + i * dimension_, dimension_};
  }

  std::optional<std::size_t> slot(std::string_view chunk_id) const {
    auto it = slots_.find(std::string(chunk_id));
    if (it == slots_.end()) return std::nullopt;
    return it->second;
  }

  std::string serialize() const {
    std::string out(kMagic, sizeof kMagic);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(dimension_));
    put_u32(out, static_cast<std::uint32_t>(fingerprint_.size()));
    out += fingerprint_;
    put_u64(out, ids_.size());
    for (const auto& id : ids_) {
      put_u32(out, static_cast<std::uint32_t>(id.size()));
      out += id;
    }
    for (float f : matrix_) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      put_u32(out, bits);
    }
    return out;
  }

  static DenseIndex deserialize(std::string_view bytes) {
    std::size_t pos = 0;
    auto need = [&](std::size_t n) {
      if (bytes.size() - pos < n) throw FormatError("dense index: truncated file");
    };
    auto u32 = [&] {
      need(4);
      std::uint32_t v = 0;
      for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
      pos += 4;
      return v;
    };
    auto u64 = [&] {
      need(8);
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
      pos += 8;
      return v;
    };
    auto str = [&](std::size_t n) {
      need(n);
      std::string s(bytes.substr(pos, n));
      pos += n;
      return s;
    };
    need(sizeof kMagic);
    if (bytes.substr(0, sizeof kMagic) != std::string_view(kMagic, sizeof kMagic))
      throw FormatError("dense index: bad magic");
    pos += sizeof kMagic;
    if (const auto version = u32(); version != kVersion)
      throw FormatError("dense index: unsupported version " + std::to_string(version));
    const std::size_t dim = u32();
    std::string fp = str(u32());
    const std::uint64_t count = u64();
    DenseIndex index(dim, std::move(fp));
    std::vector<std::string> ids;
    ids.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) ids.push_back(str(u32()));
    need(count * dim * 4);
    std::vector<float> row(dim);
    for (auto& id : ids) {
      for (auto& f : row) {
        const std::uint32_t bits = u32();
        std::memcpy(&f, &bits, sizeof f);
      }
      index.add(std::move(id), row);
    }
    if (pos != bytes.size()) throw FormatError("dense index: trailing bytes");
    return index;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write index: " + path.string());
    const auto bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write: " + path.string());
  }

  static DenseIndex load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open index: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
  }

 private:
  static void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  static void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }

  std::size_t dimension_;
  std::string fingerprint_;
  std::vector<std::string> ids_;
  std::vector<float> matrix_;
  std::unordered_map<std::string, std::size_t> slots_;
};

struct IndexBuildOptions {
  std::size_t batch_size = 64;
  std::size_t threads = 1;
};

/// Embeds every chunk. Batches may run on several threads; rows are assembled
/// in chunk order, and the first failing batch (in chunk order) aborts the
/// build with a ProviderError naming the offending chunk.
inline DenseIndex build_index(const ChunkStore& chunks, const EmbeddingProvider& provider,
                              const IndexBuildOptions& options = {}) {
  const auto& all = chunks.chunks();
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t batches = (all.size() + batch - 1) / batch;
  std::vector<std::vector<Embedding>> results(batches);
  std::vector<std::exception_ptr> errors(batches);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t b = next++; b < batches; b = next++) {
      const std::size_t begin = b * batch;
      const std::size_t end = std::min(all.size(), begin + batch);
      try {
        results[b] = provider.embed_chunks(std::span<const PassageChunk>(all.data() + begin, end - begin));
        if (results[b].size() != end - begin)
          throw ProviderError("provider returned " + std::to_string(results[b].size()) + " vectors for " +
                                  std::to_string(end - begin) + " chunks",
                              all[begin].chunk_id);
      } catch (const ProviderError& e) {
        errors[b] = e.item().empty()
                        ? std::make_exception_ptr(ProviderError(e.what(), all[begin].chunk_id))
                        : std::current_exception();
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(1, batches));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  DenseIndex index(provider.dimension(), provider.fingerprint());
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < results[b].size(); ++i) index.add(all[b * batch + i].chunk_id, results[b][i]);
  }
  return index;
}

/// Exact top-n by inner product, descending; equal scores ordered by chunk id.
inline RankedList dense_search_vector(std::span<const float> query, const DenseIndex& index, std::size_t n) {
  if (query.size() != index.dimension())
    throw std::invalid_argument("dense search: query dimension does not match index");
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) scored.emplace_back(inner_product(query, index.row(i)), i);
  const auto& ids = index.ids();
  auto better = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return ids[a.second] < ids[b.second];
  };
  const std::size_t take = std::min(n, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);
  RankedList out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({ids[scored[i].second], scored[i].first, ScoreSource::dense});
  return out;
}

/// Throws FingerprintMismatch unless `provider` built `index`.
inline RankedList dense_search(const std::string& query, const DenseIndex& index,
                               const EmbeddingProvider& provider, std::size_t n) {
  if (provider.fingerprint() != index.fingerprint())
    throw FingerprintMismatch("query provider '" + provider.fingerprint() + "' does not match index provider '" +
                              index.fingerprint() + "'");
  const auto q = provider.embed_one(query);
  return dense_search_vector(q, index, n);
}

}  // namespace odqa
