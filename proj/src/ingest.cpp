#include "onphase/ingest.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "onphase/error.hpp"
#include "onphase/format.hpp"

namespace onphase::ingest {

namespace {

using nlohmann::json;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(p[i]) << (8 * i);
  }
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return path.string() + ".meta.json";
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t vocab_size, std::size_t dim,
                               std::vector<float> values, std::string model_id)
    : vocab_size_(vocab_size),
      dim_(dim),
      values_(std::move(values)),
      model_id_(std::move(model_id)) {
  if (vocab_size_ == 0 || dim_ == 0) {
    throw Error(ErrorKind::InvalidHeader, "embedding table needs V > 0 and N > 0");
  }
  if (values_.size() / dim_ != vocab_size_ || values_.size() % dim_ != 0) {
    throw Error(ErrorKind::Data, "embedding table has " +
                                     std::to_string(values_.size()) +
                                     " values, expected V*N = " +
                                     std::to_string(vocab_size_ * dim_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(ErrorKind::Data, "non-finite embedding value at row " +
                                       std::to_string(i / dim_) + ", column " +
                                       std::to_string(i % dim_));
    }
  }
}

std::span<const float> EmbeddingTable::row(std::size_t token) const {
  if (token >= vocab_size_) {
    throw Error(ErrorKind::Range, "token id " + std::to_string(token) +
                                      " outside vocabulary of size " +
                                      std::to_string(vocab_size_));
  }
  return {values_.data() + token * dim_, dim_};
}

EmbeddingSequence::EmbeddingSequence(std::size_t dim, std::vector<double> values,
                                     double temperature)
    : dim_(dim), length_(0), values_(std::move(values)), temperature_(temperature) {
  if (dim_ == 0 || values_.empty() || values_.size() % dim_ != 0) {
    throw Error(ErrorKind::Validation,
                "embedding sequence needs at least one vector of positive dimension");
  }
  length_ = values_.size() / dim_;
  if (!(temperature_ >= 0.0)) {
    throw Error(ErrorKind::Validation, "temperature must be nonnegative");
  }
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kEmbeddingMagic, 4) != 0) {
    throw Error(ErrorKind::Format, path.string() + ": missing ONEM magic");
  }
  if (bytes.size() < kEmbeddingHeaderBytes) {
    throw Error(ErrorKind::Truncation, path.string() + ": header truncated");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto version = get_le<std::uint32_t>(p + 4);
  if (version != kEmbeddingFormatVersion) {
    throw Error(ErrorKind::InvalidHeader,
                path.string() + ": unsupported version " + std::to_string(version));
  }
  const auto vocab = get_le<std::uint64_t>(p + 8);
  const auto dim = get_le<std::uint64_t>(p + 16);
  if (vocab == 0 || dim == 0) {
    throw Error(ErrorKind::InvalidHeader, path.string() + ": V and N must be positive");
  }
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  if (vocab > kMax / dim || vocab * dim > kMax / 4) {
    throw Error(ErrorKind::InvalidHeader, path.string() + ": V*N overflows");
  }
  const std::uint64_t payload = vocab * dim * 4;
  const std::uint64_t have = bytes.size() - kEmbeddingHeaderBytes;
  if (have < payload) {
    throw Error(ErrorKind::Truncation,
                path.string() + ": payload has " + std::to_string(have) +
                    " bytes, header promises " + std::to_string(payload));
  }
  if (have > payload) {
    throw Error(ErrorKind::Format, path.string() + ": " +
                                       std::to_string(have - payload) +
                                       " trailing bytes after payload");
  }

  std::vector<float> values(vocab * dim);
  const unsigned char* q = p + kEmbeddingHeaderBytes;
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(get_le<std::uint32_t>(q + 4 * i));
    if (!std::isfinite(values[i])) {
      throw Error(ErrorKind::Data, path.string() + ": non-finite value at row " +
                                       std::to_string(i / dim) + ", column " +
                                       std::to_string(i % dim));
    }
  }

  std::string model_id = path.stem().string();
  if (const auto meta = sidecar_path(path); std::filesystem::exists(meta)) {
    try {
      const auto j = json::parse(read_file(meta));
      if (j.contains("model_id")) model_id = j.at("model_id").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse, meta.string() + ": " + e.what());
    }
  }
  return EmbeddingTable(vocab, dim, std::move(values), std::move(model_id));
}

void write_embedding_table(const EmbeddingTable& table,
                           const std::filesystem::path& path, bool write_sidecar) {
  std::string out;
  out.reserve(kEmbeddingHeaderBytes + table.values().size() * 4);
  out.append(kEmbeddingMagic, 4);
  put_le<std::uint32_t>(out, kEmbeddingFormatVersion);
  put_le<std::uint64_t>(out, table.vocab_size());
  put_le<std::uint64_t>(out, table.dim());
  for (float v : table.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorKind::Io, "short write to " + path.string());

  if (write_sidecar) {
    json meta = {{"model_id", table.model_id()}, {"extracted_at", utc_timestamp()}};
    std::ofstream m(sidecar_path(path), std::ios::trunc);
    if (!m) throw Error(ErrorKind::Io, "cannot write " + sidecar_path(path).string());
    m << meta.dump(2) << '\n';
  }
}

std::vector<TokenSequence> parse_token_dump(const std::string& text) {
  std::vector<TokenSequence> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse, where + ": " + e.what());
    }
    TokenSequence seq;
    try {
      seq.prompt_id = j.at("prompt_id").get<std::string>();
      const auto& t = j.at("temperature");
      if (!t.is_number()) throw Error(ErrorKind::Parse, where + ": temperature is not a number");
      seq.temperature = t.get<double>();
      seq.token_ids = j.at("token_ids").get<std::vector<std::int64_t>>();
      if (j.contains("model_id")) seq.model_id = j.at("model_id").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse, where + ": " + e.what());
    }
    if (!std::isfinite(seq.temperature)) {
      throw Error(ErrorKind::Data, where + ": non-finite temperature");
    }
    if (seq.temperature < 0.0) {
      throw Error(ErrorKind::Validation,
                  where + ": negative temperature " + format_double(seq.temperature));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<TokenSequence> load_token_dump(const std::filesystem::path& path) {
  try {
    return parse_token_dump(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_token_dump(const std::vector<TokenSequence>& seqs,
                      const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  for (const auto& s : seqs) {
    json j = {{"prompt_id", s.prompt_id},
              {"temperature", s.temperature},
              {"token_ids", s.token_ids}};
    if (!s.model_id.empty()) j["model_id"] = s.model_id;
    f << j.dump() << '\n';
  }
}

void validate_token_ids(const std::vector<TokenSequence>& seqs,
                        const EmbeddingTable& table) {
  for (std::size_t r = 0; r < seqs.size(); ++r) {
    const auto& ids = seqs[r].token_ids;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || static_cast<std::uint64_t>(ids[i]) >= table.vocab_size()) {
        throw Error(ErrorKind::Range,
                    "record " + std::to_string(r + 1) + " position " + std::to_string(i) +
                        ": token id " + std::to_string(ids[i]) + " outside [0, " +
                        std::to_string(table.vocab_size()) + ")");
      }
    }
  }
}

EmbeddingSequence lookup_embeddings(const EmbeddingTable& table,
                                    const TokenSequence& seq) {
  if (seq.token_ids.empty()) {
    throw Error(ErrorKind::Validation,
                "sequence '" + seq.prompt_id + "' has no tokens");
  }
  const std::size_t n = table.dim();
  std::vector<double> values;
  values.reserve(seq.token_ids.size() * n);
  for (const auto id : seq.token_ids) {
    if (id < 0 || static_cast<std::uint64_t>(id) >= table.vocab_size()) {
      throw Error(ErrorKind::Range, "token id " + std::to_string(id) +
                                        " outside vocabulary of size " +
                                        std::to_string(table.vocab_size()));
    }
    const auto row = table.row(static_cast<std::size_t>(id));
    values.insert(values.end(), row.begin(), row.end());
  }
  return EmbeddingSequence(n, std::move(values), seq.temperature);
}

}  // namespace onphase::ingest
