#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace onphase::ingest {

/// Vocabulary-indexed matrix of token embedding vectors, stored row-major.
///
/// Immutable after construction; the constructor enforces the shape and
/// finiteness invariants so every live table is valid.
class EmbeddingTable {
 public:
  EmbeddingTable(std::size_t vocab_size, std::size_t dim,
                 std::vector<float> values, std::string model_id = {});

  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::string& model_id() const noexcept { return model_id_; }

  std::span<const float> row(std::size_t token) const;
  std::span<const float> values() const noexcept { return values_; }

 private:
  std::size_t vocab_size_;
  std::size_t dim_;
  std::vector<float> values_;
  std::string model_id_;
};

struct TokenSequence {
  std::vector<std::int64_t> token_ids;
  double temperature = 0.0;
  std::string prompt_id;
  std::string model_id;
};

/// Ordered embedding vectors of one generation. Row-major `length x dim`.
class EmbeddingSequence {
 public:
  EmbeddingSequence(std::size_t dim, std::vector<double> values,
                    double temperature);

  std::size_t length() const noexcept { return length_; }
  std::size_t dim() const noexcept { return dim_; }
  double temperature() const noexcept { return temperature_; }
  std::span<const double> vector(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::size_t dim_;
  std::size_t length_;
  std::vector<double> values_;
  double temperature_;
};

inline constexpr char kEmbeddingMagic[4] = {'O', 'N', 'E', 'M'};
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 4 + 4 + 8 + 8;

/// Reads an ONEM file. If `<path>.meta.json` exists its `model_id` is used,
/// otherwise the file stem.
EmbeddingTable load_embedding_table(const std::filesystem::path& path);

/// Writes an ONEM file. When `write_sidecar` is set, also writes
/// `<path>.meta.json` with model_id and a UTC timestamp.
void write_embedding_table(const EmbeddingTable& table,
                           const std::filesystem::path& path,
                           bool write_sidecar = false);

std::vector<TokenSequence> parse_token_dump(const std::string& text);
std::vector<TokenSequence> load_token_dump(const std::filesystem::path& path);
void write_token_dump(const std::vector<TokenSequence>& seqs,
                      const std::filesystem::path& path);

/// Throws a range error naming the record and position of the first token id
/// outside [0, V).
void validate_token_ids(const std::vector<TokenSequence>& seqs,
                        const EmbeddingTable& table);

EmbeddingSequence lookup_embeddings(const EmbeddingTable& table,
                                    const TokenSequence& seq);

}  // namespace onphase::ingest
