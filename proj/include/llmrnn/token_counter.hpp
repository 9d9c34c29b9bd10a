#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

namespace llmrnn {

/// Measures text length in "tokens" for the memory budget and context limit.
///
/// Implementations must be deterministic and monotone under concatenation:
/// count(a + b) >= max(count(a), count(b)). The keep_* helpers return a
/// substring of the input whose count does not exceed the requested limit.
class TokenCounter {
 public:
  virtual ~TokenCounter() = default;

  virtual std::size_t count(std::string_view text) const = 0;
  virtual std::string_view name() const = 0;

  /// Longest suffix of `text` with at most `limit` tokens.
  virtual std::string keep_last(std::string_view text, std::size_t limit) const = 0;
  /// Longest prefix of `text` with at most `limit` tokens.
  virtual std::string keep_first(std::string_view text, std::size_t limit) const = 0;
};

/// One token per maximal run of non-whitespace bytes. The default counter.
class WhitespaceTokenCounter final : public TokenCounter {
 public:
  std::size_t count(std::string_view text) const override;
  std::string_view name() const override { return "whitespace"; }
  std::string keep_last(std::string_view text, std::size_t limit) const override;
  std::string keep_first(std::string_view text, std::size_t limit) const override;
};

/// ceil(non-whitespace bytes / 4). Whitespace is free so that joining parts
/// with newlines never costs more than the parts counted separately.
class CharQuarterTokenCounter final : public TokenCounter {
 public:
  std::size_t count(std::string_view text) const override;
  std::string_view name() const override { return "chars4"; }
  std::string keep_last(std::string_view text, std::size_t limit) const override;
  std::string keep_first(std::string_view text, std::size_t limit) const override;
};

/// "whitespace" or "chars4". Throws ConfigError otherwise.
std::shared_ptr<const TokenCounter> make_token_counter(std::string_view name);

}  // namespace llmrnn
