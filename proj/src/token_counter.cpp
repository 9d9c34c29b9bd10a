#include "llmrnn/token_counter.hpp"

#include "llmrnn/errors.hpp"

namespace llmrnn {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
}

bool is_utf8_continuation(char c) {
  return (static_cast<unsigned char>(c) & 0xC0) == 0x80;
}

}  // namespace

std::size_t WhitespaceTokenCounter::count(std::string_view text) const {
  std::size_t words = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

std::string WhitespaceTokenCounter::keep_last(std::string_view text, std::size_t limit) const {
  if (limit == 0) return {};
  std::size_t seen = 0;
  std::size_t i = text.size();
  while (i > 0) {
    while (i > 0 && is_space(text[i - 1])) --i;
    if (i == 0) break;
    while (i > 0 && !is_space(text[i - 1])) --i;
    if (++seen == limit) return std::string(text.substr(i));
  }
  return std::string(text);
}

std::string WhitespaceTokenCounter::keep_first(std::string_view text, std::size_t limit) const {
  if (limit == 0) return {};
  std::size_t seen = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i == text.size()) break;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (++seen == limit) return std::string(text.substr(0, i));
  }
  return std::string(text);
}

std::size_t CharQuarterTokenCounter::count(std::string_view text) const {
  std::size_t bytes = 0;
  for (char c : text) {
    if (!is_space(c)) ++bytes;
  }
  return (bytes + 3) / 4;
}

std::string CharQuarterTokenCounter::keep_last(std::string_view text, std::size_t limit) const {
  const std::size_t allowed = limit * 4;
  std::size_t bytes = 0;
  std::size_t i = text.size();
  while (i > 0) {
    if (bytes == allowed) break;
    if (!is_space(text[i - 1])) ++bytes;
    --i;
  }
  while (i < text.size() && is_utf8_continuation(text[i])) ++i;
  return std::string(text.substr(i));
}

std::string CharQuarterTokenCounter::keep_first(std::string_view text, std::size_t limit) const {
  const std::size_t allowed = limit * 4;
  std::size_t bytes = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (bytes == allowed) break;
    if (!is_space(text[i])) ++bytes;
    ++i;
  }
  while (i > 0 && i < text.size() && is_utf8_continuation(text[i])) --i;
  return std::string(text.substr(0, i));
}

std::shared_ptr<const TokenCounter> make_token_counter(std::string_view name) {
  if (name == "whitespace") return std::make_shared<WhitespaceTokenCounter>();
  if (name == "chars4") return std::make_shared<CharQuarterTokenCounter>();
  throw ConfigError("unknown token counter '" + std::string(name) +
                    "' (expected whitespace or chars4)");
}

}  // namespace llmrnn
