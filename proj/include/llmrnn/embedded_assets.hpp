#pragma once

#include <cstddef>
#include <string_view>

namespace llmrnn::detail {

struct EmbeddedAsset {
  std::string_view path;
  std::string_view content;
};

extern const EmbeddedAsset kEmbeddedAssets[];
extern const std::size_t kEmbeddedAssetCount;

}  // namespace llmrnn::detail
