#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "llmrnn/domain.hpp"

namespace llmrnn {

enum class TemplateId {
  sys_init,
  default_init,
  p_gen,
  g_eval,
  p_mem,
  zero_shot,
  fhc_memprompt,
  memprompt_summarize,
};

/// Manifest names: sys_init, default_init, P_gen, g_eval, P_mem, zero_shot,
/// fhc_memprompt, memprompt_summarize.
std::string_view to_string(TemplateId id);
TemplateId parse_template_id(std::string_view text);

/// A prompt body with `{name}` placeholders (lowercase identifiers). JSON
/// examples inside the body are left alone because `{"` never starts a
/// placeholder.
class PromptTemplate {
 public:
  PromptTemplate(TemplateId id, std::string body);

  TemplateId id() const noexcept { return id_; }
  const std::string& body() const noexcept { return body_; }
  /// Placeholder names in order of first appearance.
  const std::vector<std::string>& required_placeholders() const noexcept { return required_; }

  /// Substitutes every placeholder in one pass; bound values are not rescanned.
  /// Throws MissingBinding naming the first unbound placeholder. Extra
  /// bindings are ignored.
  std::string render(const Bindings& bindings) const;

 private:
  TemplateId id_;
  std::string body_;
  std::vector<std::string> required_;
};

inline std::string render(const PromptTemplate& tmpl, const Bindings& bindings) {
  return tmpl.render(bindings);
}

/// Lists `{name}` placeholders of `text` in order of first appearance.
std::vector<std::string> find_placeholders(std::string_view text);

/// Templates per (task, id), loaded from a manifest that maps each pair to a
/// plain-text file.
class TemplateRegistry {
 public:
  /// The assets compiled into the library.
  static const TemplateRegistry& builtin();
  /// Reads `<dir>/manifest.json` and the files it names.
  static TemplateRegistry from_directory(const std::filesystem::path& dir);

  const PromptTemplate& get(TaskKind task, TemplateId id) const;

 private:
  std::map<std::pair<TaskKind, TemplateId>, PromptTemplate> templates_;
};

}  // namespace llmrnn
