#include "llmrnn/templates.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "llmrnn/embedded_assets.hpp"
#include "llmrnn/errors.hpp"

namespace llmrnn {

namespace {

constexpr std::pair<TemplateId, std::string_view> kTemplateNames[] = {
    {TemplateId::sys_init, "sys_init"},
    {TemplateId::default_init, "default_init"},
    {TemplateId::p_gen, "P_gen"},
    {TemplateId::g_eval, "g_eval"},
    {TemplateId::p_mem, "P_mem"},
    {TemplateId::zero_shot, "zero_shot"},
    {TemplateId::fhc_memprompt, "fhc_memprompt"},
    {TemplateId::memprompt_summarize, "memprompt_summarize"},
};

bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

// Length of the placeholder starting at text[pos] == '{', or 0.
std::size_t placeholder_length(std::string_view text, std::size_t pos) {
  if (pos + 2 >= text.size() || text[pos] != '{' || !is_ident_start(text[pos + 1])) return 0;
  std::size_t end = pos + 2;
  while (end < text.size() && is_ident_char(text[end])) ++end;
  if (end >= text.size() || text[end] != '}') return 0;
  return end - pos + 1;
}

std::string strip_final_newline(std::string_view text) {
  std::string out(text);
  if (!out.empty() && out.back() == '\n') out.pop_back();
  if (!out.empty() && out.back() == '\r') out.pop_back();
  return out;
}

using FileReader = std::function<std::string(const std::string&)>;

std::map<std::pair<TaskKind, TemplateId>, PromptTemplate> load_manifest(
    const std::string& manifest_text, const FileReader& read) {
  std::map<std::pair<TaskKind, TemplateId>, PromptTemplate> out;
  Json manifest;
  try {
    manifest = Json::parse(manifest_text);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("template manifest is not valid JSON: ") + e.what());
  }
  for (const auto& entry : manifest.at("templates")) {
    const auto task = parse_task_kind(entry.at("task").get<std::string>());
    const auto id = parse_template_id(entry.at("id").get<std::string>());
    const auto file = entry.at("file").get<std::string>();
    out.insert_or_assign({task, id}, PromptTemplate(id, strip_final_newline(read(file))));
  }
  return out;
}

}  // namespace

std::string_view to_string(TemplateId id) {
  for (const auto& [value, name] : kTemplateNames) {
    if (value == id) return name;
  }
  return "sys_init";
}

TemplateId parse_template_id(std::string_view text) {
  for (const auto& [value, name] : kTemplateNames) {
    if (name == text) return value;
  }
  throw ConfigError("unknown template id '" + std::string(text) + "'");
}

std::vector<std::string> find_placeholders(std::string_view text) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    const std::size_t len = placeholder_length(text, i);
    if (len == 0) continue;
    std::string name(text.substr(i + 1, len - 2));
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    i += len - 1;
  }
  return names;
}

PromptTemplate::PromptTemplate(TemplateId id, std::string body)
    : id_(id), body_(std::move(body)), required_(find_placeholders(body_)) {}

std::string PromptTemplate::render(const Bindings& bindings) const {
  for (const auto& name : required_) {
    if (bindings.find(name) == bindings.end()) throw MissingBinding(name);
  }
  std::string out;
  out.reserve(body_.size());
  const std::string_view body = body_;
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] == '{') {
      if (const std::size_t len = placeholder_length(body, i); len != 0) {
        out += bindings.find(body.substr(i + 1, len - 2))->second;
        i += len;
        continue;
      }
    }
    out.push_back(body[i]);
    ++i;
  }
  return out;
}

const TemplateRegistry& TemplateRegistry::builtin() {
  static const TemplateRegistry registry = [] {
    auto find_asset = [](std::string_view path) -> std::string {
      for (std::size_t i = 0; i < detail::kEmbeddedAssetCount; ++i) {
        if (detail::kEmbeddedAssets[i].path == path) {
          return std::string(detail::kEmbeddedAssets[i].content);
        }
      }
      throw ConfigError("embedded template asset missing: " + std::string(path));
    };
    TemplateRegistry r;
    r.templates_ = load_manifest(find_asset("manifest.json"), find_asset);
    return r;
  }();
  return registry;
}

TemplateRegistry TemplateRegistry::from_directory(const std::filesystem::path& dir) {
  auto read_file = [&](const std::string& rel) {
    std::ifstream in(dir / rel, std::ios::binary);
    if (!in) throw ConfigError("cannot read template file " + (dir / rel).string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  TemplateRegistry r;
  r.templates_ = load_manifest(read_file("manifest.json"), read_file);
  return r;
}

const PromptTemplate& TemplateRegistry::get(TaskKind task, TemplateId id) const {
  auto it = templates_.find({task, id});
  if (it == templates_.end()) {
    throw ConfigError("no template " + std::string(to_string(id)) + " for task " +
                      std::string(to_string(task)));
  }
  return it->second;
}

}  // namespace llmrnn
