#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace psydial {

/// Editable prompt templates, one text file per name. Placeholders use the
/// `{key}` syntax of text::render_template.
class PromptLibrary {
 public:
  /// Names every library must provide.
  static const std::vector<std::string>& required_names();

  const std::string& get(std::string_view name) const;
  void set(std::string name, std::string text) { templates_[std::move(name)] = std::move(text); }
  bool has(std::string_view name) const { return templates_.count(std::string(name)) != 0; }

 private:
  std::map<std::string, std::string> templates_;
};

/// Reads `<name>.txt` for every required name from `dir`; throws IoError
/// when one is missing.
PromptLibrary load_prompt_library(const std::filesystem::path& dir);

}  // namespace psydial
