#include "prompts.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "model.hpp"

namespace psydial {

const std::vector<std::string>& PromptLibrary::required_names() {
  static const std::vector<std::string> kNames{"doctor_system", "doctor_fewshot", "patient_system", "classifier",
                                               "need_exp",      "fed_dictionary", "fed_narrative"};
  return kNames;
}

const std::string& PromptLibrary::get(std::string_view name) const {
  auto it = templates_.find(std::string(name));
  if (it == templates_.end()) throw PreconditionError("no prompt template named '" + std::string(name) + "'");
  return it->second;
}

PromptLibrary load_prompt_library(const std::filesystem::path& dir) {
  PromptLibrary lib;
  for (const auto& name : PromptLibrary::required_names()) {
    const auto path = dir / (name + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("missing prompt template " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    lib.set(name, ss.str());
  }
  return lib;
}

}  // namespace psydial
