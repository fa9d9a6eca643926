// Plain-text prompt templates with named {placeholders}.
//
// The repository's prompts/ directory is compiled in as the builtin catalog;
// a directory given at runtime overrides templates by file name
// (prompts/think.txt -> id "think").

#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace recon {

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using TemplateValues = std::map<std::string, std::string, std::less<>>;

// Placeholder names in order of first appearance. A placeholder is
// "{" [a-z_]+ "}"; other braces are literal text.
std::vector<std::string> Placeholders(std::string_view text);

// Substitutes every placeholder; throws TemplateError naming any placeholder
// without a value.
std::string RenderTemplate(std::string_view text, const TemplateValues& values);

class PromptCatalog {
 public:
  static PromptCatalog Builtin();
  // Builtin templates overridden by every *.txt in `dir`.
  static PromptCatalog LoadDirectory(const std::filesystem::path& dir);

  bool Has(std::string_view id) const;
  const std::string& Get(std::string_view id) const;
  void Set(std::string id, std::string text);
  std::vector<std::string> Ids() const;

  std::string Render(std::string_view id, const TemplateValues& values) const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

// Generated from prompts/*.txt at build time.
const std::map<std::string, std::string>& BuiltinPromptTexts();

}  // namespace recon
