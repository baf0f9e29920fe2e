#pragma once

// Prompt templates for every agent role. Built-in defaults mirror the files in
// data/prompts/; operators can point the pipeline at an edited copy.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vulnpipe {

class PromptSet {
 public:
  static PromptSet defaults();
  /// Defaults overridden by any `<name>.txt` present in `dir`. Unknown file
  /// names are ignored.
  static PromptSet load(const std::filesystem::path& dir);
  static const std::vector<std::string>& names();

  const std::string& get(const std::string& name) const;
  void set(const std::string& name, std::string text);

  /// Substitutes `{{var}}` placeholders. A placeholder without a value throws
  /// ConfigInvalid so template typos surface immediately.
  std::string render(const std::string& name, const std::map<std::string, std::string>& vars) const;

  void write(const std::filesystem::path& dir) const;

 private:
  std::map<std::string, std::string> templates_;
};

/// Line diff between two snippets: unchanged lines prefixed with ' ', removed
/// with '-', added with '+'.
std::string line_diff(const std::string& before, const std::string& after);

}  // namespace vulnpipe
