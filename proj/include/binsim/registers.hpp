#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>

namespace binsim {

// Per-architecture register name sets. Names are stored upper-case.
class RegisterTables {
 public:
  static const RegisterTables& builtin();

  // Canonical table name for an arch tag ("amd64" -> "x86"), or empty.
  std::string resolve(std::string_view arch) const;
  bool knows(std::string_view arch) const { return !resolve(arch).empty(); }
  bool is_register(std::string_view arch, std::string_view name) const;

  void add(const std::string& table, std::string_view reg);
  void alias(const std::string& arch_tag, const std::string& table);

  // Plain-text table file. One entry per line:
  //   <arch>: REG REG REG ...
  //   alias <tag> <arch>
  // '#' starts a comment.
  void load(std::string_view text);
  void load_file(const std::string& path);

 private:
  std::map<std::string, std::set<std::string, std::less<>>, std::less<>> tables_;
  std::map<std::string, std::string, std::less<>> aliases_;
};

}  // namespace binsim
