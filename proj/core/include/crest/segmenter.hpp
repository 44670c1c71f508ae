#pragma once

#include <array>
#include <filesystem>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "crest/types.hpp"

namespace crest::segmenter {

// Lowercased maximal runs of [a-z0-9_]; punctuation acts as a separator.
// Shared with the encoder's tokenizer so segmented corpora and raw-text
// inference agree.
std::vector<std::string> tokenize_words(std::string_view text);

struct HeaderRule {
  std::string pattern;  // case-insensitive regex source, matched at line start
  SectionKind target = SectionKind::kOthers;
};

class HeaderRuleSet {
 public:
  HeaderRuleSet() = default;
  explicit HeaderRuleSet(std::vector<HeaderRule> rules);

  void add(std::string pattern, SectionKind target);

  // Returns the target section if the line is a recognized header.
  std::optional<SectionKind> match(std::string_view line) const;

  const std::vector<HeaderRule>& rules() const { return rules_; }

  // Every section except Others must have at least one rule.
  void validate() const;

 private:
  std::vector<HeaderRule> rules_;
  std::vector<std::regex> compiled_;
};

// Built-in header lexicon (documented in the README). Rules mapping to Others
// capture common non-content headings (references, hobbies, ...).
HeaderRuleSet default_rules();

// One "pattern<TAB>section" per line; blank lines and '#' comments ignored.
HeaderRuleSet load_rules(const std::filesystem::path& path);

// Assigns every line of raw_text to exactly one section. A line is a header
// iff it has 1..5 tokens and either matches a rule or looks like a heading
// (all-caps or trailing colon); unrecognized headings open Others. Text before
// the first header lands in Others. Header lines carry no content; all other
// lines are tokenized into the current section. Repeated headers append.
std::array<TokenList, kNumSections> segment(std::string_view raw_text,
                                            const HeaderRuleSet& rules);

// Canonical text rendering: one recognized header line per nonempty section,
// tokens joined by spaces. Re-segmenting the result reproduces the sections
// (provided no content token itself matches a header rule).
std::string flatten(const std::array<TokenList, kNumSections>& sections);

}  // namespace crest::segmenter
