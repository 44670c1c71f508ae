#include "crest/segmenter.hpp"

#include <cctype>
#include <fstream>

#include "crest/errors.hpp"

namespace crest::segmenter {

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isalnum(uc) || ch == '_') {
      current.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::regex compile_rule(const std::string& pattern) {
  return std::regex("^(?:" + pattern + ")\\b",
                    std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
}

constexpr std::size_t kMaxHeaderTokens = 5;

bool looks_like_heading(std::string_view line) {
  if (line.empty()) return false;
  if (line.back() == ':') return true;
  bool has_letter = false;
  for (char ch : line) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::islower(uc)) return false;
    if (std::isupper(uc)) has_letter = true;
  }
  return has_letter;
}

}  // namespace

HeaderRuleSet::HeaderRuleSet(std::vector<HeaderRule> rules) : rules_(std::move(rules)) {
  compiled_.reserve(rules_.size());
  for (const auto& rule : rules_) compiled_.push_back(compile_rule(rule.pattern));
}

void HeaderRuleSet::add(std::string pattern, SectionKind target) {
  compiled_.push_back(compile_rule(pattern));
  rules_.push_back({std::move(pattern), target});
}

std::optional<SectionKind> HeaderRuleSet::match(std::string_view line) const {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (std::regex_search(line.begin(), line.end(), compiled_[i])) return rules_[i].target;
  }
  return std::nullopt;
}

void HeaderRuleSet::validate() const {
  for (SectionKind kind : kAllSections) {
    if (kind == SectionKind::kOthers) continue;
    bool found = false;
    for (const auto& rule : rules_) {
      if (rule.target == kind) {
        found = true;
        break;
      }
    }
    if (!found)
      throw DataError("header rules: no rule for section " + std::string(to_string(kind)));
  }
}

HeaderRuleSet default_rules() {
  HeaderRuleSet rules;
  // Profile
  rules.add(R"((professional|executive|career|personal)\s+(summary|profile|statement))",
            SectionKind::kProfile);
  rules.add(R"(summary(\s+of\s+qualifications)?)", SectionKind::kProfile);
  rules.add(R"((career\s+)?objectives?)", SectionKind::kProfile);
  rules.add(R"(profile)", SectionKind::kProfile);
  rules.add(R"(about(\s+me)?)", SectionKind::kProfile);
  // Education
  rules.add(R"(education(al)?(\s+(background|history|and\s+training))?)", SectionKind::kEducation);
  rules.add(R"(academic(\s+(background|history|qualifications|record))?)", SectionKind::kEducation);
  // Work experience
  rules.add(R"((work|professional|employment|clinical|research|relevant)\s+experience)",
            SectionKind::kWorkExperience);
  rules.add(R"(experience)", SectionKind::kWorkExperience);
  rules.add(R"(employment(\s+history)?)", SectionKind::kWorkExperience);
  rules.add(R"((work|career)\s+history)", SectionKind::kWorkExperience);
  // Activities
  rules.add(R"(activities)", SectionKind::kActivities);
  rules.add(R"((volunteer|leadership)(\s+(experience|activities|work|roles))?)",
            SectionKind::kActivities);
  rules.add(R"(extracurriculars?(\s+activities)?)", SectionKind::kActivities);
  rules.add(R"(community\s+(service|involvement))", SectionKind::kActivities);
  // Skills
  rules.add(R"((technical|core|key|clinical)\s+(skills|competencies))", SectionKind::kSkills);
  rules.add(R"(skills(\s+and\s+abilities)?)", SectionKind::kSkills);
  rules.add(R"(certifications?)", SectionKind::kSkills);
  rules.add(R"(licenses?(\s+and\s+certifications?)?)", SectionKind::kSkills);
  rules.add(R"(competencies)", SectionKind::kSkills);
  // Common non-content headings route to Others explicitly.
  rules.add(R"(references?)", SectionKind::kOthers);
  rules.add(R"(hobbies)", SectionKind::kOthers);
  rules.add(R"(interests)", SectionKind::kOthers);
  rules.add(R"(publications?)", SectionKind::kOthers);
  rules.add(R"(awards?(\s+and\s+honors)?)", SectionKind::kOthers);
  rules.add(R"(honors?)", SectionKind::kOthers);
  rules.add(R"(languages?)", SectionKind::kOthers);
  rules.add(R"(additional\s+information)", SectionKind::kOthers);
  rules.add(R"(others?)", SectionKind::kOthers);
  return rules;
}

HeaderRuleSet load_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open rules file: " + path.string());
  HeaderRuleSet rules;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": expected pattern<TAB>section");
    const std::string pattern = line.substr(0, tab);
    const std::string name(trim_view(line.substr(tab + 1)));
    auto kind = section_from_string(name);
    if (!kind)
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": unknown section \"" +
                       name + "\"");
    if (pattern.empty())
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": empty pattern");
    rules.add(pattern, *kind);
  }
  rules.validate();
  return rules;
}

std::array<TokenList, kNumSections> segment(std::string_view raw_text,
                                            const HeaderRuleSet& rules) {
  std::array<TokenList, kNumSections> sections{};
  SectionKind current = SectionKind::kOthers;

  std::size_t pos = 0;
  while (pos <= raw_text.size()) {
    const auto eol = raw_text.find('\n', pos);
    std::string_view line = (eol == std::string_view::npos)
                                ? raw_text.substr(pos)
                                : raw_text.substr(pos, eol - pos);
    pos = (eol == std::string_view::npos) ? raw_text.size() + 1 : eol + 1;

    line = trim_view(line);
    if (line.empty()) continue;

    auto tokens = tokenize_words(line);
    if (!tokens.empty() && tokens.size() <= kMaxHeaderTokens) {
      if (auto target = rules.match(line)) {
        current = *target;
        continue;
      }
      if (looks_like_heading(line)) {
        current = SectionKind::kOthers;
        continue;
      }
    }
    auto& dest = sections[static_cast<int>(current)];
    dest.insert(dest.end(), std::make_move_iterator(tokens.begin()),
                std::make_move_iterator(tokens.end()));
  }
  return sections;
}

std::string flatten(const std::array<TokenList, kNumSections>& sections) {
  static constexpr std::array<std::string_view, kNumSections> kHeaders = {
      "Profile", "Education", "Work Experience", "Activities", "Skills", "Others",
  };
  std::string out;
  for (int i = 0; i < kNumSections; ++i) {
    if (sections[static_cast<std::size_t>(i)].empty()) continue;
    out.append(kHeaders[static_cast<std::size_t>(i)]);
    out.push_back('\n');
    const auto& tokens = sections[static_cast<std::size_t>(i)];
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (t > 0) out.push_back(' ');
      out.append(tokens[t]);
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace crest::segmenter
