#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crest {

// The six resume sections, in canonical order. The enum value doubles as the
// section ID fed to the section-encoding embedding table.
enum class SectionKind : int {
  kProfile = 0,
  kEducation = 1,
  kWorkExperience = 2,
  kActivities = 3,
  kSkills = 4,
  kOthers = 5,
};

inline constexpr int kNumSections = 6;

inline constexpr std::array<SectionKind, kNumSections> kAllSections = {
    SectionKind::kProfile,    SectionKind::kEducation, SectionKind::kWorkExperience,
    SectionKind::kActivities, SectionKind::kSkills,    SectionKind::kOthers,
};

std::string_view to_string(SectionKind kind);
std::optional<SectionKind> section_from_string(std::string_view name);

// Five competence labels: NQ (not qualified for any level) plus CRC1-4,
// ordered by seniority.
enum class CompetenceLabel : int {
  kNQ = 0,
  kCRC1 = 1,
  kCRC2 = 2,
  kCRC3 = 3,
  kCRC4 = 4,
};

inline constexpr int kNumLabels = 5;

inline constexpr std::array<CompetenceLabel, kNumLabels> kAllLabels = {
    CompetenceLabel::kNQ,   CompetenceLabel::kCRC1, CompetenceLabel::kCRC2,
    CompetenceLabel::kCRC3, CompetenceLabel::kCRC4,
};

std::string_view to_string(CompetenceLabel label);
std::optional<CompetenceLabel> label_from_string(std::string_view name);

using TokenList = std::vector<std::string>;

// A resume holds pre-tokenized lowercase tokens per section; an empty token
// list means the section is absent. Raw-text tokenization lives with the
// encoder so stored corpora stay tokenizer-stable.
struct Resume {
  std::string applicant_id;
  std::array<TokenList, kNumSections> sections{};
  std::optional<CompetenceLabel> annotated_label;

  TokenList& section(SectionKind kind) { return sections[static_cast<int>(kind)]; }
  const TokenList& section(SectionKind kind) const { return sections[static_cast<int>(kind)]; }

  std::size_t total_tokens() const {
    std::size_t n = 0;
    for (const auto& s : sections) n += s.size();
    return n;
  }
  bool empty() const { return total_tokens() == 0; }

  bool operator==(const Resume& other) const = default;
};

// A posted job. Level excludes NQ (nobody posts a "not qualified" position).
struct JobDescription {
  std::string job_id;
  CompetenceLabel level = CompetenceLabel::kCRC1;
  TokenList tokens;

  bool operator==(const JobDescription& other) const = default;
};

// One application of a resume to a job. match is Y iff the job's level equals
// the resume's annotated label.
struct Application {
  std::string applicant_id;
  std::string job_id;
  bool match = false;

  // Stable identifier used by split manifests.
  std::string id() const { return applicant_id + "/" + job_id; }

  bool operator==(const Application& other) const = default;
};

// Reserved special-token spellings shared by the corpus, preprocess and
// encoder layers. Bracketed so they cannot collide with lowercased text.
inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";        // whole-input c
inline constexpr std::string_view kJdClsToken = "[CLSB]";     // job-description c_b
inline constexpr std::string_view kChunkClsToken = "[CLSC]";  // chunk c_{i.j}
inline constexpr std::array<std::string_view, kNumSections> kSectionClsTokens = {
    "[SEC0]", "[SEC1]", "[SEC2]", "[SEC3]", "[SEC4]", "[SEC5]",
};

}  // namespace crest
