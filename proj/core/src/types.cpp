#include "crest/types.hpp"

namespace crest {

std::string_view to_string(SectionKind kind) {
  switch (kind) {
    case SectionKind::kProfile: return "Profile";
    case SectionKind::kEducation: return "Education";
    case SectionKind::kWorkExperience: return "WorkExperience";
    case SectionKind::kActivities: return "Activities";
    case SectionKind::kSkills: return "Skills";
    case SectionKind::kOthers: return "Others";
  }
  return "Others";
}

std::optional<SectionKind> section_from_string(std::string_view name) {
  for (SectionKind kind : kAllSections) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string_view to_string(CompetenceLabel label) {
  switch (label) {
    case CompetenceLabel::kNQ: return "NQ";
    case CompetenceLabel::kCRC1: return "CRC1";
    case CompetenceLabel::kCRC2: return "CRC2";
    case CompetenceLabel::kCRC3: return "CRC3";
    case CompetenceLabel::kCRC4: return "CRC4";
  }
  return "NQ";
}

std::optional<CompetenceLabel> label_from_string(std::string_view name) {
  for (CompetenceLabel label : kAllLabels) {
    if (to_string(label) == name) return label;
  }
  return std::nullopt;
}

}  // namespace crest
