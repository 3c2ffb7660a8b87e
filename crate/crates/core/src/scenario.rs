//! Static registry of the five cover stories.
//!
//! Each story exists in two wordings: the original one used against the
//! rational bot (`*-e1` ids) and the clarified one used with human targets.

use serde::{Deserialize, Serialize};

use crate::model::AttributeId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub cover_story: String,
    pub attribute_names: [String; 3],
    /// Extra phrases the rule-based classifier accepts for each attribute.
    #[serde(default, skip_serializing_if = "is_empty_aliases")]
    pub aliases: [Vec<String>; 3],
}

fn is_empty_aliases(a: &[Vec<String>; 3]) -> bool {
    a.iter().all(Vec::is_empty)
}

impl Scenario {
    pub fn attribute_name(&self, attribute: AttributeId) -> &str {
        &self.attribute_names[attribute.index()]
    }
}

struct Entry {
    id: &'static str,
    cover_story: &'static str,
    attributes: [&'static str; 3],
    aliases: [&'static [&'static str]; 3],
}

const LLM_ALIASES: [&[&str]; 3] = [
    &["safety and control", "safety", "control"],
    &["development speed", "speed of development", "speed"],
    &["public trust", "trust"],
];
const MOON_ALIASES: [&[&str]; 3] = [
    &["scientific advancement", "science"],
    &["commercial opportunities", "commercial"],
    &["preservation of the lunar environment", "lunar environment", "preservation"],
];
const OCEAN_ALIASES: [&[&str]; 3] = [
    &["energy production", "ocean energy"],
    &["marine ecosystems", "marine ecosystem", "marine life"],
    &["coastal economies", "coastal communities", "economic benefits", "coastal economy"],
];
const EDUCATION_ALIASES: [&[&str]; 3] = [
    &["student achievement", "academic performance", "test results"],
    &["teacher satisfaction", "teachers"],
    &["economic competitiveness", "workforce demands", "workforce"],
];
const LUNCH_ALIASES: [&[&str]; 3] = [
    &["cost to school", "school budget", "budget", "cost"],
    &["student choice", "choice for students", "menu options", "variety"],
    &["animal suffering", "animal welfare"],
];

const REGISTRY: [Entry; 10] = [
    Entry {
        id: "llm-e1",
        cover_story: "Large language models (LLMs) could transform education, scientific discovery, and more. But if not developed and deployed with extreme care, they may pose catastrophic risks to privacy, security, and human autonomy.",
        attributes: ["safety and control", "development speed", "public trust"],
        aliases: LLM_ALIASES,
    },
    Entry {
        id: "moon-e1",
        cover_story: "The stakes on the Moon have grown significantly in recent years. Lunar resources and technologies could determine the balance of power on Earth. But unrestrained development risks turning the Moon into a conflict zone and ecological disaster. We must now decide on a development policy that will shape the future of lunar settlements.",
        attributes: ["scientific advancement", "commercial opportunities", "preservation of the lunar environment"],
        aliases: MOON_ALIASES,
    },
    Entry {
        id: "ocean-e1",
        cover_story: "Recent technological advancements have made ocean energy more viable, attracting attention from environmental groups, energy companies, and coastal communities. We must now choose a development policy that will shape the future of the country's energy landscape. Their decision will have significant impacts.",
        attributes: ["energy production", "marine ecosystems", "coastal economies"],
        aliases: OCEAN_ALIASES,
    },
    Entry {
        id: "education-e1",
        cover_story: "Rapid technological advancements and changing workforce needs have sparked a nationwide debate on the effectiveness of the current education system. Student test results are slipping, teachers are leaving the profession, and employers warn of a skills mismatch between graduates and workforce needs.",
        attributes: ["student achievement", "teacher satisfaction", "economic competitiveness"],
        aliases: EDUCATION_ALIASES,
    },
    Entry {
        id: "lunch-e1",
        cover_story: "A school is deciding whether to refrain from serving meat in the lunchroom. This decision will also save the school a lot of money.",
        attributes: ["cost to school", "student choice", "animal suffering"],
        aliases: LUNCH_ALIASES,
    },
    Entry {
        id: "llm",
        cover_story: "Large language models (LLMs) could transform education, scientific discovery, and more. But if not developed and deployed with extreme care, they may pose significant risks to privacy, security, and human autonomy.",
        attributes: ["safety and control of LLMs", "development speed of LLMs", "public trust in LLMs"],
        aliases: LLM_ALIASES,
    },
    Entry {
        id: "moon",
        cover_story: "The stakes on the Moon have grown significantly in recent years. Lunar resources and technologies could determine the balance of power on Earth. But unrestrained development risks creating conflicts and environmental damage.",
        attributes: ["scientific advancement on the Moon", "commercial opportunities from lunar resources", "preservation of the lunar environment"],
        aliases: MOON_ALIASES,
    },
    Entry {
        id: "ocean",
        cover_story: "Recent technological advancements have made ocean energy more viable. These advancements create opportunities and challenges for coastal areas, attracting attention from environmental groups, energy companies, and coastal communities.",
        attributes: ["ocean energy production", "health of marine ecosystems", "economic benefits for coastal communities"],
        aliases: OCEAN_ALIASES,
    },
    Entry {
        id: "education",
        cover_story: "Technological advancements and changing workforce needs have sparked a nationwide debate on the effectiveness of the current education system. Student test results are declining, teachers are leaving the profession, and employers warn of a mismatch between graduate skills and workforce needs.",
        attributes: ["academic performance", "teacher satisfaction", "graduates' ability to meet workforce demands"],
        aliases: EDUCATION_ALIASES,
    },
    Entry {
        id: "lunch",
        cover_story: "A school is deciding whether to remove meat from its lunch menu. This change would address some animal welfare concerns and reduce food costs. However, it would also limit the variety of meal options available to students.",
        attributes: ["school budget", "student choice", "animal welfare"],
        aliases: LUNCH_ALIASES,
    },
];

impl From<&Entry> for Scenario {
    fn from(e: &Entry) -> Self {
        Scenario {
            id: e.id.to_string(),
            cover_story: e.cover_story.to_string(),
            attribute_names: e.attributes.map(str::to_string),
            aliases: e.aliases.map(|list| list.iter().map(|s| s.to_string()).collect()),
        }
    }
}

/// Every registered scenario, original wording first.
pub fn all() -> Vec<Scenario> {
    REGISTRY.iter().map(Scenario::from).collect()
}

/// The five stories in the wording shown to bot persuaders.
pub fn bot_wording() -> Vec<Scenario> {
    REGISTRY[..5].iter().map(Scenario::from).collect()
}

/// The five stories in the wording shown with human targets.
pub fn human_wording() -> Vec<Scenario> {
    REGISTRY[5..].iter().map(Scenario::from).collect()
}

pub fn by_id(id: &str) -> Option<Scenario> {
    REGISTRY.iter().find(|e| e.id == id).map(Scenario::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn ids_unique_and_lookup_works() {
        let all = all();
        assert_eq!(all.len(), 10);
        let ids: HashSet<_> = all.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids.len(), 10);
        for s in &all {
            assert_eq!(by_id(&s.id).as_ref(), Some(s));
        }
        assert!(by_id("mars").is_none());
    }

    #[test]
    fn wording_sets_have_five() {
        assert_eq!(bot_wording().len(), 5);
        assert_eq!(human_wording().len(), 5);
        assert_eq!(by_id("llm").unwrap().attribute_names[1], "development speed of LLMs");
    }
}
