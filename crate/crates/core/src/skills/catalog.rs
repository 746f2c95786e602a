use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Skill, SkillCategory, SkillFormatError};
use crate::env::TaskKind;
use crate::reasoning::ReasoningMode;

macro_rules! builtin {
    ($($dir:literal / $name:literal),* $(,)?) => {
        [$((concat!($dir, "/", $name, ".skill"), include_str!(concat!("../../skills/", $dir, "/", $name, ".skill")))),*]
    };
}

const BUILTIN: [(&str, &str); 12] = builtin![
    "core" / "coordinate-conventions",
    "core" / "safety-constraints",
    "core" / "general-actions",
    "task" / "approach",
    "task" / "search",
    "task" / "inspection",
    "helper" / "distance",
    "helper" / "target-recovery",
    "helper" / "perception",
    "mode" / "react-loop",
    "mode" / "prospective-plan",
    "mode" / "prospective-select",
];

/// Relative path and text of every shipped skill file.
pub fn builtin_skill_sources() -> &'static [(&'static str, &'static str)] {
    &BUILTIN
}

/// Default routing for one task kind.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkillDefaults {
    pub task: String,
    #[serde(default)]
    pub helpers: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CatalogError {
    #[error(transparent)]
    Format(#[from] SkillFormatError),
    #[error("duplicate skill `{0}`")]
    Duplicate(String),
    #[error("no default routing for task kind {0}")]
    NoDefaults(TaskKind),
    #[error("default for {kind} names `{name}`, which is not an enabled {category} skill")]
    BadDefault { kind: TaskKind, name: String, category: SkillCategory },
    #[error("learned skills are kept in the learned store, not the base catalog (`{0}`)")]
    LearnedInCatalog(String),
}

/// The hand-authored skills plus per-task default routing. Immutable for the
/// duration of an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct SkillCatalog {
    skills: Vec<Skill>,
    defaults: BTreeMap<TaskKind, SkillDefaults>,
}

impl SkillCatalog {
    pub fn new(skills: Vec<Skill>, defaults: BTreeMap<TaskKind, SkillDefaults>) -> Result<Self, CatalogError> {
        for (i, s) in skills.iter().enumerate() {
            if skills[..i].iter().any(|o| o.name == s.name) {
                return Err(CatalogError::Duplicate(s.name.clone()));
            }
            if s.category == SkillCategory::Learned {
                return Err(CatalogError::LearnedInCatalog(s.name.clone()));
            }
        }
        let catalog = SkillCatalog { skills, defaults };
        for kind in TaskKind::ALL {
            let d = catalog.defaults.get(&kind).ok_or(CatalogError::NoDefaults(kind))?;
            let check = |name: &String, category| match catalog.get(name) {
                Some(s) if s.enabled && s.category == category => Ok(()),
                _ => Err(CatalogError::BadDefault { kind, name: name.clone(), category }),
            };
            check(&d.task, SkillCategory::Task)?;
            for h in &d.helpers {
                check(h, SkillCategory::Helper)?;
            }
        }
        Ok(catalog)
    }

    /// Parse `(origin, text)` pairs into a catalog.
    pub fn from_sources<'a, I>(sources: I, defaults: BTreeMap<TaskKind, SkillDefaults>) -> Result<Self, CatalogError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let skills = sources.into_iter().map(|(origin, text)| Skill::parse(text, origin)).collect::<Result<_, _>>()?;
        Self::new(skills, defaults)
    }

    /// The shipped catalog.
    pub fn builtin() -> Self {
        Self::from_sources(builtin_skill_sources().iter().copied(), Self::builtin_defaults())
            .expect("shipped skills are valid")
    }

    pub fn builtin_defaults() -> BTreeMap<TaskKind, SkillDefaults> {
        let d = |task: &str, helpers: &[&str]| SkillDefaults {
            task: task.to_string(),
            helpers: helpers.iter().map(|h| h.to_string()).collect(),
        };
        BTreeMap::from([
            (TaskKind::Rendezvous, d("approach", &["distance"])),
            (TaskKind::SearchAndApproach, d("search", &["target-recovery", "distance"])),
            (TaskKind::Inspection, d("inspection", &["perception"])),
        ])
    }

    pub fn skills(&self) -> &[Skill] {
        &self.skills
    }

    pub fn get(&self, name: &str) -> Option<&Skill> {
        self.skills.iter().find(|s| s.name == name)
    }

    pub fn defaults(&self, kind: TaskKind) -> &SkillDefaults {
        &self.defaults[&kind]
    }

    pub fn all_defaults(&self) -> &BTreeMap<TaskKind, SkillDefaults> {
        &self.defaults
    }

    /// Enabled skills of one category in catalog order.
    pub fn enabled(&self, category: SkillCategory) -> impl Iterator<Item = &Skill> {
        self.skills.iter().filter(move |s| s.enabled && s.category == category)
    }

    /// Core skills that apply to `kind`.
    pub fn core(&self, kind: TaskKind) -> Vec<&Skill> {
        self.enabled(SkillCategory::Core).filter(|s| s.applies_to(kind)).collect()
    }

    /// Mode skills injected for `mode`; Standard has none.
    pub fn mode_skills(&self, mode: ReasoningMode) -> Vec<&Skill> {
        self.enabled(SkillCategory::Mode).filter(|s| s.mode == Some(mode)).collect()
    }

    /// Catalog with one skill replaced or appended (used for custom catalogs
    /// in tests and configuration overlays).
    pub fn with_skill(&self, skill: Skill) -> Result<Self, CatalogError> {
        let mut skills: Vec<Skill> = self.skills.iter().filter(|s| s.name != skill.name).cloned().collect();
        skills.push(skill);
        Self::new(skills, self.defaults.clone())
    }
}

impl Default for SkillCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_shape() {
        let cat = SkillCatalog::builtin();
        let names = |c| cat.enabled(c).map(|s| s.name.as_str()).collect::<Vec<_>>();
        assert_eq!(names(SkillCategory::Core), ["coordinate-conventions", "safety-constraints", "general-actions"]);
        assert_eq!(names(SkillCategory::Task), ["approach", "search", "inspection"]);
        assert_eq!(names(SkillCategory::Helper), ["distance", "target-recovery", "perception"]);
        assert!(cat.mode_skills(ReasoningMode::Standard).is_empty());
        assert_eq!(cat.mode_skills(ReasoningMode::React).len(), 1);
        assert_eq!(cat.mode_skills(ReasoningMode::Prospective).len(), 2);
    }

    #[test]
    fn defaults_must_resolve() {
        let cat = SkillCatalog::builtin();
        let mut defaults = SkillCatalog::builtin_defaults();
        defaults.get_mut(&TaskKind::Inspection).unwrap().helpers = vec!["approach".into()];
        assert!(matches!(SkillCatalog::new(cat.skills().to_vec(), defaults), Err(CatalogError::BadDefault { .. })));
        let mut defaults = SkillCatalog::builtin_defaults();
        defaults.remove(&TaskKind::Rendezvous);
        assert_eq!(
            SkillCatalog::new(cat.skills().to_vec(), defaults),
            Err(CatalogError::NoDefaults(TaskKind::Rendezvous))
        );
        let mut dup = cat.skills().to_vec();
        dup.push(dup[0].clone());
        assert!(matches!(SkillCatalog::new(dup, SkillCatalog::builtin_defaults()), Err(CatalogError::Duplicate(_))));
    }
}
