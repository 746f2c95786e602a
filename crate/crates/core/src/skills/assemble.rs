use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{RoutingResult, Skill, SkillCatalog, SkillCategory};

/// The skill prompt for one episode and the ordered names it was built from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssembledPrompt {
    pub text: String,
    pub names: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AssemblyError {
    #[error("skill `{0}` is disabled")]
    DisabledSkillIncluded(String),
    #[error("routed skill `{0}` is not in the catalog")]
    UnknownSkill(String),
}

fn section(out: &mut String, skill: &Skill) {
    out.push_str(&format!("### [{}] {}\n{}\n\n", skill.category, skill.name, skill.body.trim_end()));
}

/// Concatenate core, routed task, routed helpers, mode and learned skills in
/// that order. Identical inputs give identical bytes.
pub fn assemble_prompt(
    core: &[&Skill],
    routed: &RoutingResult,
    catalog: &SkillCatalog,
    mode: &[&Skill],
    learned: &[&Skill],
) -> Result<AssembledPrompt, AssemblyError> {
    let lookup = |name: &String| catalog.get(name).ok_or_else(|| AssemblyError::UnknownSkill(name.clone()));
    let mut ordered: Vec<&Skill> = core.to_vec();
    ordered.push(lookup(&routed.task_skill)?);
    for h in &routed.helper_skills {
        ordered.push(lookup(h)?);
    }
    ordered.extend_from_slice(mode);
    ordered.extend_from_slice(learned);
    assemble(&ordered)
}

/// Assemble an explicit, already ordered list.
pub fn assemble(skills: &[&Skill]) -> Result<AssembledPrompt, AssemblyError> {
    let mut text = String::new();
    let mut names = Vec::new();
    for s in skills {
        if !s.enabled {
            return Err(AssemblyError::DisabledSkillIncluded(s.name.clone()));
        }
        section(&mut text, s);
        names.push(s.name.clone());
    }
    Ok(AssembledPrompt { text, names })
}

/// Category rank in assembly order.
pub fn rank(category: SkillCategory) -> u8 {
    match category {
        SkillCategory::Core => 0,
        SkillCategory::Task => 1,
        SkillCategory::Helper => 2,
        SkillCategory::Mode => 3,
        SkillCategory::Learned => 4,
    }
}
