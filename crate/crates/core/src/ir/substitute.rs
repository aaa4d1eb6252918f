use alloc::collections::BTreeSet;
use alloc::string::String;

use super::{BackboneAssignment, InstantiatedWorkflow, WorkflowTemplate};

/// The set of backbone ids an assignment may draw from.
pub trait BackbonePool {
    fn contains_backbone(&self, id: &str) -> bool;
}

impl BackbonePool for [&str] {
    fn contains_backbone(&self, id: &str) -> bool {
        self.contains(&id)
    }
}

impl<const N: usize> BackbonePool for [&str; N] {
    fn contains_backbone(&self, id: &str) -> bool {
        self.contains(&id)
    }
}

impl BackbonePool for BTreeSet<String> {
    fn contains_backbone(&self, id: &str) -> bool {
        self.contains(id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubstitutionError {
    #[error("no backbone assigned to role `{0}`")]
    MissingAssignment(String),
    #[error("assignment names role `{0}` which the template does not declare")]
    ExtraAssignment(String),
    #[error("unknown backbone `{0}`")]
    UnknownBackbone(String),
}

/// Fill every backbone slot with its assigned backbone. Nothing but the
/// slots changes.
pub fn substitute_backbones<P: BackbonePool + ?Sized>(
    t: &WorkflowTemplate,
    a: &BackboneAssignment,
    pool: &P,
) -> Result<InstantiatedWorkflow, SubstitutionError> {
    for role in t.llm_roles() {
        let backbone = a.get(&role.id).ok_or_else(|| SubstitutionError::MissingAssignment(role.id.clone()))?;
        if !pool.contains_backbone(backbone) {
            return Err(SubstitutionError::UnknownBackbone(backbone.into()));
        }
    }
    if let Some(extra) = a.mapping.keys().find(|k| !t.llm_roles().any(|r| &r.id == *k)) {
        return Err(SubstitutionError::ExtraAssignment(extra.clone()));
    }
    let mut template = t.clone();
    for role in template.roles.iter_mut().filter(|r| r.kind.uses_backbone()) {
        role.slot = a.get(&role.id).map(String::from);
    }
    template.source_text = None;
    Ok(InstantiatedWorkflow { template, assignment: a.clone() })
}
