use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ClauseOrigin, Compiled, FeatureModel, Formula, ModelError};
use crate::exec::{self, Execution};

/// Brute-force enumeration refuses models with more features than this.
pub const ENUMERATION_LIMIT: usize = 24;

/// Total selection over a model's features.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    pub selection: BTreeMap<String, bool>,
}

impl Configuration {
    pub fn all(model: &FeatureModel, selected: bool) -> Self {
        Configuration { selection: model.features().into_iter().map(|f| (f, selected)).collect() }
    }

    pub fn is_selected(&self, feature: &str) -> bool {
        self.selection.get(feature).copied().unwrap_or(false)
    }

    pub fn selected(&self) -> impl Iterator<Item = &str> {
        self.selection.iter().filter(|(_, s)| **s).map(|(f, _)| f.as_str())
    }

    pub fn deselected(&self) -> impl Iterator<Item = &str> {
        self.selection.iter().filter(|(_, s)| !**s).map(|(f, _)| f.as_str())
    }

    pub fn set(mut self, feature: &str, selected: bool) -> Self {
        self.selection.insert(feature.to_string(), selected);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub origin: ClauseOrigin,
    /// The unsatisfied clause in constraint syntax.
    pub clause: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validation {
    pub violations: Vec<Violation>,
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_domain(model: &FeatureModel, config: &Configuration) -> Result<(), ModelError> {
    let features: BTreeSet<String> = model.features().into_iter().collect();
    let missing: Vec<String> =
        features.iter().filter(|f| !config.selection.contains_key(*f)).cloned().collect();
    let unknown: Vec<String> =
        config.selection.keys().filter(|f| !features.contains(*f)).cloned().collect();
    if missing.is_empty() && unknown.is_empty() {
        Ok(())
    } else {
        Err(ModelError::DomainMismatch { missing, unknown })
    }
}

/// Check a configuration against every clause of the model's encoding.
pub fn validate_configuration(
    model: &FeatureModel,
    config: &Configuration,
) -> Result<Validation, ModelError> {
    check_domain(model, config)?;
    let violations = model
        .clauses()
        .into_iter()
        .filter(|c| !c.formula.eval(&config.selection))
        .map(|c| Violation {
            message: format!("violates {}", c.origin),
            clause: c.formula.to_string(),
            origin: c.origin,
        })
        .collect();
    Ok(Validation { violations })
}

struct CompiledModel {
    names: Vec<String>,
    formula: Compiled,
}

fn compile(model: &FeatureModel) -> Result<CompiledModel, ModelError> {
    let names = model.features();
    if names.len() > ENUMERATION_LIMIT {
        return Err(ModelError::TooManyFeatures { features: names.len(), limit: ENUMERATION_LIMIT });
    }
    let index = model.bit_index();
    let formula = model.to_formula().compile(&|n| index.get(n).copied());
    Ok(CompiledModel { names, formula })
}

const CHUNK: u64 = 1 << 14;

/// All valid configurations (at most `limit`), in ascending assignment order
/// where bit `i` of the assignment selects the `i`-th feature of
/// [`FeatureModel::features`].
pub fn enumerate_configurations(
    model: &FeatureModel,
    limit: usize,
) -> Result<Vec<Configuration>, ModelError> {
    enumerate_configurations_with(model, limit, Execution::default())
}

pub fn enumerate_configurations_with(
    model: &FeatureModel,
    limit: usize,
    exec: Execution,
) -> Result<Vec<Configuration>, ModelError> {
    let compiled = compile(model)?;
    let total = 1u64 << compiled.names.len();
    let limit = limit.max(1);
    let mut masks = Vec::new();
    let mut start = 0;
    while start < total && masks.len() < limit {
        let end = (start + CHUNK).min(total);
        masks.extend(exec::filter_range(exec, start..end, |m| compiled.formula.eval(m)));
        start = end;
    }
    masks.truncate(limit);
    Ok(masks
        .into_iter()
        .map(|mask| Configuration {
            selection: compiled
                .names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.clone(), mask & (1 << i) != 0))
                .collect(),
        })
        .collect())
}

/// Number of valid configurations by exhaustive assignment.
pub fn count_configurations(model: &FeatureModel) -> Result<u64, ModelError> {
    count_configurations_with(model, Execution::default())
}

pub fn count_configurations_with(model: &FeatureModel, exec: Execution) -> Result<u64, ModelError> {
    let compiled = compile(model)?;
    let total = 1u64 << compiled.names.len();
    Ok(exec::count_range(exec, 0..total, |m| compiled.formula.eval(m)))
}

/// Whether every valid configuration satisfies `formula`, by exhaustive
/// search for a counterexample. Variables outside the model are false.
pub fn entails(model: &FeatureModel, formula: &Formula) -> Result<bool, ModelError> {
    entails_with(model, formula, Execution::default())
}

pub fn entails_with(model: &FeatureModel, formula: &Formula, exec: Execution) -> Result<bool, ModelError> {
    let compiled = compile(model)?;
    let index = model.bit_index();
    let candidate = formula.compile(&|n| index.get(n).copied());
    let total = 1u64 << compiled.names.len();
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK).min(total);
        if exec::count_range(exec, start..end, |m| compiled.formula.eval(m) && !candidate.eval(m)) > 0 {
            return Ok(false);
        }
        start = end;
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_afm;

    #[test]
    fn all_selected_without_alternatives_is_valid() {
        let m = parse_afm("R : A [B] C ; C : (X | Y)+ ;").unwrap();
        let v = validate_configuration(&m, &Configuration::all(&m, true)).unwrap();
        assert!(v.is_valid(), "{v:?}");
    }

    #[test]
    fn optional_child_without_parent() {
        let m = parse_afm("Stack : [Lock] ;").unwrap();
        let c = Configuration::all(&m, false).set("Lock", true);
        let v = validate_configuration(&m, &c).unwrap();
        let origins: Vec<_> = v.violations.iter().map(|x| x.origin.clone()).collect();
        assert!(origins.contains(&ClauseOrigin::Optional { parent: "Stack".into(), child: "Lock".into() }));
        assert!(origins.contains(&ClauseOrigin::Root { feature: "Stack".into() }));
        let lock = v.violations.iter().find(|x| matches!(x.origin, ClauseOrigin::Optional { .. })).unwrap();
        assert_eq!(lock.clause, "Lock implies Stack");
    }

    #[test]
    fn both_alternatives_selected() {
        let m = parse_afm("App : Lang ; Lang : (CHN | GBR) ;").unwrap();
        let v = validate_configuration(&m, &Configuration::all(&m, true)).unwrap();
        assert_eq!(v.violations.len(), 1);
        assert_eq!(v.violations[0].origin, ClauseOrigin::AlternativeGroup { parent: "Lang".into() });
    }

    #[test]
    fn domain_mismatch() {
        let m = parse_afm("R : A ;").unwrap();
        let c = Configuration::default().set("R", true).set("Z", true);
        match validate_configuration(&m, &c) {
            Err(ModelError::DomainMismatch { missing, unknown }) => {
                assert_eq!(missing, ["A"]);
                assert_eq!(unknown, ["Z"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_counts() {
        let root = FeatureModel::root_only("R").unwrap();
        assert_eq!(enumerate_configurations(&root, 10).unwrap().len(), 1);
        let opt = parse_afm("R : [A] [B] ;").unwrap();
        assert_eq!(enumerate_configurations(&opt, 100).unwrap().len(), 4);
        let or = parse_afm("R : (A | B)+ ;").unwrap();
        assert_eq!(enumerate_configurations(&or, 100).unwrap().len(), 3);
        assert_eq!(count_configurations(&or).unwrap(), 3);
        let alt = parse_afm("R : (A | B | C) ;").unwrap();
        assert_eq!(count_configurations(&alt).unwrap(), 3);
    }

    #[test]
    fn limit_truncates_in_order() {
        let opt = parse_afm("R : [A] [B] [C] ;").unwrap();
        let all = enumerate_configurations(&opt, 100).unwrap();
        let two = enumerate_configurations(&opt, 2).unwrap();
        assert_eq!(two, all[..2]);
        for c in &all {
            assert!(validate_configuration(&opt, c).unwrap().is_valid());
        }
    }

    #[test]
    fn guard_rejects_large_models() {
        let names: Vec<String> = (0..ENUMERATION_LIMIT).map(|i| format!("[F{i}]")).collect();
        let m = parse_afm(&format!("R : {} ;", names.join(" "))).unwrap();
        assert_eq!(m.feature_count(), ENUMERATION_LIMIT + 1);
        assert!(matches!(
            enumerate_configurations(&m, 1),
            Err(ModelError::TooManyFeatures { features: 25, limit: 24 })
        ));
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let m = parse_afm("R : [A] [B] C D ; C : (X | Y)+ ; D : (P | Q | S) ; %% A implies not P ;").unwrap();
        let p = enumerate_configurations_with(&m, 1000, Execution::Parallel).unwrap();
        let s = enumerate_configurations_with(&m, 1000, Execution::Sequential).unwrap();
        assert_eq!(p, s);
        assert_eq!(count_configurations_with(&m, Execution::Sequential).unwrap(), p.len() as u64);
    }
}
