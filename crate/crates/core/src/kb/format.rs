use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    CausalArc, Condition, IntensityMatrix, Interval, KbError, KnowledgeBase, Severity, StateDef,
    StateId, StateLiteral, SubDucgDecl, VarId, VarKind, Variable,
};

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KbDoc {
    version: u32,
    variables: Vec<VariableDoc>,
    #[serde(default)]
    arcs: Vec<ArcDoc>,
    #[serde(default)]
    subducgs: Vec<SubDucgDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDoc {
    id: u32,
    kind: VarKind,
    #[serde(default)]
    label: String,
    states: Vec<StateDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prior: Option<BTreeMap<StateId, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    measure_point: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intervals: Option<BTreeMap<StateId, [f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    id: StateId,
    name: String,
    severity: Severity,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArcDoc {
    child: u32,
    parent: u32,
    weight: f64,
    matrix: BTreeMap<StateId, BTreeMap<StateId, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    condition: Option<ConditionDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LiteralDoc {
    var: u32,
    state: StateId,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AllDoc {
    all: Vec<LiteralDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ConditionDoc {
    All(AllDoc),
    Any { any: Vec<AllDoc> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubDucgDoc {
    root: u32,
    variables: Vec<u32>,
}

fn literals(doc: Vec<LiteralDoc>) -> Vec<StateLiteral> {
    doc.into_iter()
        .map(|l| StateLiteral::new(VarId(l.var), l.state))
        .collect()
}

impl From<ConditionDoc> for Condition {
    fn from(doc: ConditionDoc) -> Self {
        match doc {
            ConditionDoc::All(all) => Condition::all(literals(all.all)),
            ConditionDoc::Any { any } => Condition::any(any.into_iter().map(|c| literals(c.all)).collect()),
        }
    }
}

impl From<&Condition> for ConditionDoc {
    fn from(c: &Condition) -> Self {
        let clause = |lits: &Vec<StateLiteral>| AllDoc {
            all: lits
                .iter()
                .map(|l| LiteralDoc { var: l.var.0, state: l.state })
                .collect(),
        };
        match c.clauses() {
            [single] => ConditionDoc::All(clause(single)),
            many => ConditionDoc::Any { any: many.iter().map(clause).collect() },
        }
    }
}

/// Parses a KB document. Structural problems (syntax, duplicate or dangling ids,
/// missing root) are errors; rule violations are left to [`super::validate_kb`].
pub fn parse_kb(text: &str) -> Result<KnowledgeBase, KbError> {
    let doc: KbDoc = serde_json::from_str(text).map_err(|e| KbError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if doc.version != FORMAT_VERSION {
        return Err(KbError::UnsupportedVersion(doc.version));
    }

    let variables = doc
        .variables
        .into_iter()
        .map(|v| {
            let mut intervals = v.intervals.unwrap_or_default();
            let states = v
                .states
                .into_iter()
                .map(|s| StateDef {
                    id: s.id,
                    name: s.name,
                    severity: s.severity,
                    interval: intervals.remove(&s.id).map(|[lo, hi]| Interval::new(lo, hi)),
                })
                .collect();
            if let Some((&state, _)) = intervals.iter().next() {
                return Err(KbError::Syntax {
                    line: 0,
                    column: 0,
                    message: format!("variable {}: interval given for undeclared state {state}", v.id),
                });
            }
            Ok(Variable {
                id: VarId(v.id),
                kind: v.kind,
                label: v.label,
                states,
                measure_point: v.measure_point,
                prior: v.prior,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let arcs = doc
        .arcs
        .into_iter()
        .map(|a| {
            let mut matrix = IntensityMatrix::new();
            for (k, row) in a.matrix {
                for (j, p) in row {
                    matrix.set(k, j, p);
                }
            }
            CausalArc {
                child: VarId(a.child),
                parent: VarId(a.parent),
                weight: a.weight,
                matrix,
                condition: a.condition.map(Condition::from),
            }
        })
        .collect();

    let subducgs = doc
        .subducgs
        .into_iter()
        .map(|s| SubDucgDecl {
            root: VarId(s.root),
            variables: s.variables.into_iter().map(VarId).collect::<BTreeSet<_>>(),
        })
        .collect();

    KnowledgeBase::new(variables, arcs, subducgs)
}

/// Canonical text form: ids ascending, fixed field order, two-space indent.
pub fn serialize_kb(kb: &KnowledgeBase) -> String {
    let variables = kb
        .variables()
        .map(|v| {
            let mut states: Vec<&StateDef> = v.states.iter().collect();
            states.sort_by_key(|s| s.id);
            let intervals: BTreeMap<StateId, [f64; 2]> = states
                .iter()
                .filter_map(|s| s.interval.map(|i| (s.id, [i.lower, i.upper])))
                .collect();
            VariableDoc {
                id: v.id.0,
                kind: v.kind,
                label: v.label.clone(),
                states: states
                    .iter()
                    .map(|s| StateDoc { id: s.id, name: s.name.clone(), severity: s.severity })
                    .collect(),
                prior: v.prior.clone(),
                measure_point: v.measure_point.clone(),
                intervals: (!intervals.is_empty()).then_some(intervals),
            }
        })
        .collect();
    let arcs = kb
        .arcs()
        .iter()
        .map(|a| ArcDoc {
            child: a.child.0,
            parent: a.parent.0,
            weight: a.weight,
            matrix: a.matrix.rows().clone(),
            condition: a.condition.as_ref().map(ConditionDoc::from),
        })
        .collect();
    let subducgs = kb
        .subducg_decls()
        .iter()
        .map(|d| SubDucgDoc {
            root: d.root.0,
            variables: d.variables.iter().map(|v| v.0).collect(),
        })
        .collect();
    let doc = KbDoc { version: FORMAT_VERSION, variables, arcs, subducgs };
    let mut out = serde_json::to_string_pretty(&doc).expect("KB document serializes");
    out.push('\n');
    out
}
