//! JSON problem files and CSV value, policy and trace files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::{format_exact, format_f64_exact, ExtCost};
use crate::grid::{build_linear_problem, Axes, CostSpec, GridSpec, LinearSystemSpec};
use crate::model::{Action, Outcome, Policy, Problem, Successor, ValueFunction};
use crate::vi::{SolveTrace, TraceRow};

/// A cost in a problem file: a number or the string `"inf"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostToken {
    Number(f64),
    Text(String),
}

impl CostToken {
    fn parse(&self) -> Result<ExtCost> {
        match self {
            CostToken::Number(v) => ExtCost::new(*v),
            CostToken::Text(s) => s.parse(),
        }
    }

    fn from_cost(c: ExtCost) -> Self {
        match c {
            ExtCost::Finite(v) => CostToken::Number(v),
            ExtCost::Infinite => CostToken::Text("inf".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeDoc {
    pub next: String,
    pub cost: CostToken,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostToken>,
    /// One entry per disturbance, in declaration order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<OutcomeDoc>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDoc {
    pub bounds: Vec<(f64, f64)>,
    pub points: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemFile {
    Finite {
        states: Vec<String>,
        terminal: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        disturbances: Option<Vec<String>>,
        /// Terminal states may be omitted; they get a free self-loop.
        #[serde(default)]
        actions: BTreeMap<String, Vec<ActionDoc>>,
    },
    LinearGrid {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
        cost: CostSpec,
        grid: BoxDoc,
        controls: BoxDoc,
    },
}

fn index(ids: &BTreeMap<&str, usize>, id: &str, ctx: &str) -> Result<usize> {
    ids.get(id)
        .copied()
        .ok_or_else(|| Error::Parse(format!("{ctx}: unknown state `{id}`")))
}

impl ProblemFile {
    /// Builds and validates the problem.
    pub fn to_problem(&self) -> Result<Problem> {
        match self {
            ProblemFile::LinearGrid {
                a,
                b,
                cost,
                grid,
                controls,
            } => build_linear_problem(
                &LinearSystemSpec {
                    a: a.clone(),
                    b: b.clone(),
                    cost: *cost,
                },
                &GridSpec {
                    state: Axes {
                        bounds: grid.bounds.clone(),
                        points: grid.points.clone(),
                    },
                    controls: Axes {
                        bounds: controls.bounds.clone(),
                        points: controls.points.clone(),
                    },
                },
            ),
            ProblemFile::Finite {
                states,
                terminal,
                disturbances,
                actions,
            } => {
                let mut ids = BTreeMap::new();
                for (i, s) in states.iter().enumerate() {
                    if ids.insert(s.as_str(), i).is_some() {
                        return Err(Error::Parse(format!("states: duplicate id `{s}`")));
                    }
                }
                let mut term = vec![false; states.len()];
                for t in terminal {
                    term[index(&ids, t, "terminal")?] = true;
                }
                let arity = disturbances.as_ref().map_or(1, Vec::len);
                let mut acts: Vec<Vec<Action>> = vec![Vec::new(); states.len()];
                let mut bad = Vec::new();
                for (sid, list) in actions {
                    let x = index(&ids, sid, "actions")?;
                    for (k, doc) in list.iter().enumerate() {
                        let ctx = format!("actions.{sid}[{k}] (`{}`)", doc.id);
                        let pairs: Vec<(&String, &CostToken)> = match (&doc.next, &doc.cost, &doc.outcomes) {
                            (Some(n), Some(c), None) => vec![(n, c)],
                            (None, None, Some(outs)) => outs.iter().map(|o| (&o.next, &o.cost)).collect(),
                            _ => {
                                return Err(Error::Parse(format!(
                                    "{ctx}: give either `next` and `cost` or `outcomes`"
                                )))
                            }
                        };
                        if doc.outcomes.is_none() && arity > 1 {
                            return Err(Error::Parse(format!(
                                "{ctx}: problem has {arity} disturbances, expected `outcomes`"
                            )));
                        }
                        let mut outcomes = Vec::with_capacity(pairs.len());
                        for (n, c) in pairs {
                            let cost = match c.parse() {
                                Ok(v) => v,
                                Err(_) => {
                                    bad.push(format!("{ctx}: cost {c:?} is not a nonnegative number or \"inf\""));
                                    ExtCost::ZERO
                                }
                            };
                            outcomes.push(Outcome::to(index(&ids, n, &ctx)?, cost));
                        }
                        acts[x].push(Action {
                            label: doc.id.clone(),
                            outcomes,
                        });
                    }
                }
                if !bad.is_empty() {
                    return Err(Error::Parse(bad.join("\n")));
                }
                for x in 0..states.len() {
                    if term[x] && acts[x].is_empty() {
                        acts[x].push(Action {
                            label: "stay".into(),
                            outcomes: vec![Outcome::to(x, ExtCost::ZERO); arity],
                        });
                    }
                }
                Problem::from_parts(states.clone(), term, acts, disturbances.clone()).validated()
            }
        }
    }

    /// Document describing `p`. Grid problems are written by their
    /// specification, graph problems arc by arc.
    pub fn from_problem(p: &Problem) -> Result<Self> {
        if let Some(g) = p.grid() {
            return Ok(ProblemFile::LinearGrid {
                a: g.system.a.clone(),
                b: g.system.b.clone(),
                cost: g.system.cost,
                grid: BoxDoc {
                    bounds: g.spec.state.bounds.clone(),
                    points: g.spec.state.points.clone(),
                },
                controls: BoxDoc {
                    bounds: g.spec.controls.bounds.clone(),
                    points: g.spec.controls.points.clone(),
                },
            });
        }
        let mut actions = BTreeMap::new();
        for x in 0..p.num_states() {
            let mut list = Vec::new();
            for a in p.actions(x) {
                let mut outs = Vec::new();
                for o in &a.outcomes {
                    let Successor::State(y) = o.next else {
                        return Err(Error::NotDeterministic("interpolated successor in a graph problem".into()));
                    };
                    outs.push(OutcomeDoc {
                        next: p.state_id(y).to_string(),
                        cost: CostToken::from_cost(o.cost),
                    });
                }
                list.push(if p.is_minimax() {
                    ActionDoc {
                        id: a.label.clone(),
                        next: None,
                        cost: None,
                        outcomes: Some(outs),
                    }
                } else {
                    let o = outs.pop().expect("one outcome");
                    ActionDoc {
                        id: a.label.clone(),
                        next: Some(o.next),
                        cost: Some(o.cost),
                        outcomes: None,
                    }
                });
            }
            actions.insert(p.state_id(x).to_string(), list);
        }
        Ok(ProblemFile::Finite {
            states: p.state_ids().to_vec(),
            terminal: p.terminal_states().map(|x| p.state_id(x).to_string()).collect(),
            disturbances: p.disturbances().map(<[String]>::to_vec),
            actions,
        })
    }
}

pub fn parse_problem_str(text: &str) -> Result<Problem> {
    let doc: ProblemFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.to_problem()
}

pub fn parse_problem_file(path: impl AsRef<Path>) -> Result<Problem> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_problem_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn problem_to_json(p: &Problem) -> Result<String> {
    serde_json::to_string_pretty(&ProblemFile::from_problem(p)?).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_problem_file(p: &Problem, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, problem_to_json(p)? + "\n")?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected header {}, found {}",
            expected.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

pub fn write_value_csv<W: Write>(p: &Problem, j: &ValueFunction, out: W) -> Result<()> {
    j.check_domain(p)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", "value"]).map_err(csv_err)?;
    for x in 0..p.num_states() {
        w.write_record([p.state_id(x), &format_exact(j.get(x))]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `state,value` rows; every state must appear exactly once.
pub fn read_value_csv<R: Read>(p: &Problem, input: R) -> Result<ValueFunction> {
    let mut r = csv::Reader::from_reader(input);
    check_header(r.headers().map_err(csv_err)?, &["state", "value"])?;
    let mut vals: Vec<Option<ExtCost>> = vec![None; p.num_states()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let id = &rec[0];
        let x = p
            .index_of(id)
            .ok_or_else(|| Error::Parse(format!("row {}: unknown state `{id}`", line + 2)))?;
        let v: ExtCost = rec[1]
            .parse()
            .map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))?;
        if vals[x].replace(v).is_some() {
            return Err(Error::Parse(format!("row {}: state `{id}` repeated", line + 2)));
        }
    }
    vals.into_iter()
        .enumerate()
        .map(|(x, v)| v.ok_or_else(|| Error::Parse(format!("state `{}` missing", p.state_id(x)))))
        .collect::<Result<Vec<_>>>()
        .map(ValueFunction::new)
}

pub fn write_policy_csv<W: Write>(p: &Problem, mu: &Policy, out: W) -> Result<()> {
    mu.check_admissible(p)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", "control"]).map_err(csv_err)?;
    for x in 0..p.num_states() {
        w.write_record([p.state_id(x), mu.label(p, x)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `state,control` rows, matching controls by label.
pub fn read_policy_csv<R: Read>(p: &Problem, input: R) -> Result<Policy> {
    let mut r = csv::Reader::from_reader(input);
    check_header(r.headers().map_err(csv_err)?, &["state", "control"])?;
    let mut choice: Vec<Option<usize>> = vec![None; p.num_states()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let (id, label) = (&rec[0], &rec[1]);
        let x = p
            .index_of(id)
            .ok_or_else(|| Error::Parse(format!("row {}: unknown state `{id}`", line + 2)))?;
        let a = p.actions(x).iter().position(|a| a.label == label).ok_or_else(|| {
            Error::Parse(format!("row {}: state `{id}` has no control `{label}`", line + 2))
        })?;
        choice[x] = Some(a);
    }
    choice
        .into_iter()
        .enumerate()
        .map(|(x, a)| a.ok_or_else(|| Error::Parse(format!("state `{}` missing", p.state_id(x)))))
        .collect::<Result<Vec<_>>>()
        .map(Policy::new)
}

/// Writes the trace. Snapshot columns appear when every row has one.
pub fn write_trace_csv<W: Write>(trace: &SolveTrace, out: W) -> Result<()> {
    let with_states = !trace.rows.is_empty() && trace.rows.iter().all(|r| r.snapshot.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["iter", "sup_change", "residual", "num_infinite"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if with_states || trace.rows.is_empty() {
        header.extend(trace.state_ids.iter().map(|s| format!("state_{s}")));
    }
    w.write_record(&header).map_err(csv_err)?;
    for row in &trace.rows {
        let mut rec = vec![
            row.iter.to_string(),
            format_f64_exact(row.sup_change),
            format_f64_exact(row.residual),
            row.num_infinite.to_string(),
        ];
        if with_states {
            rec.extend(row.snapshot.as_ref().unwrap().values().iter().map(|v| format_exact(*v)));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_trace_csv(trace: &SolveTrace, path: impl AsRef<Path>) -> Result<()> {
    let f = fs::File::create(path)?;
    write_trace_csv(trace, std::io::BufWriter::new(f))
}

fn parse_f64(s: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| Error::Parse(format!("not a number: {s:?}"))),
    }
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<SolveTrace> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let fixed = ["iter", "sup_change", "residual", "num_infinite"];
    if header.len() < 4 || header.iter().take(4).ne(fixed.iter().copied()) {
        return Err(Error::Parse("trace header must start with iter,sup_change,residual,num_infinite".into()));
    }
    let state_ids = header
        .iter()
        .skip(4)
        .map(|h| {
            h.strip_prefix("state_")
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("bad trace column {h:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let snapshot = if rec.len() > 4 {
            Some(ValueFunction::new(
                rec.iter().skip(4).map(str::parse).collect::<Result<Vec<ExtCost>>>()?,
            ))
        } else {
            None
        };
        rows.push(TraceRow {
            iter: rec[0].parse().map_err(|_| Error::Parse(format!("bad iteration {:?}", &rec[0])))?,
            sup_change: parse_f64(&rec[1])?,
            residual: parse_f64(&rec[2])?,
            num_infinite: rec[3].parse().map_err(|_| Error::Parse(format!("bad count {:?}", &rec[3])))?,
            snapshot,
        });
    }
    Ok(SolveTrace { state_ids, rows })
}
