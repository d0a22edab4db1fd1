//! Plain-text artifacts: MDPs, solutions, and agent policies, plus CSV
//! exports for downstream analysis.
//!
//! Every format is newline-delimited with space-separated tokens and a
//! versioned magic line. Floats print in shortest round-trip form, so
//! write-read-write is byte-identical and a reloaded MDP solves to exactly
//! the same values. Each artifact carries the configuration hash of the
//! run that produced it (`-` when written without one).

use crate::error::Error;
use crate::mdp::{BuildMeta, FiniteMeasureMDP, MdpAction, MdpKind, WeightScheme};
use crate::measures::{AgentRule, EmpiricalMeasure, JointEmpiricalMeasure};
use crate::simulate::{CostEstimate, StepRecord};
use crate::solver::{AgentPolicy, SolveResult};
use crate::Result;
use std::fmt::Write as _;

const MDP_MAGIC: &str = "mfcontrol-mdp v1";
const SOLUTION_MAGIC: &str = "mfcontrol-solution v1";
const POLICY_MAGIC: &str = "mfcontrol-policy v1";

fn hash_token(config_hash: Option<u64>) -> String {
    match config_hash {
        Some(h) => format!("{h:016x}"),
        None => "-".to_string(),
    }
}

fn floats(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Serializes a built MDP: header with dimensions, seed, and scheme, then
/// representatives, atoms, states, and per-action cost and sparse kernel
/// entries.
pub fn write_mdp(mdp: &FiniteMeasureMDP, config_hash: Option<u64>) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "{MDP_MAGIC}");
    let _ = writeln!(w, "config {}", hash_token(config_hash));
    match mdp.kind() {
        MdpKind::FinitePopulation { agents } => {
            let _ = writeln!(w, "kind finite-population {agents}");
        }
        MdpKind::Aggregation { n } => {
            let _ = writeln!(w, "kind aggregation {n}");
        }
        MdpKind::Sampling { n } => {
            let _ = writeln!(w, "kind sampling {n}");
        }
    }
    let meta = mdp.meta();
    let _ = writeln!(w, "beta {:?}", mdp.beta());
    let _ = writeln!(w, "seed {}", meta.seed);
    match meta.scheme {
        WeightScheme::Dirac => {
            let _ = writeln!(w, "scheme dirac");
        }
        WeightScheme::SampledUniform { samples } => {
            let _ = writeln!(w, "scheme sampled-uniform {samples}");
        }
    }
    let _ = writeln!(w, "exact {}", meta.exact_kernel);
    let _ = writeln!(w, "kernel-samples {}", meta.kernel_samples);
    let _ = writeln!(w, "max-row-defect {:?}", meta.max_row_defect);
    let _ = writeln!(w, "l-x {:?}", meta.l_x);
    let _ = writeln!(w, "l-u {:?}", meta.l_u);
    let _ = writeln!(w, "cells {}", mdp.state_reps().len());
    let _ = writeln!(w, "state-dim {}", mdp.state_reps()[0].len());
    let _ = writeln!(w, "action-atoms {}", mdp.action_atoms().len());
    let _ = writeln!(w, "action-dim {}", mdp.action_atoms()[0].len());
    for rep in mdp.state_reps() {
        let _ = writeln!(w, "rep {}", floats(rep));
    }
    for atom in mdp.action_atoms() {
        let _ = writeln!(w, "atom {}", floats(atom));
    }
    let _ = writeln!(w, "states {}", mdp.num_states());
    for (s, state) in mdp.states().iter().enumerate() {
        let counts = state
            .counts()
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(w, "state {s} {counts}");
    }
    for s in 0..mdp.num_states() {
        let _ = writeln!(w, "actions {s} {}", mdp.num_actions(s));
        for a in 0..mdp.num_actions(s) {
            match mdp.action(s, a) {
                MdpAction::Joint(j) => {
                    let flat = j
                        .counts()
                        .iter()
                        .flatten()
                        .map(u32::to_string)
                        .collect::<Vec<_>>()
                        .join(" ");
                    let _ = writeln!(w, "joint {s} {a} {flat}");
                }
                MdpAction::Rule(r) => {
                    let flat: Vec<f64> = r.probs().iter().flatten().copied().collect();
                    let _ = writeln!(w, "rule {s} {a} {}", floats(&flat));
                }
            }
            let _ = writeln!(w, "cost {s} {a} {:?}", mdp.cost(s, a));
            let mut row = format!("row {s} {a} {}", mdp.kernel_row(s, a).len());
            for &(j, p) in mdp.kernel_row(s, a) {
                let _ = write!(row, " {j} {p:?}");
            }
            let _ = writeln!(w, "{row}");
        }
    }
    let _ = writeln!(w, "end");
    out
}

/// Reads back an MDP written by [`write_mdp`], returning it with the
/// recorded configuration hash.
pub fn read_mdp(text: &str) -> Result<(FiniteMeasureMDP, Option<u64>)> {
    let mut cur = Cursor::new(text);
    cur.magic(MDP_MAGIC)?;
    let config = cur.config()?;
    let kind_toks = cur.expect("kind")?;
    let kind = match (kind_toks.first().copied(), kind_toks.get(1).copied()) {
        (Some("finite-population"), Some(n)) => MdpKind::FinitePopulation {
            agents: cur.parse(n)?,
        },
        (Some("aggregation"), Some(n)) => MdpKind::Aggregation { n: cur.parse(n)? },
        (Some("sampling"), Some(n)) => MdpKind::Sampling { n: cur.parse(n)? },
        _ => return Err(cur.error("unknown kind")),
    };
    let beta: f64 = cur.single("beta")?;
    let seed: u64 = cur.single("seed")?;
    let scheme_toks = cur.expect("scheme")?;
    let scheme = match (scheme_toks.first().copied(), scheme_toks.get(1).copied()) {
        (Some("dirac"), None) => WeightScheme::Dirac,
        (Some("sampled-uniform"), Some(k)) => WeightScheme::SampledUniform {
            samples: cur.parse(k)?,
        },
        _ => return Err(cur.error("unknown scheme")),
    };
    let exact: bool = cur.single("exact")?;
    let kernel_samples: usize = cur.single("kernel-samples")?;
    let max_row_defect: f64 = cur.single("max-row-defect")?;
    let l_x: f64 = cur.single("l-x")?;
    let l_u: f64 = cur.single("l-u")?;
    let cells: usize = cur.single("cells")?;
    let state_dim: usize = cur.single("state-dim")?;
    let num_atoms: usize = cur.single("action-atoms")?;
    let action_dim: usize = cur.single("action-dim")?;
    let mut state_reps = Vec::with_capacity(cells);
    for _ in 0..cells {
        let rep = cur.float_list("rep", state_dim)?;
        state_reps.push(rep);
    }
    let mut action_atoms = Vec::with_capacity(num_atoms);
    for _ in 0..num_atoms {
        action_atoms.push(cur.float_list("atom", action_dim)?);
    }
    let num_states: usize = cur.single("states")?;
    let mut states = Vec::with_capacity(num_states);
    for s in 0..num_states {
        let toks = cur.expect("state")?;
        cur.check_index(&toks, 0, s)?;
        if toks.len() != cells + 1 {
            return Err(cur.error(format!("state needs {cells} counts")));
        }
        let counts: Vec<u32> = toks[1..]
            .iter()
            .map(|&t| cur.parse(t))
            .collect::<Result<_>>()?;
        states.push(EmpiricalMeasure::new(counts).map_err(|e| cur.error(e.to_string()))?);
    }
    let mut actions = Vec::with_capacity(num_states);
    let mut cost = Vec::with_capacity(num_states);
    let mut kernel = Vec::with_capacity(num_states);
    for s in 0..num_states {
        let toks = cur.expect("actions")?;
        cur.check_index(&toks, 0, s)?;
        let k: usize = cur.parse(toks.get(1).copied().unwrap_or(""))?;
        let mut s_actions = Vec::with_capacity(k);
        let mut s_cost = Vec::with_capacity(k);
        let mut s_kernel = Vec::with_capacity(k);
        for a in 0..k {
            let toks = cur.next()?;
            let action = match toks.first().copied() {
                Some("joint") => {
                    cur.check_index(&toks, 1, s)?;
                    cur.check_index(&toks, 2, a)?;
                    if toks.len() != 3 + cells * num_atoms {
                        return Err(cur.error("joint entry has wrong arity"));
                    }
                    let flat: Vec<u32> = toks[3..]
                        .iter()
                        .map(|&t| cur.parse(t))
                        .collect::<Result<_>>()?;
                    let rows = flat.chunks(num_atoms).map(<[u32]>::to_vec).collect();
                    MdpAction::Joint(
                        JointEmpiricalMeasure::new(rows)
                            .map_err(|e| cur.error(e.to_string()))?,
                    )
                }
                Some("rule") => {
                    cur.check_index(&toks, 1, s)?;
                    cur.check_index(&toks, 2, a)?;
                    if toks.len() != 3 + cells * num_atoms {
                        return Err(cur.error("rule entry has wrong arity"));
                    }
                    let flat: Vec<f64> = toks[3..]
                        .iter()
                        .map(|&t| cur.parse(t))
                        .collect::<Result<_>>()?;
                    let rows = flat.chunks(num_atoms).map(<[f64]>::to_vec).collect();
                    MdpAction::Rule(
                        AgentRule::new(rows).map_err(|e| cur.error(e.to_string()))?,
                    )
                }
                _ => return Err(cur.error("expected joint or rule")),
            };
            s_actions.push(action);
            let toks = cur.expect("cost")?;
            cur.check_index(&toks, 0, s)?;
            cur.check_index(&toks, 1, a)?;
            s_cost.push(cur.parse(toks.get(2).copied().unwrap_or(""))?);
            let toks = cur.expect("row")?;
            cur.check_index(&toks, 0, s)?;
            cur.check_index(&toks, 1, a)?;
            let nnz: usize = cur.parse(toks.get(2).copied().unwrap_or(""))?;
            if toks.len() != 3 + 2 * nnz {
                return Err(cur.error("kernel row has wrong arity"));
            }
            let mut row = Vec::with_capacity(nnz);
            for pair in toks[3..].chunks(2) {
                row.push((cur.parse(pair[0])?, cur.parse(pair[1])?));
            }
            s_kernel.push(row);
        }
        actions.push(s_actions);
        cost.push(s_cost);
        kernel.push(s_kernel);
    }
    cur.expect("end")?;
    let meta = BuildMeta {
        seed,
        scheme,
        exact_kernel: exact,
        kernel_samples,
        max_row_defect,
        l_x,
        l_u,
    };
    let mdp = FiniteMeasureMDP::from_parts(
        kind,
        beta,
        states,
        actions,
        cost,
        kernel,
        state_reps,
        action_atoms,
        meta,
    )?;
    Ok((mdp, config))
}

/// Serializes a solve: values, chosen actions, and the sweep gaps.
pub fn write_solution(sol: &SolveResult, config_hash: Option<u64>) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "{SOLUTION_MAGIC}");
    let _ = writeln!(w, "config {}", hash_token(config_hash));
    let _ = writeln!(w, "iterations {}", sol.iterations);
    let _ = writeln!(w, "converged {}", sol.converged);
    let _ = writeln!(w, "states {}", sol.values.len());
    for (s, (v, a)) in sol.values.iter().zip(&sol.policy).enumerate() {
        let _ = writeln!(w, "entry {s} {v:?} {a}");
    }
    let _ = writeln!(w, "gaps {}", sol.gap_history.len());
    for (i, g) in sol.gap_history.iter().enumerate() {
        let _ = writeln!(w, "gap {i} {g:?}");
    }
    let _ = writeln!(w, "end");
    out
}

/// Reads back a solution written by [`write_solution`].
pub fn read_solution(text: &str) -> Result<(SolveResult, Option<u64>)> {
    let mut cur = Cursor::new(text);
    cur.magic(SOLUTION_MAGIC)?;
    let config = cur.config()?;
    let iterations: usize = cur.single("iterations")?;
    let converged: bool = cur.single("converged")?;
    let num: usize = cur.single("states")?;
    let mut values = Vec::with_capacity(num);
    let mut policy = Vec::with_capacity(num);
    for s in 0..num {
        let toks = cur.expect("entry")?;
        cur.check_index(&toks, 0, s)?;
        if toks.len() != 3 {
            return Err(cur.error("entry needs value and action"));
        }
        values.push(cur.parse(toks[1])?);
        policy.push(cur.parse(toks[2])?);
    }
    let gaps: usize = cur.single("gaps")?;
    let mut gap_history = Vec::with_capacity(gaps);
    for i in 0..gaps {
        let toks = cur.expect("gap")?;
        cur.check_index(&toks, 0, i)?;
        gap_history.push(cur.parse(toks.get(1).copied().unwrap_or(""))?);
    }
    cur.expect("end")?;
    Ok((
        SolveResult {
            values,
            policy,
            iterations,
            converged,
            gap_history,
        },
        config,
    ))
}

/// Serializes an agent policy: atoms, per-state rules, and the fallback.
pub fn write_policy(policy: &AgentPolicy, config_hash: Option<u64>) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "{POLICY_MAGIC}");
    let _ = writeln!(w, "config {}", hash_token(config_hash));
    let _ = writeln!(w, "cells {}", policy.num_cells());
    let _ = writeln!(w, "action-atoms {}", policy.atoms().len());
    let _ = writeln!(w, "action-dim {}", policy.atoms()[0].len());
    for atom in policy.atoms() {
        let _ = writeln!(w, "atom {}", floats(atom));
    }
    let _ = writeln!(w, "states {}", policy.states().len());
    for (s, state) in policy.states().iter().enumerate() {
        let counts = state
            .counts()
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(w, "state {s} {counts}");
        let flat: Vec<f64> = policy.rule(s).probs().iter().flatten().copied().collect();
        let _ = writeln!(w, "rule {s} {}", floats(&flat));
    }
    match policy.fallback() {
        Some(rule) => {
            let flat: Vec<f64> = rule.probs().iter().flatten().copied().collect();
            let _ = writeln!(w, "fallback {}", floats(&flat));
        }
        None => {
            let _ = writeln!(w, "fallback none");
        }
    }
    let _ = writeln!(w, "end");
    out
}

/// Reads back a policy written by [`write_policy`].
pub fn read_policy(text: &str) -> Result<(AgentPolicy, Option<u64>)> {
    let mut cur = Cursor::new(text);
    cur.magic(POLICY_MAGIC)?;
    let config = cur.config()?;
    let cells: usize = cur.single("cells")?;
    let num_atoms: usize = cur.single("action-atoms")?;
    let action_dim: usize = cur.single("action-dim")?;
    let mut atoms = Vec::with_capacity(num_atoms);
    for _ in 0..num_atoms {
        atoms.push(cur.float_list("atom", action_dim)?);
    }
    let num_states: usize = cur.single("states")?;
    let mut states = Vec::with_capacity(num_states);
    let mut rules = Vec::with_capacity(num_states);
    for s in 0..num_states {
        let toks = cur.expect("state")?;
        cur.check_index(&toks, 0, s)?;
        if toks.len() != cells + 1 {
            return Err(cur.error(format!("state needs {cells} counts")));
        }
        let counts: Vec<u32> = toks[1..]
            .iter()
            .map(|&t| cur.parse(t))
            .collect::<Result<_>>()?;
        states.push(EmpiricalMeasure::new(counts).map_err(|e| cur.error(e.to_string()))?);
        let toks = cur.expect("rule")?;
        cur.check_index(&toks, 0, s)?;
        if toks.len() != 1 + cells * num_atoms {
            return Err(cur.error("rule entry has wrong arity"));
        }
        let flat: Vec<f64> = toks[1..]
            .iter()
            .map(|&t| cur.parse(t))
            .collect::<Result<_>>()?;
        let rows = flat.chunks(num_atoms).map(<[f64]>::to_vec).collect();
        rules.push(AgentRule::new(rows).map_err(|e| cur.error(e.to_string()))?);
    }
    let toks = cur.expect("fallback")?;
    let fallback = match toks.first().copied() {
        Some("none") if toks.len() == 1 => None,
        _ => {
            if toks.len() != cells * num_atoms {
                return Err(cur.error("fallback entry has wrong arity"));
            }
            let flat: Vec<f64> = toks
                .iter()
                .map(|&t| cur.parse(t))
                .collect::<Result<_>>()?;
            let rows = flat.chunks(num_atoms).map(<[f64]>::to_vec).collect();
            Some(AgentRule::new(rows).map_err(|e| cur.error(e.to_string()))?)
        }
    };
    cur.expect("end")?;
    let policy = AgentPolicy::from_parts(states, rules, fallback, cells, atoms)?;
    Ok((policy, config))
}

/// CSV of a solved MDP: state counts, value, and chosen action per row.
pub fn solution_csv(mdp: &FiniteMeasureMDP, sol: &SolveResult) -> String {
    let cells = mdp.state_reps().len();
    let mut out = String::from("state");
    for c in 0..cells {
        let _ = write!(out, ",c{c}");
    }
    out.push_str(",value,action\n");
    for (s, (v, a)) in sol.values.iter().zip(&sol.policy).enumerate() {
        let _ = write!(out, "{s}");
        for &c in mdp.state(s).counts() {
            let _ = write!(out, ",{c}");
        }
        let _ = writeln!(out, ",{v:?},{a}");
    }
    out
}

/// CSV of recorded rollout steps.
pub fn trajectory_csv(records: &[StepRecord]) -> String {
    let (sd, ad) = records
        .first()
        .map(|r| (r.state.len(), r.action.len()))
        .unwrap_or((0, 0));
    let mut out = String::from("t,rollout,agent");
    for d in 0..sd {
        let _ = write!(out, ",x{d}");
    }
    for d in 0..ad {
        let _ = write!(out, ",u{d}");
    }
    out.push_str(",cost\n");
    for r in records {
        let _ = write!(out, "{},{},{}", r.t, r.rollout, r.agent);
        for x in &r.state {
            let _ = write!(out, ",{x:?}");
        }
        for u in &r.action {
            let _ = write!(out, ",{u:?}");
        }
        let _ = writeln!(out, ",{:?}", r.cost);
    }
    out
}

/// One-row CSV summary of a cost estimate.
pub fn estimate_csv(est: &CostEstimate) -> String {
    format!(
        "mean,stderr,truncation_bound\n{:?},{:?},{:?}\n",
        est.mean, est.stderr, est.truncation_bound
    )
}

/// Sequential token-line reader with line-numbered errors.
struct Cursor<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor {
            lines: text.lines(),
            line_no: 0,
        }
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.line_no, msg)
    }

    fn next(&mut self) -> Result<Vec<&'a str>> {
        for line in self.lines.by_ref() {
            self.line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Ok(trimmed.split_whitespace().collect());
        }
        self.line_no += 1;
        Err(self.error("unexpected end of file"))
    }

    /// Next line must start with `tag`; returns the remaining tokens.
    fn expect(&mut self, tag: &str) -> Result<Vec<&'a str>> {
        let mut toks = self.next()?;
        if toks.first().copied() != Some(tag) {
            return Err(self.error(format!(
                "expected `{tag}`, found `{}`",
                toks.first().copied().unwrap_or("")
            )));
        }
        toks.remove(0);
        Ok(toks)
    }

    fn magic(&mut self, magic: &str) -> Result<()> {
        let toks = self.next()?;
        if toks.join(" ") != magic {
            return Err(self.error(format!("expected header `{magic}`")));
        }
        Ok(())
    }

    fn config(&mut self) -> Result<Option<u64>> {
        let toks = self.expect("config")?;
        match toks.first().copied() {
            Some("-") => Ok(None),
            Some(hex) => u64::from_str_radix(hex, 16)
                .map(Some)
                .map_err(|_| self.error("config hash must be hex")),
            None => Err(self.error("config line needs a value")),
        }
    }

    fn parse<T: std::str::FromStr>(&self, tok: &str) -> Result<T> {
        tok.parse()
            .map_err(|_| self.error(format!("cannot parse `{tok}`")))
    }

    /// Line `tag <value>` with exactly one value.
    fn single<T: std::str::FromStr>(&mut self, tag: &str) -> Result<T> {
        let toks = self.expect(tag)?;
        if toks.len() != 1 {
            return Err(self.error(format!("`{tag}` takes exactly one value")));
        }
        self.parse(toks[0])
    }

    /// Line `tag <f64 x len>`.
    fn float_list(&mut self, tag: &str, len: usize) -> Result<Vec<f64>> {
        let toks = self.expect(tag)?;
        if toks.len() != len {
            return Err(self.error(format!("`{tag}` needs {len} coordinates")));
        }
        toks.iter().map(|&t| self.parse(t)).collect()
    }

    /// Asserts the token at `idx` equals the running index `want`.
    fn check_index(&self, toks: &[&str], idx: usize, want: usize) -> Result<()> {
        let got: usize = self.parse(toks.get(idx).copied().unwrap_or(""))?;
        if got != want {
            return Err(self.error(format!("index {got} out of order, expected {want}")));
        }
        Ok(())
    }
}
