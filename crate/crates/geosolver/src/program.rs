//! The geometry program DSL: vocabulary, step segmentation and execution.
//!
//! A program is a flat token sequence over the program vocabulary
//! `V_P = V_O ∪ V_C ∪ N_P ∪ N_V` plus control tokens. Steps are separated by
//! `SEP`; each step is one operator followed by exactly `arity` arguments, and
//! executing step `k` binds the intermediate variable `V_k`. Arguments may
//! reference constants, problem numbers `N_i` (bound via number mapping from
//! the problem text) and variables bound by *earlier* steps only. The final
//! value of a program is the variable bound by its last step.
//!
//! The executor is pure: identical `(program, numbers)` inputs produce
//! identical results, and every failure path is a typed [`ExecError`] — no
//! silent NaN ever escapes.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index into the vocabulary's flat token table.
pub type TokenId = usize;

/// What a token is, independent of its id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Pad,
    Bos,
    Eos,
    Sep,
    /// Operator, by index into the operator table.
    Op(usize),
    /// Named constant, by index into the constant table.
    Const(usize),
    /// Problem number slot `N_i`.
    Number(usize),
    /// Intermediate variable `V_j` bound by step `j`.
    Var(usize),
}

/// A program argument: anything a step may consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arg {
    Const(usize),
    Number(usize),
    Var(usize),
}

/// One reasoning step: an operator applied to `arity` arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub op: usize,
    pub args: Vec<Arg>,
}

/// A validated, step-segmented program. `tokens` always ends with `EOS`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub tokens: Vec<TokenId>,
    pub steps: Vec<Step>,
}

impl Program {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Token positions grouped per step, each group including its trailing
    /// `SEP` (or `EOS` for the last step). This is the unit the step-wise
    /// decoder emits between goal recomputations.
    pub fn step_token_groups(&self, vocab: &ProgramVocabulary) -> Vec<Vec<TokenId>> {
        let mut groups = Vec::new();
        let mut current = Vec::new();
        for &t in &self.tokens {
            current.push(t);
            if t == vocab.sep_id() || t == vocab.eos_id() {
                groups.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            groups.push(current);
        }
        groups
    }
}

/// A mathematical operation with a domain guard rejecting invalid inputs.
#[derive(Clone)]
pub struct OperatorDef {
    pub name: String,
    pub arity: usize,
    eval: fn(&[f64]) -> f64,
    guard: fn(&[f64]) -> bool,
}

impl std::fmt::Debug for OperatorDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorDef")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .finish()
    }
}

impl OperatorDef {
    pub fn apply(&self, args: &[f64]) -> Option<f64> {
        if args.len() != self.arity || !(self.guard)(args) {
            return None;
        }
        let v = (self.eval)(args);
        v.is_finite().then_some(v)
    }
}

fn deg2rad(d: f64) -> f64 {
    d * PI / 180.0
}

/// Built-in operator registry. Vocabulary files refer to operators by name;
/// the numeric semantics always come from here.
fn builtin_operators() -> Vec<OperatorDef> {
    fn always(_: &[f64]) -> bool {
        true
    }
    vec![
        OperatorDef { name: "Minus".into(), arity: 2, eval: |a| a[0] - a[1], guard: always },
        OperatorDef { name: "Half".into(), arity: 1, eval: |a| a[0] / 2.0, guard: always },
        OperatorDef { name: "Add".into(), arity: 2, eval: |a| a[0] + a[1], guard: always },
        OperatorDef { name: "Mul".into(), arity: 2, eval: |a| a[0] * a[1], guard: always },
        OperatorDef {
            name: "Div".into(),
            arity: 2,
            eval: |a| a[0] / a[1],
            guard: |a| a[1].abs() > 1e-12,
        },
        OperatorDef { name: "Double".into(), arity: 1, eval: |a| 2.0 * a[0], guard: always },
        OperatorDef { name: "Square".into(), arity: 1, eval: |a| a[0] * a[0], guard: always },
        OperatorDef {
            name: "Sqrt".into(),
            arity: 1,
            eval: |a| a[0].sqrt(),
            guard: |a| a[0] >= 0.0,
        },
        OperatorDef { name: "SinDeg".into(), arity: 1, eval: |a| deg2rad(a[0]).sin(), guard: always },
        OperatorDef { name: "CosDeg".into(), arity: 1, eval: |a| deg2rad(a[0]).cos(), guard: always },
        OperatorDef {
            name: "TanDeg".into(),
            arity: 1,
            eval: |a| deg2rad(a[0]).tan(),
            guard: |a| deg2rad(a[0]).cos().abs() > 1e-9,
        },
        OperatorDef {
            name: "PythHyp".into(),
            arity: 2,
            eval: |a| (a[0] * a[0] + a[1] * a[1]).sqrt(),
            guard: always,
        },
        OperatorDef {
            name: "PythLeg".into(),
            arity: 2,
            eval: |a| (a[0] * a[0] - a[1] * a[1]).sqrt(),
            guard: |a| a[0] * a[0] - a[1] * a[1] >= 0.0,
        },
    ]
}

fn default_constants() -> Vec<(String, f64)> {
    vec![
        ("C_0".into(), 30.0),
        ("C_1".into(), 60.0),
        ("C_2".into(), 90.0),
        ("C_3".into(), 180.0),
        ("C_4".into(), 360.0),
        ("C_5".into(), PI),
    ]
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VocabError {
    #[error("operator `{0}` is not in the built-in registry")]
    UnknownOperator(String),
    #[error("operator `{name}` declared with arity {declared}, registry has {actual}")]
    ArityMismatch { name: String, declared: usize, actual: usize },
    #[error("duplicate token name `{0}`")]
    DuplicateName(String),
    #[error("constant table has no `C_3` entry with value 180")]
    MissingDegreeConstant,
    #[error("vocabulary file: {0}")]
    Format(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgramError {
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("malformed step {step}: {reason}")]
    MalformedStep { step: usize, reason: String },
    #[error("empty program")]
    EmptyProgram,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("step {step}: domain guard rejected {op}({args:?})")]
    DomainError { step: usize, op: String, args: Vec<f64> },
    #[error("step {step}: V_{var} referenced before it is bound")]
    DanglingReference { step: usize, var: usize },
    #[error("step {step}: N_{slot} not present in the number map")]
    MissingNumber { step: usize, slot: usize },
    #[error("empty program")]
    EmptyProgram,
}

/// Ordered numeric literals extracted from problem text. Slot `i` resolves to
/// `values[i]`; the mapping is positional and ignores duplicate values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NumberMap {
    pub values: Vec<f64>,
}

impl NumberMap {
    pub fn new(values: Vec<f64>) -> Self {
        NumberMap { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, slot: usize) -> Option<f64> {
        self.values.get(slot).copied()
    }
}

/// Result of executing a program: every bound intermediate plus the final
/// value (the variable bound by the last step).
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionResult {
    pub variables: Vec<f64>,
    pub final_value: f64,
}

/// Serialized form of a vocabulary. Evaluators are resolved by operator name
/// against the built-in registry on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabularyFile {
    pub operators: Vec<OperatorSpec>,
    pub constants: Vec<ConstantSpec>,
    pub max_problem_numbers: usize,
    pub max_variables: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub name: String,
    pub arity: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantSpec {
    pub name: String,
    pub value: f64,
}

/// The program token alphabet with stable ids.
///
/// Id layout is fixed: `PAD=0, BOS=1, EOS=2, SEP=3`, then operators in table
/// order, constants, `N_0..`, `V_0..`. Ids therefore survive save/load as long
/// as the tables do.
#[derive(Debug, Clone)]
pub struct ProgramVocabulary {
    operators: Vec<OperatorDef>,
    constants: Vec<(String, f64)>,
    max_problem_numbers: usize,
    max_variables: usize,
    names: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Default for ProgramVocabulary {
    fn default() -> Self {
        ProgramVocabulary::new(builtin_operators(), default_constants(), 16, 8)
            .expect("default vocabulary is valid")
    }
}

impl ProgramVocabulary {
    pub fn new(
        operators: Vec<OperatorDef>,
        constants: Vec<(String, f64)>,
        max_problem_numbers: usize,
        max_variables: usize,
    ) -> Result<Self, VocabError> {
        if !constants.iter().any(|(n, v)| n == "C_3" && *v == 180.0) {
            return Err(VocabError::MissingDegreeConstant);
        }
        let mut names = vec!["<pad>".to_string(), "<bos>".to_string(), "<eos>".to_string(), ";".to_string()];
        names.extend(operators.iter().map(|o| o.name.clone()));
        names.extend(constants.iter().map(|(n, _)| n.clone()));
        names.extend((0..max_problem_numbers).map(|i| format!("N_{i}")));
        names.extend((0..max_variables).map(|j| format!("V_{j}")));
        let mut ids = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if ids.insert(n.clone(), i).is_some() {
                return Err(VocabError::DuplicateName(n.clone()));
            }
        }
        Ok(ProgramVocabulary { operators, constants, max_problem_numbers, max_variables, names, ids })
    }

    /// Restrict the default tables to a named subset (used by tiny test
    /// models; `C_3` is always retained).
    pub fn with_operators(op_names: &[&str], max_numbers: usize, max_vars: usize) -> Result<Self, VocabError> {
        let registry = builtin_operators();
        let mut ops = Vec::new();
        for name in op_names {
            let op = registry
                .iter()
                .find(|o| o.name == *name)
                .ok_or_else(|| VocabError::UnknownOperator(name.to_string()))?;
            ops.push(op.clone());
        }
        let constants = vec![("C_3".to_string(), 180.0)];
        ProgramVocabulary::new(ops, constants, max_numbers, max_vars)
    }

    pub fn to_file(&self) -> VocabularyFile {
        VocabularyFile {
            operators: self
                .operators
                .iter()
                .map(|o| OperatorSpec { name: o.name.clone(), arity: o.arity })
                .collect(),
            constants: self
                .constants
                .iter()
                .map(|(name, value)| ConstantSpec { name: name.clone(), value: *value })
                .collect(),
            max_problem_numbers: self.max_problem_numbers,
            max_variables: self.max_variables,
        }
    }

    pub fn from_file(file: &VocabularyFile) -> Result<Self, VocabError> {
        let registry = builtin_operators();
        let mut ops = Vec::new();
        for spec in &file.operators {
            let op = registry
                .iter()
                .find(|o| o.name == spec.name)
                .ok_or_else(|| VocabError::UnknownOperator(spec.name.clone()))?;
            if op.arity != spec.arity {
                return Err(VocabError::ArityMismatch {
                    name: spec.name.clone(),
                    declared: spec.arity,
                    actual: op.arity,
                });
            }
            ops.push(op.clone());
        }
        let constants = file.constants.iter().map(|c| (c.name.clone(), c.value)).collect();
        ProgramVocabulary::new(ops, constants, file.max_problem_numbers, file.max_variables)
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(&self.to_file()).expect("vocabulary serializes");
        std::fs::write(path, json)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, VocabError> {
        let text = std::fs::read_to_string(path).map_err(|e| VocabError::Format(e.to_string()))?;
        let file: VocabularyFile =
            serde_json::from_str(&text).map_err(|e| VocabError::Format(e.to_string()))?;
        ProgramVocabulary::from_file(&file)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pad_id(&self) -> TokenId {
        0
    }
    pub fn bos_id(&self) -> TokenId {
        1
    }
    pub fn eos_id(&self) -> TokenId {
        2
    }
    pub fn sep_id(&self) -> TokenId {
        3
    }

    pub fn operators(&self) -> &[OperatorDef] {
        &self.operators
    }
    pub fn constants(&self) -> &[(String, f64)] {
        &self.constants
    }
    pub fn max_problem_numbers(&self) -> usize {
        self.max_problem_numbers
    }
    pub fn max_variables(&self) -> usize {
        self.max_variables
    }

    pub fn id_of(&self, name: &str) -> Option<TokenId> {
        self.ids.get(name).copied()
    }

    pub fn name_of(&self, id: TokenId) -> &str {
        &self.names[id]
    }

    pub fn op_id(&self, op_index: usize) -> TokenId {
        4 + op_index
    }
    pub fn const_id(&self, const_index: usize) -> TokenId {
        4 + self.operators.len() + const_index
    }
    pub fn number_id(&self, slot: usize) -> TokenId {
        4 + self.operators.len() + self.constants.len() + slot
    }
    pub fn var_id(&self, var: usize) -> TokenId {
        4 + self.operators.len() + self.constants.len() + self.max_problem_numbers + var
    }

    /// Classify a token id.
    pub fn kind(&self, id: TokenId) -> Token {
        let n_ops = self.operators.len();
        let n_consts = self.constants.len();
        match id {
            0 => Token::Pad,
            1 => Token::Bos,
            2 => Token::Eos,
            3 => Token::Sep,
            _ => {
                let i = id - 4;
                if i < n_ops {
                    Token::Op(i)
                } else if i < n_ops + n_consts {
                    Token::Const(i - n_ops)
                } else if i < n_ops + n_consts + self.max_problem_numbers {
                    Token::Number(i - n_ops - n_consts)
                } else if i < n_ops + n_consts + self.max_problem_numbers + self.max_variables {
                    Token::Var(i - n_ops - n_consts - self.max_problem_numbers)
                } else {
                    panic!("token id {id} out of range");
                }
            }
        }
    }

    /// Parse a raw `;`-delimited program text into a validated [`Program`].
    pub fn segment(&self, raw: &str) -> Result<Program, ProgramError> {
        let mut token_ids = Vec::new();
        for piece in raw.split_whitespace() {
            // allow "a ; b" and "a; b" spellings
            if piece == ";" {
                token_ids.push(self.sep_id());
                continue;
            }
            let mut rest = piece;
            let mut trailing_sep = false;
            if let Some(stripped) = rest.strip_suffix(';') {
                rest = stripped;
                trailing_sep = true;
            }
            if !rest.is_empty() {
                let id = self
                    .id_of(rest)
                    .ok_or_else(|| ProgramError::UnknownToken(rest.to_string()))?;
                token_ids.push(id);
            }
            if trailing_sep {
                token_ids.push(self.sep_id());
            }
        }
        token_ids.push(self.eos_id());
        self.from_tokens(&token_ids)
    }

    /// Validate a raw token sequence (as produced by decoding) into a
    /// [`Program`]. The sequence may end with `EOS`; one is appended if not.
    pub fn from_tokens(&self, tokens: &[TokenId]) -> Result<Program, ProgramError> {
        let mut toks: Vec<TokenId> = tokens.to_vec();
        if toks.last() != Some(&self.eos_id()) {
            toks.push(self.eos_id());
        }
        let body: Vec<TokenId> = toks[..toks.len() - 1].to_vec();
        if body.is_empty() {
            return Err(ProgramError::EmptyProgram);
        }
        let mut steps = Vec::new();
        for (k, chunk) in body.split(|&t| t == self.sep_id()).enumerate() {
            if chunk.is_empty() {
                return Err(ProgramError::MalformedStep { step: k, reason: "empty step".into() });
            }
            let op = match self.kind(chunk[0]) {
                Token::Op(i) => i,
                _ => {
                    return Err(ProgramError::MalformedStep {
                        step: k,
                        reason: format!("step must start with an operator, got `{}`", self.name_of(chunk[0])),
                    })
                }
            };
            let arity = self.operators[op].arity;
            if chunk.len() - 1 != arity {
                return Err(ProgramError::MalformedStep {
                    step: k,
                    reason: format!(
                        "operator `{}` takes {} arguments, got {}",
                        self.operators[op].name,
                        arity,
                        chunk.len() - 1
                    ),
                });
            }
            let mut args = Vec::with_capacity(arity);
            for &t in &chunk[1..] {
                let arg = match self.kind(t) {
                    Token::Const(c) => Arg::Const(c),
                    Token::Number(n) => Arg::Number(n),
                    Token::Var(v) => {
                        if v >= k {
                            return Err(ProgramError::MalformedStep {
                                step: k,
                                reason: format!("V_{v} referenced before step {v} binds it"),
                            });
                        }
                        Arg::Var(v)
                    }
                    _ => {
                        return Err(ProgramError::MalformedStep {
                            step: k,
                            reason: format!("`{}` cannot be an argument", self.name_of(t)),
                        })
                    }
                };
                args.push(arg);
            }
            steps.push(Step { op, args });
        }
        if steps.len() > self.max_variables {
            return Err(ProgramError::MalformedStep {
                step: self.max_variables,
                reason: format!("program exceeds {} steps", self.max_variables),
            });
        }
        Ok(Program { tokens: toks, steps })
    }

    /// Inverse of [`segment`](Self::segment): the canonical `;`-delimited text.
    pub fn render(&self, program: &Program) -> String {
        let mut parts: Vec<String> = Vec::new();
        for (k, step) in program.steps.iter().enumerate() {
            if k > 0 {
                parts.push(";".into());
            }
            parts.push(self.operators[step.op].name.clone());
            for arg in &step.args {
                parts.push(match arg {
                    Arg::Const(c) => self.constants[*c].0.clone(),
                    Arg::Number(n) => format!("N_{n}"),
                    Arg::Var(v) => format!("V_{v}"),
                });
            }
        }
        parts.join(" ")
    }

    /// Execute all steps in order, binding `V_k` at step `k`. The final value
    /// is the last bound variable.
    pub fn execute(&self, program: &Program, numbers: &NumberMap) -> Result<ExecutionResult, ExecError> {
        self.execute_prefix(program, numbers, program.steps.len())
    }

    /// Execute only the first `k` steps (prefix monotonicity: the bindings
    /// agree with a full run).
    pub fn execute_prefix(
        &self,
        program: &Program,
        numbers: &NumberMap,
        k: usize,
    ) -> Result<ExecutionResult, ExecError> {
        if program.steps.is_empty() || k == 0 {
            return Err(ExecError::EmptyProgram);
        }
        let mut vars: Vec<f64> = Vec::with_capacity(k);
        for (idx, step) in program.steps.iter().take(k).enumerate() {
            let mut argv = Vec::with_capacity(step.args.len());
            for arg in &step.args {
                let v = match arg {
                    Arg::Const(c) => self.constants[*c].1,
                    Arg::Number(n) => {
                        numbers.get(*n).ok_or(ExecError::MissingNumber { step: idx, slot: *n })?
                    }
                    Arg::Var(j) => {
                        *vars.get(*j).ok_or(ExecError::DanglingReference { step: idx, var: *j })?
                    }
                };
                argv.push(v);
            }
            let op = &self.operators[step.op];
            let value = op.apply(&argv).ok_or_else(|| ExecError::DomainError {
                step: idx,
                op: op.name.clone(),
                args: argv.clone(),
            })?;
            vars.push(value);
        }
        let final_value = *vars.last().expect("at least one step executed");
        Ok(ExecutionResult { variables: vars, final_value })
    }

    /// Match an executed value against the four answer choices.
    ///
    /// A choice `c_i` is eligible when `|z − c_i| ≤ max(1e-2, 1e-3·|c_i|)`;
    /// among eligible choices the closest wins, ties by lowest index. Returns
    /// `None` ("no result") when nothing is eligible or `z` is not finite.
    pub fn match_choice(&self, z: f64, choices: &[f64; 4]) -> Option<usize> {
        if !z.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, &c) in choices.iter().enumerate() {
            let dist = (z - c).abs();
            if dist <= choice_tolerance(c) {
                match best {
                    Some((_, d)) if d <= dist => {}
                    _ => best = Some((i, dist)),
                }
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Per-choice matching tolerance.
pub fn choice_tolerance(choice: f64) -> f64 {
    f64::max(1e-2, 1e-3 * choice.abs())
}

/// Draw a random executable program over `vocab` using `num_count` bound
/// number slots. Arguments are resampled until every step passes its domain
/// guard, so the returned program always executes on `numbers`.
pub fn sample_program<R: rand::Rng>(
    rng: &mut R,
    vocab: &ProgramVocabulary,
    numbers: &NumberMap,
    max_steps: usize,
) -> Program {
    let n_steps = rng.random_range(1..=max_steps.min(vocab.max_variables()));
    let mut vars: Vec<f64> = Vec::new();
    let mut steps: Vec<Step> = Vec::new();
    for k in 0..n_steps {
        'retry: loop {
            let op_idx = rng.random_range(0..vocab.operators().len());
            let op = &vocab.operators()[op_idx];
            let mut args = Vec::with_capacity(op.arity);
            let mut argv = Vec::with_capacity(op.arity);
            for _ in 0..op.arity {
                let pool = 2 + usize::from(k > 0);
                let (arg, v) = match rng.random_range(0..pool) {
                    0 => {
                        let c = rng.random_range(0..vocab.constants().len());
                        (Arg::Const(c), vocab.constants()[c].1)
                    }
                    1 => {
                        let n = rng.random_range(0..numbers.len().max(1));
                        match numbers.get(n) {
                            Some(v) => (Arg::Number(n), v),
                            None => continue 'retry,
                        }
                    }
                    _ => {
                        let j = rng.random_range(0..k);
                        (Arg::Var(j), vars[j])
                    }
                };
                args.push(arg);
                argv.push(v);
            }
            // keep magnitudes sane so chained steps stay finite
            match op.apply(&argv) {
                Some(v) if v.abs() < 1e9 => {
                    vars.push(v);
                    steps.push(Step { op: op_idx, args });
                    break;
                }
                _ => continue,
            }
        }
    }
    let mut tokens = Vec::new();
    for (k, step) in steps.iter().enumerate() {
        if k > 0 {
            tokens.push(vocab.sep_id());
        }
        tokens.push(vocab.op_id(step.op));
        for arg in &step.args {
            tokens.push(match arg {
                Arg::Const(c) => vocab.const_id(*c),
                Arg::Number(n) => vocab.number_id(*n),
                Arg::Var(v) => vocab.var_id(*v),
            });
        }
    }
    tokens.push(vocab.eos_id());
    Program { tokens, steps }
}
