//! Tracing tree-walking interpreter.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ast::{Arm, BinOp, BranchSiteId, Expr, Program, StatementId, Stmt, StmtKind, Type, UnOp};
use super::error::ExecError;
use super::value::{ProgramState, Value};

pub const DEFAULT_MAX_STEPS: usize = 10_000;
pub const DEFAULT_MAX_ARRAY_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecLimits {
    pub max_steps: usize,
    pub max_array_len: usize,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits { max_steps: DEFAULT_MAX_STEPS, max_array_len: DEFAULT_MAX_ARRAY_LEN }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceStep {
    pub stmt_id: StatementId,
    pub state: ProgramState,
}

/// One concrete run: `s_0 -> (e_i -> s_i)*` plus the branch arms it took.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub input: Vec<Value>,
    pub initial_state: ProgramState,
    pub steps: Vec<TraceStep>,
    pub covered_branches: BTreeSet<(BranchSiteId, Arm)>,
    pub return_value: Option<Value>,
}

impl ExecutionTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_state(&self) -> &ProgramState {
        self.steps.last().map(|s| &s.state).unwrap_or(&self.initial_state)
    }

    pub fn statement_ids(&self) -> Vec<StatementId> {
        self.steps.iter().map(|s| s.stmt_id).collect()
    }
}

/// What a caller can observe after a run: the return value and the final
/// contents of array parameters.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Observation {
    pub return_value: Option<Value>,
    pub arrays: Vec<Value>,
}

pub fn observe(p: &Program, trace: &ExecutionTrace) -> Observation {
    let fin = trace.final_state();
    let arrays = p
        .params
        .iter()
        .enumerate()
        .filter(|(_, q)| q.ty == Type::IntArray)
        .map(|(i, _)| fin.0[i].clone())
        .collect();
    Observation { return_value: trace.return_value.clone(), arrays }
}

enum Flow {
    Next,
    Return(Option<Value>),
}

struct Machine<'p> {
    program: &'p Program,
    limits: ExecLimits,
    state: Vec<Value>,
    steps: Vec<TraceStep>,
    covered: BTreeSet<(BranchSiteId, Arm)>,
}

fn type_matches(ty: Type, v: &Value) -> bool {
    matches!((ty, v), (Type::Int, Value::Int(_)) | (Type::Bool, Value::Bool(_)) | (Type::IntArray, Value::Array(_)))
}

/// Runs `p` on `input`, recording the full state after every statement.
pub fn execute(p: &Program, input: &[Value], limits: ExecLimits) -> Result<ExecutionTrace, ExecError> {
    if limits.max_steps == 0 {
        return Err(ExecError::BadInput("step limit must be positive".into()));
    }
    if input.len() != p.params.len() {
        return Err(ExecError::BadInput(format!("expected {} arguments, got {}", p.params.len(), input.len())));
    }
    for (param, v) in p.params.iter().zip(input) {
        if !type_matches(param.ty, v) {
            return Err(ExecError::BadInput(format!("argument `{}` has the wrong type", param.name)));
        }
        if let Value::Array(xs) = v {
            if xs.len() > limits.max_array_len {
                return Err(ExecError::BadInput(format!("argument `{}` exceeds the array length limit", param.name)));
            }
        }
    }
    let mut state = vec![Value::Bottom; p.num_vars()];
    state[..input.len()].clone_from_slice(input);
    let initial_state = ProgramState(state.clone());
    let mut m = Machine { program: p, limits, state, steps: Vec::new(), covered: BTreeSet::new() };
    let ret = match m.block(&p.body)? {
        Flow::Return(v) => v,
        Flow::Next => None,
    };
    Ok(ExecutionTrace {
        input: input.to_vec(),
        initial_state,
        steps: m.steps,
        covered_branches: m.covered,
        return_value: ret,
    })
}

impl Machine<'_> {
    fn record(&mut self, id: StatementId) -> Result<(), ExecError> {
        if self.steps.len() >= self.limits.max_steps {
            return Err(ExecError::StepLimit(self.limits.max_steps));
        }
        self.steps.push(TraceStep { stmt_id: id, state: ProgramState(self.state.clone()) });
        Ok(())
    }

    fn cover(&mut self, id: StatementId, taken: bool) {
        self.covered.insert((BranchSiteId(id.0), Arm::from(taken)));
    }

    fn block(&mut self, body: &[Stmt]) -> Result<Flow, ExecError> {
        for s in body {
            if let Flow::Return(v) = self.stmt(s)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn slot(&self, name: &str) -> usize {
        self.program.var_index(name).expect("variables are resolved at parse time")
    }

    fn stmt(&mut self, s: &Stmt) -> Result<Flow, ExecError> {
        let id = s.id;
        match &s.kind {
            StmtKind::Assign { target, op, value, .. } => {
                let rhs = self.eval(value, id)?;
                let slot = self.slot(target);
                let new = match op.binop() {
                    None => rhs,
                    Some(bop) => {
                        let cur = self.read_slot(slot, target, id)?;
                        binary(bop, cur, rhs).map_err(|m| rt(id, m))?
                    }
                };
                if let Value::Array(xs) = &new {
                    if xs.len() > self.limits.max_array_len {
                        return Err(rt(id, "array length limit exceeded".into()));
                    }
                }
                self.state[slot] = new;
                self.record(id)?;
            }
            StmtKind::Store { array, index, op, value } => {
                let idx = self.eval_int(index, id)?;
                let rhs = self.eval(value, id)?;
                let slot = self.slot(array);
                let cur_elem = {
                    let xs = self.array_slot(slot, array, id)?;
                    let i = bounds(xs.len(), idx).ok_or_else(|| rt(id, format!("index {idx} out of bounds")))?;
                    xs[i]
                };
                let new = match op.binop() {
                    None => rhs,
                    Some(bop) => binary(bop, Value::Int(cur_elem), rhs).map_err(|m| rt(id, m))?,
                };
                let Value::Int(v) = new else {
                    return Err(rt(id, "array elements must be integers".into()));
                };
                if let Value::Array(xs) = &mut self.state[slot] {
                    let i = bounds(xs.len(), idx).expect("checked above");
                    xs[i] = v;
                }
                self.record(id)?;
            }
            StmtKind::If { cond, then_body, else_body } => {
                let c = self.eval_bool(cond, id)?;
                self.cover(id, c);
                self.record(id)?;
                let body = if c { then_body } else { else_body };
                return self.block(body);
            }
            StmtKind::While { cond, body } => loop {
                let c = self.eval_bool(cond, id)?;
                self.cover(id, c);
                self.record(id)?;
                if !c {
                    break;
                }
                if let Flow::Return(v) = self.block(body)? {
                    return Ok(Flow::Return(v));
                }
            },
            StmtKind::For { var, start, end, step, body } => {
                let mut i = self.eval_int(start, id)?;
                let hi = self.eval_int(end, id)?;
                let slot = self.slot(var);
                loop {
                    self.state[slot] = Value::Int(i);
                    let c = if *step > 0 { i < hi } else { i > hi };
                    self.cover(id, c);
                    self.record(id)?;
                    if !c {
                        break;
                    }
                    if let Flow::Return(v) = self.block(body)? {
                        return Ok(Flow::Return(v));
                    }
                    i = i.checked_add(*step).ok_or_else(|| rt(id, "integer overflow".into()))?;
                }
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => Some(self.eval(e, id)?),
                    None => None,
                };
                self.record(id)?;
                return Ok(Flow::Return(v));
            }
            StmtKind::Call { name, args } => {
                debug_assert_eq!(name, "swap");
                let Expr::Var(array) = &args[0] else {
                    return Err(rt(id, "swap expects an array variable".into()));
                };
                let i = self.eval_int(&args[1], id)?;
                let j = self.eval_int(&args[2], id)?;
                let slot = self.slot(array);
                let xs = self.array_slot(slot, array, id)?;
                let (Some(i), Some(j)) = (bounds(xs.len(), i), bounds(xs.len(), j)) else {
                    return Err(rt(id, "swap index out of bounds".into()));
                };
                if let Value::Array(xs) = &mut self.state[slot] {
                    xs.swap(i, j);
                }
                self.record(id)?;
            }
        }
        Ok(Flow::Next)
    }

    fn read_slot(&self, slot: usize, name: &str, id: StatementId) -> Result<Value, ExecError> {
        match &self.state[slot] {
            Value::Bottom => Err(rt(id, format!("read of unassigned variable `{name}`"))),
            v => Ok(v.clone()),
        }
    }

    fn array_slot(&self, slot: usize, name: &str, id: StatementId) -> Result<&Vec<i64>, ExecError> {
        match &self.state[slot] {
            Value::Array(xs) => Ok(xs),
            Value::Bottom => Err(rt(id, format!("read of unassigned variable `{name}`"))),
            _ => Err(rt(id, format!("`{name}` is not an array"))),
        }
    }

    fn eval_int(&self, e: &Expr, id: StatementId) -> Result<i64, ExecError> {
        match self.eval(e, id)? {
            Value::Int(v) => Ok(v),
            _ => Err(rt(id, "expected an integer".into())),
        }
    }

    fn eval_bool(&self, e: &Expr, id: StatementId) -> Result<bool, ExecError> {
        match self.eval(e, id)? {
            Value::Bool(b) => Ok(b),
            _ => Err(rt(id, "expected a boolean".into())),
        }
    }

    fn eval(&self, e: &Expr, id: StatementId) -> Result<Value, ExecError> {
        match e {
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Var(name) => self.read_slot(self.slot(name), name, id),
            Expr::Index(name, idx) => {
                let i = self.eval_int(idx, id)?;
                let xs = self.array_slot(self.slot(name), name, id)?;
                bounds(xs.len(), i)
                    .map(|i| Value::Int(xs[i]))
                    .ok_or_else(|| rt(id, format!("index {i} out of bounds")))
            }
            Expr::Unary(UnOp::Neg, inner) => {
                let v = self.eval_int(inner, id)?;
                v.checked_neg().map(Value::Int).ok_or_else(|| rt(id, "integer overflow".into()))
            }
            Expr::Unary(UnOp::Not, inner) => Ok(Value::Bool(!self.eval_bool(inner, id)?)),
            Expr::Binary(BinOp::And, l, r) => {
                Ok(Value::Bool(self.eval_bool(l, id)? && self.eval_bool(r, id)?))
            }
            Expr::Binary(BinOp::Or, l, r) => {
                Ok(Value::Bool(self.eval_bool(l, id)? || self.eval_bool(r, id)?))
            }
            Expr::Binary(op, l, r) => {
                let a = self.eval(l, id)?;
                let b = self.eval(r, id)?;
                binary(*op, a, b).map_err(|m| rt(id, m))
            }
            Expr::Call(name, args) => {
                let arg = self.eval(&args[0], id)?;
                match (name.as_str(), arg) {
                    ("len", Value::Array(xs)) => Ok(Value::Int(xs.len() as i64)),
                    ("abs", Value::Int(v)) => {
                        v.checked_abs().map(Value::Int).ok_or_else(|| rt(id, "integer overflow".into()))
                    }
                    ("zeros", Value::Int(n)) if n >= 0 && (n as usize) <= self.limits.max_array_len => {
                        Ok(Value::Array(vec![0; n as usize]))
                    }
                    ("zeros", Value::Int(n)) => Err(rt(id, format!("invalid array length {n}"))),
                    (f, _) => Err(rt(id, format!("bad argument to `{f}`"))),
                }
            }
        }
    }
}

fn rt(stmt: StatementId, message: String) -> ExecError {
    ExecError::Runtime { stmt, message }
}

fn bounds(len: usize, idx: i64) -> Option<usize> {
    (idx >= 0 && (idx as usize) < len).then_some(idx as usize)
}

/// Strict binary operator semantics shared with constant folding.
pub fn binary(op: BinOp, a: Value, b: Value) -> Result<Value, String> {
    use Value::{Bool, Int};
    let overflow = || "integer overflow".to_string();
    match (op, a, b) {
        (BinOp::Add, Int(x), Int(y)) => x.checked_add(y).map(Int).ok_or_else(overflow),
        (BinOp::Sub, Int(x), Int(y)) => x.checked_sub(y).map(Int).ok_or_else(overflow),
        (BinOp::Mul, Int(x), Int(y)) => x.checked_mul(y).map(Int).ok_or_else(overflow),
        (BinOp::Div, Int(_), Int(0)) | (BinOp::Rem, Int(_), Int(0)) => Err("division by zero".into()),
        (BinOp::Div, Int(x), Int(y)) => x.checked_div(y).map(Int).ok_or_else(overflow),
        (BinOp::Rem, Int(x), Int(y)) => x.checked_rem(y).map(Int).ok_or_else(overflow),
        (BinOp::Lt, Int(x), Int(y)) => Ok(Bool(x < y)),
        (BinOp::Le, Int(x), Int(y)) => Ok(Bool(x <= y)),
        (BinOp::Gt, Int(x), Int(y)) => Ok(Bool(x > y)),
        (BinOp::Ge, Int(x), Int(y)) => Ok(Bool(x >= y)),
        (BinOp::Eq, Int(x), Int(y)) => Ok(Bool(x == y)),
        (BinOp::Ne, Int(x), Int(y)) => Ok(Bool(x != y)),
        (BinOp::Eq, Bool(x), Bool(y)) => Ok(Bool(x == y)),
        (BinOp::Ne, Bool(x), Bool(y)) => Ok(Bool(x != y)),
        (BinOp::And, Bool(x), Bool(y)) => Ok(Bool(x && y)),
        (BinOp::Or, Bool(x), Bool(y)) => Ok(Bool(x || y)),
        (op, a, b) => Err(format!("type error: {a} {} {b}", op.symbol())),
    }
}

/// Union of branch arms covered by a set of runs.
pub fn branch_coverage<'a>(traces: impl IntoIterator<Item = &'a ExecutionTrace>) -> BTreeSet<(BranchSiteId, Arm)> {
    traces.into_iter().flat_map(|t| t.covered_branches.iter().copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parser::parse;

    const BUBBLE: &str = "fn bubble(a: int[]) {
        for i in 0..len(a) {
            for j in 0..len(a) - i - 1 {
                if a[j] > a[j+1] {
                    tmp = a[j];
                    a[j] = a[j+1];
                    a[j+1] = tmp;
                }
            }
        }
    }";

    fn arr(xs: &[i64]) -> Value {
        Value::Array(xs.to_vec())
    }

    #[test]
    fn bubble_sort_final_state() {
        let p = parse(BUBBLE).unwrap();
        let t = execute(&p, &[arr(&[8, 5, 1, 4, 3])], ExecLimits::default()).unwrap();
        assert_eq!(t.final_state().0[0], arr(&[1, 3, 4, 5, 8]));
    }

    #[test]
    fn bubble_sort_first_mutation() {
        let p = parse(&BUBBLE.replace("tmp = a[j];", "swap(a, j, j + 1);")
            .replace("a[j] = a[j+1];", "")
            .replace("a[j+1] = tmp;", ""))
        .unwrap();
        let t = execute(&p, &[arr(&[8, 5, 1, 4, 3])], ExecLimits::default()).unwrap();
        let first = t.steps.iter().find(|s| s.state.0[0] != arr(&[8, 5, 1, 4, 3])).unwrap();
        assert_eq!(first.state.0[0], arr(&[5, 8, 1, 4, 3]));
    }

    #[test]
    fn single_return_step() {
        let p = parse("fn f(x:int){return x;}").unwrap();
        let t = execute(&p, &[Value::Int(7)], ExecLimits::default()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.steps[0].state, ProgramState(vec![Value::Int(7)]));
        assert_eq!(t.return_value, Some(Value::Int(7)));
    }

    #[test]
    fn state_width_is_constant_and_unassigned_is_bottom() {
        let p = parse("fn f(x:int){ y = x + 1; z = y * 2; return z; }").unwrap();
        let t = execute(&p, &[Value::Int(1)], ExecLimits::default()).unwrap();
        assert!(t.steps.iter().all(|s| s.state.width() == 3));
        assert_eq!(t.steps[0].state.0[2], Value::Bottom);
    }

    #[test]
    fn step_limit_and_runtime_errors() {
        let p = parse("fn f(x:int){ while true { x = x + 1; } }").unwrap();
        let limits = ExecLimits { max_steps: 100, ..Default::default() };
        assert_eq!(execute(&p, &[Value::Int(0)], limits), Err(ExecError::StepLimit(100)));

        let p = parse("fn f(a:int[]){ return a[5]; }").unwrap();
        assert!(matches!(execute(&p, &[arr(&[1])], ExecLimits::default()), Err(ExecError::Runtime { .. })));

        let p = parse("fn f(x:int){ return y; y = 1; }").unwrap();
        assert!(matches!(execute(&p, &[Value::Int(0)], ExecLimits::default()), Err(ExecError::Runtime { .. })));
    }

    #[test]
    fn bad_arity_and_types() {
        let p = parse("fn f(x:int){return x;}").unwrap();
        assert!(matches!(execute(&p, &[], ExecLimits::default()), Err(ExecError::BadInput(_))));
        assert!(matches!(execute(&p, &[Value::Bool(true)], ExecLimits::default()), Err(ExecError::BadInput(_))));
    }

    #[test]
    fn for_loop_semantics() {
        let p = parse("fn f(){ s = 0; for i in 0..4 { s = s + i; } return s; }").unwrap();
        let t = execute(&p, &[], ExecLimits::default()).unwrap();
        assert_eq!(t.return_value, Some(Value::Int(6)));
        let p = parse("fn f(){ s = 0; for i in 3..-1 step -1 { s = s * 10 + i; } return s; }").unwrap();
        let t = execute(&p, &[], ExecLimits::default()).unwrap();
        assert_eq!(t.return_value, Some(Value::Int(3210)));
    }

    #[test]
    fn coverage_records_arms() {
        let p = parse("fn f(x:int){ if x > 0 { return 1; } return 0; }").unwrap();
        let pos = execute(&p, &[Value::Int(3)], ExecLimits::default()).unwrap();
        let neg = execute(&p, &[Value::Int(-3)], ExecLimits::default()).unwrap();
        let site = BranchSiteId(0);
        assert_eq!(pos.covered_branches, BTreeSet::from([(site, Arm::True)]));
        assert!(branch_coverage(Vec::<&ExecutionTrace>::new()).is_empty());
        let both = branch_coverage([&pos, &neg]);
        assert_eq!(both, BTreeSet::from([(site, Arm::True), (site, Arm::False)]));
    }

    #[test]
    fn doubling_forms_share_state_traces() {
        let add = parse("fn f(x:int){ y = x + x; return y; }").unwrap();
        let mul = parse("fn f(x:int){ y = x * 2; return y; }").unwrap();
        assert_ne!(add.tokens, mul.tokens);
        for x in -20..20 {
            let a = execute(&add, &[Value::Int(x)], ExecLimits::default()).unwrap();
            let b = execute(&mul, &[Value::Int(x)], ExecLimits::default()).unwrap();
            let sa: Vec<_> = a.steps.iter().map(|s| &s.state).collect();
            let sb: Vec<_> = b.steps.iter().map(|s| &s.state).collect();
            assert_eq!(sa, sb);
        }
    }

    #[test]
    fn swap_builtin() {
        let p = parse("fn f(a:int[]){ swap(a, 0, 2); }").unwrap();
        let t = execute(&p, &[arr(&[1, 2, 3])], ExecLimits::default()).unwrap();
        assert_eq!(t.final_state().0[0], arr(&[3, 2, 1]));
    }
}
