//! Lazy cells and the evaluation session shared by the oracle and the indexed evaluator.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::rc::Rc;

use crate::ast::{Environment, Ident, Op, Scalar};

use super::EvalError;

// Red zone and growth step for `stacker`; deep lazy chains (heads of `nats`,
// recursion of derived functions) otherwise overflow the native stack.
const RED_ZONE: usize = 128 * 1024;
const STACK_STEP: usize = 4 * 1024 * 1024;

type Thunk<T> = Box<dyn FnOnce(&mut Machine) -> Result<T, EvalError>>;

enum State<T> {
    Pending(Thunk<T>),
    Forcing,
    Done(T),
    Failed(EvalError),
}

/// A memoizing suspension. Re-entering one that is being forced is a black hole.
pub struct Lazy<T>(Rc<RefCell<State<T>>>);

impl<T> Clone for Lazy<T> {
    fn clone(&self) -> Self {
        Lazy(self.0.clone())
    }
}

/// Unforced suspensions can chain through their captured scopes arbitrarily
/// deep; releasing the last reference must not exhaust the native stack.
impl<T> Drop for Lazy<T> {
    fn drop(&mut self) {
        if Rc::strong_count(&self.0) != 1 {
            return;
        }
        if let Ok(mut state) = self.0.try_borrow_mut() {
            let inner = std::mem::replace(&mut *state, State::Forcing);
            drop(state);
            stacker::maybe_grow(RED_ZONE, STACK_STEP, move || drop(inner));
        }
    }
}

impl<T: Clone + 'static> Lazy<T> {
    pub fn ready(v: T) -> Self {
        Lazy(Rc::new(RefCell::new(State::Done(v))))
    }

    pub fn defer(f: impl FnOnce(&mut Machine) -> Result<T, EvalError> + 'static) -> Self {
        Lazy(Rc::new(RefCell::new(State::Pending(Box::new(f)))))
    }

    pub fn failed(e: EvalError) -> Self {
        Lazy(Rc::new(RefCell::new(State::Failed(e))))
    }

    pub fn force(&self, m: &mut Machine) -> Result<T, EvalError> {
        {
            match &*self.0.borrow() {
                State::Done(v) => return Ok(v.clone()),
                State::Failed(e) => return Err(e.clone()),
                State::Forcing => return Err(EvalError::black_hole()),
                State::Pending(_) => {}
            }
        }
        let State::Pending(f) = std::mem::replace(&mut *self.0.borrow_mut(), State::Forcing) else {
            unreachable!("checked above")
        };
        let result = m.tick().and_then(|()| stacker::maybe_grow(RED_ZONE, STACK_STEP, || f(m)));
        *self.0.borrow_mut() = match &result {
            Ok(v) => State::Done(v.clone()),
            Err(e) => State::Failed(e.clone()),
        };
        result
    }

    /// An empty suspension, to be filled exactly once by [`Lazy::fill`].
    fn placeholder() -> Self {
        Lazy(Rc::new(RefCell::new(State::Forcing)))
    }

    fn fill(&self, v: T) {
        *self.0.borrow_mut() = State::Done(v);
    }

    /// The value, if already computed.
    pub fn peek(&self) -> Option<T> {
        match &*self.0.borrow() {
            State::Done(v) => Some(v.clone()),
            _ => None,
        }
    }

    fn ptr(&self) -> *const () {
        Rc::as_ptr(&self.0) as *const ()
    }
}

/// A stream in weak head normal form.
pub struct Cell {
    pub head: Lazy<Scalar>,
    pub tail: StreamRef,
}

pub type StreamRef = Lazy<Rc<Cell>>;

pub fn cell(head: Lazy<Scalar>, tail: StreamRef) -> Rc<Cell> {
    Rc::new(Cell { head, tail })
}

/// A builtin scalar operator with some leading arguments already supplied.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FunVal {
    pub op: Op,
    pub captured: Vec<Scalar>,
}

impl FunVal {
    pub fn new(op: Op, captured: Vec<Scalar>) -> Self {
        FunVal { op, captured }
    }

    pub fn arity(&self) -> usize {
        self.op.arity().saturating_sub(self.captured.len())
    }

    pub fn apply(&self, args: &[Scalar]) -> Result<Scalar, EvalError> {
        if args.len() != self.arity() {
            return Err(EvalError::Type(format!(
                "`{self}` expects {} argument(s), got {}",
                self.arity(),
                args.len()
            )));
        }
        let mut all = self.captured.clone();
        all.extend_from_slice(args);
        Ok(self.op.apply(&all))
    }
}

impl fmt::Display for FunVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.op, self.captured.as_slice()) {
            (op, []) => f.write_str(op.name()),
            (Op::Plus, [c]) => write!(f, "(+ {c})"),
            (Op::Times, [c]) => write!(f, "(* {c})"),
            (op, cs) => {
                write!(f, "({}", op.name())?;
                for c in cs {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Runtime value of a parameter or of an index-language expression.
#[derive(Clone)]
pub enum Value {
    Scalar(Scalar),
    Fun(FunVal),
    Stream(StreamRef),
}

impl Value {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Scalar(_) => "scalar",
            Value::Fun(_) => "function",
            Value::Stream(_) => "stream",
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Scalar(s) => write!(f, "{s}"),
            Value::Fun(v) => write!(f, "{v}"),
            Value::Stream(s) => write!(f, "<stream {:p}>", s.ptr()),
        }
    }
}

/// Streams are keyed by identity; holding the `Rc` keeps the address from being reused.
#[derive(Clone)]
pub struct StreamKey(StreamRef);

impl PartialEq for StreamKey {
    fn eq(&self, other: &Self) -> bool {
        self.0.ptr() == other.0.ptr()
    }
}

impl Eq for StreamKey {}

impl Hash for StreamKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.ptr().hash(state)
    }
}

/// An unevaluated scalar, keyed by identity.
#[derive(Clone)]
pub struct ThunkKey(Lazy<Scalar>);

impl PartialEq for ThunkKey {
    fn eq(&self, other: &Self) -> bool {
        self.0.ptr() == other.0.ptr()
    }
}

impl Eq for ThunkKey {}

impl Hash for ThunkKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.ptr().hash(state)
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum ArgKey {
    Scalar(Scalar),
    Thunk(ThunkKey),
    Fun(FunVal),
    Stream(StreamKey),
}

impl ArgKey {
    pub(crate) fn thunk(l: &Lazy<Scalar>) -> Self {
        match l.peek() {
            Some(v) => ArgKey::Scalar(v),
            None => ArgKey::Thunk(ThunkKey(l.clone())),
        }
    }
}

impl From<&Value> for ArgKey {
    fn from(v: &Value) -> Self {
        match v {
            Value::Scalar(s) => ArgKey::Scalar(s.clone()),
            Value::Fun(f) => ArgKey::Fun(f.clone()),
            Value::Stream(s) => ArgKey::Stream(StreamKey(s.clone())),
        }
    }
}

pub type CallKey = (Ident, Vec<ArgKey>);

/// How recursive calls inside index expressions are answered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resolver {
    /// By the derived (indexed) definitions of the environment.
    Derived,
    /// By the lazy oracle running the original surface equations.
    Oracle,
}

/// One evaluation session: fuel accounting, memo table, shared top-level streams.
pub struct Machine {
    pub(crate) env: Rc<Environment>,
    pub(crate) resolver: Resolver,
    budget: u64,
    spent: u64,
    pub(crate) memo: Option<HashMap<(Ident, Vec<ArgKey>, u64), Scalar>>,
    pub(crate) depth: usize,
    pub(crate) max_depth: usize,
    pub(crate) rec_calls: u64,
    /// Oracle streams of definitions applied to arguments, shared within the session.
    pub(crate) streams: HashMap<CallKey, StreamRef>,
}

pub const DEFAULT_MAX_DEPTH: usize = 1_000_000;

impl Machine {
    pub fn new(env: Rc<Environment>, resolver: Resolver) -> Self {
        Machine {
            env,
            resolver,
            budget: u64::MAX,
            spent: 0,
            memo: None,
            depth: 0,
            max_depth: DEFAULT_MAX_DEPTH,
            rec_calls: 0,
            streams: HashMap::new(),
        }
    }

    pub fn with_fuel(mut self, fuel: u64) -> Self {
        self.budget = fuel;
        self
    }

    pub fn with_memo(mut self, on: bool) -> Self {
        self.memo = on.then(HashMap::new);
        self
    }

    pub fn with_max_depth(mut self, depth: usize) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn fuel_spent(&self) -> u64 {
        self.spent
    }

    /// Number of derived-function invocations, memo hits excluded.
    pub fn rec_calls(&self) -> u64 {
        self.rec_calls
    }

    pub(crate) fn tick(&mut self) -> Result<(), EvalError> {
        if self.spent >= self.budget {
            return Err(EvalError::Unproductive {
                produced: None,
                detail: format!("fuel exhausted after {} unfolding steps", self.budget),
            });
        }
        self.spent += 1;
        Ok(())
    }

    pub(crate) fn grow<R>(&mut self, f: impl FnOnce(&mut Machine) -> R) -> R {
        stacker::maybe_grow(RED_ZONE, STACK_STEP, || f(self))
    }

    /// Element `i` of a stream.
    pub fn nth(&mut self, s: &StreamRef, i: u64) -> Result<Scalar, EvalError> {
        let mut c = s.force(self)?;
        for _ in 0..i {
            c = c.tail.force(self)?;
        }
        c.head.force(self)
    }

    /// The stream without its first `k` elements; preserves identity of the suffix.
    pub fn skip(&mut self, s: &StreamRef, k: u64) -> Result<StreamRef, EvalError> {
        let mut s = s.clone();
        for _ in 0..k {
            let c = s.force(self)?;
            s = c.tail.clone();
        }
        Ok(s)
    }

    pub fn prefix(&mut self, s: &StreamRef, len: usize) -> Result<Vec<Scalar>, (Vec<Scalar>, EvalError)> {
        let mut out = Vec::with_capacity(len);
        if len == 0 {
            return Ok(out);
        }
        let mut c = match s.force(self) {
            Ok(c) => c,
            Err(e) => return Err((out, e)),
        };
        loop {
            match c.head.force(self) {
                Ok(v) => out.push(v),
                Err(e) => return Err((out, e)),
            }
            if out.len() == len {
                return Ok(out);
            }
            c = match c.tail.force(self) {
                Ok(c) => c,
                Err(e) => return Err((out, e)),
            };
        }
    }
}

/// `stroff f`: the stream `f k :: f (k+1) :: …`.
pub fn stroff_from(f: Rc<dyn Fn(&mut Machine, u64) -> Result<Scalar, EvalError>>, k: u64) -> StreamRef {
    Lazy::defer(move |_| {
        let g = f.clone();
        let head = Lazy::defer(move |m| g(m, k));
        Ok(cell(head, stroff_from(f, k + 1)))
    })
}

/// Stream described by a finite prefix followed by a repeated cycle (`[1,2|0]`),
/// starting at element `k`.
///
/// The cycle is a cyclic chain of cells, so every suffix is one of finitely many
/// shared streams and memo tables keyed by stream identity see through shifts.
/// The few cells of a generator are never freed.
pub fn generator(prefix: Rc<[Scalar]>, cycle: Rc<[Scalar]>, k: u64) -> StreamRef {
    let looped = if cycle.is_empty() {
        Lazy::failed(EvalError::Argument("generator with an empty cycle ran past its prefix".into()))
    } else {
        let first = Lazy::placeholder();
        let mut next = first.clone();
        for v in cycle.iter().skip(1).rev() {
            next = Lazy::ready(cell(Lazy::ready(v.clone()), next));
        }
        first.fill(cell(Lazy::ready(cycle[0].clone()), next));
        first
    };
    let mut s = looped;
    for v in prefix.iter().rev() {
        s = Lazy::ready(cell(Lazy::ready(v.clone()), s));
    }
    // Shifting by whole cycles changes nothing.
    let k = match usize::try_from(k) {
        Ok(k) if k <= prefix.len() || cycle.is_empty() => k,
        _ => prefix.len() + ((k - prefix.len() as u64) % cycle.len() as u64) as usize,
    };
    let mut cur = s;
    for _ in 0..k {
        let tail = match &*cur.0.borrow() {
            State::Done(c) => c.tail.clone(),
            _ => break,
        };
        cur = tail;
    }
    cur
}
