//! Expression-tree genomes for priority functions: arithmetic over the
//! eight stack features, bounded to depth 5, with the crossover and
//! mutation operator suites used to evolve them. Two-line definitions of
//! every operator live in `docs/operators.md`; trees serialize as prefix
//! s-expressions like `(add (mul n_s r_s) k_s)`.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::features::StackFeatures;

/// Maximum tree depth, with the root at depth 0.
pub const MAX_DEPTH: usize = 5;

/// Divisors at or below this magnitude make protected division return 1.
pub const PDIV_EPSILON: f64 = 1e-9;

/// Bounded retries for crossovers whose point choice can violate the depth
/// cap; afterwards the child falls back to a copy of the first parent.
const CROSSOVER_RETRIES: usize = 10;

/// Leaf labels: one per stack feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Terminal {
    Hoisted,
    Lowered,
    Crossed,
    Rehandle,
    LowestId,
    Tightness,
    AwayFromTruck,
    Height,
}

impl Terminal {
    pub const ALL: [Terminal; 8] = [
        Terminal::Hoisted,
        Terminal::Lowered,
        Terminal::Crossed,
        Terminal::Rehandle,
        Terminal::LowestId,
        Terminal::Tightness,
        Terminal::AwayFromTruck,
        Terminal::Height,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Terminal::Hoisted => "h_s",
            Terminal::Lowered => "l_s",
            Terminal::Crossed => "x_s",
            Terminal::Rehandle => "r_s",
            Terminal::LowestId => "t_s",
            Terminal::Tightness => "g_s",
            Terminal::AwayFromTruck => "k_s",
            Terminal::Height => "n_s",
        }
    }

    pub fn value(self, f: &StackFeatures) -> f64 {
        match self {
            Terminal::Hoisted => f.hoisted,
            Terminal::Lowered => f.lowered,
            Terminal::Crossed => f.crossed,
            Terminal::Rehandle => f.rehandle,
            Terminal::LowestId => f.lowest_id,
            Terminal::Tightness => f.tightness,
            Terminal::AwayFromTruck => f.away_from_truck,
            Terminal::Height => f.height,
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Terminal::ALL.into_iter().find(|t| t.name() == name)
    }
}

/// Binary function labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Add,
    Sub,
    Mul,
    PDiv,
}

impl Func {
    pub const ALL: [Func; 4] = [Func::Add, Func::Sub, Func::Mul, Func::PDiv];

    pub fn name(self) -> &'static str {
        match self {
            Func::Add => "add",
            Func::Sub => "sub",
            Func::Mul => "mul",
            Func::PDiv => "pdiv",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Func::Add => a + b,
            Func::Sub => a - b,
            Func::Mul => a * b,
            Func::PDiv => {
                if b.abs() <= PDIV_EPSILON {
                    1.0
                } else {
                    a / b
                }
            }
        }
    }

    /// The paired opposite: add<->sub, mul<->pdiv.
    pub fn complement(self) -> Self {
        match self {
            Func::Add => Func::Sub,
            Func::Sub => Func::Add,
            Func::Mul => Func::PDiv,
            Func::PDiv => Func::Mul,
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Leaf(Terminal),
    Node(Func, Box<Expr>, Box<Expr>),
}

impl Expr {
    fn size(&self) -> usize {
        match self {
            Expr::Leaf(_) => 1,
            Expr::Node(_, l, r) => 1 + l.size() + r.size(),
        }
    }

    fn height(&self) -> usize {
        match self {
            Expr::Leaf(_) => 0,
            Expr::Node(_, l, r) => 1 + l.height().max(r.height()),
        }
    }

    fn eval(&self, f: &StackFeatures) -> f64 {
        match self {
            Expr::Leaf(t) => t.value(f),
            Expr::Node(op, l, r) => op.apply(l.eval(f), r.eval(f)),
        }
    }

    /// Preorder node lookup.
    fn get(&self, index: usize) -> &Expr {
        fn walk<'a>(e: &'a Expr, index: &mut usize) -> Option<&'a Expr> {
            if *index == 0 {
                return Some(e);
            }
            *index -= 1;
            match e {
                Expr::Leaf(_) => None,
                Expr::Node(_, l, r) => walk(l, index).or_else(|| walk(r, index)),
            }
        }
        let mut index = index;
        walk(self, &mut index).expect("node index within tree")
    }

    /// Copy of the tree with the preorder node `index` replaced.
    fn replace(&self, index: usize, new: &Expr) -> Expr {
        fn walk(e: &Expr, index: &mut usize, new: &Expr) -> Expr {
            if *index == 0 {
                *index = usize::MAX; // consumed
                return new.clone();
            }
            *index -= 1;
            match e {
                Expr::Leaf(t) => Expr::Leaf(*t),
                Expr::Node(op, l, r) => {
                    let left = walk(l, index, new);
                    let right = if *index == usize::MAX {
                        r.as_ref().clone()
                    } else {
                        walk(r, index, new)
                    };
                    Expr::Node(*op, Box::new(left), Box::new(right))
                }
            }
        }
        let mut index = index;
        walk(self, &mut index, new)
    }

    /// Depth (distance from the root) of the preorder node `index`.
    fn node_depth(&self, index: usize) -> usize {
        fn walk(e: &Expr, index: &mut usize, depth: usize) -> Option<usize> {
            if *index == 0 {
                return Some(depth);
            }
            *index -= 1;
            match e {
                Expr::Leaf(_) => None,
                Expr::Node(_, l, r) => {
                    walk(l, index, depth + 1).or_else(|| walk(r, index, depth + 1))
                }
            }
        }
        let mut index = index;
        walk(self, &mut index, 0).expect("node index within tree")
    }

    /// Preorder indices of internal nodes.
    fn internal_indices(&self) -> Vec<usize> {
        fn walk(e: &Expr, next: &mut usize, out: &mut Vec<usize>) {
            let index = *next;
            *next += 1;
            if let Expr::Node(_, l, r) = e {
                out.push(index);
                walk(l, next, out);
                walk(r, next, out);
            }
        }
        let mut out = Vec::new();
        walk(self, &mut 0, &mut out);
        out
    }

    fn leaves(&self) -> Vec<Terminal> {
        fn walk(e: &Expr, out: &mut Vec<Terminal>) {
            match e {
                Expr::Leaf(t) => out.push(*t),
                Expr::Node(_, l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    fn at_path<'a>(&'a self, path: &[bool]) -> Option<&'a Expr> {
        let mut node = self;
        for &right in path {
            match node {
                Expr::Leaf(_) => return None,
                Expr::Node(_, l, r) => node = if right { r } else { l },
            }
        }
        Some(node)
    }

    fn replace_path(&self, path: &[bool], new: &Expr) -> Expr {
        match path.split_first() {
            None => new.clone(),
            Some((&right, rest)) => match self {
                Expr::Leaf(_) => unreachable!("path validated against tree"),
                Expr::Node(op, l, r) => {
                    if right {
                        Expr::Node(*op, l.clone(), Box::new(r.replace_path(rest, new)))
                    } else {
                        Expr::Node(*op, Box::new(l.replace_path(rest, new)), r.clone())
                    }
                }
            },
        }
    }

    /// Paths of every node, preorder.
    fn all_paths(&self) -> Vec<Vec<bool>> {
        fn walk(e: &Expr, path: &mut Vec<bool>, out: &mut Vec<Vec<bool>>) {
            out.push(path.clone());
            if let Expr::Node(_, l, r) = e {
                path.push(false);
                walk(l, path, out);
                path.pop();
                path.push(true);
                walk(r, path, out);
                path.pop();
            }
        }
        let mut out = Vec::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    fn census(&self, counts: &mut BTreeMap<&'static str, usize>) {
        match self {
            Expr::Leaf(t) => *counts.entry(t.name()).or_insert(0) += 1,
            Expr::Node(op, l, r) => {
                *counts.entry(op.name()).or_insert(0) += 1;
                l.census(counts);
                r.census(counts);
            }
        }
    }

    fn write_sexpr(&self, out: &mut String) {
        match self {
            Expr::Leaf(t) => out.push_str(t.name()),
            Expr::Node(op, l, r) => {
                out.push('(');
                out.push_str(op.name());
                out.push(' ');
                l.write_sexpr(out);
                out.push(' ');
                r.write_sexpr(out);
                out.push(')');
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("unexpected token `{0}`")]
    UnexpectedToken(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("trailing input after expression")]
    TrailingInput,
    #[error("tree depth {0} exceeds the maximum of {MAX_DEPTH}")]
    TooDeep(usize),
}

/// A depth-bounded priority expression tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprTree {
    root: Expr,
}

impl ExprTree {
    fn from_root(root: Expr) -> Result<Self, TreeError> {
        let height = root.height();
        if height > MAX_DEPTH {
            return Err(TreeError::TooDeep(height));
        }
        Ok(ExprTree { root })
    }

    pub fn leaf(terminal: Terminal) -> Self {
        ExprTree {
            root: Expr::Leaf(terminal),
        }
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.root.size()
    }

    pub fn is_empty(&self) -> bool {
        false // a tree always has at least its root
    }

    /// Height of the root; a single leaf has depth 0.
    pub fn depth(&self) -> usize {
        self.root.height()
    }

    /// Bottom-up arithmetic evaluation over one feature vector.
    pub fn eval(&self, f: &StackFeatures) -> f64 {
        let v = self.root.eval(f);
        debug_assert!(v.is_finite(), "tree evaluation produced {v}");
        v
    }

    pub fn to_sexpr(&self) -> String {
        let mut out = String::new();
        self.root.write_sexpr(&mut out);
        out
    }

    pub fn parse(text: &str) -> Result<Self, TreeError> {
        let mut tokens = tokenize(text);
        let root = parse_expr(&mut tokens)?;
        if tokens.next().is_some() {
            return Err(TreeError::TrailingInput);
        }
        ExprTree::from_root(root)
    }

    /// Count every node label across a set of trees.
    pub fn node_census<'a>(
        trees: impl IntoIterator<Item = &'a ExprTree>,
    ) -> BTreeMap<&'static str, usize> {
        let mut counts = BTreeMap::new();
        for tree in trees {
            tree.root.census(&mut counts);
        }
        counts
    }
}

fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .map(str::to_owned)
        .collect::<Vec<_>>()
        .into_iter()
}

fn parse_expr(tokens: &mut impl Iterator<Item = String>) -> Result<Expr, TreeError> {
    match tokens.next() {
        None => Err(TreeError::Unbalanced),
        Some(tok) if tok == "(" => {
            let op_tok = tokens.next().ok_or(TreeError::Unbalanced)?;
            let op = Func::from_name(&op_tok).ok_or(TreeError::UnknownSymbol(op_tok))?;
            let left = parse_expr(tokens)?;
            let right = parse_expr(tokens)?;
            match tokens.next() {
                Some(tok) if tok == ")" => Ok(Expr::Node(op, Box::new(left), Box::new(right))),
                Some(tok) => Err(TreeError::UnexpectedToken(tok)),
                None => Err(TreeError::Unbalanced),
            }
        }
        Some(tok) if tok == ")" => Err(TreeError::UnexpectedToken(tok)),
        Some(tok) => {
            let t = Terminal::from_name(&tok).ok_or(TreeError::UnknownSymbol(tok))?;
            Ok(Expr::Leaf(t))
        }
    }
}

fn random_terminal(rng: &mut impl Rng) -> Terminal {
    Terminal::ALL[rng.random_range(0..Terminal::ALL.len())]
}

fn random_func(rng: &mut impl Rng) -> Func {
    Func::ALL[rng.random_range(0..Func::ALL.len())]
}

/// Full method: every branch reaches exactly `depth`.
fn full_expr(depth: usize, rng: &mut impl Rng) -> Expr {
    if depth == 0 {
        Expr::Leaf(random_terminal(rng))
    } else {
        Expr::Node(
            random_func(rng),
            Box::new(full_expr(depth - 1, rng)),
            Box::new(full_expr(depth - 1, rng)),
        )
    }
}

/// Grow method: labels drawn uniformly from the joint function/terminal
/// set until the depth budget forces terminals.
fn grow_expr(depth: usize, rng: &mut impl Rng) -> Expr {
    let label_count = Func::ALL.len() + Terminal::ALL.len();
    if depth == 0 || rng.random_range(0..label_count) >= Func::ALL.len() {
        Expr::Leaf(random_terminal(rng))
    } else {
        Expr::Node(
            random_func(rng),
            Box::new(grow_expr(depth - 1, rng)),
            Box::new(grow_expr(depth - 1, rng)),
        )
    }
}

/// Ramped half-and-half initialisation: a target depth is drawn uniformly
/// from 2..=`max_depth` (or as much of that range as the budget allows) and
/// the tree is built by the grow or full method with equal probability.
pub fn random_tree(max_depth: usize, rng: &mut impl Rng) -> ExprTree {
    let max_depth = max_depth.min(MAX_DEPTH);
    if max_depth == 0 {
        return ExprTree {
            root: Expr::Leaf(random_terminal(rng)),
        };
    }
    let min_depth = 2.min(max_depth);
    let depth = rng.random_range(min_depth..=max_depth);
    let root = if rng.random::<bool>() {
        full_expr(depth, rng)
    } else {
        grow_expr(depth, rng)
    };
    ExprTree { root }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossoverOp {
    Subtree,
    Uniform,
    ContextPreserving,
    SizeFair,
    OnePoint,
}

impl CrossoverOp {
    pub const ALL: [CrossoverOp; 5] = [
        CrossoverOp::Subtree,
        CrossoverOp::Uniform,
        CrossoverOp::ContextPreserving,
        CrossoverOp::SizeFair,
        CrossoverOp::OnePoint,
    ];
}

/// Node pairs sharing a path in both trees; `true` marks pairs interior to
/// the common region (both nodes internal).
fn common_region(a: &Expr, b: &Expr) -> Vec<(Vec<bool>, bool)> {
    fn walk(a: &Expr, b: &Expr, path: &mut Vec<bool>, out: &mut Vec<(Vec<bool>, bool)>) {
        match (a, b) {
            (Expr::Node(_, la, ra), Expr::Node(_, lb, rb)) => {
                out.push((path.clone(), true));
                path.push(false);
                walk(la, lb, path, out);
                path.pop();
                path.push(true);
                walk(ra, rb, path, out);
                path.pop();
            }
            _ => out.push((path.clone(), false)),
        }
    }
    let mut out = Vec::new();
    walk(a, b, &mut Vec::new(), &mut out);
    out
}

fn subtree_swap(a: &Expr, index_a: usize, b: &Expr, index_b: usize) -> Expr {
    a.replace(index_a, b.get(index_b))
}

/// Crossover-point choice for the subtree-swapping operators: function
/// nodes with 90% probability, leaves with 10%, the conventional split.
fn crossover_point(e: &Expr, rng: &mut impl Rng) -> usize {
    let internals = e.internal_indices();
    if !internals.is_empty() && rng.random::<f64>() < 0.9 {
        internals[rng.random_range(0..internals.len())]
    } else {
        let leaves: Vec<usize> = (0..e.size())
            .filter(|i| !internals.contains(i))
            .collect();
        leaves[rng.random_range(0..leaves.len())]
    }
}

fn uniform_cross(a: &Expr, b: &Expr, rng: &mut impl Rng) -> Expr {
    match (a, b) {
        (Expr::Node(fa, la, ra), Expr::Node(fb, lb, rb)) => {
            let op = if rng.random::<bool>() { *fa } else { *fb };
            Expr::Node(
                op,
                Box::new(uniform_cross(la, lb, rng)),
                Box::new(uniform_cross(ra, rb, rng)),
            )
        }
        // Boundary of the common region: take one subtree wholesale.
        _ => {
            if rng.random::<bool>() {
                a.clone()
            } else {
                b.clone()
            }
        }
    }
}

/// Apply one named crossover operator. `None` signals that the drawn points
/// produced a depth-violating child and the caller should retry.
fn crossover_once(
    op: CrossoverOp,
    a: &ExprTree,
    b: &ExprTree,
    rng: &mut impl Rng,
) -> Option<ExprTree> {
    let child = match op {
        CrossoverOp::Subtree => {
            let ia = crossover_point(&a.root, rng);
            let ib = crossover_point(&b.root, rng);
            subtree_swap(&a.root, ia, &b.root, ib)
        }
        CrossoverOp::Uniform => uniform_cross(&a.root, &b.root, rng),
        CrossoverOp::ContextPreserving => {
            let paths_a = a.root.all_paths();
            let shared: Vec<&Vec<bool>> = paths_a
                .iter()
                .filter(|p| b.root.at_path(p).is_some())
                .collect();
            let path = shared[rng.random_range(0..shared.len())];
            let donor = b.root.at_path(path).expect("path shared by both trees");
            a.root.replace_path(path, donor)
        }
        CrossoverOp::SizeFair => {
            let ia = crossover_point(&a.root, rng);
            let removed = a.root.get(ia).size();
            let candidates: Vec<usize> = (0..b.root.size())
                .filter(|&ib| b.root.get(ib).size() <= 2 * removed + 1)
                .collect();
            let ib = candidates[rng.random_range(0..candidates.len())];
            subtree_swap(&a.root, ia, &b.root, ib)
        }
        CrossoverOp::OnePoint => {
            let region = common_region(&a.root, &b.root);
            let (path, _) = &region[rng.random_range(0..region.len())];
            let donor = b.root.at_path(path).expect("common-region path");
            a.root.replace_path(path, donor)
        }
    };
    ExprTree::from_root(child).ok()
}

/// Crossover: one of the five operators chosen uniformly; point selection
/// is retried a bounded number of times if the child would exceed the depth
/// cap, after which the child is a copy of parent `a`.
pub fn crossover(a: &ExprTree, b: &ExprTree, rng: &mut impl Rng) -> ExprTree {
    let op = CrossoverOp::ALL[rng.random_range(0..CrossoverOp::ALL.len())];
    for _ in 0..CROSSOVER_RETRIES {
        if let Some(child) = crossover_once(op, a, b, rng) {
            return child;
        }
    }
    a.clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationOp {
    Subtree,
    Hoist,
    NodeComplement,
    NodeReplacement,
    Permutation,
    Shrink,
}

impl MutationOp {
    pub const ALL: [MutationOp; 6] = [
        MutationOp::Subtree,
        MutationOp::Hoist,
        MutationOp::NodeComplement,
        MutationOp::NodeReplacement,
        MutationOp::Permutation,
        MutationOp::Shrink,
    ];
}

fn mutate_with(op: MutationOp, t: &ExprTree, rng: &mut impl Rng) -> ExprTree {
    match op {
        MutationOp::Subtree => {
            let index = rng.random_range(0..t.root.size());
            let budget = MAX_DEPTH - t.root.node_depth(index);
            let replacement = random_tree(budget, rng);
            ExprTree::from_root(t.root.replace(index, &replacement.root))
                .expect("replacement fits the depth budget")
        }
        MutationOp::Hoist => {
            let index = rng.random_range(0..t.root.size());
            ExprTree {
                root: t.root.get(index).clone(),
            }
        }
        MutationOp::NodeComplement => {
            let internals = t.root.internal_indices();
            if internals.is_empty() {
                return t.clone();
            }
            let index = internals[rng.random_range(0..internals.len())];
            match t.root.get(index) {
                Expr::Node(op, l, r) => ExprTree {
                    root: t.root.replace(
                        index,
                        &Expr::Node(op.complement(), l.clone(), r.clone()),
                    ),
                },
                Expr::Leaf(_) => unreachable!("internal index"),
            }
        }
        MutationOp::NodeReplacement => {
            let index = rng.random_range(0..t.root.size());
            let new = match t.root.get(index) {
                Expr::Leaf(old) => {
                    let others: Vec<Terminal> = Terminal::ALL
                        .into_iter()
                        .filter(|t| t != old)
                        .collect();
                    Expr::Leaf(others[rng.random_range(0..others.len())])
                }
                Expr::Node(old, l, r) => {
                    let others: Vec<Func> =
                        Func::ALL.into_iter().filter(|f| f != old).collect();
                    Expr::Node(
                        others[rng.random_range(0..others.len())],
                        l.clone(),
                        r.clone(),
                    )
                }
            };
            ExprTree {
                root: t.root.replace(index, &new),
            }
        }
        MutationOp::Permutation => {
            let internals = t.root.internal_indices();
            if internals.is_empty() {
                return t.clone();
            }
            let index = internals[rng.random_range(0..internals.len())];
            match t.root.get(index) {
                Expr::Node(op, l, r) => ExprTree {
                    root: t
                        .root
                        .replace(index, &Expr::Node(*op, r.clone(), l.clone())),
                },
                Expr::Leaf(_) => unreachable!("internal index"),
            }
        }
        MutationOp::Shrink => {
            let index = rng.random_range(0..t.root.size());
            let leaves = t.root.get(index).leaves();
            let leaf = leaves[rng.random_range(0..leaves.len())];
            ExprTree {
                root: t.root.replace(index, &Expr::Leaf(leaf)),
            }
        }
    }
}

/// Mutation: one of the six operators chosen uniformly. Every operator
/// preserves the depth cap by construction.
pub fn mutate(t: &ExprTree, rng: &mut impl Rng) -> ExprTree {
    let op = MutationOp::ALL[rng.random_range(0..MutationOp::ALL.len())];
    mutate_with(op, t, rng)
}
